#include "pshadow/shadow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "pshadow/errors.hpp"

namespace pshadow {

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::string_view provenance_name(EtaProvenance p) {
  switch (p) {
    case EtaProvenance::kPop: return "pop";
    case EtaProvenance::kAttr: return "attr";
    case EtaProvenance::kRand: return "rand";
    case EtaProvenance::kManual: return "manual";
  }
  return "?";
}

double rank(const ReferenceDistribution& ref, double x) {
  if (ref.empty()) throw DataError("rank against an empty reference distribution");
  const auto lo = std::lower_bound(ref.values.begin(), ref.values.end(), x);
  const auto hi = std::upper_bound(lo, ref.values.end(), x);
  const auto below = static_cast<double>(lo - ref.values.begin());
  const auto ties = static_cast<double>(hi - lo);
  return 100.0 * (below + 0.5 * ties) / static_cast<double>(ref.size());
}

RankTrajectory rank_trajectory(const NodeTrajectory& traj,
                               const ReferenceDistribution& ref) {
  RankTrajectory rt;
  rt.node = traj.node;
  rt.ranks.reserve(traj.expected.size());
  for (const auto& e : traj.expected) {
    rt.ranks.push_back(e ? Percentile{rank(ref, *e)} : Percentile{});
  }
  return rt;
}

EtaThreshold resolve_eta(const BaselineDistributions& baselines,
                         const ReferenceDistribution& ref, EtaStat stat,
                         std::vector<std::string>* warnings) {
  const std::pair<EtaProvenance, const std::vector<double>*> sources[] = {
      {EtaProvenance::kPop, &baselines.pop},
      {EtaProvenance::kAttr, &baselines.attr},
      {EtaProvenance::kRand, &baselines.rand},
  };
  std::optional<EtaThreshold> best;
  for (const auto& [prov, dist] : sources) {
    if (dist->empty()) {
      if (warnings) {
        warnings->push_back("baseline " + std::string(provenance_name(prov)) +
                            " has no scores; excluded from eta");
      }
      continue;
    }
    const double v = stat == EtaStat::kMean ? mean_of(*dist) : median_of(*dist);
    if (!best || v > best->score_value) best = EtaThreshold{v, 0.0, prov};
  }
  if (!best) throw DataError("every baseline distribution is empty; cannot resolve eta");
  best->percentile = rank(ref, best->score_value);
  return *best;
}

EtaThreshold manual_eta(double percentile) {
  if (!(percentile >= 0.0 && percentile <= 100.0)) {
    throw ConfigError("eta percentile must be in [0, 100]");
  }
  return {std::numeric_limits<double>::quiet_NaN(), percentile, EtaProvenance::kManual};
}

std::optional<ShadowRecord> privacy_shadow(const RankTrajectory& rt, double eta) {
  // The shadow starts right after the last non-null rank above eta.
  bool any = false;
  int last_violation = -1;
  for (std::size_t t = 0; t < rt.ranks.size(); ++t) {
    if (!rt.ranks[t]) continue;
    any = true;
    if (*rt.ranks[t] > eta) last_violation = static_cast<int>(t);
  }
  if (!any) return std::nullopt;
  ShadowRecord rec;
  rec.node = rt.node;
  rec.shadow_length = last_violation + 1;
  rec.initial_percentile = rt.ranks.front().value_or(std::numeric_limits<double>::quiet_NaN());
  return rec;
}

std::vector<ProfileBin> shadow_profile(std::span<const ShadowRecord> records) {
  if (records.empty()) throw DataError("shadow profile of an empty cohort");
  std::map<int, std::vector<double>> bins;
  std::map<int, std::size_t> counts;
  for (const auto& r : records) {
    ++counts[r.shadow_length];
    auto& b = bins[r.shadow_length];
    if (!std::isnan(r.initial_percentile)) b.push_back(r.initial_percentile);
  }
  std::vector<ProfileBin> out;
  const auto total = static_cast<double>(records.size());
  for (const auto& [len, count] : counts) {
    ProfileBin bin;
    bin.shadow_length = len;
    bin.count = count;
    bin.fraction = static_cast<double>(count) / total;
    if (!bins[len].empty()) bin.median_percentile = median_of(bins[len]);
    out.push_back(bin);
  }
  return out;
}

std::vector<LagBucket> lag_diff_curve(std::span<const RankTrajectory> ranks,
                                      int delta) {
  if (delta < 1) throw std::invalid_argument("lag delta must be >= 1");
  std::map<int, std::pair<double, std::size_t>> acc;
  const auto d = static_cast<std::size_t>(delta);
  for (const auto& rt : ranks) {
    for (std::size_t t = 0; t + d < rt.ranks.size(); ++t) {
      if (!rt.ranks[t] || !rt.ranks[t + d]) continue;
      const int bucket = static_cast<int>(std::floor(*rt.ranks[t]));
      auto& [sum, count] = acc[bucket];
      sum += *rt.ranks[t + d] - *rt.ranks[t];
      ++count;
    }
  }
  std::vector<LagBucket> out;
  for (const auto& [bucket, sc] : acc) {
    out.push_back({bucket, sc.first / static_cast<double>(sc.second), sc.second});
  }
  return out;
}

void ShadowConfig::validate() const {
  if (s < 0) throw ConfigError("shadow.s must be >= 0");
  if (eta_percentile && !(*eta_percentile >= 0.0 && *eta_percentile <= 100.0)) {
    throw ConfigError("shadow.eta percentile must be in [0, 100]");
  }
  if (t_ref < 0) throw ConfigError("shadow.t_ref must be >= 0");
  if (lag_delta < 1) throw ConfigError("shadow.lag_delta must be >= 1");
}

ShadowAnalysis analyze_shadows(const IntervalStore& store,
                               const ShadowConfig& cfg) {
  cfg.validate();
  if (cfg.t_ref > store.last_step) {
    throw ConfigError("shadow.t_ref exceeds the last timestep");
  }
  ShadowAnalysis a;
  a.last_step = store.last_step;
  a.cohort = s_complete_cohort(store, cfg.s);
  if (a.cohort.empty()) {
    throw DataError("the s=" + std::to_string(cfg.s) + " complete cohort is empty");
  }
  auto in_cohort = [&](NodeId n) {
    return std::binary_search(a.cohort.begin(), a.cohort.end(), n);
  };
  for (auto& tr : compute_trajectories(store, Series::kNetwork)) {
    if (in_cohort(tr.node)) a.trajectories.push_back(std::move(tr));
  }
  a.reference = reference_distribution(a.trajectories, a.cohort, cfg.t_ref);
  if (a.reference.empty()) throw DataError("reference distribution is empty");

  if (cfg.eta_percentile) {
    a.eta = manual_eta(*cfg.eta_percentile);
  } else {
    if (!store.has_baselines) {
      throw DataError("automatic eta needs baseline scores; re-measure with baselines");
    }
    auto collect = [&](Series s) {
      std::vector<NodeTrajectory> trs;
      for (auto& tr : compute_trajectories(store, s)) {
        if (in_cohort(tr.node)) trs.push_back(std::move(tr));
      }
      return reference_distribution(trs, a.cohort, 0).values;
    };
    a.baselines = {collect(Series::kPop), collect(Series::kAttr), collect(Series::kRand)};
    a.eta = resolve_eta(a.baselines, a.reference, cfg.eta_stat, &a.warnings);
  }

  for (const auto& tr : a.trajectories) {
    a.ranks.push_back(rank_trajectory(tr, a.reference));
    if (auto rec = privacy_shadow(a.ranks.back(), a.eta.percentile)) {
      a.records.push_back(*rec);
    } else {
      ++a.excluded;
    }
  }
  return a;
}

}  // namespace pshadow
