#include "pshadow/prediction_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "pshadow/errors.hpp"

namespace pshadow {

namespace {

// Floyd's algorithm: m distinct values from [0, n), sorted.
std::vector<std::uint64_t> sample_indices(std::uint64_t n, std::uint64_t m,
                                          RngStream& rng) {
  m = std::min(m, n);
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(m * 2);
  for (std::uint64_t j = n - m; j < n; ++j) {
    const std::uint64_t r = rng.below(j + 1);
    if (!chosen.insert(r).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> out(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

// Running mean; a constant input sequence yields that constant exactly.
struct RunningMean {
  double mean = 0.0;
  long count = 0;
  void add(double x) {
    ++count;
    mean += (x - mean) / static_cast<double>(count);
  }
  Score value() const { return count == 0 ? Score{} : Score{mean}; }
};

}  // namespace

void ModelConfig::validate() const {
  if (!(bootstrap_p > 0.0 && bootstrap_p <= 1.0)) {
    throw ConfigError("model.bootstrap_p must be in (0, 1]");
  }
  if (n_realizations < 1) throw ConfigError("model.n_realizations must be >= 1");
  if (pop_k < 1) throw ConfigError("model.pop_k must be >= 1");
}

double jaccard(std::span<const LabelId> pred, std::span<const LabelId> truth) {
  if (pred.empty() && truth.empty()) {
    throw std::domain_error("jaccard of two empty label sets is undefined");
  }
  std::size_t inter = 0;
  std::size_t i = 0, j = 0;
  while (i < pred.size() && j < truth.size()) {
    if (pred[i] < truth[j]) {
      ++i;
    } else if (truth[j] < pred[i]) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  const std::size_t uni = pred.size() + truth.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

LabelSet top_labels(const LabelSupport& support, std::size_t n) {
  LabelSupport ranked = support;
  const std::size_t take = std::min(n, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<long>(take),
                    ranked.end(), [](const auto& a, const auto& b) {
                      if (a.second != b.second) return a.second > b.second;
                      return a.first < b.first;
                    });
  LabelSet out;
  out.reserve(take);
  for (std::size_t k = 0; k < take; ++k) out.push_back(ranked[k].first);
  std::sort(out.begin(), out.end());
  return out;
}

double label_score(const SparseVector& attrs, const LabelSet& truth,
                   const LabelMap& lm) {
  const LabelSet pred = top_labels(label_support(attrs, lm), truth.size());
  return jaccard(pred, truth);
}

Score neighborhood_score(std::span<const NodeId> neighbors,
                         std::span<const SparseVector> attrs_at_eval,
                         const LabelSet& truth, const LabelMap& lm,
                         const ModelConfig& cfg, const EvalKey& key,
                         StreamPurpose purpose) {
  if (truth.empty()) return std::nullopt;
  RunningMean score;
  for (int r = 0; r < cfg.n_realizations; ++r) {
    RngStream rng(cfg.seed, purpose,
                  {key.node, static_cast<std::uint64_t>(key.t_start),
                   static_cast<std::uint64_t>(key.delta),
                   static_cast<std::uint64_t>(r)});
    // Ranking is scale invariant, so the neighborhood sum ranks labels
    // exactly as the neighborhood mean does.
    SparseVector sum;
    int active = 0;
    for (NodeId j : neighbors) {
      if (j == key.node) continue;
      if (!rng.bernoulli(cfg.bootstrap_p)) continue;
      const SparseVector& v = attrs_at_eval[j];
      if (v.empty()) continue;
      sum += v;
      ++active;
    }
    if (active == 0) continue;
    score.add(label_score(sum, truth, lm));
  }
  return score.value();
}

Score predict_score(const Adjacency& adjacency,
                    std::span<const SparseVector> attrs_at_eval,
                    const LabelSet& truth, const LabelMap& lm,
                    const ModelConfig& cfg, const EvalKey& key) {
  if (key.node >= adjacency.size()) {
    throw std::out_of_range("node outside adjacency");
  }
  const auto nbrs = adjacency.neighbors(key.node);
  if (nbrs.empty()) return std::nullopt;
  return neighborhood_score(nbrs, attrs_at_eval, truth, lm, cfg, key);
}

Score pop_baseline(std::size_t num_nodes,
                   std::span<const SparseVector> attrs_at_eval,
                   const LabelSet& truth, const LabelMap& lm,
                   const ModelConfig& cfg, const EvalKey& key) {
  if (num_nodes <= 1 || truth.empty()) return std::nullopt;
  RngStream rng(cfg.seed, StreamPurpose::kPopulation,
                {key.node, static_cast<std::uint64_t>(key.t_start),
                 static_cast<std::uint64_t>(key.delta), ~0ULL});
  const auto picks = sample_indices(num_nodes - 1,
                                    static_cast<std::uint64_t>(cfg.pop_k), rng);
  std::vector<NodeId> sample;
  sample.reserve(picks.size());
  for (std::uint64_t p : picks) {
    sample.push_back(static_cast<NodeId>(p >= key.node ? p + 1 : p));
  }
  return neighborhood_score(sample, attrs_at_eval, truth, lm, cfg, key,
                            StreamPurpose::kPopulation);
}

AttributePool::AttributePool(std::span<const SparseVector> attrs_at_eval) {
  std::vector<std::size_t> densities;
  std::vector<double> totals;
  for (const auto& v : attrs_at_eval) {
    if (v.empty()) continue;
    densities.push_back(v.size());
    for (const auto& e : v.entries()) {
      if (e.id >= totals.size()) totals.resize(e.id + 1, 0.0);
      totals[e.id] += e.weight;
    }
  }
  active_ = densities.size();
  if (active_ == 0) return;
  std::sort(densities.begin(), densities.end());
  median_ = densities[(densities.size() - 1) / 2];
  for (std::size_t a = 0; a < totals.size(); ++a) {
    if (totals[a] > 0.0) {
      ids_.push_back(static_cast<AttrId>(a));
      weights_.push_back(totals[a]);
    }
  }
}

std::vector<AttrId> AttributePool::sample(std::size_t m, RngStream& rng) const {
  m = std::min(m, ids_.size());
  // Exponential-key form of successive weighted sampling without
  // replacement: keep the m largest log(u) / w.
  std::vector<std::pair<double, AttrId>> keys(ids_.size());
  for (std::size_t k = 0; k < ids_.size(); ++k) {
    const double u = 1.0 - rng.uniform();
    keys[k] = {std::log(u) / weights_[k], ids_[k]};
  }
  std::partial_sort(keys.begin(), keys.begin() + static_cast<long>(m), keys.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  std::vector<AttrId> out;
  out.reserve(m);
  for (std::size_t k = 0; k < m; ++k) out.push_back(keys[k].second);
  std::sort(out.begin(), out.end());
  return out;
}

Score attr_baseline(const AttributePool& pool, const LabelSet& truth,
                    const LabelMap& lm, const ModelConfig& cfg,
                    const EvalKey& key) {
  if (pool.empty() || truth.empty()) return std::nullopt;
  RngStream rng(cfg.seed, StreamPurpose::kAttribute,
                {key.node, static_cast<std::uint64_t>(key.t_start),
                 static_cast<std::uint64_t>(key.delta)});
  const auto picked = pool.sample(pool.median_density(), rng);
  std::vector<SparseVector::Entry> entries;
  entries.reserve(picked.size());
  for (AttrId a : picked) entries.push_back({a, 1.0});
  return label_score(SparseVector::from_sorted(std::move(entries)), truth, lm);
}

Score rand_baseline(std::size_t num_labels, const LabelSet& truth,
                    const ModelConfig& cfg, const EvalKey& key) {
  if (truth.empty() || num_labels == 0) return std::nullopt;
  RngStream rng(cfg.seed, StreamPurpose::kRandomLabels,
                {key.node, static_cast<std::uint64_t>(key.t_start),
                 static_cast<std::uint64_t>(key.delta)});
  const auto picks = sample_indices(num_labels, truth.size(), rng);
  LabelSet pred(picks.begin(), picks.end());
  return jaccard(pred, truth);
}

}  // namespace pshadow
