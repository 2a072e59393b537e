#include "pshadow/shadow_predictor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pshadow/errors.hpp"
#include "pshadow/format.hpp"
#include "pshadow/parallel.hpp"
#include "pshadow/rng.hpp"

namespace pshadow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double median_of(std::vector<double> v) {
  if (v.empty()) throw DataError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double median_target(std::span<const Sample> train) {
  std::vector<double> t;
  t.reserve(train.size());
  for (const auto& s : train) t.push_back(s.target);
  return median_of(std::move(t));
}

struct AffineFit {
  double a = 0.0;
  double c = 0.0;
  double sse = kInf;
};

// Least squares y ~ a * x + c. Constant x collapses to a = 0.
AffineFit fit_affine(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  AffineFit f;
  if (sxx > 0.0 && std::isfinite(sxx) && std::isfinite(sxy)) {
    f.a = sxy / sxx;
    f.c = my - f.a * mx;
  } else {
    f.a = 0.0;
    f.c = my;
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.a * x[i] + f.c);
    sse += r * r;
  }
  f.sse = std::isfinite(sse) ? sse : kInf;
  if (!std::isfinite(f.a) || !std::isfinite(f.c)) f.sse = kInf;
  return f;
}

// Grid scan over [lo, hi] then golden-section refinement inside the best
// grid cell. Returns the argmin.
template <typename Objective>
double minimize_1d(Objective&& f, double lo, double hi, double tol) {
  constexpr int kGrid = 200;
  double best_x = lo;
  double best_v = kInf;
  const double step = (hi - lo) / kGrid;
  for (int g = 0; g <= kGrid; ++g) {
    const double x = lo + step * g;
    const double v = f(x);
    if (v < best_v) best_v = v, best_x = x;
  }
  double a = std::max(lo, best_x - step);
  double b = std::min(hi, best_x + step);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  const double mid = 0.5 * (a + b);
  return f(mid) <= best_v ? mid : best_x;
}

void check_distinct_t(std::span<const double> t) {
  for (double v : t) {
    if (v != t.front()) return;
  }
  throw std::domain_error("curve fit needs at least two distinct t values");
}

}  // namespace

TrajectoryFeature make_feature(const RankTrajectory& rt) {
  return {rt.ranks, static_cast<int>(rt.ranks.size()) - 1};
}

TrajectoryFeature truncate(const TrajectoryFeature& f, int x) {
  const int last = static_cast<int>(f.ranks.size()) - 1;
  if (x < 0 || x > last) {
    throw std::out_of_range("truncation length " + std::to_string(x) +
                            " outside [0, " + std::to_string(last) + "]");
  }
  TrajectoryFeature out = f;
  for (std::size_t t = static_cast<std::size_t>(x) + 1; t < out.ranks.size(); ++t) {
    out.ranks[t].reset();
  }
  out.observed_len = std::min(f.observed_len, x);
  return out;
}

double masked_distance(const TrajectoryFeature& a, const TrajectoryFeature& b) {
  const std::size_t n = std::min(a.ranks.size(), b.ranks.size());
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (!a.ranks[t] || !b.ranks[t]) continue;
    const double d = *a.ranks[t] - *b.ranks[t];
    sum += d * d;
    ++count;
  }
  return count == 0 ? kInf : sum / static_cast<double>(count);
}

std::vector<Sample> make_samples(std::span<const RankTrajectory> ranks,
                                 std::span<const ShadowRecord> records) {
  std::map<NodeId, int> targets;
  for (const auto& r : records) targets[r.node] = r.shadow_length;
  std::vector<Sample> out;
  for (const auto& rt : ranks) {
    auto it = targets.find(rt.node);
    if (it == targets.end()) continue;
    out.push_back({rt.node, make_feature(rt), it->second});
  }
  return out;
}

Split make_dataset(std::span<const Sample> samples, std::uint64_t seed,
                   double train_fraction) {
  if (samples.size() < 2) throw DataError("need at least 2 nodes to split");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must be in (0, 1)");
  }
  const std::size_t n = samples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(seed, StreamPurpose::kSplit);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng.below(i + 1)]);
  }
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n))), 1,
      n - 1);
  Split split;
  for (std::size_t k = 0; k < n; ++k) {
    (k < n_train ? split.train : split.test).push_back(samples[order[k]]);
  }
  auto by_node = [](const Sample& a, const Sample& b) { return a.node < b.node; };
  std::sort(split.train.begin(), split.train.end(), by_node);
  std::sort(split.test.begin(), split.test.end(), by_node);
  return split;
}

double knn_regress(std::span<const Sample> train, const TrajectoryFeature& query,
                   int k) {
  if (train.empty()) throw DataError("knn regression needs training samples");
  if (k < 1) throw ConfigError("knn k must be >= 1");
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const double d = masked_distance(train[i].feature, query);
    if (std::isfinite(d)) dist.emplace_back(d, i);
  }
  if (dist.empty()) return median_target(train);
  std::sort(dist.begin(), dist.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return train[a.second].node < train[b.second].node;
  });
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), dist.size());
  std::vector<double> targets;
  for (std::size_t r = 0; r < take; ++r) targets.push_back(train[dist[r].second].target);
  return median_of(std::move(targets));
}

std::string_view family_name(CurveFamily f) {
  switch (f) {
    case CurveFamily::kPower: return "power";
    case CurveFamily::kExponential: return "exponential";
    case CurveFamily::kLinear: return "linear";
  }
  return "?";
}

double evaluate_curve(const FitParams& fp, double t) {
  switch (fp.family) {
    case CurveFamily::kLinear:
      return fp.a * t + fp.c;
    case CurveFamily::kExponential:
      return fp.a * std::exp(fp.lambda * t) + fp.c;
    case CurveFamily::kPower:
      // Undefined at t = 0 for non-positive exponents; hold the t = 1 value.
      if (t <= 0.0 && fp.lambda <= 0.0) t = 1.0;
      return fp.a * std::pow(t, fp.lambda) + fp.c;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

FitParams curve_fit(CurveFamily family,
                    std::span<const std::pair<double, double>> points,
                    const FitOptions& opts) {
  std::vector<double> t, y;
  for (const auto& [pt, py] : points) {
    if (family == CurveFamily::kPower && pt <= 0.0) continue;
    t.push_back(pt);
    y.push_back(py);
  }
  const std::size_t need = family == CurveFamily::kLinear ? 2 : 3;
  if (t.size() < need) {
    throw std::domain_error(std::string(family_name(family)) + " fit needs at least " +
                            std::to_string(need) + " points");
  }
  check_distinct_t(t);

  FitParams fp;
  fp.family = family;
  double sse = kInf;
  std::vector<double> basis(t.size());
  switch (family) {
    case CurveFamily::kLinear: {
      const AffineFit f = fit_affine(t, y);
      fp.a = f.a;
      fp.c = f.c;
      sse = f.sse;
      break;
    }
    case CurveFamily::kPower: {
      auto objective = [&](double lambda) {
        for (std::size_t i = 0; i < t.size(); ++i) basis[i] = std::pow(t[i], lambda);
        return fit_affine(basis, y).sse;
      };
      fp.lambda = minimize_1d(objective, opts.lambda_min, opts.lambda_max, opts.tolerance);
      for (std::size_t i = 0; i < t.size(); ++i) basis[i] = std::pow(t[i], fp.lambda);
      const AffineFit f = fit_affine(basis, y);
      fp.a = f.a;
      fp.c = f.c;
      sse = f.sse;
      break;
    }
    case CurveFamily::kExponential: {
      auto solve = [&](double lambda) {
        for (std::size_t i = 0; i < t.size(); ++i) basis[i] = std::exp(lambda * t[i]);
        if (opts.exponential_amplitude) return fit_affine(basis, y);
        AffineFit f;
        f.a = 1.0;
        double c = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) c += y[i] - basis[i];
        f.c = c / static_cast<double>(t.size());
        double s = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
          const double r = y[i] - (basis[i] + f.c);
          s += r * r;
        }
        f.sse = std::isfinite(s) ? s : kInf;
        return f;
      };
      fp.lambda = minimize_1d([&](double l) { return solve(l).sse; }, opts.lambda_min,
                              opts.lambda_max, opts.tolerance);
      const AffineFit f = solve(fp.lambda);
      fp.a = f.a;
      fp.c = f.c;
      sse = f.sse;
      break;
    }
  }
  if (!std::isfinite(sse) || !std::isfinite(fp.a) || !std::isfinite(fp.c) ||
      !std::isfinite(fp.lambda)) {
    throw std::domain_error(std::string(family_name(family)) +
                            " fit produced a non-finite result");
  }
  fp.rmse = std::sqrt(sse / static_cast<double>(t.size()));
  return fp;
}

std::optional<FitParams> best_fit(const TrajectoryFeature& f,
                                  const FitOptions& opts) {
  std::vector<std::pair<double, double>> pts;
  for (std::size_t t = 0; t < f.ranks.size(); ++t) {
    if (f.ranks[t]) pts.emplace_back(static_cast<double>(t), *f.ranks[t]);
  }
  std::optional<FitParams> best;
  for (CurveFamily fam :
       {CurveFamily::kPower, CurveFamily::kExponential, CurveFamily::kLinear}) {
    try {
      const FitParams fp = curve_fit(fam, pts, opts);
      if (!best || fp.rmse < best->rmse) best = fp;
    } catch (const std::domain_error&) {
    }
  }
  return best;
}

int extrapolate_shadow(const FitParams& fp, double eta, int last_step) {
  int last_violation = -1;
  for (int t = 0; t <= last_step; ++t) {
    const double v = evaluate_curve(fp, t);
    if (!(v <= eta)) last_violation = t;
  }
  return last_violation + 1;
}

double fit_transfer_predict(std::span<const Sample> train,
                            std::span<const std::optional<FitParams>> params,
                            const TrajectoryFeature& query, double eta,
                            int last_step) {
  if (train.size() != params.size()) {
    throw InvariantError("fit parameters misaligned with training samples");
  }
  if (train.empty()) throw DataError("fit transfer needs training samples");
  double best_d = kInf;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (!params[i]) continue;
    const int x = std::min(query.observed_len,
                           static_cast<int>(train[i].feature.ranks.size()) - 1);
    const double d = masked_distance(truncate(train[i].feature, x), query);
    if (!std::isfinite(d)) continue;
    if (!best || d < best_d || (d == best_d && train[i].node < train[*best].node)) {
      best = i;
      best_d = d;
    }
  }
  if (!best) return median_target(train);
  return extrapolate_shadow(*params[*best], eta, last_step);
}

void ConstantMedianRegressor::fit(std::span<const Sample> train) {
  median_ = median_target(train);
}

std::vector<double> ConstantMedianRegressor::predict(
    std::span<const TrajectoryFeature> queries) const {
  return std::vector<double>(queries.size(), median_);
}

void KnnTrajectoryRegressor::fit(std::span<const Sample> train) {
  if (train.empty()) throw DataError("knn regression needs training samples");
  train_.assign(train.begin(), train.end());
}

std::vector<double> KnnTrajectoryRegressor::predict(
    std::span<const TrajectoryFeature> queries) const {
  std::vector<double> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(knn_regress(train_, q, k_));
  return out;
}

void CurveFitRegressor::fit(std::span<const Sample> train) {
  if (train.empty()) throw DataError("curve-fit regression needs training samples");
  train_.assign(train.begin(), train.end());
  params_.clear();
  for (const auto& s : train_) params_.push_back(best_fit(s.feature, opts_));
}

std::vector<double> CurveFitRegressor::predict(
    std::span<const TrajectoryFeature> queries) const {
  std::vector<double> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    out.push_back(fit_transfer_predict(train_, params_, q, eta_, last_step_));
  }
  return out;
}

namespace {

void write_ranks(std::ostream& out, const TrajectoryFeature& f) {
  for (const auto& r : f.ranks) out << ',' << format_optional(r);
}

std::string rank_header(std::size_t n) {
  std::string h;
  for (std::size_t t = 0; t < n; ++t) h += ",r" + std::to_string(t);
  return h;
}

}  // namespace

void ExternalRegressor::fit(std::span<const Sample> train) {
  if (train.empty()) throw DataError("external regression needs training samples");
  train_.assign(train.begin(), train.end());
}

std::vector<double> ExternalRegressor::predict(
    std::span<const TrajectoryFeature> queries) const {
  namespace fs = std::filesystem;
  fs::create_directories(work_dir_);
  const fs::path train_csv = work_dir_ / "train.csv";
  const fs::path test_csv = work_dir_ / "test.csv";
  const fs::path pred_csv = work_dir_ / "predictions.csv";
  const std::size_t width = train_.front().feature.ranks.size();
  {
    std::ofstream out(train_csv);
    out << "node,target" << rank_header(width) << '\n';
    for (const auto& s : train_) {
      out << s.node << ',' << s.target;
      write_ranks(out, s.feature);
      out << '\n';
    }
    std::ofstream test(test_csv);
    test << "id" << rank_header(width) << '\n';
    for (std::size_t i = 0; i < queries.size(); ++i) {
      test << i;
      write_ranks(test, queries[i]);
      test << '\n';
    }
  }
  fs::remove(pred_csv);
  const std::string cmd = command_ + " '" + train_csv.string() + "' '" +
                          test_csv.string() + "' '" + pred_csv.string() + "'";
  if (std::system(cmd.c_str()) != 0) {
    throw DataError("external regressor failed: " + command_);
  }
  std::ifstream in(pred_csv);
  if (!in) throw DataError("external regressor wrote no predictions");
  std::vector<std::optional<double>> preds(queries.size());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id, value;
    std::getline(row, id, ',');
    std::getline(row, value, ',');
    try {
      const auto i = static_cast<std::size_t>(std::stoull(id));
      if (i >= preds.size()) throw DataError("prediction id out of range");
      preds[i] = std::stod(value);
    } catch (const std::logic_error&) {
      throw DataError("malformed prediction row: " + line);
    }
  }
  std::vector<double> out;
  for (const auto& p : preds) {
    if (!p) throw DataError("external regressor skipped a query");
    out.push_back(*p);
  }
  return out;
}

void RegressorSpec::validate() const {
  if (kind != "constant-median" && kind != "knn" && kind != "curvefit" &&
      kind != "external") {
    throw ConfigError("unknown regressor '" + kind + "'");
  }
  if (kind == "knn" && k < 1) throw ConfigError("predictor.knn_k must be >= 1");
  if (kind == "external" && command.empty()) {
    throw ConfigError("external regressor needs a command");
  }
}

RegressorSpec parse_regressor(const std::string& text) {
  RegressorSpec spec;
  if (text.rfind("external:", 0) == 0) {
    spec.kind = "external";
    spec.command = text.substr(9);
  } else {
    spec.kind = text;
  }
  spec.validate();
  return spec;
}

RegressorFactory make_regressor_factory(const RegressorSpec& spec, double eta,
                                        int last_step,
                                        const std::filesystem::path& work_dir) {
  spec.validate();
  return [spec, eta, last_step, work_dir](int resample) -> std::unique_ptr<Regressor> {
    if (spec.kind == "constant-median") return std::make_unique<ConstantMedianRegressor>();
    if (spec.kind == "knn") return std::make_unique<KnnTrajectoryRegressor>(spec.k);
    if (spec.kind == "curvefit") {
      return std::make_unique<CurveFitRegressor>(eta, last_step, spec.fit);
    }
    return std::make_unique<ExternalRegressor>(
        spec.command, work_dir / ("resample_" + std::to_string(resample)));
  };
}

std::vector<MaeRow> evaluate_mae(const RegressorFactory& factory,
                                 std::span<const Sample> samples,
                                 std::span<const int> xs, int n_resamples,
                                 std::uint64_t seed, double train_fraction,
                                 unsigned threads) {
  if (n_resamples < 1) throw ConfigError("resamples must be >= 1");
  if (samples.empty()) throw DataError("no samples to evaluate");
  const int last = static_cast<int>(samples.front().feature.ranks.size()) - 1;
  for (int x : xs) {
    if (x < 0 || x > last) {
      throw ConfigError("observation length " + std::to_string(x) + " outside [0, " +
                        std::to_string(last) + "]");
    }
  }
  // mae[r][xi]
  std::vector<std::vector<double>> mae(static_cast<std::size_t>(n_resamples),
                                       std::vector<double>(xs.size()));
  parallel_for(static_cast<std::size_t>(n_resamples), threads, [&](std::size_t r) {
    RngStream seeder(seed, StreamPurpose::kSplit, {r});
    const Split split = make_dataset(samples, seeder(), train_fraction);
    auto model = factory(static_cast<int>(r));
    model->fit(split.train);
    for (std::size_t xi = 0; xi < xs.size(); ++xi) {
      std::vector<TrajectoryFeature> queries;
      queries.reserve(split.test.size());
      for (const auto& s : split.test) queries.push_back(truncate(s.feature, xs[xi]));
      const auto preds = model->predict(queries);
      double sum = 0.0;
      for (std::size_t i = 0; i < preds.size(); ++i) {
        sum += std::abs(preds[i] - split.test[i].target);
      }
      mae[r][xi] = sum / static_cast<double>(preds.size());
    }
  });

  std::vector<MaeRow> rows;
  for (std::size_t xi = 0; xi < xs.size(); ++xi) {
    MaeRow row;
    row.x = xs[xi];
    for (const auto& m : mae) row.per_resample.push_back(m[xi]);
    const auto n = static_cast<double>(row.per_resample.size());
    row.mean_mae = std::accumulate(row.per_resample.begin(), row.per_resample.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : row.per_resample) ss += (v - row.mean_mae) * (v - row.mean_mae);
    row.std_mae = row.per_resample.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace pshadow
