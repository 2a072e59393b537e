#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pshadow/shadow.hpp"

namespace pshadow {

/// Rank trajectory as model input. Entries after observed_len are null.
struct TrajectoryFeature {
  std::vector<Percentile> ranks;
  int observed_len = 0;

  bool operator==(const TrajectoryFeature&) const = default;
};

TrajectoryFeature make_feature(const RankTrajectory& rt);

// Masks every entry at t > x. Requires 0 <= x <= T.
TrajectoryFeature truncate(const TrajectoryFeature& f, int x);

// Mean squared difference over positions non-null in both; +inf if none.
double masked_distance(const TrajectoryFeature& a, const TrajectoryFeature& b);

struct Sample {
  NodeId node = 0;
  TrajectoryFeature feature;
  int target = 0;  // shadow length, T + 1 for infinite
};

// Joins rank trajectories with shadow records by node.
std::vector<Sample> make_samples(std::span<const RankTrajectory> ranks,
                                 std::span<const ShadowRecord> records);

struct Split {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

/// Node-level random split; each side sorted by node. Needs >= 2 samples.
Split make_dataset(std::span<const Sample> samples, std::uint64_t seed,
                   double train_fraction = 0.8);

// Median of the targets of the k nearest training trajectories.
double knn_regress(std::span<const Sample> train, const TrajectoryFeature& query,
                   int k);

enum class CurveFamily { kPower, kExponential, kLinear };
std::string_view family_name(CurveFamily f);

/// power:       a * t^lambda + c
/// exponential: a * e^(lambda t) + c   (a fixed at 1 unless amplitude fit)
/// linear:      a * t + c
struct FitParams {
  CurveFamily family = CurveFamily::kLinear;
  double a = 0.0;
  double lambda = 0.0;
  double c = 0.0;
  double rmse = 0.0;
};

struct FitOptions {
  bool exponential_amplitude = false;
  double lambda_min = -5.0;
  double lambda_max = 5.0;
  double tolerance = 1e-6;
};

double evaluate_curve(const FitParams& fp, double t);

/// Least-squares fit of one family to (t, y) points. Power fits drop t <= 0.
/// Throws std::domain_error on too few points, constant t or a non-finite
/// result.
FitParams curve_fit(CurveFamily family,
                    std::span<const std::pair<double, double>> points,
                    const FitOptions& opts = {});

// Lowest-RMSE family over the feature's non-null points; nullopt if none fit.
std::optional<FitParams> best_fit(const TrajectoryFeature& f,
                                  const FitOptions& opts = {});

// Shadow rule applied to the curve sampled at t = 0 .. T.
int extrapolate_shadow(const FitParams& fp, double eta, int last_step);

/// 1-NN parameter transfer: the training trajectory nearest to the query
/// (compared on the query's observed prefix) lends its fit, which is then
/// extrapolated. Training samples without a fit are skipped.
double fit_transfer_predict(std::span<const Sample> train,
                            std::span<const std::optional<FitParams>> params,
                            const TrajectoryFeature& query, double eta,
                            int last_step);

class Regressor {
 public:
  virtual ~Regressor() = default;
  virtual void fit(std::span<const Sample> train) = 0;
  virtual std::vector<double> predict(
      std::span<const TrajectoryFeature> queries) const = 0;
};

class ConstantMedianRegressor : public Regressor {
 public:
  void fit(std::span<const Sample> train) override;
  std::vector<double> predict(
      std::span<const TrajectoryFeature> queries) const override;

 private:
  double median_ = 0.0;
};

class KnnTrajectoryRegressor : public Regressor {
 public:
  explicit KnnTrajectoryRegressor(int k) : k_(k) {}
  void fit(std::span<const Sample> train) override;
  std::vector<double> predict(
      std::span<const TrajectoryFeature> queries) const override;

 private:
  int k_;
  std::vector<Sample> train_;
};

class CurveFitRegressor : public Regressor {
 public:
  CurveFitRegressor(double eta, int last_step, FitOptions opts = {})
      : eta_(eta), last_step_(last_step), opts_(opts) {}
  void fit(std::span<const Sample> train) override;
  std::vector<double> predict(
      std::span<const TrajectoryFeature> queries) const override;
  const std::vector<std::optional<FitParams>>& params() const { return params_; }

 private:
  double eta_;
  int last_step_;
  FitOptions opts_;
  std::vector<Sample> train_;
  std::vector<std::optional<FitParams>> params_;
};

/// Delegates to an external program:
///   CMD train.csv test.csv predictions.csv
/// train.csv: node,target,r0..rT   test.csv: id,r0..rT
/// predictions.csv: id,prediction   (null ranks are empty fields)
class ExternalRegressor : public Regressor {
 public:
  ExternalRegressor(std::string command, std::filesystem::path work_dir)
      : command_(std::move(command)), work_dir_(std::move(work_dir)) {}
  void fit(std::span<const Sample> train) override;
  std::vector<double> predict(
      std::span<const TrajectoryFeature> queries) const override;

 private:
  std::string command_;
  std::filesystem::path work_dir_;
  std::vector<Sample> train_;
};

struct RegressorSpec {
  // constant-median | knn | curvefit | external
  std::string kind = "knn";
  int k = 5;
  std::string command;
  FitOptions fit;

  void validate() const;
  bool operator==(const RegressorSpec& o) const {
    return kind == o.kind && k == o.k && command == o.command &&
           fit.exponential_amplitude == o.fit.exponential_amplitude;
  }
};

// Parses "constant-median", "knn", "curvefit" or "external:CMD".
RegressorSpec parse_regressor(const std::string& text);

using RegressorFactory = std::function<std::unique_ptr<Regressor>(int resample)>;

RegressorFactory make_regressor_factory(const RegressorSpec& spec, double eta,
                                        int last_step,
                                        const std::filesystem::path& work_dir);

struct MaeRow {
  int x = 0;
  double mean_mae = 0.0;
  double std_mae = 0.0;
  std::vector<double> per_resample;
};

/// For each resample: split, fit on full training trajectories, then for
/// every x truncate the test features to x and score the MAE against the
/// true shadow lengths.
std::vector<MaeRow> evaluate_mae(const RegressorFactory& factory,
                                 std::span<const Sample> samples,
                                 std::span<const int> xs, int n_resamples,
                                 std::uint64_t seed, double train_fraction = 0.8,
                                 unsigned threads = 1);

}  // namespace pshadow
