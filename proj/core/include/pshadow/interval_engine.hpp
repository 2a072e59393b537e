#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pshadow/graph_induction.hpp"
#include "pshadow/prediction_model.hpp"
#include "pshadow/temporal_graph.hpp"

namespace pshadow {

// Score series kept per interval: the network model and the three
// zero-information baselines.
enum class Series : int { kNetwork = 0, kPop = 1, kAttr = 2, kRand = 3 };
inline constexpr int kSeriesCount = 4;
inline constexpr std::array<Series, kSeriesCount> kAllSeries = {
    Series::kNetwork, Series::kPop, Series::kAttr, Series::kRand};
std::string_view series_name(Series s);

/// Scores of node `node` using the graph frozen at `t_start`, one entry per
/// shift delta = 0 .. T - t_start.
struct PredictionInterval {
  NodeId node = 0;
  int t_start = 0;
  std::vector<Score> scores;

  bool operator==(const PredictionInterval&) const = default;
};

struct MeasureConfig {
  InductionConfig induction;
  ModelConfig model;
  // Also score the pop/attr/rand baselines for every (node, t_start, delta).
  bool baselines = true;

  void validate() const;
  bool operator==(const MeasureConfig&) const = default;
};

/// All intervals of a measurement run. Every series holds the same
/// (node, t_start) keys in the same order, sorted by node then t_start.
struct IntervalStore {
  int last_step = 0;
  std::vector<std::string> node_names;
  bool has_baselines = false;
  std::array<std::vector<PredictionInterval>, kSeriesCount> series;

  const std::vector<PredictionInterval>& of(Series s) const {
    return series[static_cast<int>(s)];
  }
  // Intervals of one node in one series (contiguous range).
  std::span<const PredictionInterval> intervals_of(NodeId node, Series s) const;
  // Nodes with at least one interval, ascending.
  std::vector<NodeId> measured_nodes() const;

  bool operator==(const IntervalStore&) const = default;
};

/// Single network-model interval. The frozen graph is induced on the window
/// [t_start - w + 1, t_start]; delta 0 evaluates against that aggregated
/// window, delta >= 1 against snapshot t_start + delta.
PredictionInterval build_interval(const TemporalGraph& tg,
                                  const InductionConfig& induction,
                                  const ModelConfig& model, const LabelMap& lm,
                                  NodeId node, int t_start);

/// Measures every interval start t_start in [w - 1, T] for every node
/// observed (attributes or out-edges) in that start's training window.
/// Output is identical for any thread count.
IntervalStore measure(const TemporalGraph& tg, const LabelMap& lm,
                      const MeasureConfig& cfg, unsigned threads = 1);

struct NodeTrajectory {
  NodeId node = 0;
  std::vector<Score> expected;  // delta = 0 .. T
  std::vector<int> counts;

  bool operator==(const NodeTrajectory&) const = default;
};

/// Aligns intervals at their start and averages the non-null scores at
/// each delta.
NodeTrajectory expect_trajectory(std::span<const PredictionInterval> intervals,
                                 int last_step);

// One trajectory per measured node, ascending by node.
std::vector<NodeTrajectory> compute_trajectories(const IntervalStore& store,
                                                 Series s);

struct ReferenceDistribution {
  int delta = 0;
  std::vector<double> values;  // ascending

  bool empty() const { return values.empty(); }
  std::size_t size() const { return values.size(); }
};

/// Expected scores at `delta` of the nodes in `members` (ascending node
/// ids), nulls skipped.
ReferenceDistribution reference_distribution(
    std::span<const NodeTrajectory> trajectories,
    std::span<const NodeId> members, int delta);

// Nodes with at least one network interval non-null at every delta in [0, s].
std::vector<NodeId> s_complete_cohort(const IntervalStore& store, int s);

// intervals.bin: columnar rows (node, t_start, delta, per-series score and
// null flag).
void write_interval_store(std::ostream& out, const IntervalStore& store);
void write_interval_store(const std::filesystem::path& path,
                          const IntervalStore& store);
IntervalStore read_interval_store(std::istream& in);
IntervalStore read_interval_store(const std::filesystem::path& path);

// CSV export of the network series: node,t_start,delta,score (null empty).
void write_interval_csv(std::ostream& out, const IntervalStore& store);

}  // namespace pshadow
