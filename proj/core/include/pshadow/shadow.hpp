#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pshadow/interval_engine.hpp"

namespace pshadow {

using Percentile = std::optional<double>;

struct RankTrajectory {
  NodeId node = 0;
  std::vector<Percentile> ranks;  // t = 0 .. T

  bool operator==(const RankTrajectory&) const = default;
};

enum class EtaProvenance { kPop, kAttr, kRand, kManual };
enum class EtaStat { kMean, kMedian };

std::string_view provenance_name(EtaProvenance p);

struct EtaThreshold {
  // Baseline statistic the percentile was derived from; NaN when manual.
  double score_value = 0.0;
  double percentile = 0.0;
  EtaProvenance provenance = EtaProvenance::kManual;
};

struct ShadowRecord {
  NodeId node = 0;
  // In [0, T + 1]; T + 1 encodes an infinite shadow.
  int shadow_length = 0;
  // Delta-0 percentile; NaN when that entry is null.
  double initial_percentile = 0.0;
};

// Midrank percentile: 100 * (#{v < x} + #{v == x} / 2) / |ref|.
double rank(const ReferenceDistribution& ref, double x);

RankTrajectory rank_trajectory(const NodeTrajectory& traj,
                               const ReferenceDistribution& ref);

struct BaselineDistributions {
  std::vector<double> pop;
  std::vector<double> attr;
  std::vector<double> rand;
};

/// eta = max over baselines of stat(distribution), expressed as a
/// percentile of `ref`. Empty baselines are skipped and reported through
/// `warnings`; all empty is a DataError.
EtaThreshold resolve_eta(const BaselineDistributions& baselines,
                         const ReferenceDistribution& ref, EtaStat stat,
                         std::vector<std::string>* warnings = nullptr);

EtaThreshold manual_eta(double percentile);

/// Smallest t such that every non-null rank at t2 >= t is <= eta; T + 1
/// when the last non-null rank exceeds eta. nullopt for all-null input.
std::optional<ShadowRecord> privacy_shadow(const RankTrajectory& rt, double eta);

struct ProfileBin {
  int shadow_length = 0;
  std::size_t count = 0;
  double fraction = 0.0;
  // Median delta-0 percentile of the bin's members.
  std::optional<double> median_percentile;
};

// Histogram over shadow lengths; bins without members are omitted.
std::vector<ProfileBin> shadow_profile(std::span<const ShadowRecord> records);

struct LagBucket {
  int bucket = 0;
  double mean_change = 0.0;
  std::size_t count = 0;
};

/// For every (node, t) with non-null ranks at t and t + delta, buckets the
/// observation by floor(rank(t)) and averages rank(t + delta) - rank(t).
std::vector<LagBucket> lag_diff_curve(std::span<const RankTrajectory> ranks,
                                      int delta);

struct ShadowConfig {
  int s = 10;
  // Manual eta percentile; unset resolves from the baselines.
  std::optional<double> eta_percentile;
  EtaStat eta_stat = EtaStat::kMean;
  int t_ref = 0;
  int lag_delta = 1;

  void validate() const;
  bool operator==(const ShadowConfig&) const = default;
};

/// Cohort-level analysis of a measured interval store: the s-complete
/// cohort, its reference distribution at t_ref, eta, rank trajectories and
/// shadow records.
struct ShadowAnalysis {
  int last_step = 0;
  std::vector<NodeId> cohort;
  ReferenceDistribution reference;
  EtaThreshold eta;
  BaselineDistributions baselines;
  std::vector<NodeTrajectory> trajectories;
  std::vector<RankTrajectory> ranks;
  std::vector<ShadowRecord> records;
  std::size_t excluded = 0;
  std::vector<std::string> warnings;
};

ShadowAnalysis analyze_shadows(const IntervalStore& store,
                               const ShadowConfig& cfg);

}  // namespace pshadow
