#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pshadow/ingestion.hpp"
#include "pshadow/interval_engine.hpp"
#include "pshadow/shadow.hpp"
#include "pshadow/shadow_predictor.hpp"
#include "pshadow/synth.hpp"

namespace pshadow {

struct InputPaths {
  std::string events;
  std::string edges;
  std::string labelmap;

  bool operator==(const InputPaths&) const = default;
};

struct PredictorConfig {
  RegressorSpec regressor;
  // Observation lengths; empty means every x in [1, T].
  std::vector<int> xs;
  int resamples = 30;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const PredictorConfig&) const = default;
};

/// Every pipeline parameter. Loaded from a JSON config file; unknown keys
/// and out-of-range values are ConfigErrors.
struct PipelineConfig {
  InputPaths inputs;
  BinningConfig binning;
  int label_threshold = 5;
  MeasureConfig measure;
  ShadowConfig shadow;
  PredictorConfig predictor;
  // When set, `run` generates its inputs with the synthetic generator.
  std::optional<SynthConfig> synth;
  std::string output_dir = "out";
  unsigned threads = 0;

  void validate() const;
  bool operator==(const PipelineConfig&) const = default;
};

PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const std::filesystem::path& path);
SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json synth_config_to_json(const SynthConfig& cfg);

// Pipeline config matching a synthetic generator run written to `dir`.
PipelineConfig config_for_synth(const SynthConfig& synth,
                                const std::filesystem::path& dir);

/// Writes through `path + ".partial"` and renames on success, so a file at
/// `path` is always complete.
template <typename WriteFn>
void write_atomically(const std::filesystem::path& path, WriteFn&& write);

struct IngestResult {
  GraphBundle bundle;
  std::size_t skipped_attribute_events = 0;
  std::size_t skipped_edge_events = 0;
};

IngestResult ingest(const InputPaths& inputs, const BinningConfig& binning,
                    int label_threshold);

// Shadow stage outputs.
void write_shadow_csv(std::ostream& out, const ShadowAnalysis& a,
                      const std::vector<std::string>& node_names);
void write_profile_csv(std::ostream& out, std::span<const ProfileBin> bins);
void write_lag_csv(std::ostream& out, std::span<const LagBucket> buckets);
void write_mae_csv(std::ostream& out, std::span<const MaeRow> rows);
// Per-node expected score per delta for the cohort, network and baselines.
void write_deltas_csv(std::ostream& out, const IntervalStore& store,
                      const ShadowAnalysis& a);

std::vector<ShadowRecord> read_shadow_csv(const std::filesystem::path& path,
                                          const std::vector<std::string>& node_names);

std::vector<int> resolve_xs(const PredictorConfig& cfg, int last_step);

// Samples for the predictor: cohort rank trajectories joined with records.
std::vector<MaeRow> run_prediction(const ShadowAnalysis& a,
                                   std::span<const ShadowRecord> records,
                                   const PredictorConfig& cfg,
                                   const std::filesystem::path& work_dir,
                                   unsigned threads);

nlohmann::json summary_json(const ShadowAnalysis& a, const ShadowConfig& cfg);

struct RunOptions {
  bool resume = false;
  unsigned threads = 0;
};

/// [synth ->] ingest -> induce -> measure -> shadow -> profile -> lagdiff ->
/// predict -> report, all under cfg.output_dir. With resume, stages whose
/// artifact exists are loaded instead of recomputed.
nlohmann::json run_pipeline(const PipelineConfig& cfg, const RunOptions& opts);

/// Writes deltas.csv and summary.json next to the stage artifacts in `dir`
/// and checks that profile.csv, lag.csv and mae.csv exist.
nlohmann::json emit_report(const std::filesystem::path& dir,
                           const PipelineConfig& cfg);

// Effective config plus seeds, written with every CLI run.
void write_manifest(const std::filesystem::path& path, const PipelineConfig& cfg,
                    const std::string& command, unsigned threads);

}  // namespace pshadow

#include "pshadow/detail/pipeline_inl.hpp"
