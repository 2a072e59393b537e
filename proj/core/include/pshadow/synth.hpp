#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pshadow/ingestion.hpp"

namespace pshadow {

enum class SynthRegime { kStatic, kDrift, kReshuffle };

struct SynthConfig {
  int n_nodes = 300;
  int n_attrs = 200;
  int n_labels = 20;
  int n_steps = 20;
  int n_communities = 10;
  SynthRegime regime = SynthRegime::kStatic;
  double rho = 0.0;  // drift rate
  int attrs_per_step = 30;
  double dirichlet_alpha = 0.1;
  double background = 0.05;
  std::uint64_t seed = 7;

  void validate() const;
  bool operator==(const SynthConfig&) const = default;
};

/// Generated event streams plus the ground truth behind them.
struct SynthData {
  std::vector<AttributeEvent> events;
  std::vector<LabelMapEntry> labelmap;
  // community[t][i]
  std::vector<std::vector<int>> community;
  // preference[t][c][a]
  std::vector<std::vector<std::vector<double>>> preference;
};

/// Communities own contiguous attribute blocks with Dirichlet(alpha)
/// preferences plus a uniform background. Each node holds attrs_per_step
/// attribute slots drawn from its community's preference and emits one
/// weight-1 event per slot per step at time t + 0.5.
///   static:    slots never change
///   drift:     preferences mix toward uniform by rho each step and each slot
///              is redrawn with probability rho
///   reshuffle: every step each node joins a uniformly random community and
///              redraws all slots
/// Attributes map onto n_labels contiguous label blocks.
SynthData generate(const SynthConfig& cfg);

// Binning that places step t of a generated stream in bin t.
BinningConfig synth_binning(const SynthConfig& cfg);

std::string synth_node_name(const SynthConfig& cfg, int node);
std::string synth_attr_name(const SynthConfig& cfg, int attr);

// Writes events.jsonl and labelmap.jsonl into dir.
void write_synth_files(const SynthData& data, const std::filesystem::path& dir);

}  // namespace pshadow
