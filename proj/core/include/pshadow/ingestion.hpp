#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pshadow/temporal_graph.hpp"

namespace pshadow {

struct AttributeEvent {
  double time = 0.0;
  std::string node;
  std::string attr;
  double weight = 1.0;
};

struct EdgeEvent {
  double time = 0.0;
  std::string src;
  std::string dst;
};

enum class OutOfRangePolicy { kSkip, kFail };

struct BinningConfig {
  // Either n_intervals (with an optional explicit time range) or bin_edges.
  std::optional<int> n_intervals;
  std::vector<double> bin_edges;
  std::optional<double> t_min;
  std::optional<double> t_max;
  OutOfRangePolicy out_of_range = OutOfRangePolicy::kSkip;
  // Per-bin neighbor cap applied with co-occurrence tallies; 0 disables.
  int degree_cap = 0;
  // Edge events add both directions unless set.
  bool directed_edges = false;

  void validate() const;
  bool operator==(const BinningConfig&) const = default;
};

// Seconds since the Unix epoch from a number or an ISO-8601 date/time
// ("2010-05-01", "2010-05-01T12:30:00Z", "2010-05-01 12:30:00").
double parse_timestamp(std::string_view text);

// JSON Lines readers. Gzip input is detected automatically. Malformed lines
// raise DataError naming the file and line number.
std::vector<AttributeEvent> read_attribute_events(
    const std::filesystem::path& path);
std::vector<EdgeEvent> read_edge_events(const std::filesystem::path& path);
std::vector<AttributeEvent> parse_attribute_events(std::istream& in,
                                                   std::string_view source);
std::vector<EdgeEvent> parse_edge_events(std::istream& in,
                                         std::string_view source);

struct BinningResult {
  TemporalGraph graph;
  std::size_t skipped_attribute_events = 0;
  std::size_t skipped_edge_events = 0;
};

/// Bins the time range [t_min, t_max] into equal-width intervals (or the
/// explicit edges) and builds one snapshot per bin. Node and attribute
/// dictionaries are sorted by name, so the result does not depend on event
/// order.
BinningResult bin_events(const std::vector<AttributeEvent>& attr_events,
                         const std::vector<EdgeEvent>& edge_events,
                         const BinningConfig& cfg);

// Bin index for time x under cfg's resolved range; nullopt when outside.
std::optional<int> bin_index(double x, double t_min, double t_max,
                             int n_intervals);

// Per-node tallies aligned with an adjacency: tallies[i][k] scores
// snapshot.edges.lists[i][k].
using NeighborTally = std::vector<std::vector<double>>;

/// Keeps at most `cap` neighbors per node: highest tally first, ties by
/// ascending NodeId.
Snapshot cap_degree(Snapshot snapshot, int cap, const NeighborTally& tally);

struct LabelMapEntry {
  std::string attr;
  std::vector<std::string> labels;
};

std::vector<LabelMapEntry> read_labelmap_entries(
    const std::filesystem::path& path);

/// Builds a LabelMap over the graph's attribute dictionary. Labels are
/// interned in sorted order. Entries for attributes never observed are
/// ignored, but their labels stay in the dictionary.
LabelMap build_labelmap(const std::vector<LabelMapEntry>& entries,
                        const Dictionary& attributes, int threshold);

// graph.bin container ("PSHD1"): dictionaries, label map, then per-snapshot
// delta-encoded sparse rows and adjacency lists.
void write_graph(std::ostream& out, const TemporalGraph& tg,
                 const LabelMap& lm);
void write_graph(const std::filesystem::path& path, const TemporalGraph& tg,
                 const LabelMap& lm);

struct GraphBundle {
  TemporalGraph graph;
  LabelMap labels;
};

GraphBundle read_graph(std::istream& in);
GraphBundle read_graph(const std::filesystem::path& path);

// Reads a whole file, gunzipping when the gzip magic is present.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace pshadow
