#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace pshadow {

using NodeId = std::uint32_t;
using AttrId = std::uint32_t;
using LabelId = std::uint32_t;

/// Bijective interning of string identifiers to dense indices [0, size).
class Dictionary {
 public:
  Dictionary() = default;
  // Builds a dictionary whose ids follow the given name order.
  explicit Dictionary(std::vector<std::string> names);

  std::uint32_t intern(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  // Throws DataError for unknown names.
  std::uint32_t at(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

  bool operator==(const Dictionary& other) const {
    return names_ == other.names_;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Nonnegative sparse vector over attribute ids. Entries are sorted by id,
/// ids are unique and every stored weight is strictly positive.
class SparseVector {
 public:
  struct Entry {
    AttrId id;
    double weight;
    bool operator==(const Entry&) const = default;
  };

  SparseVector() = default;

  // Sorts, merges duplicate ids by summation and drops non-positive weights.
  static SparseVector from_unsorted(std::vector<Entry> entries);
  // Caller guarantees the invariants; checked, throws InvariantError.
  static SparseVector from_sorted(std::vector<Entry> entries);

  std::span<const Entry> entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  double weight(AttrId id) const;
  double total() const;
  double norm() const;

  // Elementwise sum.
  SparseVector& operator+=(const SparseVector& other);
  friend SparseVector operator+(SparseVector lhs, const SparseVector& rhs) {
    lhs += rhs;
    return lhs;
  }
  SparseVector scaled(double factor) const;

  bool operator==(const SparseVector&) const = default;

 private:
  std::vector<Entry> entries_;
};

double dot(const SparseVector& a, const SparseVector& b);

/// Directed adjacency lists: lists[i] holds i's sorted, deduplicated
/// out-neighbors.
struct Adjacency {
  std::vector<std::vector<NodeId>> lists;

  Adjacency() = default;
  explicit Adjacency(std::size_t n) : lists(n) {}

  std::size_t size() const { return lists.size(); }
  std::span<const NodeId> neighbors(NodeId i) const { return lists.at(i); }
  std::size_t edge_count() const;
  // Order-sensitive 64-bit fingerprint of the whole adjacency.
  std::uint64_t fingerprint() const;

  bool operator==(const Adjacency&) const = default;
};

// Per-node attribute table; attrs[i] empty means node i is inactive.
using AttributeTable = std::vector<SparseVector>;

struct Snapshot {
  int t = 0;
  AttributeTable attrs;
  Adjacency edges;

  bool operator==(const Snapshot&) const = default;
};

class TemporalGraph {
 public:
  TemporalGraph() = default;
  TemporalGraph(Dictionary nodes, Dictionary attributes,
                std::vector<Snapshot> snapshots);

  const Dictionary& nodes() const { return nodes_; }
  const Dictionary& attributes() const { return attributes_; }
  const std::vector<Snapshot>& snapshots() const { return snapshots_; }
  const Snapshot& snapshot(int t) const;

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_attributes() const { return attributes_.size(); }
  std::size_t num_steps() const { return snapshots_.size(); }
  // Index of the last timestep.
  int last_step() const { return static_cast<int>(snapshots_.size()) - 1; }

  bool operator==(const TemporalGraph& other) const = default;

 private:
  Dictionary nodes_;
  Dictionary attributes_;
  std::vector<Snapshot> snapshots_;
};

using LabelSet = std::vector<LabelId>;

/// Attribute-to-label mapping. In identity mode every attribute is its own
/// label and the label dictionary is the attribute dictionary.
class LabelMap {
 public:
  static LabelMap identity(const Dictionary& attributes, int threshold = 0);
  static LabelMap mapped(Dictionary labels,
                         std::vector<std::vector<LabelId>> attr_to_labels,
                         int threshold);

  bool is_identity() const { return identity_; }
  int threshold() const { return threshold_; }
  void set_threshold(int threshold);
  const Dictionary& labels() const { return labels_; }
  std::size_t num_labels() const { return labels_.size(); }
  std::span<const LabelId> labels_of(AttrId attr) const;
  const std::vector<std::vector<LabelId>>& attr_to_labels() const {
    return attr_to_labels_;
  }

  bool operator==(const LabelMap&) const = default;

 private:
  bool identity_ = true;
  int threshold_ = 0;
  Dictionary labels_;
  std::vector<std::vector<LabelId>> attr_to_labels_;
};

using LabelSupport = std::vector<std::pair<LabelId, double>>;

// Per-node elementwise sum over timesteps [t_start, t_start + w).
AttributeTable aggregate_window(const TemporalGraph& tg, int t_start, int w);

LabelSet derive_labels(const SparseVector& attrs, const LabelMap& lm);

// Summed attribute weight per label, sorted by label id, zero support absent.
LabelSupport label_support(const SparseVector& attrs, const LabelMap& lm);

}  // namespace pshadow
