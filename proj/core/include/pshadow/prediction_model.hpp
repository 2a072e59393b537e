#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "pshadow/rng.hpp"
#include "pshadow/temporal_graph.hpp"

namespace pshadow {

// A re-inference score in [0, 1]; nullopt when no prediction is possible.
using Score = std::optional<double>;

struct ModelConfig {
  double bootstrap_p = 0.5;
  int n_realizations = 10;
  int pop_k = 20;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Identifies one evaluation: target node, interval start and shift. Each
/// random draw is keyed on it, so results are independent of evaluation
/// order.
struct EvalKey {
  NodeId node = 0;
  int t_start = 0;
  int delta = 0;
};

// |pred ∩ truth| / |pred ∪ truth|. Throws std::domain_error when both empty.
double jaccard(std::span<const LabelId> pred, std::span<const LabelId> truth);

/// The top-n labels by (support desc, label id asc), returned sorted by id.
LabelSet top_labels(const LabelSupport& support, std::size_t n);

// Jaccard of the top-|truth| labels of `attrs` against truth.
double label_score(const SparseVector& attrs, const LabelSet& truth,
                   const LabelMap& lm);

/// Bootstrap neighborhood model over an explicit neighbor list. Node
/// `key.node` is dropped from the list if present; its own attributes are
/// never read.
Score neighborhood_score(std::span<const NodeId> neighbors,
                         std::span<const SparseVector> attrs_at_eval,
                         const LabelSet& truth, const LabelMap& lm,
                         const ModelConfig& cfg, const EvalKey& key,
                         StreamPurpose purpose = StreamPurpose::kBootstrap);

/// Re-infers node key.node's labels from the attributes its frozen
/// out-neighbors hold at evaluation time.
Score predict_score(const Adjacency& adjacency,
                    std::span<const SparseVector> attrs_at_eval,
                    const LabelSet& truth, const LabelMap& lm,
                    const ModelConfig& cfg, const EvalKey& key);

// Population sampling: pop_k nodes drawn uniformly from V \ {i}.
Score pop_baseline(std::size_t num_nodes,
                   std::span<const SparseVector> attrs_at_eval,
                   const LabelSet& truth, const LabelMap& lm,
                   const ModelConfig& cfg, const EvalKey& key);

/// Empirical attribute pool of the active nodes at one evaluation step.
class AttributePool {
 public:
  explicit AttributePool(std::span<const SparseVector> attrs_at_eval);

  bool empty() const { return active_ == 0; }
  std::size_t active_nodes() const { return active_; }
  // Lower median of the distinct-attribute counts of active nodes.
  std::size_t median_density() const { return median_; }
  std::span<const AttrId> attributes() const { return ids_; }
  std::span<const double> weights() const { return weights_; }

  /// m distinct attributes drawn without replacement, each successive draw
  /// proportional to total weight among the remaining attributes.
  std::vector<AttrId> sample(std::size_t m, RngStream& rng) const;

 private:
  std::size_t active_ = 0;
  std::size_t median_ = 0;
  std::vector<AttrId> ids_;
  std::vector<double> weights_;
};

// Attribute sampling of a median-density synthetic node.
Score attr_baseline(const AttributePool& pool, const LabelSet& truth,
                    const LabelMap& lm, const ModelConfig& cfg,
                    const EvalKey& key);

// Uniform label sampling: |truth| distinct labels from the dictionary.
Score rand_baseline(std::size_t num_labels, const LabelSet& truth,
                    const ModelConfig& cfg, const EvalKey& key);

}  // namespace pshadow
