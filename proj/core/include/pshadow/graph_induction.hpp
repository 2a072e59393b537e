#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>

#include "pshadow/temporal_graph.hpp"

namespace pshadow {

enum class InductionMode { kKnn, kExplicitUnion };

struct InductionConfig {
  InductionMode mode = InductionMode::kKnn;
  int k = 20;
  int window = 1;

  void validate() const;
  bool operator==(const InductionConfig&) const = default;
};

// Cosine similarity of nonnegative vectors; 0 when either is empty.
double cosine(const SparseVector& a, const SparseVector& b);

/// Exact directed k-NN by cosine similarity. Only the listed candidate
/// nodes take part; each candidate i receives the k candidates j != i with
/// highest cos(vectors[i], vectors[j]), ties broken by ascending NodeId.
/// Non-candidates get empty lists. The result does not depend on
/// `threads`.
Adjacency induce_knn(std::span<const SparseVector> vectors,
                     std::span<const NodeId> candidates, int k,
                     unsigned threads = 1);

// Candidates are the nodes with nonempty vectors.
Adjacency induce_knn(std::span<const SparseVector> vectors, int k,
                     unsigned threads = 1);

// Union of snapshot edges over [t_start, t_start + w).
Adjacency union_edges(const TemporalGraph& tg, int t_start, int w);

/// Frozen training graph for the window ending at t_end:
/// [t_end - window + 1, t_end].
Adjacency induce_graph(const TemporalGraph& tg, const InductionConfig& cfg,
                       int t_end, unsigned threads = 1);

// adj.bin container ("PSHA1").
void write_adjacency(std::ostream& out, const Adjacency& adj);
void write_adjacency(const std::filesystem::path& path, const Adjacency& adj);
Adjacency read_adjacency(std::istream& in);
Adjacency read_adjacency(const std::filesystem::path& path);

}  // namespace pshadow
