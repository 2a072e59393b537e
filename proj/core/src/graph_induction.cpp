#include "pshadow/graph_induction.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"
#include "pshadow/errors.hpp"
#include "pshadow/parallel.hpp"

namespace pshadow {

namespace {

constexpr std::string_view kAdjacencyMagic = "PSHA1";

struct Scored {
  double sim;
  NodeId id;
};

bool better(const Scored& a, const Scored& b) {
  if (a.sim != b.sim) return a.sim > b.sim;
  return a.id < b.id;
}

}  // namespace

void InductionConfig::validate() const {
  if (k < 1) throw ConfigError("induction.k must be >= 1");
  if (window < 1) throw ConfigError("induction.window must be >= 1");
}

double cosine(const SparseVector& a, const SparseVector& b) {
  if (a.empty() || b.empty()) return 0.0;
  return dot(a, b) / (a.norm() * b.norm());
}

Adjacency induce_knn(std::span<const SparseVector> vectors,
                     std::span<const NodeId> candidates, int k,
                     unsigned threads) {
  if (k < 1) throw ConfigError("k must be >= 1");
  const std::size_t n = vectors.size();
  std::vector<NodeId> members(candidates.begin(), candidates.end());
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  if (!members.empty() && members.back() >= n) {
    throw std::out_of_range("k-NN candidate outside vector table");
  }

  std::vector<double> norms(n, 0.0);
  for (NodeId j : members) norms[j] = vectors[j].norm();

  // Inverted index over candidate vectors. Postings are visited in
  // ascending attribute order per query, so each accumulated dot product
  // sums the same terms in the same order as a sorted merge.
  AttrId max_attr = 0;
  for (NodeId j : members) {
    if (!vectors[j].empty()) max_attr = std::max(max_attr, vectors[j].entries().back().id);
  }
  std::vector<std::vector<std::pair<NodeId, double>>> postings(
      members.empty() ? 0 : static_cast<std::size_t>(max_attr) + 1);
  for (NodeId j : members) {
    for (const auto& e : vectors[j].entries()) postings[e.id].emplace_back(j, e.weight);
  }

  Adjacency adj(n);
  const auto want = static_cast<std::size_t>(k);
  parallel_for(members.size(), threads, [&](std::size_t qi) {
    const NodeId i = members[qi];
    std::vector<double> acc(n, 0.0);
    for (const auto& e : vectors[i].entries()) {
      if (e.id >= postings.size()) continue;
      for (const auto& [j, w] : postings[e.id]) acc[j] += e.weight * w;
    }
    std::vector<Scored> scored;
    scored.reserve(members.size());
    for (NodeId j : members) {
      if (j == i) continue;
      const double sim = (norms[i] > 0.0 && norms[j] > 0.0)
                             ? acc[j] / (norms[i] * norms[j])
                             : 0.0;
      scored.push_back({sim, j});
    }
    const std::size_t take = std::min(want, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(take),
                      scored.end(), better);
    auto& out = adj.lists[i];
    out.reserve(take);
    for (std::size_t r = 0; r < take; ++r) out.push_back(scored[r].id);
    std::sort(out.begin(), out.end());
  });
  return adj;
}

Adjacency induce_knn(std::span<const SparseVector> vectors, int k,
                     unsigned threads) {
  std::vector<NodeId> members;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (!vectors[i].empty()) members.push_back(static_cast<NodeId>(i));
  }
  return induce_knn(vectors, members, k, threads);
}

Adjacency union_edges(const TemporalGraph& tg, int t_start, int w) {
  if (w < 1 || t_start < 0 ||
      static_cast<long>(t_start) + w > static_cast<long>(tg.num_steps())) {
    throw std::out_of_range("edge window [" + std::to_string(t_start) + ", " +
                            std::to_string(static_cast<long>(t_start) + w) +
                            ") outside graph");
  }
  Adjacency adj(tg.num_nodes());
  for (std::size_t i = 0; i < adj.size(); ++i) {
    auto& out = adj.lists[i];
    for (int t = t_start; t < t_start + w; ++t) {
      const auto& l = tg.snapshot(t).edges.lists[i];
      out.insert(out.end(), l.begin(), l.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return adj;
}

Adjacency induce_graph(const TemporalGraph& tg, const InductionConfig& cfg,
                       int t_end, unsigned threads) {
  cfg.validate();
  const int t_start = t_end - cfg.window + 1;
  if (cfg.mode == InductionMode::kExplicitUnion) {
    return union_edges(tg, t_start, cfg.window);
  }
  const AttributeTable agg = aggregate_window(tg, t_start, cfg.window);
  return induce_knn(agg, cfg.k, threads);
}

void write_adjacency(std::ostream& out, const Adjacency& adj) {
  detail::BinaryWriter w(out);
  w.bytes(kAdjacencyMagic);
  w.varint(adj.size());
  for (const auto& l : adj.lists) w.delta_ids(l);
  if (!out) throw DataError("write failed");
}

void write_adjacency(const std::filesystem::path& path, const Adjacency& adj) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write_adjacency(out, adj);
}

Adjacency read_adjacency(std::istream& in) {
  detail::BinaryReader r(in, "adjacency container");
  r.expect_magic(kAdjacencyMagic);
  const auto n = r.count(1u << 31);
  Adjacency adj(n);
  for (auto& l : adj.lists) l = r.delta_ids(n);
  r.expect_end();
  return adj;
}

Adjacency read_adjacency(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_adjacency(in);
}

}  // namespace pshadow
