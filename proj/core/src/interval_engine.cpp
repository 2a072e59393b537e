#include "pshadow/interval_engine.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "binary_io.hpp"
#include "pshadow/errors.hpp"
#include "pshadow/format.hpp"
#include "pshadow/parallel.hpp"

namespace pshadow {

namespace {

constexpr std::string_view kStoreMagic = "PSHI1";

struct RunningMean {
  double mean = 0.0;
  int count = 0;
  void add(double x) {
    ++count;
    mean += (x - mean) / static_cast<double>(count);
  }
};

// Everything shared by the intervals that start at one t_start.
struct StartContext {
  int t_start = 0;
  AttributeTable window_attrs;
  Adjacency adjacency;
  std::optional<AttributePool> window_pool;

  const AttributeTable& eval_attrs(const TemporalGraph& tg, int delta) const {
    return delta == 0 ? window_attrs : tg.snapshot(t_start + delta).attrs;
  }
};

StartContext make_context(const TemporalGraph& tg, const InductionConfig& ind,
                          int t_start, bool with_pool, unsigned threads) {
  const int first = t_start - ind.window + 1;
  if (first < 0 || t_start > tg.last_step()) {
    throw std::out_of_range("interval start " + std::to_string(t_start) +
                            " has no complete training window of " +
                            std::to_string(ind.window) + " steps");
  }
  StartContext ctx;
  ctx.t_start = t_start;
  ctx.window_attrs = aggregate_window(tg, first, ind.window);
  ctx.adjacency = ind.mode == InductionMode::kKnn
                      ? induce_knn(ctx.window_attrs, ind.k, threads)
                      : union_edges(tg, first, ind.window);
  if (with_pool) ctx.window_pool.emplace(ctx.window_attrs);
  return ctx;
}

using SeriesScores = std::array<std::vector<Score>, kSeriesCount>;

SeriesScores evaluate(const TemporalGraph& tg, const LabelMap& lm,
                      const MeasureConfig& cfg, const StartContext& ctx,
                      std::span<const AttributePool> step_pools, NodeId node) {
  const int len = tg.last_step() - ctx.t_start + 1;
  SeriesScores out;
  for (auto& s : out) s.assign(static_cast<std::size_t>(len), std::nullopt);
  for (int delta = 0; delta < len; ++delta) {
    const AttributeTable& eval = ctx.eval_attrs(tg, delta);
    const LabelSet truth = derive_labels(eval[node], lm);
    if (truth.empty()) continue;
    const EvalKey key{node, ctx.t_start, delta};
    const auto d = static_cast<std::size_t>(delta);
    out[0][d] = predict_score(ctx.adjacency, eval, truth, lm, cfg.model, key);
    if (!cfg.baselines) continue;
    out[1][d] = pop_baseline(tg.num_nodes(), eval, truth, lm, cfg.model, key);
    const AttributePool& pool =
        delta == 0 ? *ctx.window_pool
                   : step_pools[static_cast<std::size_t>(ctx.t_start + delta)];
    out[2][d] = attr_baseline(pool, truth, lm, cfg.model, key);
    out[3][d] = rand_baseline(lm.num_labels(), truth, cfg.model, key);
  }
  return out;
}

}  // namespace

std::string_view series_name(Series s) {
  switch (s) {
    case Series::kNetwork: return "network";
    case Series::kPop: return "pop";
    case Series::kAttr: return "attr";
    case Series::kRand: return "rand";
  }
  return "?";
}

void MeasureConfig::validate() const {
  induction.validate();
  model.validate();
}

std::span<const PredictionInterval> IntervalStore::intervals_of(NodeId node,
                                                                Series s) const {
  const auto& v = of(s);
  auto lo = std::lower_bound(v.begin(), v.end(), node,
                             [](const PredictionInterval& p, NodeId n) { return p.node < n; });
  auto hi = std::upper_bound(lo, v.end(), node,
                             [](NodeId n, const PredictionInterval& p) { return n < p.node; });
  return {lo, hi};
}

std::vector<NodeId> IntervalStore::measured_nodes() const {
  std::vector<NodeId> out;
  for (const auto& p : of(Series::kNetwork)) {
    if (out.empty() || out.back() != p.node) out.push_back(p.node);
  }
  return out;
}

PredictionInterval build_interval(const TemporalGraph& tg,
                                  const InductionConfig& induction,
                                  const ModelConfig& model, const LabelMap& lm,
                                  NodeId node, int t_start) {
  if (node >= tg.num_nodes()) throw std::out_of_range("node outside graph");
  MeasureConfig cfg{induction, model, false};
  cfg.validate();
  const StartContext ctx = make_context(tg, induction, t_start, false, 1);
  auto scores = evaluate(tg, lm, cfg, ctx, {}, node);
  return {node, t_start, std::move(scores[0])};
}

IntervalStore measure(const TemporalGraph& tg, const LabelMap& lm,
                      const MeasureConfig& cfg, unsigned threads) {
  cfg.validate();
  const int T = tg.last_step();
  const int w = cfg.induction.window;
  if (w - 1 > T) {
    throw DataError("training window of " + std::to_string(w) +
                    " steps exceeds the " + std::to_string(tg.num_steps()) +
                    " available");
  }

  std::vector<AttributePool> step_pools;
  if (cfg.baselines) {
    step_pools.reserve(tg.num_steps());
    for (const auto& s : tg.snapshots()) step_pools.emplace_back(s.attrs);
  }

  struct Row {
    NodeId node;
    int t_start;
    SeriesScores scores;
  };
  std::vector<Row> rows;
  for (int t_start = w - 1; t_start <= T; ++t_start) {
    const StartContext ctx = make_context(tg, cfg.induction, t_start, cfg.baselines, threads);
    std::vector<NodeId> members;
    for (NodeId i = 0; i < tg.num_nodes(); ++i) {
      if (!ctx.window_attrs[i].empty() || !ctx.adjacency.lists[i].empty()) {
        members.push_back(i);
      }
    }
    std::vector<SeriesScores> results(members.size());
    parallel_for(members.size(), threads, [&](std::size_t k) {
      results[k] = evaluate(tg, lm, cfg, ctx, step_pools, members[k]);
    });
    for (std::size_t k = 0; k < members.size(); ++k) {
      rows.push_back({members[k], t_start, std::move(results[k])});
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.node < b.node;
  });

  IntervalStore store;
  store.last_step = T;
  store.node_names = tg.nodes().names();
  store.has_baselines = cfg.baselines;
  for (int s = 0; s < kSeriesCount; ++s) store.series[s].reserve(rows.size());
  for (auto& r : rows) {
    for (int s = 0; s < kSeriesCount; ++s) {
      if (s > 0 && !cfg.baselines) continue;
      store.series[s].push_back({r.node, r.t_start, std::move(r.scores[s])});
    }
  }
  return store;
}

NodeTrajectory expect_trajectory(std::span<const PredictionInterval> intervals,
                                 int last_step) {
  if (intervals.empty()) throw std::invalid_argument("no intervals to align");
  const auto len = static_cast<std::size_t>(last_step + 1);
  std::vector<RunningMean> acc(len);
  const NodeId node = intervals.front().node;
  for (const auto& iv : intervals) {
    if (iv.node != node) throw InvariantError("intervals of different nodes mixed");
    if (iv.scores.size() > len) throw InvariantError("interval longer than T + 1");
    for (std::size_t d = 0; d < iv.scores.size(); ++d) {
      if (iv.scores[d]) acc[d].add(*iv.scores[d]);
    }
  }
  NodeTrajectory traj;
  traj.node = node;
  traj.expected.resize(len);
  traj.counts.resize(len);
  for (std::size_t d = 0; d < len; ++d) {
    traj.counts[d] = acc[d].count;
    if (acc[d].count > 0) traj.expected[d] = acc[d].mean;
  }
  return traj;
}

std::vector<NodeTrajectory> compute_trajectories(const IntervalStore& store,
                                                 Series s) {
  const auto& v = store.of(s);
  std::vector<NodeTrajectory> out;
  for (std::size_t lo = 0; lo < v.size();) {
    std::size_t hi = lo;
    while (hi < v.size() && v[hi].node == v[lo].node) ++hi;
    out.push_back(expect_trajectory(std::span(v).subspan(lo, hi - lo), store.last_step));
    lo = hi;
  }
  return out;
}

ReferenceDistribution reference_distribution(
    std::span<const NodeTrajectory> trajectories,
    std::span<const NodeId> members, int delta) {
  ReferenceDistribution ref;
  ref.delta = delta;
  for (const auto& tr : trajectories) {
    if (!std::binary_search(members.begin(), members.end(), tr.node)) continue;
    if (delta < 0 || static_cast<std::size_t>(delta) >= tr.expected.size()) continue;
    if (const auto& v = tr.expected[static_cast<std::size_t>(delta)]) {
      ref.values.push_back(*v);
    }
  }
  std::sort(ref.values.begin(), ref.values.end());
  return ref;
}

std::vector<NodeId> s_complete_cohort(const IntervalStore& store, int s) {
  if (s < 0) throw std::invalid_argument("cohort length s must be >= 0");
  std::vector<NodeId> out;
  const auto need = static_cast<std::size_t>(s) + 1;
  for (const auto& iv : store.of(Series::kNetwork)) {
    if (!out.empty() && out.back() == iv.node) continue;
    if (iv.scores.size() < need) continue;
    if (std::all_of(iv.scores.begin(), iv.scores.begin() + static_cast<long>(need),
                    [](const Score& x) { return x.has_value(); })) {
      out.push_back(iv.node);
    }
  }
  return out;
}

void write_interval_store(std::ostream& out, const IntervalStore& store) {
  detail::BinaryWriter w(out);
  w.bytes(kStoreMagic);
  w.varint(static_cast<std::uint64_t>(store.last_step));
  w.strings(store.node_names);
  const int n_series = store.has_baselines ? kSeriesCount : 1;
  w.u8(static_cast<std::uint8_t>(n_series));

  const auto& net = store.of(Series::kNetwork);
  std::size_t rows = 0;
  for (const auto& iv : net) rows += iv.scores.size();
  w.varint(rows);
  for (const auto& iv : net) {
    for (std::size_t d = 0; d < iv.scores.size(); ++d) w.varint(iv.node);
  }
  for (const auto& iv : net) {
    for (std::size_t d = 0; d < iv.scores.size(); ++d) w.varint(static_cast<std::uint64_t>(iv.t_start));
  }
  for (const auto& iv : net) {
    for (std::size_t d = 0; d < iv.scores.size(); ++d) w.varint(d);
  }
  for (int s = 0; s < n_series; ++s) {
    const auto& v = store.series[s];
    if (v.size() != net.size()) throw InvariantError("series misaligned");
    for (const auto& iv : v) {
      for (const auto& x : iv.scores) w.u8(x ? 0 : 1);
    }
    for (const auto& iv : v) {
      for (const auto& x : iv.scores) w.f64(x.value_or(0.0));
    }
  }
  if (!out) throw DataError("write failed");
}

void write_interval_store(const std::filesystem::path& path,
                          const IntervalStore& store) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write_interval_store(out, store);
}

IntervalStore read_interval_store(std::istream& in) {
  detail::BinaryReader r(in, "interval store");
  r.expect_magic(kStoreMagic);
  IntervalStore store;
  store.last_step = static_cast<int>(r.count(1u << 24));
  store.node_names = r.strings();
  const int n_series = r.u8();
  if (n_series != 1 && n_series != kSeriesCount) r.fail("bad series count");
  store.has_baselines = n_series == kSeriesCount;

  const auto rows = r.count(1ULL << 40);
  std::vector<std::uint32_t> node(rows), t_start(rows), delta(rows);
  for (auto& x : node) {
    x = static_cast<std::uint32_t>(r.varint());
    if (x >= store.node_names.size()) r.fail("node id out of range");
  }
  for (auto& x : t_start) {
    x = static_cast<std::uint32_t>(r.varint());
    if (static_cast<int>(x) > store.last_step) r.fail("t_start out of range");
  }
  for (auto& x : delta) x = static_cast<std::uint32_t>(r.varint());

  // Group rows into intervals: a new interval starts at every delta == 0.
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (std::size_t k = 0; k < rows; ++k) {
    if (delta[k] == 0) {
      spans.emplace_back(k, k + 1);
    } else {
      if (spans.empty() || delta[k] != delta[k - 1] + 1 || node[k] != node[k - 1] ||
          t_start[k] != t_start[k - 1]) {
        r.fail("rows do not form contiguous intervals");
      }
      spans.back().second = k + 1;
    }
  }
  for (const auto& [lo, hi] : spans) {
    if (static_cast<int>(hi - lo) != store.last_step - static_cast<int>(t_start[lo]) + 1) {
      r.fail("interval length inconsistent with T");
    }
  }
  for (int s = 0; s < n_series; ++s) {
    std::vector<std::uint8_t> nulls(rows);
    for (auto& b : nulls) {
      b = r.u8();
      if (b > 1) r.fail("bad null flag");
    }
    auto& out = store.series[s];
    out.reserve(spans.size());
    std::vector<double> values(rows);
    for (auto& v : values) v = r.f64();
    for (const auto& [lo, hi] : spans) {
      PredictionInterval iv{node[lo], static_cast<int>(t_start[lo]), {}};
      for (std::size_t k = lo; k < hi; ++k) {
        iv.scores.push_back(nulls[k] ? Score{} : Score{values[k]});
      }
      out.push_back(std::move(iv));
    }
  }
  r.expect_end();
  return store;
}

IntervalStore read_interval_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_interval_store(in);
}

void write_interval_csv(std::ostream& out, const IntervalStore& store) {
  out << "node,t_start,delta,score\n";
  for (const auto& iv : store.of(Series::kNetwork)) {
    const std::string name = csv_field(store.node_names.at(iv.node));
    for (std::size_t d = 0; d < iv.scores.size(); ++d) {
      out << name << ',' << iv.t_start << ',' << d << ','
          << format_optional(iv.scores[d]) << '\n';
    }
  }
}

}  // namespace pshadow
