#include "pshadow/interval_engine.hpp"

#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "support/test_support.hpp"

namespace pshadow {
namespace {

using testing::sv;

MeasureConfig config(double p, int k = 2, bool baselines = false) {
  MeasureConfig c;
  c.induction.k = k;
  c.model.bootstrap_p = p;
  c.model.n_realizations = 5;
  c.baselines = baselines;
  return c;
}

// Four nodes in two pairs that share attributes; node 3 leaves after t=1.
TemporalGraph pair_graph(int steps) {
  std::vector<AttributeTable> s;
  for (int t = 0; t < steps; ++t) {
    AttributeTable a = {sv({{0, 1.0}, {1, 1.0}}), sv({{0, 1.0}, {1, 2.0}}),
                        sv({{2, 1.0}, {3, 1.0}}), sv({{2, 2.0}, {3, 1.0}})};
    if (t > 1) a[3] = {};
    s.push_back(a);
  }
  return testing::make_graph(4, 4, s);
}

TEST(BuildInterval, InactiveNodeScoresNull) {
  const auto tg = pair_graph(4);
  const auto lm = LabelMap::identity(tg.attributes());
  const auto cfg = config(1.0, 1);
  const auto iv = build_interval(tg, cfg.induction, cfg.model, lm, 3, 0);
  ASSERT_EQ(iv.scores.size(), 4u);
  EXPECT_TRUE(iv.scores[1]);
  EXPECT_FALSE(iv.scores[2]);
  EXPECT_FALSE(iv.scores[3]);
}

TEST(BuildInterval, StaticFullInclusionIsConstant) {
  const auto tg = pair_graph(5);
  const auto lm = LabelMap::identity(tg.attributes());
  const auto cfg = config(1.0, 1);
  const auto iv = build_interval(tg, cfg.induction, cfg.model, lm, 0, 0);
  for (const auto& s : iv.scores) EXPECT_EQ(s, iv.scores[0]);
}

TEST(BuildInterval, LastStartHasLengthOne) {
  const auto tg = pair_graph(3);
  const auto lm = LabelMap::identity(tg.attributes());
  const auto cfg = config(1.0, 1);
  EXPECT_EQ(build_interval(tg, cfg.induction, cfg.model, lm, 0, 2).scores.size(), 1u);
  EXPECT_THROW(build_interval(tg, cfg.induction, cfg.model, lm, 0, 3), std::out_of_range);
}

TEST(BuildInterval, WindowMustFit) {
  const auto tg = pair_graph(3);
  const auto lm = LabelMap::identity(tg.attributes());
  auto cfg = config(1.0, 1);
  cfg.induction.window = 2;
  EXPECT_THROW(build_interval(tg, cfg.induction, cfg.model, lm, 0, 0), std::out_of_range);
  EXPECT_EQ(build_interval(tg, cfg.induction, cfg.model, lm, 0, 1).scores.size(), 2u);
}

TEST(ExpectTrajectory, MeansIgnoreNulls) {
  const std::vector<PredictionInterval> ivs = {
      {0, 0, {0.5, 0.2, std::nullopt}},
      {0, 1, {0.7, 0.4}},
      {0, 2, {0.1}},
  };
  const auto tr = expect_trajectory(ivs, 2);
  ASSERT_EQ(tr.expected.size(), 3u);
  EXPECT_NEAR(*tr.expected[0], (0.5 + 0.7 + 0.1) / 3.0, 1e-12);
  EXPECT_NEAR(*tr.expected[1], 0.3, 1e-12);
  EXPECT_FALSE(tr.expected[2]);
  EXPECT_EQ(tr.counts, (std::vector<int>{3, 2, 0}));

  const std::vector<PredictionInterval> mixed = {{0, 0, {0.1, 0.1, std::nullopt}},
                                                 {0, 1, {0.1, 0.4, 0.4}}};
  const auto tm = expect_trajectory(mixed, 3);
  EXPECT_EQ(tm.expected[2], Score(0.4));
  EXPECT_EQ(tm.counts[2], 1);
}

TEST(ExpectTrajectory, SingleInterval) {
  const std::vector<PredictionInterval> one = {{2, 1, {0.25, std::nullopt, 0.75}}};
  const auto tr = expect_trajectory(one, 3);
  EXPECT_EQ(tr.expected, (std::vector<Score>{0.25, std::nullopt, 0.75, std::nullopt}));
}

TEST(ReferenceDistribution, SkipsNullsAndNonMembers) {
  const std::vector<NodeTrajectory> trs = {
      {0, {0.5}, {1}}, {1, {0.1}, {1}}, {2, {std::nullopt}, {0}}, {3, {0.9}, {1}}};
  const std::vector<NodeId> members = {0, 1, 2};
  const auto ref = reference_distribution(trs, members, 0);
  EXPECT_EQ(ref.values, (std::vector<double>{0.1, 0.5}));
  EXPECT_LE(ref.size(), members.size());
}

IntervalStore hand_store() {
  IntervalStore st;
  st.last_step = 12;
  st.node_names = {"a", "b", "c"};
  auto& net = st.series[0];
  std::vector<Score> full(11, 0.5);
  std::vector<Score> holey = full;
  holey[4] = std::nullopt;
  std::vector<Score> short_one(6, 0.3);
  net.push_back({0, 0, full});
  net.push_back({1, 0, holey});
  net.push_back({1, 2, short_one});
  net.push_back({2, 1, short_one});
  return st;
}

TEST(SCompleteCohort, Examples) {
  const auto st = hand_store();
  EXPECT_EQ(s_complete_cohort(st, 10), (std::vector<NodeId>{0}));
  EXPECT_EQ(s_complete_cohort(st, 5), (std::vector<NodeId>{0, 1, 2}));
}

TEST(SCompleteCohort, NonIncreasingInS) {
  const auto tg = pair_graph(8);
  const auto lm = LabelMap::identity(tg.attributes());
  const auto st = measure(tg, lm, config(0.5, 1));
  for (int s = 0; s < 8; ++s) {
    const auto big = s_complete_cohort(st, s);
    const auto small = s_complete_cohort(st, s + 1);
    EXPECT_TRUE(std::includes(big.begin(), big.end(), small.begin(), small.end()));
  }
}

TEST(Measure, OverlappingIntervalsDiffer) {
  const auto tg = testing::make_graph(
      4, 4,
      {{sv({{0, 1.0}}), sv({{0, 1.0}}), sv({{1, 1.0}}), sv({{2, 1.0}})},
       {sv({{3, 1.0}}), sv({{1, 1.0}}), sv({{3, 1.0}}), sv({{2, 1.0}})}});
  const auto lm = LabelMap::identity(tg.attributes());
  const auto cfg = config(1.0, 1);
  const auto adj0 = induce_graph(tg, cfg.induction, 0);
  const auto adj1 = induce_graph(tg, cfg.induction, 1);
  EXPECT_NE(adj0.fingerprint(), adj1.fingerprint());
  const auto r0 = build_interval(tg, cfg.induction, cfg.model, lm, 0, 0);
  const auto r1 = build_interval(tg, cfg.induction, cfg.model, lm, 0, 1);
  ASSERT_TRUE(r0.scores[1] && r1.scores[0]);
  EXPECT_NE(*r0.scores[1], *r1.scores[0]);
}

TemporalGraph random_graph(std::uint64_t seed, std::size_t n, int steps) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> a(0, 24);
  std::bernoulli_distribution active(0.85);
  std::vector<AttributeTable> s(steps, AttributeTable(n));
  for (auto& step : s) {
    for (auto& v : step) {
      if (!active(gen)) continue;
      std::vector<SparseVector::Entry> e;
      for (int q = 0; q < 6; ++q) e.push_back({static_cast<AttrId>(a(gen)), 1.0});
      v = SparseVector::from_unsorted(e);
    }
  }
  return testing::make_graph(n, 25, s);
}

TEST(Measure, IndependentOfThreadCount) {
  const auto tg = random_graph(3, 40, 6);
  const auto lm = LabelMap::identity(tg.attributes(), 0);
  const auto cfg = config(0.5, 4, true);
  const auto one = measure(tg, lm, cfg, 1);
  EXPECT_EQ(one, measure(tg, lm, cfg, 4));
  EXPECT_EQ(one, measure(tg, lm, cfg, 8));
}

TEST(Measure, SeriesShareKeysAndLengths) {
  const auto tg = random_graph(4, 20, 5);
  const auto lm = LabelMap::identity(tg.attributes(), 0);
  const auto st = measure(tg, lm, config(0.5, 3, true), 2);
  ASSERT_TRUE(st.has_baselines);
  for (Series s : kAllSeries) {
    ASSERT_EQ(st.of(s).size(), st.of(Series::kNetwork).size());
    for (std::size_t r = 0; r < st.of(s).size(); ++r) {
      const auto& iv = st.of(s)[r];
      EXPECT_EQ(iv.node, st.of(Series::kNetwork)[r].node);
      EXPECT_EQ(iv.t_start, st.of(Series::kNetwork)[r].t_start);
      EXPECT_EQ(static_cast<int>(iv.scores.size()), st.last_step - iv.t_start + 1);
      for (const auto& v : iv.scores) {
        if (v) {
          EXPECT_GE(*v, 0.0);
          EXPECT_LE(*v, 1.0);
        }
      }
    }
  }
}

TEST(IntervalFile, RoundTripAndCsv) {
  const auto tg = random_graph(5, 15, 4);
  const auto lm = LabelMap::identity(tg.attributes(), 0);
  const auto st = measure(tg, lm, config(0.5, 3, true), 1);
  std::ostringstream out;
  write_interval_store(out, st);
  std::istringstream in(out.str());
  EXPECT_EQ(read_interval_store(in), st);

  std::ostringstream csv;
  write_interval_csv(csv, st);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "node,t_start,delta,score");
}

}  // namespace
}  // namespace pshadow
