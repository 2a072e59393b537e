#include "pshadow/synth.hpp"

#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "pshadow/errors.hpp"
#include "support/test_support.hpp"

namespace pshadow {
namespace {

SynthConfig small(SynthRegime regime, double rho = 0.0) {
  SynthConfig c;
  c.n_nodes = 40;
  c.n_attrs = 50;
  c.n_labels = 10;
  c.n_steps = 6;
  c.n_communities = 5;
  c.attrs_per_step = 8;
  c.regime = regime;
  c.rho = rho;
  return c;
}

bool same_events(const SynthData& a, const SynthData& b) {
  if (a.events.size() != b.events.size()) return false;
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    const auto& x = a.events[i];
    const auto& y = b.events[i];
    if (x.time != y.time || x.node != y.node || x.attr != y.attr || x.weight != y.weight) return false;
  }
  return true;
}

// attribute counts per node at step t
std::vector<std::map<std::string, int>> counts_at(const SynthData& d, const SynthConfig& c, int t) {
  std::vector<std::map<std::string, int>> out(static_cast<std::size_t>(c.n_nodes));
  for (const auto& e : d.events) {
    if (static_cast<int>(e.time) != t) continue;
    out[static_cast<std::size_t>(std::stoi(e.node.substr(1)))][e.attr]++;
  }
  return out;
}

TEST(Synth, DeterministicAndSeedSensitive) {
  const auto c = small(SynthRegime::kDrift, 0.2);
  EXPECT_TRUE(same_events(generate(c), generate(c)));
  auto other = c;
  other.seed = 8;
  EXPECT_FALSE(same_events(generate(c), generate(other)));
}

TEST(Synth, EventCount) {
  for (auto r : {SynthRegime::kStatic, SynthRegime::kDrift, SynthRegime::kReshuffle}) {
    const auto c = small(r, 0.3);
    EXPECT_EQ(generate(c).events.size(),
              static_cast<std::size_t>(c.n_nodes * c.attrs_per_step * c.n_steps));
  }
}

TEST(Synth, StaticVectorsAreConstant) {
  const auto c = small(SynthRegime::kStatic);
  const auto d = generate(c);
  const auto first = counts_at(d, c, 0);
  for (int t = 1; t < c.n_steps; ++t) EXPECT_EQ(counts_at(d, c, t), first);
  for (const auto& step : d.community) EXPECT_EQ(step, d.community[0]);
}

TEST(Synth, DriftWithoutRateIsStatic) {
  EXPECT_TRUE(same_events(generate(small(SynthRegime::kDrift, 0.0)),
                          generate(small(SynthRegime::kStatic))));
}

TEST(Synth, FullDriftIsUniformAfterOneStep) {
  const auto c = small(SynthRegime::kDrift, 1.0);
  const auto d = generate(c);
  for (const auto& p : d.preference[1]) {
    for (double x : p) EXPECT_NEAR(x, 1.0 / c.n_attrs, 1e-15);
  }
}

TEST(Synth, ReshuffleRedrawsCommunities) {
  auto c = small(SynthRegime::kReshuffle);
  c.n_nodes = 400;
  c.n_steps = 5;
  const auto d = generate(c);
  // Independent uniform draws: same community as previous step with prob 1/C.
  int same = 0, total = 0;
  for (int t = 1; t < c.n_steps; ++t) {
    for (int i = 0; i < c.n_nodes; ++i) {
      same += d.community[t][i] == d.community[t - 1][i];
      ++total;
    }
  }
  const double p = 1.0 / c.n_communities;
  const double se = std::sqrt(p * (1 - p) / total);
  EXPECT_NEAR(static_cast<double>(same) / total, p, 4 * se);
}

TEST(Synth, CommunitiesShareAttributes) {
  auto c = small(SynthRegime::kStatic);
  c.attrs_per_step = 30;
  const auto d = generate(c);
  const auto counts = counts_at(d, c, 0);
  std::vector<SparseVector> vecs;
  for (const auto& m : counts) {
    std::vector<SparseVector::Entry> e;
    for (const auto& [a, n] : m) e.push_back({static_cast<AttrId>(std::stoi(a.substr(1))), double(n)});
    vecs.push_back(SparseVector::from_unsorted(e));
  }
  double within = 0, cross = 0;
  int nw = 0, nc = 0;
  for (int i = 0; i < c.n_nodes; ++i) {
    for (int j = i + 1; j < c.n_nodes; ++j) {
      const double s = testing::dense_cosine(vecs[i], vecs[j], c.n_attrs);
      if (d.community[0][i] == d.community[0][j]) {
        within += s;
        ++nw;
      } else {
        cross += s;
        ++nc;
      }
    }
  }
  EXPECT_GT(within / nw - cross / nc, 0.1);
}

TEST(Synth, LabelBlocks) {
  const auto c = small(SynthRegime::kStatic);
  const auto d = generate(c);
  ASSERT_EQ(d.labelmap.size(), static_cast<std::size_t>(c.n_attrs));
  EXPECT_EQ(d.labelmap.front().labels, (std::vector<std::string>{"L0"}));
  EXPECT_EQ(d.labelmap.back().labels, (std::vector<std::string>{"L9"}));
}

TEST(Synth, Validation) {
  auto c = small(SynthRegime::kDrift, 1.5);
  EXPECT_THROW(generate(c), ConfigError);
  c = small(SynthRegime::kStatic);
  c.n_communities = 0;
  EXPECT_THROW(generate(c), ConfigError);
}

}  // namespace
}  // namespace pshadow
