#include "pshadow/ingestion.hpp"

#include <zlib.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "pshadow/errors.hpp"

namespace pshadow {
namespace {

namespace fs = std::filesystem;

BinningConfig bins(int n, double lo, double hi) {
  BinningConfig c;
  c.n_intervals = n;
  c.t_min = lo;
  c.t_max = hi;
  return c;
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("pshadow_ingest_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(BinIndex, FloorRule) {
  EXPECT_EQ(bin_index(84.9, 0.0, 100.0, 50), 42);
}

TEST(BinIndex, UpperEdgeClampsToLastBin) {
  EXPECT_EQ(bin_index(100.0, 0.0, 100.0, 50), 49);
  EXPECT_EQ(bin_index(0.0, 0.0, 100.0, 50), 0);
  EXPECT_FALSE(bin_index(100.5, 0.0, 100.0, 50));
  EXPECT_FALSE(bin_index(-0.1, 0.0, 100.0, 50));
}

TEST(BinIndex, AlwaysInRange) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> x(0.0, 37.0);
  for (int i = 0; i < 10000; ++i) {
    const auto b = bin_index(x(gen), 0.0, 37.0, 13);
    ASSERT_TRUE(b);
    EXPECT_GE(*b, 0);
    EXPECT_LT(*b, 13);
  }
}

TEST(BinEvents, SumsRepeatedPlays) {
  const std::vector<AttributeEvent> ev = {{1.0, "u", "a", 1.0}, {2.0, "u", "a", 1.0},
                                          {9.0, "v", "b", 1.0}};
  const auto r = bin_events(ev, {}, bins(2, 0.0, 10.0));
  const auto& g = r.graph;
  EXPECT_EQ(g.snapshot(0).attrs[g.nodes().at("u")].weight(g.attributes().at("a")), 2.0);
}

TEST(BinEvents, OutOfRangeSkipOrFail) {
  const std::vector<AttributeEvent> ev = {{1.0, "u", "a", 1.0}, {20.0, "u", "a", 3.0}};
  auto cfg = bins(2, 0.0, 10.0);
  const auto r = bin_events(ev, {}, cfg);
  EXPECT_EQ(r.skipped_attribute_events, 1u);
  cfg.out_of_range = OutOfRangePolicy::kFail;
  EXPECT_THROW(bin_events(ev, {}, cfg), DataError);
}

TEST(BinEvents, WeightConservedAndOrderIndependent) {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> t(0.0, 50.0);
  std::uniform_int_distribution<int> pick(0, 19);
  std::uniform_int_distribution<int> w(1, 5);
  std::vector<AttributeEvent> ev;
  std::vector<EdgeEvent> edges;
  double total = 0.0;
  for (int i = 0; i < 2000; ++i) {
    ev.push_back({t(gen), "n" + std::to_string(pick(gen)), "a" + std::to_string(pick(gen)),
                  0.5 * w(gen)});
    total += ev.back().weight;
  }
  for (int i = 0; i < 300; ++i) {
    const int a = pick(gen), b = pick(gen);
    if (a != b) edges.push_back({t(gen), "n" + std::to_string(a), "n" + std::to_string(b)});
  }
  const auto cfg = bins(7, 0.0, 50.0);
  const auto r1 = bin_events(ev, edges, cfg);
  double binned = 0.0;
  for (const auto& s : r1.graph.snapshots()) {
    for (const auto& v : s.attrs) binned += v.total();
  }
  EXPECT_NEAR(binned, total, 1e-9);

  std::shuffle(ev.begin(), ev.end(), gen);
  std::shuffle(edges.begin(), edges.end(), gen);
  const auto r2 = bin_events(ev, edges, cfg);
  EXPECT_EQ(r1.graph, r2.graph);
}

TEST(BinEvents, DuplicateEdgesCollapse) {
  const std::vector<AttributeEvent> ev = {{0.0, "a", "x", 1.0}, {10.0, "a", "x", 1.0}};
  const std::vector<EdgeEvent> edges = {{1.0, "a", "b"}, {2.0, "a", "b"}, {3.0, "b", "a"}};
  const auto r = bin_events(ev, edges, bins(2, 0.0, 10.0));
  const auto& g = r.graph;
  const NodeId a = g.nodes().at("a"), b = g.nodes().at("b");
  EXPECT_EQ(g.snapshot(0).edges.lists[a], (std::vector<NodeId>{b}));
  EXPECT_EQ(g.snapshot(0).edges.lists[b], (std::vector<NodeId>{a}));
}

TEST(CapDegree, HighestTallyThenLowestId) {
  // node 0 with neighbors b=1, c=2, d=3 and tallies 5, 5, 1
  Snapshot s;
  s.attrs.resize(4);
  s.edges = Adjacency(4);
  s.edges.lists[0] = {1, 2, 3};
  NeighborTally tally(4);
  tally[0] = {5.0, 5.0, 1.0};
  EXPECT_EQ(cap_degree(s, 2, tally).edges.lists[0], (std::vector<NodeId>{1, 2}));
  EXPECT_EQ(cap_degree(s, 3, tally), s);
  tally[0] = {2.0, 2.0, 2.0};
  EXPECT_EQ(cap_degree(s, 1, tally).edges.lists[0], (std::vector<NodeId>{1}));
}

TEST(ParseEvents, MalformedLineNamesLine) {
  std::istringstream in(
      "{\"time\": 1, \"node\": \"u\", \"attr\": \"a\"}\n"
      "{\"time\": 2, \"node\": \"u\"}\n");
  try {
    parse_attribute_events(in, "events.jsonl");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("events.jsonl:2"), std::string::npos) << e.what();
  }
}

TEST(ParseEvents, DefaultsAndIsoTimes) {
  std::istringstream in(
      "{\"time\": \"1970-01-02\", \"node\": \"u\", \"attr\": \"a\"}\n"
      "\n"
      "{\"time\": 5.5, \"node\": \"v\", \"attr\": \"b\", \"weight\": 2}\n");
  const auto ev = parse_attribute_events(in, "x");
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[0].time, 86400.0);
  EXPECT_EQ(ev[0].weight, 1.0);
  EXPECT_EQ(ev[1].weight, 2.0);
}

TEST(ParseEvents, RejectsNonPositiveWeightAndSelfLoops) {
  std::istringstream a("{\"time\": 1, \"node\": \"u\", \"attr\": \"a\", \"weight\": 0}\n");
  EXPECT_THROW(parse_attribute_events(a, "x"), DataError);
  std::istringstream e("{\"time\": 1, \"src\": \"u\", \"dst\": \"u\"}\n");
  EXPECT_THROW(parse_edge_events(e, "x"), DataError);
}

TEST(ParseTimestamp, Formats) {
  EXPECT_EQ(parse_timestamp("12.5"), 12.5);
  EXPECT_EQ(parse_timestamp("2000-01-01T00:00:00Z"), 946684800.0);
  EXPECT_EQ(parse_timestamp("2000-01-01 00:01:00"), 946684860.0);
  EXPECT_THROW(parse_timestamp("yesterday"), DataError);
}

TEST(ReadEvents, GzipTransparent) {
  const auto dir = temp_dir("gz");
  const std::string body =
      "{\"time\": 1, \"node\": \"u\", \"attr\": \"a\"}\n"
      "{\"time\": 2, \"node\": \"v\", \"attr\": \"b\"}\n";
  gzFile f = gzopen((dir / "ev.jsonl.gz").c_str(), "wb");
  ASSERT_NE(f, nullptr);
  gzwrite(f, body.data(), static_cast<unsigned>(body.size()));
  gzclose(f);
  std::ofstream(dir / "ev.jsonl") << body;
  const auto a = read_attribute_events(dir / "ev.jsonl.gz");
  const auto b = read_attribute_events(dir / "ev.jsonl");
  ASSERT_EQ(a.size(), 2u);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(a[1].node, b[1].node);
}

TEST(LabelMapFile, BuildsSortedDictionary) {
  Dictionary attrs({"a", "b"});
  const std::vector<LabelMapEntry> entries = {{"b", {"rock", "pop"}}, {"a", {"pop"}},
                                              {"unseen", {"jazz"}}};
  const auto lm = build_labelmap(entries, attrs, 3);
  EXPECT_FALSE(lm.is_identity());
  EXPECT_EQ(lm.labels().names(), (std::vector<std::string>{"jazz", "pop", "rock"}));
  EXPECT_EQ(std::vector<LabelId>(lm.labels_of(1).begin(), lm.labels_of(1).end()),
            (std::vector<LabelId>{1, 2}));
  EXPECT_EQ(lm.threshold(), 3);
}

TEST(GraphFile, BitExactRoundTrip) {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> t(0.0, 10.0);
  std::uniform_int_distribution<int> pick(0, 30);
  std::uniform_real_distribution<double> w(0.1, 3.0);
  std::vector<AttributeEvent> ev;
  std::vector<EdgeEvent> edges;
  for (int i = 0; i < 1500; ++i) {
    ev.push_back({t(gen), "n" + std::to_string(pick(gen)), "a" + std::to_string(pick(gen)), w(gen)});
    const int a = pick(gen), b = pick(gen);
    if (a != b) edges.push_back({t(gen), "n" + std::to_string(a), "n" + std::to_string(b)});
  }
  const auto g = bin_events(ev, edges, bins(5, 0.0, 10.0)).graph;
  std::vector<LabelMapEntry> entries;
  for (int a = 0; a <= 30; ++a) {
    entries.push_back({"a" + std::to_string(a), {"L" + std::to_string(a % 4)}});
  }
  for (const auto& lm : {LabelMap::identity(g.attributes(), 2),
                         build_labelmap(entries, g.attributes(), 2)}) {
    std::ostringstream first;
    write_graph(first, g, lm);
    std::istringstream in(first.str());
    auto back = read_graph(in);
    back.labels.set_threshold(2);
    EXPECT_EQ(back.graph, g);
    EXPECT_EQ(back.labels, lm);
    std::ostringstream second;
    write_graph(second, back.graph, back.labels);
    EXPECT_EQ(first.str(), second.str());
    EXPECT_EQ(first.str().substr(0, 5), "PSHD1");
  }
}

TEST(GraphFile, RejectsCorruptInput) {
  std::istringstream bad_magic("XXXXX");
  EXPECT_THROW(read_graph(bad_magic), DataError);
  const auto g = bin_events({{0.0, "u", "a", 1.0}, {1.0, "v", "b", 1.0}}, {}, bins(2, 0.0, 1.0)).graph;
  std::ostringstream out;
  write_graph(out, g, LabelMap::identity(g.attributes()));
  std::string s = out.str();
  std::istringstream truncated(s.substr(0, s.size() - 3));
  EXPECT_THROW(read_graph(truncated), DataError);
}

}  // namespace
}  // namespace pshadow
