#include "pshadow/ingestion.hpp"

#include <zlib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "pshadow/errors.hpp"

namespace pshadow {

using nlohmann::json;

namespace {

constexpr std::string_view kGraphMagic = "PSHD1";

[[noreturn]] void line_error(std::string_view source, std::size_t line,
                             const std::string& why) {
  throw DataError(std::string(source) + ":" + std::to_string(line) + ": " +
                  why);
}

double json_time(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_timestamp(v.get<std::string>());
  throw DataError("time must be a number or timestamp string");
}

std::string json_id(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(std::string("missing field '") + key + "'");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw DataError(std::string("field '") + key + "' must be a string id");
}

template <typename Event, typename ParseFn>
std::vector<Event> parse_lines(std::istream& in, std::string_view source,
                               ParseFn&& parse) {
  std::vector<Event> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      const json obj = json::parse(line);
      if (!obj.is_object()) throw DataError("expected a JSON object");
      out.push_back(parse(obj));
    } catch (const json::exception& e) {
      line_error(source, lineno, e.what());
    } catch (const DataError& e) {
      line_error(source, lineno, e.what());
    }
  }
  return out;
}

struct ResolvedBins {
  double t_min = 0.0;
  double t_max = 0.0;
  int n = 0;
  std::vector<double> edges;

  std::optional<int> operator()(double x) const {
    if (edges.empty()) return bin_index(x, t_min, t_max, n);
    if (!(x >= edges.front() && x <= edges.back())) return std::nullopt;
    if (x == edges.back()) return n - 1;
    const auto it = std::upper_bound(edges.begin(), edges.end(), x);
    return static_cast<int>(it - edges.begin()) - 1;
  }
};

ResolvedBins resolve_bins(const std::vector<AttributeEvent>& attrs,
                          const std::vector<EdgeEvent>& edges,
                          const BinningConfig& cfg) {
  ResolvedBins r;
  if (!cfg.bin_edges.empty()) {
    r.edges = cfg.bin_edges;
    r.n = static_cast<int>(r.edges.size()) - 1;
    r.t_min = r.edges.front();
    r.t_max = r.edges.back();
    return r;
  }
  r.n = *cfg.n_intervals;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& e : attrs) lo = std::min(lo, e.time), hi = std::max(hi, e.time);
  for (const auto& e : edges) lo = std::min(lo, e.time), hi = std::max(hi, e.time);
  r.t_min = cfg.t_min.value_or(lo);
  r.t_max = cfg.t_max.value_or(hi);
  if (!(r.t_max > r.t_min)) {
    throw DataError("time range is empty; set binning.t_min/t_max");
  }
  return r;
}

}  // namespace

void BinningConfig::validate() const {
  if (!bin_edges.empty()) {
    if (n_intervals) throw ConfigError("give n_intervals or bin_edges, not both");
    if (bin_edges.size() < 2) throw ConfigError("bin_edges needs >= 2 values");
    for (std::size_t k = 1; k < bin_edges.size(); ++k) {
      if (!(bin_edges[k] > bin_edges[k - 1])) {
        throw ConfigError("bin_edges must be strictly increasing");
      }
    }
    return;
  }
  if (!n_intervals) throw ConfigError("binning needs n_intervals or bin_edges");
  if (*n_intervals < 2) throw ConfigError("n_intervals must be >= 2");
  if (t_min && t_max && !(*t_max > *t_min)) {
    throw ConfigError("t_max must exceed t_min");
  }
  if (degree_cap < 0) throw ConfigError("degree_cap must be >= 0");
}

double parse_timestamp(std::string_view text) {
  const std::string s(text);
  char* end = nullptr;
  const double numeric = std::strtod(s.c_str(), &end);
  if (end != s.c_str() && *end == '\0') return numeric;

  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double sec = 0.0;
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%d-%d-%d%n", &y, &mo, &d, &consumed) != 3) {
    throw DataError("unparseable timestamp '" + s + "'");
  }
  std::string_view rest = text.substr(static_cast<std::size_t>(consumed));
  if (!rest.empty() && (rest.front() == 'T' || rest.front() == ' ')) {
    const std::string tail(rest.substr(1));
    int n2 = 0;
    if (std::sscanf(tail.c_str(), "%d:%d:%lf%n", &h, &mi, &sec, &n2) != 3) {
      if (std::sscanf(tail.c_str(), "%d:%d%n", &h, &mi, &n2) != 2) {
        throw DataError("unparseable timestamp '" + s + "'");
      }
    }
    rest = rest.substr(1 + static_cast<std::size_t>(n2));
  }
  if (rest == "Z") rest = {};
  if (!rest.empty()) throw DataError("unsupported timestamp suffix in '" + s + "'");

  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || sec < 0 || sec >= 61) {
    throw DataError("invalid calendar timestamp '" + s + "'");
  }
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<double>(days) * 86400.0 + h * 3600.0 + mi * 60.0 + sec;
}

std::string read_text_file(const std::filesystem::path& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw DataError("cannot open " + path.string());
  std::string out;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw DataError("read error in " + path.string());
  return out;
}

std::vector<AttributeEvent> parse_attribute_events(std::istream& in,
                                                   std::string_view source) {
  return parse_lines<AttributeEvent>(in, source, [](const json& obj) {
    AttributeEvent e;
    if (!obj.contains("time")) throw DataError("missing field 'time'");
    e.time = json_time(obj["time"]);
    e.node = json_id(obj, "node");
    e.attr = json_id(obj, "attr");
    if (auto it = obj.find("weight"); it != obj.end()) e.weight = it->get<double>();
    if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
      throw DataError("weight must be positive and finite");
    }
    if (!std::isfinite(e.time)) throw DataError("time must be finite");
    return e;
  });
}

std::vector<EdgeEvent> parse_edge_events(std::istream& in,
                                         std::string_view source) {
  return parse_lines<EdgeEvent>(in, source, [](const json& obj) {
    EdgeEvent e;
    if (!obj.contains("time")) throw DataError("missing field 'time'");
    e.time = json_time(obj["time"]);
    e.src = json_id(obj, "src");
    e.dst = json_id(obj, "dst");
    if (e.src == e.dst) throw DataError("self-loop edge " + e.src);
    if (!std::isfinite(e.time)) throw DataError("time must be finite");
    return e;
  });
}

std::vector<AttributeEvent> read_attribute_events(
    const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  return parse_attribute_events(in, path.string());
}

std::vector<EdgeEvent> read_edge_events(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  return parse_edge_events(in, path.string());
}

std::optional<int> bin_index(double x, double t_min, double t_max,
                             int n_intervals) {
  if (!(x >= t_min && x <= t_max)) return std::nullopt;
  if (x == t_max) return n_intervals - 1;
  const double pos = n_intervals * (x - t_min) / (t_max - t_min);
  const int b = static_cast<int>(std::floor(pos));
  return std::clamp(b, 0, n_intervals - 1);
}

BinningResult bin_events(const std::vector<AttributeEvent>& attr_events,
                         const std::vector<EdgeEvent>& edge_events,
                         const BinningConfig& cfg) {
  cfg.validate();
  if (attr_events.empty()) throw DataError("attribute event stream is empty");
  const ResolvedBins bins = resolve_bins(attr_events, edge_events, cfg);

  BinningResult result;
  auto place = [&](double time, std::size_t& skipped) -> std::optional<int> {
    auto b = bins(time);
    if (!b) {
      if (cfg.out_of_range == OutOfRangePolicy::kFail) {
        throw DataError("event time " + std::to_string(time) +
                        " outside binning range");
      }
      ++skipped;
    }
    return b;
  };

  std::vector<int> attr_bins(attr_events.size(), -1);
  std::vector<int> edge_bins(edge_events.size(), -1);
  std::set<std::string> node_names;
  std::set<std::string> attr_names;
  for (std::size_t k = 0; k < attr_events.size(); ++k) {
    if (auto b = place(attr_events[k].time, result.skipped_attribute_events)) {
      attr_bins[k] = *b;
      node_names.insert(attr_events[k].node);
      attr_names.insert(attr_events[k].attr);
    }
  }
  for (std::size_t k = 0; k < edge_events.size(); ++k) {
    if (auto b = place(edge_events[k].time, result.skipped_edge_events)) {
      edge_bins[k] = *b;
      node_names.insert(edge_events[k].src);
      node_names.insert(edge_events[k].dst);
    }
  }

  Dictionary nodes({node_names.begin(), node_names.end()});
  Dictionary attributes({attr_names.begin(), attr_names.end()});
  const std::size_t n = nodes.size();

  // Sorting by (bin, node, attr, weight) fixes the summation order.
  std::vector<std::tuple<int, NodeId, AttrId, double>> rows;
  rows.reserve(attr_events.size());
  for (std::size_t k = 0; k < attr_events.size(); ++k) {
    if (attr_bins[k] < 0) continue;
    const auto& e = attr_events[k];
    rows.emplace_back(attr_bins[k], nodes.at(e.node), attributes.at(e.attr),
                      e.weight);
  }
  std::sort(rows.begin(), rows.end());

  std::vector<Snapshot> snapshots(static_cast<std::size_t>(bins.n));
  for (int t = 0; t < bins.n; ++t) {
    snapshots[t].t = t;
    snapshots[t].attrs.resize(n);
    snapshots[t].edges = Adjacency(n);
  }
  for (std::size_t k = 0; k < rows.size();) {
    const auto [t, node, attr, w0] = rows[k];
    std::vector<SparseVector::Entry> entries;
    while (k < rows.size() && std::get<0>(rows[k]) == t &&
           std::get<1>(rows[k]) == node) {
      const AttrId a = std::get<2>(rows[k]);
      double sum = 0.0;
      while (k < rows.size() && std::get<0>(rows[k]) == t &&
             std::get<1>(rows[k]) == node && std::get<2>(rows[k]) == a) {
        sum += std::get<3>(rows[k]);
        ++k;
      }
      entries.push_back({a, sum});
    }
    snapshots[t].attrs[node] = SparseVector::from_sorted(std::move(entries));
  }

  // Edge tallies: number of events per (bin, src, dst).
  std::map<std::tuple<int, NodeId, NodeId>, double> tallies;
  for (std::size_t k = 0; k < edge_events.size(); ++k) {
    if (edge_bins[k] < 0) continue;
    const NodeId u = nodes.at(edge_events[k].src);
    const NodeId v = nodes.at(edge_events[k].dst);
    tallies[{edge_bins[k], u, v}] += 1.0;
    if (!cfg.directed_edges) tallies[{edge_bins[k], v, u}] += 1.0;
  }
  std::vector<NeighborTally> per_bin(static_cast<std::size_t>(bins.n),
                                     NeighborTally(n));
  for (const auto& [key, count] : tallies) {
    const auto [t, u, v] = key;
    snapshots[t].edges.lists[u].push_back(v);
    per_bin[t][u].push_back(count);
  }
  if (cfg.degree_cap > 0) {
    for (int t = 0; t < bins.n; ++t) {
      snapshots[t] = cap_degree(std::move(snapshots[t]), cfg.degree_cap, per_bin[t]);
    }
  }

  result.graph = TemporalGraph(std::move(nodes), std::move(attributes),
                               std::move(snapshots));
  return result;
}

Snapshot cap_degree(Snapshot snapshot, int cap, const NeighborTally& tally) {
  if (cap < 1) throw ConfigError("degree cap must be >= 1");
  auto& lists = snapshot.edges.lists;
  for (std::size_t i = 0; i < lists.size(); ++i) {
    auto& nbrs = lists[i];
    if (nbrs.size() <= static_cast<std::size_t>(cap)) continue;
    if (i >= tally.size() || tally[i].size() != nbrs.size()) {
      throw InvariantError("neighbor tally misaligned with adjacency");
    }
    std::vector<std::size_t> order(nbrs.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (tally[i][a] != tally[i][b]) return tally[i][a] > tally[i][b];
      return nbrs[a] < nbrs[b];
    });
    std::vector<NodeId> kept;
    kept.reserve(static_cast<std::size_t>(cap));
    for (int k = 0; k < cap; ++k) kept.push_back(nbrs[order[static_cast<std::size_t>(k)]]);
    std::sort(kept.begin(), kept.end());
    nbrs = std::move(kept);
  }
  return snapshot;
}

std::vector<LabelMapEntry> read_labelmap_entries(
    const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  return parse_lines<LabelMapEntry>(in, path.string(), [](const json& obj) {
    LabelMapEntry e;
    e.attr = json_id(obj, "attr");
    auto it = obj.find("labels");
    if (it == obj.end() || !it->is_array()) {
      throw DataError("field 'labels' must be an array");
    }
    for (const auto& l : *it) {
      if (l.is_string()) {
        e.labels.push_back(l.get<std::string>());
      } else if (l.is_number_integer()) {
        e.labels.push_back(std::to_string(l.get<long long>()));
      } else {
        throw DataError("labels must be string ids");
      }
    }
    return e;
  });
}

LabelMap build_labelmap(const std::vector<LabelMapEntry>& entries,
                        const Dictionary& attributes, int threshold) {
  std::set<std::string> names;
  for (const auto& e : entries) names.insert(e.labels.begin(), e.labels.end());
  Dictionary labels({names.begin(), names.end()});
  std::vector<std::vector<LabelId>> attr_to_labels(attributes.size());
  for (const auto& e : entries) {
    auto a = attributes.find(e.attr);
    if (!a) continue;
    for (const auto& l : e.labels) attr_to_labels[*a].push_back(labels.at(l));
  }
  return LabelMap::mapped(std::move(labels), std::move(attr_to_labels), threshold);
}

void write_graph(std::ostream& out, const TemporalGraph& tg, const LabelMap& lm) {
  detail::BinaryWriter w(out);
  w.bytes(kGraphMagic);
  w.strings(tg.nodes().names());
  w.strings(tg.attributes().names());
  w.u8(lm.is_identity() ? 1 : 0);
  if (!lm.is_identity()) {
    w.strings(lm.labels().names());
    if (lm.attr_to_labels().size() != tg.num_attributes()) {
      throw InvariantError("label map does not cover the attribute dictionary");
    }
    for (const auto& ls : lm.attr_to_labels()) w.delta_ids(ls);
  }
  w.varint(tg.num_steps());
  std::vector<std::uint32_t> ids;
  for (const auto& s : tg.snapshots()) {
    for (const auto& v : s.attrs) {
      ids.clear();
      for (const auto& e : v.entries()) ids.push_back(e.id);
      w.delta_ids(ids);
      for (const auto& e : v.entries()) w.f64(e.weight);
    }
    for (const auto& l : s.edges.lists) w.delta_ids(l);
  }
  if (!out) throw DataError("write failed");
}

void write_graph(const std::filesystem::path& path, const TemporalGraph& tg,
                 const LabelMap& lm) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write_graph(out, tg, lm);
}

GraphBundle read_graph(std::istream& in) {
  detail::BinaryReader r(in, "graph container");
  r.expect_magic(kGraphMagic);
  Dictionary nodes(r.strings());
  Dictionary attributes(r.strings());
  const std::uint8_t identity = r.u8();
  if (identity > 1) r.fail("bad label mode flag");
  LabelMap lm;
  if (identity == 1) {
    lm = LabelMap::identity(attributes);
  } else {
    Dictionary labels(r.strings());
    std::vector<std::vector<LabelId>> attr_to_labels(attributes.size());
    for (auto& ls : attr_to_labels) ls = r.delta_ids(labels.size());
    lm = LabelMap::mapped(std::move(labels), std::move(attr_to_labels), 0);
  }
  const auto steps = r.count(1u << 24);
  const std::size_t n = nodes.size();
  std::vector<Snapshot> snapshots(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Snapshot& s = snapshots[t];
    s.t = static_cast<int>(t);
    s.attrs.resize(n);
    s.edges = Adjacency(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ids = r.delta_ids(attributes.size());
      std::vector<SparseVector::Entry> entries(ids.size());
      for (std::size_t k = 0; k < ids.size(); ++k) entries[k] = {ids[k], r.f64()};
      try {
        s.attrs[i] = SparseVector::from_sorted(std::move(entries));
      } catch (const InvariantError& e) {
        r.fail(e.what());
      }
    }
    for (std::size_t i = 0; i < n; ++i) s.edges.lists[i] = r.delta_ids(n);
  }
  r.expect_end();
  return {TemporalGraph(std::move(nodes), std::move(attributes), std::move(snapshots)),
          std::move(lm)};
}

GraphBundle read_graph(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_graph(in);
}

}  // namespace pshadow
