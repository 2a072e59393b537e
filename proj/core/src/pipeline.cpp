#include "pshadow/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "pshadow/errors.hpp"
#include "pshadow/format.hpp"
#include "pshadow/graph_induction.hpp"
#include "pshadow/parallel.hpp"

namespace pshadow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

// Reads one config section and rejects keys it does not know.
class Section {
 public:
  Section(const json& j, std::string name) : name_(std::move(name)) {
    if (j.is_null()) return;
    if (!j.is_object()) throw ConfigError(name_ + " must be an object");
    obj_ = &j;
  }

  bool has(const char* key) const { return obj_ && obj_->contains(key); }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    if (!obj_ || !obj_->contains(key)) return;
    try {
      out = obj_->at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path(key) + " has the wrong type");
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.push_back(key);
    if (!obj_ || !obj_->contains(key)) return;
    const auto& v = obj_->at(key);
    if (v.is_null()) {
      out.reset();
      return;
    }
    try {
      out = v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path(key) + " has the wrong type");
    }
  }

  const json* raw(const char* key) {
    seen_.push_back(key);
    if (!obj_ || !obj_->contains(key)) return nullptr;
    return &obj_->at(key);
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& [key, value] : obj_->items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
        throw ConfigError("unknown config key " + path(key));
      }
    }
  }

  std::string path(const std::string& key) const {
    return name_.empty() ? key : name_ + "." + key;
  }

 private:
  std::string name_;
  const json* obj_ = nullptr;
  std::vector<std::string> seen_;
};

const json& child(const json& j, const char* key) {
  static const json null_json;
  return j.is_object() && j.contains(key) ? j.at(key) : null_json;
}

std::string regime_name(SynthRegime r) {
  switch (r) {
    case SynthRegime::kStatic: return "static";
    case SynthRegime::kDrift: return "drift";
    case SynthRegime::kReshuffle: return "reshuffle";
  }
  return "static";
}

SynthRegime parse_regime(const std::string& s) {
  if (s == "static") return SynthRegime::kStatic;
  if (s == "drift") return SynthRegime::kDrift;
  if (s == "reshuffle") return SynthRegime::kReshuffle;
  throw ConfigError("synth.regime must be static, drift or reshuffle");
}

std::string regressor_text(const RegressorSpec& spec) {
  return spec.kind == "external" ? "external:" + spec.command : spec.kind;
}

json number_or_null(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

// Splits one CSV line, honouring double-quoted fields.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  return out;
}

void log_stage(const std::string& name, const std::string& what) {
  std::clog << "pshadow: " << name << ": " << what << '\n';
}

// Runs one stage, prefixing any failure with the stage name.
template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError("stage " + name + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError("stage " + name + ": " + e.what());
  } catch (const std::out_of_range& e) {
    throw DataError("stage " + name + ": " + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError("stage " + name + ": " + e.what());
  }
}

bool reuse(const RunOptions& opts, const fs::path& artifact) {
  return opts.resume && fs::exists(artifact);
}

}  // namespace

void PredictorConfig::validate() const {
  regressor.validate();
  if (resamples < 1) throw ConfigError("predictor.resamples must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("predictor.train_fraction must be in (0, 1)");
  }
  for (int x : xs) {
    if (x < 0) throw ConfigError("predictor.xs entries must be >= 0");
  }
}

void PipelineConfig::validate() const {
  binning.validate();
  if (label_threshold < 0) throw ConfigError("labels.threshold must be >= 0");
  measure.validate();
  shadow.validate();
  predictor.validate();
  if (synth) synth->validate();
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c;
  Section s(j, "synth");
  s.get("n_nodes", c.n_nodes);
  s.get("n_attrs", c.n_attrs);
  s.get("n_labels", c.n_labels);
  s.get("n_steps", c.n_steps);
  s.get("n_communities", c.n_communities);
  std::string regime = regime_name(c.regime);
  s.get("regime", regime);
  c.regime = parse_regime(regime);
  s.get("rho", c.rho);
  s.get("attrs_per_step", c.attrs_per_step);
  s.get("dirichlet_alpha", c.dirichlet_alpha);
  s.get("background", c.background);
  s.get("seed", c.seed);
  s.finish();
  c.validate();
  return c;
}

json synth_config_to_json(const SynthConfig& c) {
  return json{{"n_nodes", c.n_nodes},
              {"n_attrs", c.n_attrs},
              {"n_labels", c.n_labels},
              {"n_steps", c.n_steps},
              {"n_communities", c.n_communities},
              {"regime", regime_name(c.regime)},
              {"rho", c.rho},
              {"attrs_per_step", c.attrs_per_step},
              {"dirichlet_alpha", c.dirichlet_alpha},
              {"background", c.background},
              {"seed", c.seed}};
}

PipelineConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig c;
  Section top(j, "");

  Section in(child(j, "inputs"), "inputs");
  top.raw("inputs");
  in.get("events", c.inputs.events);
  in.get("edges", c.inputs.edges);
  in.get("labelmap", c.inputs.labelmap);
  in.finish();

  Section b(child(j, "binning"), "binning");
  top.raw("binning");
  b.get_optional("n_intervals", c.binning.n_intervals);
  b.get("bin_edges", c.binning.bin_edges);
  b.get_optional("t_min", c.binning.t_min);
  b.get_optional("t_max", c.binning.t_max);
  std::string oor = "skip";
  b.get("out_of_range", oor);
  if (oor == "skip") {
    c.binning.out_of_range = OutOfRangePolicy::kSkip;
  } else if (oor == "fail") {
    c.binning.out_of_range = OutOfRangePolicy::kFail;
  } else {
    throw ConfigError("binning.out_of_range must be skip or fail");
  }
  b.get("degree_cap", c.binning.degree_cap);
  b.get("directed_edges", c.binning.directed_edges);
  b.finish();

  Section l(child(j, "labels"), "labels");
  top.raw("labels");
  l.get("threshold", c.label_threshold);
  l.finish();

  Section ind(child(j, "induction"), "induction");
  top.raw("induction");
  std::string mode = "knn";
  ind.get("mode", mode);
  if (mode == "knn") {
    c.measure.induction.mode = InductionMode::kKnn;
  } else if (mode == "explicit-union") {
    c.measure.induction.mode = InductionMode::kExplicitUnion;
  } else {
    throw ConfigError("induction.mode must be knn or explicit-union");
  }
  ind.get("k", c.measure.induction.k);
  ind.get("window", c.measure.induction.window);
  ind.finish();

  Section m(child(j, "model"), "model");
  top.raw("model");
  m.get("bootstrap_p", c.measure.model.bootstrap_p);
  m.get("n_realizations", c.measure.model.n_realizations);
  m.get("pop_k", c.measure.model.pop_k);
  m.get("seed", c.measure.model.seed);
  m.get("baselines", c.measure.baselines);
  m.finish();

  Section sh(child(j, "shadow"), "shadow");
  top.raw("shadow");
  sh.get("s", c.shadow.s);
  if (const json* eta = sh.raw("eta")) {
    if (eta->is_string()) {
      if (eta->get<std::string>() != "auto") {
        throw ConfigError("shadow.eta must be \"auto\" or a percentile");
      }
      c.shadow.eta_percentile.reset();
    } else if (eta->is_number()) {
      c.shadow.eta_percentile = eta->get<double>();
    } else {
      throw ConfigError("shadow.eta must be \"auto\" or a percentile");
    }
  }
  std::string stat = "mean";
  sh.get("eta_stat", stat);
  if (stat == "mean") {
    c.shadow.eta_stat = EtaStat::kMean;
  } else if (stat == "median") {
    c.shadow.eta_stat = EtaStat::kMedian;
  } else {
    throw ConfigError("shadow.eta_stat must be mean or median");
  }
  sh.get("t_ref", c.shadow.t_ref);
  sh.get("lag_delta", c.shadow.lag_delta);
  sh.finish();

  Section p(child(j, "predictor"), "predictor");
  top.raw("predictor");
  std::string regressor = regressor_text(c.predictor.regressor);
  p.get("regressor", regressor);
  c.predictor.regressor = parse_regressor(regressor);
  p.get("knn_k", c.predictor.regressor.k);
  p.get("exponential_amplitude", c.predictor.regressor.fit.exponential_amplitude);
  p.get("xs", c.predictor.xs);
  p.get("resamples", c.predictor.resamples);
  p.get("train_fraction", c.predictor.train_fraction);
  p.get("seed", c.predictor.seed);
  p.finish();

  if (const json* sy = top.raw("synth"); sy && !sy->is_null()) {
    c.synth = synth_config_from_json(*sy);
    if (!c.binning.n_intervals && c.binning.bin_edges.empty()) {
      const BinningConfig sb = synth_binning(*c.synth);
      c.binning.n_intervals = sb.n_intervals;
      c.binning.t_min = sb.t_min;
      c.binning.t_max = sb.t_max;
    }
    // Synthetic nodes hold few attributes per label; keep every label.
    if (!l.has("threshold")) c.label_threshold = 1;
  }
  top.get("output_dir", c.output_dir);
  top.get("threads", c.threads);
  top.finish();

  c.validate();
  return c;
}

json config_to_json(const PipelineConfig& c) {
  json binning{{"bin_edges", c.binning.bin_edges},
               {"out_of_range",
                c.binning.out_of_range == OutOfRangePolicy::kSkip ? "skip" : "fail"},
               {"degree_cap", c.binning.degree_cap},
               {"directed_edges", c.binning.directed_edges}};
  binning["n_intervals"] = c.binning.n_intervals ? json(*c.binning.n_intervals) : json(nullptr);
  binning["t_min"] = c.binning.t_min ? json(*c.binning.t_min) : json(nullptr);
  binning["t_max"] = c.binning.t_max ? json(*c.binning.t_max) : json(nullptr);

  json j{
      {"inputs",
       {{"events", c.inputs.events}, {"edges", c.inputs.edges}, {"labelmap", c.inputs.labelmap}}},
      {"binning", binning},
      {"labels", {{"threshold", c.label_threshold}}},
      {"induction",
       {{"mode", c.measure.induction.mode == InductionMode::kKnn ? "knn" : "explicit-union"},
        {"k", c.measure.induction.k},
        {"window", c.measure.induction.window}}},
      {"model",
       {{"bootstrap_p", c.measure.model.bootstrap_p},
        {"n_realizations", c.measure.model.n_realizations},
        {"pop_k", c.measure.model.pop_k},
        {"seed", c.measure.model.seed},
        {"baselines", c.measure.baselines}}},
      {"shadow",
       {{"s", c.shadow.s},
        {"eta", c.shadow.eta_percentile ? json(*c.shadow.eta_percentile) : json("auto")},
        {"eta_stat", c.shadow.eta_stat == EtaStat::kMean ? "mean" : "median"},
        {"t_ref", c.shadow.t_ref},
        {"lag_delta", c.shadow.lag_delta}}},
      {"predictor",
       {{"regressor", regressor_text(c.predictor.regressor)},
        {"knn_k", c.predictor.regressor.k},
        {"exponential_amplitude", c.predictor.regressor.fit.exponential_amplitude},
        {"xs", c.predictor.xs},
        {"resamples", c.predictor.resamples},
        {"train_fraction", c.predictor.train_fraction},
        {"seed", c.predictor.seed}}},
      {"output_dir", c.output_dir},
      {"threads", c.threads}};
  j["synth"] = c.synth ? synth_config_to_json(*c.synth) : json(nullptr);
  return j;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

PipelineConfig config_for_synth(const SynthConfig& synth, const fs::path& dir) {
  PipelineConfig c;
  c.synth = synth;
  c.binning = synth_binning(synth);
  c.inputs.events = (dir / "events.jsonl").string();
  c.inputs.labelmap = (dir / "labelmap.jsonl").string();
  c.label_threshold = 1;
  return c;
}

IngestResult ingest(const InputPaths& inputs, const BinningConfig& binning,
                    int label_threshold) {
  if (inputs.events.empty()) throw ConfigError("inputs.events is required");
  const auto attr_events = read_attribute_events(inputs.events);
  std::vector<EdgeEvent> edge_events;
  if (!inputs.edges.empty()) edge_events = read_edge_events(inputs.edges);
  auto binned = bin_events(attr_events, edge_events, binning);
  LabelMap lm = inputs.labelmap.empty()
                    ? LabelMap::identity(binned.graph.attributes(), label_threshold)
                    : build_labelmap(read_labelmap_entries(inputs.labelmap),
                                     binned.graph.attributes(), label_threshold);
  return {{std::move(binned.graph), std::move(lm)},
          binned.skipped_attribute_events,
          binned.skipped_edge_events};
}

void write_shadow_csv(std::ostream& out, const ShadowAnalysis& a,
                      const std::vector<std::string>& node_names) {
  out << "node,shadow_length,initial_percentile\n";
  for (const auto& r : a.records) {
    out << csv_field(node_names.at(r.node)) << ',' << r.shadow_length << ',';
    if (std::isfinite(r.initial_percentile)) out << format_double(r.initial_percentile);
    out << '\n';
  }
}

void write_profile_csv(std::ostream& out, std::span<const ProfileBin> bins) {
  out << "shadow_length,fraction,median_percentile\n";
  for (const auto& b : bins) {
    out << b.shadow_length << ',' << format_double(b.fraction) << ','
        << format_optional(b.median_percentile) << '\n';
  }
}

void write_lag_csv(std::ostream& out, std::span<const LagBucket> buckets) {
  out << "percentile_bucket,mean_change,count\n";
  for (const auto& b : buckets) {
    out << b.bucket << ',' << format_double(b.mean_change) << ',' << b.count << '\n';
  }
}

void write_mae_csv(std::ostream& out, std::span<const MaeRow> rows) {
  out << "x,mean_mae,std_mae,resamples\n";
  for (const auto& r : rows) {
    out << r.x << ',' << format_double(r.mean_mae) << ',' << format_double(r.std_mae) << ','
        << r.per_resample.size() << '\n';
  }
}

void write_deltas_csv(std::ostream& out, const IntervalStore& store,
                      const ShadowAnalysis& a) {
  // expected[series][cohort index][delta]
  std::array<std::vector<const NodeTrajectory*>, kSeriesCount> by_series;
  std::array<std::vector<NodeTrajectory>, kSeriesCount> owned;
  for (Series s : kAllSeries) {
    const int si = static_cast<int>(s);
    auto& ptrs = by_series[si];
    ptrs.assign(a.cohort.size(), nullptr);
    if (s == Series::kNetwork) {
      for (std::size_t i = 0; i < a.trajectories.size(); ++i) ptrs[i] = &a.trajectories[i];
      continue;
    }
    if (!store.has_baselines) continue;
    owned[si] = compute_trajectories(store, s);
    for (const auto& tr : owned[si]) {
      const auto it = std::lower_bound(a.cohort.begin(), a.cohort.end(), tr.node);
      if (it != a.cohort.end() && *it == tr.node) {
        ptrs[static_cast<std::size_t>(it - a.cohort.begin())] = &tr;
      }
    }
  }

  out << "delta,node";
  for (Series s : kAllSeries) out << ',' << series_name(s);
  out << '\n';
  for (int d = 0; d <= a.last_step; ++d) {
    for (std::size_t i = 0; i < a.cohort.size(); ++i) {
      std::array<Score, kSeriesCount> row;
      bool any = false;
      for (int si = 0; si < kSeriesCount; ++si) {
        const NodeTrajectory* tr = by_series[si][i];
        if (tr && d < static_cast<int>(tr->expected.size())) {
          row[si] = tr->expected[static_cast<std::size_t>(d)];
        }
        any = any || row[si].has_value();
      }
      if (!any) continue;
      out << d << ',' << csv_field(store.node_names.at(a.cohort[i]));
      for (const auto& v : row) out << ',' << format_optional(v);
      out << '\n';
    }
  }
}

std::vector<ShadowRecord> read_shadow_csv(const fs::path& path,
                                          const std::vector<std::string>& node_names) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::unordered_map<std::string, NodeId> ids;
  for (std::size_t i = 0; i < node_names.size(); ++i) ids.emplace(node_names[i], static_cast<NodeId>(i));

  std::string line;
  if (!std::getline(in, line) || split_csv(line) != std::vector<std::string>{
                                     "node", "shadow_length", "initial_percentile"}) {
    throw DataError(path.string() + ": expected header node,shadow_length,initial_percentile");
  }
  std::vector<ShadowRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (f.size() != 3) throw DataError(where + ": expected 3 fields");
    const auto it = ids.find(f[0]);
    if (it == ids.end()) throw DataError(where + ": unknown node '" + f[0] + "'");
    ShadowRecord r;
    r.node = it->second;
    try {
      std::size_t used = 0;
      r.shadow_length = std::stoi(f[1], &used);
      if (used != f[1].size()) throw std::invalid_argument("trailing");
      r.initial_percentile =
          f[2].empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(f[2]);
    } catch (const std::logic_error&) {
      throw DataError(where + ": malformed number");
    }
    out.push_back(r);
  }
  std::sort(out.begin(), out.end(),
            [](const ShadowRecord& x, const ShadowRecord& y) { return x.node < y.node; });
  return out;
}

std::vector<int> resolve_xs(const PredictorConfig& cfg, int last_step) {
  if (!cfg.xs.empty()) {
    for (int x : cfg.xs) {
      if (x > last_step) {
        throw ConfigError("predictor.xs entry " + std::to_string(x) +
                          " exceeds the last timestep " + std::to_string(last_step));
      }
    }
    return cfg.xs;
  }
  std::vector<int> xs(static_cast<std::size_t>(std::max(last_step, 0)));
  std::iota(xs.begin(), xs.end(), 1);
  return xs;
}

std::vector<MaeRow> run_prediction(const ShadowAnalysis& a,
                                   std::span<const ShadowRecord> records,
                                   const PredictorConfig& cfg, const fs::path& work_dir,
                                   unsigned threads) {
  cfg.validate();
  const auto samples = make_samples(a.ranks, records);
  if (samples.size() < 2) {
    throw DataError("prediction needs at least 2 cohort nodes with shadow lengths");
  }
  const auto xs = resolve_xs(cfg, a.last_step);
  const auto factory =
      make_regressor_factory(cfg.regressor, a.eta.percentile, a.last_step, work_dir);
  // External programs share the work directory layout; keep them serial.
  const unsigned workers = cfg.regressor.kind == "external" ? 1U : threads;
  return evaluate_mae(factory, samples, xs, cfg.resamples, cfg.seed, cfg.train_fraction,
                      workers);
}

json summary_json(const ShadowAnalysis& a, const ShadowConfig& cfg) {
  const int T = a.last_step;
  std::vector<double> lengths;
  for (const auto& r : a.records) lengths.push_back(r.shadow_length);
  std::sort(lengths.begin(), lengths.end());

  json hist = json::object();
  if (!lengths.empty()) {
    const double n = static_cast<double>(lengths.size());
    double mean = 0.0;
    for (double v : lengths) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : lengths) var += (v - mean) * (v - mean);
    var /= n;
    const std::size_t mid = lengths.size() / 2;
    const double median = lengths.size() % 2 ? lengths[mid] : 0.5 * (lengths[mid - 1] + lengths[mid]);
    const auto frac = [&](auto pred) {
      return static_cast<double>(std::count_if(lengths.begin(), lengths.end(), pred)) / n;
    };
    hist = {{"mean", mean},
            {"std", std::sqrt(var)},
            {"median", median},
            {"min", lengths.front()},
            {"max", lengths.back()},
            {"fraction_zero", frac([](double v) { return v == 0.0; })},
            {"fraction_infinite", frac([T](double v) { return v == T + 1; })}};
  }

  return json{{"last_step", T},
              {"s", cfg.s},
              {"t_ref", cfg.t_ref},
              {"cohort_size", a.cohort.size()},
              {"records", a.records.size()},
              {"excluded", a.excluded},
              {"eta",
               {{"provenance", provenance_name(a.eta.provenance)},
                {"stat", cfg.eta_stat == EtaStat::kMean ? "mean" : "median"},
                {"percentile", a.eta.percentile},
                {"score_value", number_or_null(a.eta.score_value)}}},
              {"shadow_length", hist},
              {"warnings", a.warnings}};
}

void write_manifest(const fs::path& path, const PipelineConfig& cfg,
                    const std::string& command, unsigned threads) {
  json seeds{{"model", cfg.measure.model.seed}, {"predictor", cfg.predictor.seed}};
  if (cfg.synth) seeds["synth"] = cfg.synth->seed;
  const json manifest{{"version", kVersion},
                      {"command", command},
                      {"threads", threads},
                      {"seeds", seeds},
                      {"config", config_to_json(cfg)}};
  write_atomically(path, [&](std::ostream& out) { out << manifest.dump(2) << '\n'; });
}

json emit_report(const fs::path& dir, const PipelineConfig& cfg) {
  for (const char* name : {"intervals.bin", "profile.csv", "lag.csv", "mae.csv"}) {
    if (!fs::exists(dir / name)) {
      throw DataError("report: missing artifact " + (dir / name).string());
    }
  }
  const auto store = read_interval_store(dir / "intervals.bin");
  ShadowAnalysis a;
  try {
    a = analyze_shadows(store, cfg.shadow);
  } catch (const DataError& e) {
    throw DataError(std::string("report: refusing to report: ") + e.what());
  }
  write_atomically(dir / "deltas.csv",
                   [&](std::ostream& out) { write_deltas_csv(out, store, a); });
  const json summary = summary_json(a, cfg.shadow);
  write_atomically(dir / "summary.json",
                   [&](std::ostream& out) { out << summary.dump(2) << '\n'; });
  return summary;
}

json run_pipeline(const PipelineConfig& input_cfg, const RunOptions& opts) {
  PipelineConfig cfg = input_cfg;
  cfg.validate();
  const unsigned threads = resolve_threads(opts.threads ? opts.threads : cfg.threads);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);

  if (cfg.synth) {
    const fs::path synth_dir = dir / "synth";
    const SynthConfig synth = *cfg.synth;
    cfg.inputs.events = (synth_dir / "events.jsonl").string();
    cfg.inputs.edges.clear();
    cfg.inputs.labelmap = (synth_dir / "labelmap.jsonl").string();
    const BinningConfig sb = synth_binning(synth);
    cfg.binning.n_intervals = sb.n_intervals;
    cfg.binning.bin_edges.clear();
    cfg.binning.t_min = sb.t_min;
    cfg.binning.t_max = sb.t_max;
    if (!reuse(opts, synth_dir / "events.jsonl") || !fs::exists(synth_dir / "labelmap.jsonl")) {
      stage("synth", [&] {
        log_stage("synth", "generating");
        fs::path partial = synth_dir;
        partial += ".partial";
        fs::remove_all(partial);
        write_synth_files(generate(synth), partial);
        fs::remove_all(synth_dir);
        fs::rename(partial, synth_dir);
        return 0;
      });
    }
  }
  write_manifest(dir / "manifest.json", cfg, "run", threads);

  const fs::path graph_path = dir / "graph.bin";
  GraphBundle bundle = stage("ingest", [&] {
    if (reuse(opts, graph_path)) {
      log_stage("ingest", "reusing " + graph_path.string());
      GraphBundle b = read_graph(graph_path);
      b.labels.set_threshold(cfg.label_threshold);
      return b;
    }
    log_stage("ingest", "binning events");
    auto r = ingest(cfg.inputs, cfg.binning, cfg.label_threshold);
    write_atomically(graph_path, [&](std::ostream& out) {
      write_graph(out, r.bundle.graph, r.bundle.labels);
    });
    return std::move(r.bundle);
  });

  const fs::path adj_path = dir / "adj.bin";
  if (!reuse(opts, adj_path)) {
    stage("induce", [&] {
      log_stage("induce", "frozen graph at the last timestep");
      const int t_end = bundle.graph.last_step();
      if (t_end < cfg.measure.induction.window - 1) {
        throw DataError("fewer timesteps than the induction window");
      }
      const auto adj = induce_graph(bundle.graph, cfg.measure.induction, t_end, threads);
      write_atomically(adj_path, [&](std::ostream& out) { write_adjacency(out, adj); });
      return 0;
    });
  }

  const fs::path intervals_path = dir / "intervals.bin";
  const IntervalStore store = stage("measure", [&] {
    if (reuse(opts, intervals_path)) {
      log_stage("measure", "reusing " + intervals_path.string());
      return read_interval_store(intervals_path);
    }
    log_stage("measure", "scoring intervals");
    auto s = measure(bundle.graph, bundle.labels, cfg.measure, threads);
    write_atomically(intervals_path,
                     [&](std::ostream& out) { write_interval_store(out, s); });
    return s;
  });

  const ShadowAnalysis analysis = stage("shadow", [&] {
    log_stage("shadow", "ranking the s-complete cohort");
    auto a = analyze_shadows(store, cfg.shadow);
    for (const auto& w : a.warnings) log_stage("shadow", "warning: " + w);
    if (!reuse(opts, dir / "shadow.csv")) {
      write_atomically(dir / "shadow.csv",
                       [&](std::ostream& out) { write_shadow_csv(out, a, store.node_names); });
    }
    return a;
  });

  if (!reuse(opts, dir / "profile.csv")) {
    stage("profile", [&] {
      const auto bins = shadow_profile(analysis.records);
      write_atomically(dir / "profile.csv",
                       [&](std::ostream& out) { write_profile_csv(out, bins); });
      return 0;
    });
  }
  if (!reuse(opts, dir / "lag.csv")) {
    stage("lagdiff", [&] {
      const auto buckets = lag_diff_curve(analysis.ranks, cfg.shadow.lag_delta);
      write_atomically(dir / "lag.csv", [&](std::ostream& out) { write_lag_csv(out, buckets); });
      return 0;
    });
  }
  if (!reuse(opts, dir / "mae.csv")) {
    stage("predict", [&] {
      log_stage("predict", "evaluating " + regressor_text(cfg.predictor.regressor));
      const auto rows =
          run_prediction(analysis, analysis.records, cfg.predictor, dir / "regressor", threads);
      write_atomically(dir / "mae.csv", [&](std::ostream& out) { write_mae_csv(out, rows); });
      return 0;
    });
  }
  return stage("report", [&] { return emit_report(dir, cfg); });
}

}  // namespace pshadow
