// pshadow command line: one subcommand per pipeline stage plus `run`.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pshadow/errors.hpp"
#include "pshadow/graph_induction.hpp"
#include "pshadow/ingestion.hpp"
#include "pshadow/interval_engine.hpp"
#include "pshadow/parallel.hpp"
#include "pshadow/pipeline.hpp"
#include "pshadow/shadow.hpp"
#include "pshadow/synth.hpp"

namespace fs = std::filesystem;
using namespace pshadow;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

struct Common {
  std::string config;
  unsigned threads = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "pipeline config (JSON)");
  cmd->add_option("--threads", c.threads, "worker cap (default: PSHADOW_THREADS or all cores)");
}

PipelineConfig load(const Common& c) {
  return c.config.empty() ? PipelineConfig{} : load_config(c.config);
}

fs::path manifest_for(const fs::path& out) {
  fs::path p = out;
  p += ".manifest.json";
  return p;
}

// Shadow-related overrides shared by shadow, profile, lagdiff, predict and report.
struct ShadowFlags {
  std::optional<int> s;
  std::string eta;
  std::optional<double> eta_percentile;

  void add(CLI::App* cmd) {
    cmd->add_option("--s", s, "cohort completeness horizon");
    cmd->add_option("--eta", eta, "auto or a percentile");
    cmd->add_option("--eta-percentile", eta_percentile, "manual eta percentile");
  }

  void apply(PipelineConfig& cfg) const {
    if (s) cfg.shadow.s = *s;
    if (!eta.empty()) {
      if (eta == "auto") {
        cfg.shadow.eta_percentile.reset();
      } else {
        try {
          std::size_t used = 0;
          cfg.shadow.eta_percentile = std::stod(eta, &used);
          if (used != eta.size()) throw std::invalid_argument(eta);
        } catch (const std::logic_error&) {
          throw ConfigError("--eta must be auto or a number");
        }
      }
    }
    if (eta_percentile) cfg.shadow.eta_percentile = *eta_percentile;
    cfg.shadow.validate();
  }
};

std::vector<int> parse_xs(const std::string& text) {
  std::vector<int> xs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item == "...") continue;
    try {
      std::size_t used = 0;
      xs.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("--xs expects comma-separated integers");
    }
  }
  return xs;
}

ShadowAnalysis analyze(const fs::path& intervals, const PipelineConfig& cfg,
                       IntervalStore* store_out = nullptr) {
  IntervalStore store = read_interval_store(intervals);
  ShadowAnalysis a = analyze_shadows(store, cfg.shadow);
  for (const auto& w : a.warnings) std::clog << "pshadow: warning: " << w << '\n';
  if (store_out) *store_out = std::move(store);
  return a;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"privacy shadow measurement and prediction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "pshadow 1.0.0");

  // ingest
  Common ingest_c;
  std::string ingest_events, ingest_edges, ingest_labelmap, ingest_out = "graph.bin";
  auto* ingest_cmd = app.add_subcommand("ingest", "bin event streams into graph.bin");
  add_common(ingest_cmd, ingest_c);
  ingest_cmd->add_option("--events", ingest_events, "attribute events (JSONL, optionally gzipped)");
  ingest_cmd->add_option("--edges", ingest_edges, "edge events (JSONL)");
  ingest_cmd->add_option("--labelmap", ingest_labelmap, "attribute to label map (JSONL)");
  ingest_cmd->add_option("--out", ingest_out, "output graph.bin");

  // induce
  Common induce_c;
  std::string induce_graph_path, induce_out = "adj.bin";
  std::optional<int> induce_t0;
  auto* induce_cmd = app.add_subcommand("induce", "build the frozen graph for one window");
  add_common(induce_cmd, induce_c);
  induce_cmd->add_option("--graph", induce_graph_path, "graph.bin")->required();
  induce_cmd->add_option("--t0", induce_t0, "last timestep of the window (default: T)");
  induce_cmd->add_option("--out", induce_out, "output adj.bin");

  // measure
  Common measure_c;
  std::string measure_graph, measure_out = "intervals.bin", measure_csv;
  auto* measure_cmd = app.add_subcommand("measure", "score every prediction interval");
  add_common(measure_cmd, measure_c);
  measure_cmd->add_option("--graph", measure_graph, "graph.bin")->required();
  measure_cmd->add_option("--out", measure_out, "output intervals.bin");
  measure_cmd->add_option("--csv", measure_csv, "also export node,t_start,delta,score");

  // shadow / profile / lagdiff
  Common shadow_c, profile_c, lag_c;
  ShadowFlags shadow_f, profile_f, lag_f;
  std::string shadow_in, shadow_out = "shadow.csv";
  std::string profile_in, profile_out = "profile.csv";
  std::string lag_in, lag_out = "lag.csv";
  std::optional<int> lag_delta;
  auto* shadow_cmd = app.add_subcommand("shadow", "privacy shadow per cohort node");
  add_common(shadow_cmd, shadow_c);
  shadow_f.add(shadow_cmd);
  shadow_cmd->add_option("--intervals", shadow_in, "intervals.bin")->required();
  shadow_cmd->add_option("--out", shadow_out, "output shadow.csv");
  auto* profile_cmd = app.add_subcommand("profile", "histogram of shadow lengths");
  add_common(profile_cmd, profile_c);
  profile_f.add(profile_cmd);
  profile_cmd->add_option("--intervals", profile_in, "intervals.bin")->required();
  profile_cmd->add_option("--out", profile_out, "output profile.csv");
  auto* lag_cmd = app.add_subcommand("lagdiff", "mean percentile change after delta steps");
  add_common(lag_cmd, lag_c);
  lag_f.add(lag_cmd);
  lag_cmd->add_option("--intervals", lag_in, "intervals.bin")->required();
  lag_cmd->add_option("--delta", lag_delta, "lag in timesteps");
  lag_cmd->add_option("--out", lag_out, "output lag.csv");

  // predict
  Common predict_c;
  ShadowFlags predict_f;
  std::string predict_in, predict_shadow, predict_regressor, predict_xs, predict_out = "mae.csv";
  std::optional<int> predict_resamples;
  auto* predict_cmd = app.add_subcommand("predict", "MAE of shadow-length prediction");
  add_common(predict_cmd, predict_c);
  predict_f.add(predict_cmd);
  predict_cmd->add_option("--intervals", predict_in, "intervals.bin")->required();
  predict_cmd->add_option("--shadow", predict_shadow, "shadow.csv")->required();
  predict_cmd->add_option("--regressor", predict_regressor,
                          "constant-median | knn | curvefit | external:CMD");
  predict_cmd->add_option("--xs", predict_xs, "observation lengths, e.g. 1,2,5,10");
  predict_cmd->add_option("--resamples", predict_resamples, "train/test resamples");
  predict_cmd->add_option("--out", predict_out, "output mae.csv");

  // synth
  std::string synth_config, synth_dir = "synth";
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic event stream");
  synth_cmd->add_option("--config", synth_config, "synth config, or a pipeline config with a synth section");
  synth_cmd->add_option("--out-dir", synth_dir, "output directory");

  // run
  Common run_c;
  std::string run_dir;
  bool run_resume = false;
  auto* run_cmd = app.add_subcommand("run", "whole pipeline");
  add_common(run_cmd, run_c);
  run_cmd->add_option("--out-dir", run_dir, "overrides output_dir");
  run_cmd->add_flag("--resume", run_resume, "reuse existing stage artifacts");

  // report
  Common report_c;
  ShadowFlags report_f;
  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "deltas.csv and summary.json from artifacts");
  add_common(report_cmd, report_c);
  report_f.add(report_cmd);
  report_cmd->add_option("--dir", report_dir, "artifact directory (default: output_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*ingest_cmd) {
      auto cfg = load(ingest_c);
      if (!ingest_events.empty()) cfg.inputs.events = ingest_events;
      if (!ingest_edges.empty()) cfg.inputs.edges = ingest_edges;
      if (!ingest_labelmap.empty()) cfg.inputs.labelmap = ingest_labelmap;
      auto r = ingest(cfg.inputs, cfg.binning, cfg.label_threshold);
      write_atomically(ingest_out, [&](std::ostream& out) {
        write_graph(out, r.bundle.graph, r.bundle.labels);
      });
      write_manifest(manifest_for(ingest_out), cfg, "ingest", 1);
      std::clog << "pshadow: " << r.bundle.graph.num_nodes() << " nodes, "
                << r.bundle.graph.num_steps() << " steps, skipped "
                << r.skipped_attribute_events << " attribute and " << r.skipped_edge_events
                << " edge events\n";
    } else if (*induce_cmd) {
      const auto cfg = load(induce_c);
      const unsigned threads = resolve_threads(induce_c.threads ? induce_c.threads : cfg.threads);
      const auto bundle = read_graph(induce_graph_path);
      const int t0 = induce_t0.value_or(bundle.graph.last_step());
      const auto adj = induce_graph(bundle.graph, cfg.measure.induction, t0, threads);
      write_atomically(induce_out, [&](std::ostream& out) { write_adjacency(out, adj); });
      write_manifest(manifest_for(induce_out), cfg, "induce", threads);
    } else if (*measure_cmd) {
      const auto cfg = load(measure_c);
      const unsigned threads = resolve_threads(measure_c.threads ? measure_c.threads : cfg.threads);
      auto bundle = read_graph(measure_graph);
      bundle.labels.set_threshold(cfg.label_threshold);
      const auto store = measure(bundle.graph, bundle.labels, cfg.measure, threads);
      write_atomically(measure_out, [&](std::ostream& out) { write_interval_store(out, store); });
      if (!measure_csv.empty()) {
        write_atomically(measure_csv, [&](std::ostream& out) { write_interval_csv(out, store); });
      }
      write_manifest(manifest_for(measure_out), cfg, "measure", threads);
    } else if (*shadow_cmd) {
      auto cfg = load(shadow_c);
      shadow_f.apply(cfg);
      IntervalStore store;
      const auto a = analyze(shadow_in, cfg, &store);
      write_atomically(shadow_out,
                       [&](std::ostream& out) { write_shadow_csv(out, a, store.node_names); });
      write_manifest(manifest_for(shadow_out), cfg, "shadow", 1);
      std::cout << summary_json(a, cfg.shadow).dump(2) << '\n';
    } else if (*profile_cmd) {
      auto cfg = load(profile_c);
      profile_f.apply(cfg);
      const auto a = analyze(profile_in, cfg);
      const auto bins = shadow_profile(a.records);
      write_atomically(profile_out, [&](std::ostream& out) { write_profile_csv(out, bins); });
      write_manifest(manifest_for(profile_out), cfg, "profile", 1);
    } else if (*lag_cmd) {
      auto cfg = load(lag_c);
      lag_f.apply(cfg);
      if (lag_delta) cfg.shadow.lag_delta = *lag_delta;
      cfg.shadow.validate();
      const auto a = analyze(lag_in, cfg);
      const auto buckets = lag_diff_curve(a.ranks, cfg.shadow.lag_delta);
      write_atomically(lag_out, [&](std::ostream& out) { write_lag_csv(out, buckets); });
      write_manifest(manifest_for(lag_out), cfg, "lagdiff", 1);
    } else if (*predict_cmd) {
      auto cfg = load(predict_c);
      predict_f.apply(cfg);
      if (!predict_regressor.empty()) {
        const int k = cfg.predictor.regressor.k;
        const auto fit = cfg.predictor.regressor.fit;
        cfg.predictor.regressor = parse_regressor(predict_regressor);
        cfg.predictor.regressor.k = k;
        cfg.predictor.regressor.fit = fit;
      }
      if (!predict_xs.empty()) cfg.predictor.xs = parse_xs(predict_xs);
      if (predict_resamples) cfg.predictor.resamples = *predict_resamples;
      cfg.predictor.validate();
      const unsigned threads = resolve_threads(predict_c.threads ? predict_c.threads : cfg.threads);
      IntervalStore store;
      const auto a = analyze(predict_in, cfg, &store);
      const auto records = read_shadow_csv(predict_shadow, store.node_names);
      fs::path work = fs::path(predict_out).parent_path() / "regressor";
      const auto rows = run_prediction(a, records, cfg.predictor, work, threads);
      write_atomically(predict_out, [&](std::ostream& out) { write_mae_csv(out, rows); });
      write_manifest(manifest_for(predict_out), cfg, "predict", threads);
    } else if (*synth_cmd) {
      SynthConfig sc;
      if (!synth_config.empty()) {
        std::ifstream in(synth_config);
        if (!in) throw ConfigError("cannot open config " + synth_config);
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
          throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        sc = j.contains("synth") ? load_config(synth_config).synth.value_or(SynthConfig{})
                                 : synth_config_from_json(j);
      }
      write_synth_files(generate(sc), synth_dir);
      // Ready-to-run pipeline config over the generated files.
      PipelineConfig pc = config_for_synth(sc, synth_dir);
      pc.synth.reset();
      const fs::path cfg_path = fs::path(synth_dir) / "config.json";
      write_atomically(cfg_path,
                       [&](std::ostream& out) { out << config_to_json(pc).dump(2) << '\n'; });
      nlohmann::json manifest{{"command", "synth"}, {"seed", sc.seed},
                              {"synth", synth_config_to_json(sc)}};
      write_atomically(fs::path(synth_dir) / "manifest.json",
                       [&](std::ostream& out) { out << manifest.dump(2) << '\n'; });
    } else if (*run_cmd) {
      auto cfg = load(run_c);
      if (!run_dir.empty()) cfg.output_dir = run_dir;
      const auto summary = run_pipeline(cfg, {run_resume, run_c.threads});
      std::cout << summary.dump(2) << '\n';
    } else if (*report_cmd) {
      auto cfg = load(report_c);
      report_f.apply(cfg);
      const fs::path dir = report_dir.empty() ? fs::path(cfg.output_dir) : fs::path(report_dir);
      const auto summary = emit_report(dir, cfg);
      write_manifest(dir / "manifest.report.json", cfg, "report", 1);
      std::cout << summary.dump(2) << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "pshadow: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "pshadow: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::out_of_range& e) {
    std::cerr << "pshadow: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "pshadow: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "pshadow: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return EXIT_SUCCESS;
}
