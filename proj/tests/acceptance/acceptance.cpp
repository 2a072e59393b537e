// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures. argv[1] is the pshadow CLI (for the determinism check).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pshadow/graph_induction.hpp"
#include "pshadow/interval_engine.hpp"
#include "pshadow/parallel.hpp"
#include "pshadow/pipeline.hpp"
#include "pshadow/prediction_model.hpp"
#include "pshadow/shadow.hpp"
#include "pshadow/shadow_predictor.hpp"
#include "pshadow/synth.hpp"
#include "support/test_support.hpp"

namespace fs = std::filesystem;
using namespace pshadow;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x) {
  std::ostringstream s;
  s << x;
  return s.str();
}

// Runs a check, turning exceptions into failures.
void check(const std::string& name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(name, false, std::string("exception: ") + e.what());
  }
}

unsigned threads() { return resolve_threads(0); }

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("pshadow_acceptance_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

SynthConfig world(SynthRegime regime, double rho = 0.0) {
  SynthConfig c;
  c.n_nodes = 300;
  c.n_steps = 20;
  c.regime = regime;
  c.rho = rho;
  return c;
}

GraphBundle ingest_synth(const SynthConfig& s, const std::string& name) {
  const fs::path dir = scratch(name);
  write_synth_files(generate(s), dir);
  const auto cfg = config_for_synth(s, dir);
  return ingest(cfg.inputs, cfg.binning, cfg.label_threshold).bundle;
}

IntervalStore measure_with(const GraphBundle& b, double p, bool baselines) {
  MeasureConfig m;
  m.model.bootstrap_p = p;
  m.baselines = baselines;
  return measure(b.graph, b.labels, m, threads());
}

ShadowAnalysis analyze(const IntervalStore& st, int s, std::optional<double> eta = {}) {
  ShadowConfig c;
  c.s = s;
  c.eta_percentile = eta;
  return analyze_shadows(st, c);
}

std::vector<double> mean_by_delta(const std::vector<NodeTrajectory>& trs, int max_delta) {
  std::vector<double> out;
  for (int d = 0; d <= max_delta; ++d) {
    double sum = 0.0;
    int n = 0;
    for (const auto& tr : trs) {
      if (d < static_cast<int>(tr.expected.size()) && tr.expected[d]) {
        sum += *tr.expected[d];
        ++n;
      }
    }
    out.push_back(n ? sum / n : std::nan(""));
  }
  return out;
}

// ---------------------------------------------------------------- oracles

void knn_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(2024);
  int mismatches = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 200)(gen);
    const std::size_t dim = std::uniform_int_distribution<std::size_t>(3, 60)(gen);
    std::uniform_int_distribution<int> attr(0, static_cast<int>(dim) - 1), w(1, 4), nnz(0, 6);
    std::bernoulli_distribution copy(0.2), candidate(0.9);
    std::vector<SparseVector> vecs(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && copy(gen)) {
        // exact tie: duplicate or power-of-two rescale of an earlier vector
        const auto j = std::uniform_int_distribution<std::size_t>(0, i - 1)(gen);
        vecs[i] = vecs[j].scaled(copy(gen) ? 2.0 : 1.0);
        continue;
      }
      std::vector<SparseVector::Entry> e;
      for (int q = nnz(gen); q > 0; --q) e.push_back({static_cast<AttrId>(attr(gen)), double(w(gen))});
      vecs[i] = SparseVector::from_unsorted(e);
    }
    std::vector<NodeId> cands;
    for (NodeId i = 0; i < n; ++i) {
      if (candidate(gen)) cands.push_back(i);
    }
    const int k = std::uniform_int_distribution<int>(1, 25)(gen);
    const auto got = induce_knn(vecs, cands, k, threads());
    if (got.lists != testing::brute_knn(vecs, cands, k, dim)) ++mismatches;
  }
  const double secs = seconds_since(t0);
  report("oracle-knn", mismatches == 0 && secs < 30.0,
         std::to_string(100 - mismatches) + "/100 instances identical, " + fmt(secs) + " s (< 30 s)");
}

void shadow_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(99);
  std::uniform_int_distribution<int> len(1, 60);
  std::uniform_real_distribution<double> r(0.0, 100.0);
  std::bernoulli_distribution null(0.15), coarse(0.5);
  int mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    std::vector<Percentile> ranks(static_cast<std::size_t>(len(gen)));
    for (auto& x : ranks) {
      if (!null(gen)) x = coarse(gen) ? std::round(r(gen) / 10.0) * 10.0 : r(gen);
    }
    const double eta = std::round(r(gen));
    const auto rec = privacy_shadow({0, ranks}, eta);
    const bool any = std::any_of(ranks.begin(), ranks.end(), [](auto& x) { return x.has_value(); });
    if (rec.has_value() != any || (rec && rec->shadow_length != testing::brute_shadow(ranks, eta))) {
      ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  report("oracle-shadow", mismatches == 0 && secs < 10.0,
         std::to_string(10000 - mismatches) + "/10000 trajectories identical, " + fmt(secs) +
             " s (< 10 s)");
}

void unit_oracles() {
  std::vector<std::string> bad;
  auto near = [&](const std::string& what, double got, double want, double tol) {
    if (!(std::abs(got - want) <= tol)) bad.push_back(what + "=" + fmt(got));
  };
  near("jaccard", jaccard(LabelSet{1, 2, 3}, LabelSet{2, 3, 4}), 0.5, 1e-9);
  near("jaccard-same", jaccard(LabelSet{4, 9}, LabelSet{4, 9}), 1.0, 1e-9);
  near("jaccard-disjoint", jaccard(LabelSet{1}, LabelSet{2}), 0.0, 1e-9);

  ReferenceDistribution ref;
  for (int i = 1; i <= 10; ++i) ref.values.push_back(i / 10.0);
  near("rank-mid", rank(ref, 0.55), 50.0, 1e-9);
  near("rank-tie", rank(ref, 0.5), 45.0, 1e-9);
  near("rank-low", rank(ref, 0.0), 0.0, 1e-9);
  near("rank-high", rank(ref, 2.0), 100.0, 1e-9);

  const auto tg = testing::make_graph(2, 2,
                                      {{testing::sv({{0, 1.0}}), {}},
                                       {testing::sv({{0, 2.0}, {1, 1.0}}), testing::sv({{1, 4.0}})}});
  const auto agg = aggregate_window(tg, 0, 2);
  if (!(agg[0] == testing::sv({{0, 3.0}, {1, 1.0}}))) bad.push_back("aggregate-sum");
  if (!(agg[1] == testing::sv({{1, 4.0}}))) bad.push_back("aggregate-absent");
  if (!(aggregate_window(tg, 1, 1) == tg.snapshot(1).attrs)) bad.push_back("aggregate-identity");

  std::vector<std::pair<double, double>> lin, pow_pts, exp_pts;
  for (int t = 0; t <= 10; ++t) lin.emplace_back(t, 2.0 * t + 1.0);
  for (int t = 1; t <= 20; ++t) pow_pts.emplace_back(t, -14.0 * std::pow(t, 0.42) + 90.0);
  for (int t = 0; t <= 20; ++t) exp_pts.emplace_back(t, std::exp(-0.3 * t) + 0.5);
  const auto fl = curve_fit(CurveFamily::kLinear, lin);
  near("linear-a", fl.a, 2.0, 1e-9);
  near("linear-c", fl.c, 1.0, 1e-9);
  const auto fpw = curve_fit(CurveFamily::kPower, pow_pts);
  near("power-lambda", fpw.lambda, 0.42, 1e-3);
  near("power-a", fpw.a, -14.0, 1e-3 * 14.0);
  near("power-c", fpw.c, 90.0, 1e-3 * 90.0);
  const auto fe = curve_fit(CurveFamily::kExponential, exp_pts);
  near("exp-lambda", fe.lambda, -0.3, 1e-3);
  near("exp-c", fe.c, 0.5, 1e-3);
  FitParams line{CurveFamily::kLinear, -1.0, 0.0, 100.0, 0.0};
  near("extrapolate", extrapolate_shadow(line, 30.0, 200), 70.0, 0.0);

  std::string detail = "jaccard, rank, aggregate_window, curve_fit within 1e-9 / 1e-3";
  for (const auto& b : bad) detail += " [" + b + "]";
  report("unit-oracles", bad.empty(), detail);
}

// --------------------------------------------------------------- regimes

void static_regime() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto s = world(SynthRegime::kStatic);
  const auto bundle = ingest_synth(s, "static");
  const int T = bundle.graph.last_step();

  // A1, p = 1
  const auto full = measure_with(bundle, 1.0, false);
  const auto cohort_full = s_complete_cohort(full, 10);
  std::size_t varying = 0;
  for (NodeId node : cohort_full) {
    const auto ivs = full.intervals_of(node, Series::kNetwork);
    bool constant = true;
    std::optional<double> first;
    for (const auto& iv : ivs) {
      for (const auto& v : iv.scores) {
        if (!v) continue;
        if (!first) first = *v;
        constant = constant && *v == *first;
      }
    }
    const auto tr = expect_trajectory(ivs, T);
    for (const auto& v : tr.expected) constant = constant && (!v || *v == *first);
    varying += !constant;
  }

  // A1, p = 0.5 (also feeds A2)
  const auto half = measure_with(bundle, 0.5, true);
  const auto a = analyze(half, 10);
  const auto means = mean_by_delta(a.trajectories, 10);
  const double gap = std::abs(means[10] - means[0]);
  const double secs = seconds_since(t0);
  report("A1-static",
         varying == 0 && !cohort_full.empty() && gap < 0.03 && secs < 120.0,
         "p=1: " + std::to_string(varying) + "/" + std::to_string(cohort_full.size()) +
             " cohort nodes with nonzero variance; p=0.5: |mean(10)-mean(0)|=" + fmt(gap) +
             " (< 0.03); " + fmt(secs) + " s (< 120 s)");

  // A2
  std::size_t infinite = 0;
  for (const auto& r : a.records) infinite += r.shadow_length == T + 1;
  const double frac = a.records.empty() ? 0.0 : static_cast<double>(infinite) / a.records.size();
  std::size_t non_monotone = 0;
  for (const auto& rt : a.ranks) {
    int prev = T + 2;
    for (double eta : {10.0, 30.0, 50.0, 90.0}) {
      const auto rec = privacy_shadow(rt, eta);
      if (!rec) continue;
      if (rec->shadow_length > prev) ++non_monotone;
      prev = rec->shadow_length;
    }
  }
  report("A2-static-shadows", frac >= 0.9 && non_monotone == 0,
         "eta=" + fmt(a.eta.percentile) + " (" + std::string(provenance_name(a.eta.provenance)) +
             "), " + fmt(100.0 * frac) + "% of " + std::to_string(a.records.size()) +
             " at T+1 (>= 90%); " + std::to_string(non_monotone) + " monotonicity violations");
}

void reshuffle_regime() {
  const auto s = world(SynthRegime::kReshuffle);
  const auto bundle = ingest_synth(s, "reshuffle");
  const int T = bundle.graph.last_step();
  const auto st = measure_with(bundle, 0.5, true);
  const auto a = analyze(st, 1);

  double net = 0.0, pop = 0.0;
  int n_net = 0, n_pop = 0;
  for (NodeId node : a.cohort) {
    const auto tn = expect_trajectory(st.intervals_of(node, Series::kNetwork), T);
    const auto tp = expect_trajectory(st.intervals_of(node, Series::kPop), T);
    for (int d = 1; d <= T; ++d) {
      if (tn.expected[d]) {
        net += *tn.expected[d];
        ++n_net;
      }
      if (tp.expected[d]) {
        pop += *tp.expected[d];
        ++n_pop;
      }
    }
  }
  net /= std::max(n_net, 1);
  pop /= std::max(n_pop, 1);

  std::size_t short_shadow = 0;
  for (const auto& r : a.records) short_shadow += r.shadow_length <= 1;
  const double frac = a.records.empty() ? 0.0 : static_cast<double>(short_shadow) / a.records.size();

  const auto lag = lag_diff_curve(a.ranks, 1);
  double worst = 0.0;
  int checked = 0;
  for (const auto& b : lag) {
    if (b.bucket < 60) continue;
    worst = std::max(worst, std::abs(b.mean_change + b.bucket));
    ++checked;
  }
  const bool ok = std::abs(net - pop) < 0.05 && frac >= 0.9 && checked > 0 && worst <= 10.0;
  report("A3-reshuffle", ok,
         "|network - pop| at delta>=1 = " + fmt(std::abs(net - pop)) + " (< 0.05); " +
             fmt(100.0 * frac) + "% shadow <= 1 (>= 90%); lag max |change + bucket| = " +
             fmt(worst) + " over " + std::to_string(checked) + " buckets >= 60 (<= 10)");
}

struct DriftWorld {
  GraphBundle bundle;
  IntervalStore store;
  ShadowAnalysis analysis;
};

DriftWorld drift_world() {
  const auto s = world(SynthRegime::kDrift, 0.1);
  DriftWorld w{ingest_synth(s, "drift"), {}, {}};
  w.store = measure_with(w.bundle, 0.5, true);
  w.analysis = analyze(w.store, 1);
  return w;
}

void drift_regime(const DriftWorld& w) {
  std::vector<NodeTrajectory> trs;
  for (NodeId node : w.store.measured_nodes()) {
    trs.push_back(expect_trajectory(w.store.intervals_of(node, Series::kNetwork), w.store.last_step));
  }
  const auto means = mean_by_delta(trs, 15);
  std::vector<double> deltas;
  for (int d = 0; d <= 15; ++d) deltas.push_back(d);
  const double rho = testing::spearman(deltas, means);
  report("A4-drift", rho <= -0.8,
         "spearman(delta, mean score) over 0..15 = " + fmt(rho) + " (<= -0.8); mean(0)=" +
             fmt(means[0]) + " mean(15)=" + fmt(means[15]));
}

void predictor_sanity(const DriftWorld& w) {
  const int T = w.analysis.last_step;
  const auto samples = make_samples(w.analysis.ranks, w.analysis.records);
  const std::vector<int> xs = {2, T};

  const auto knn = make_regressor_factory(parse_regressor("knn"), w.analysis.eta.percentile, T, {});
  const auto rows = evaluate_mae(knn, samples, xs, 30, 11, 0.8, threads());
  int better = 0;
  for (std::size_t r = 0; r < rows[0].per_resample.size(); ++r) {
    better += rows[1].per_resample[r] <= rows[0].per_resample[r];
  }

  std::vector<int> all_xs;
  for (int x = 0; x <= T; ++x) all_xs.push_back(x);
  const auto cm = make_regressor_factory(parse_regressor("constant-median"), 0.0, T, {});
  const auto cm_rows = evaluate_mae(cm, samples, all_xs, 30, 11, 0.8, threads());
  bool invariant = true;
  for (const auto& row : cm_rows) invariant = invariant && row.per_resample == cm_rows[0].per_resample;

  // Every fitted training node queried with its own prefix.
  std::vector<std::optional<FitParams>> params;
  for (const auto& s : samples) params.push_back(best_fit(s.feature));
  const double eta = w.analysis.eta.percentile;
  int exact = 0, queried = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!params[i]) continue;
    ++queried;
    const auto q = truncate(samples[i].feature, T / 2);
    exact += fit_transfer_predict(samples, params, q, eta, T) ==
             extrapolate_shadow(*params[i], eta, T);
  }

  report("A5-predictor", better >= 25 && invariant && queried > 0 && exact == queried,
         "drift rho=0.1, eta=" + fmt(eta) + ", k=" + std::to_string(parse_regressor("knn").k) +
             ": knn MAE(T) <= MAE(2) in " + std::to_string(better) + "/30 (>= 25); mean MAE(2)=" +
             fmt(rows[0].mean_mae) + " MAE(T)=" + fmt(rows[1].mean_mae) +
             "; constant-median x-invariant: " + (invariant ? "yes" : "no") +
             "; fit transfer exact " + std::to_string(exact) + "/" + std::to_string(queried));
}

void privacy_contract(const DriftWorld& w) {
  const auto& tg = w.bundle.graph;
  const auto& lm = w.bundle.labels;
  InductionConfig ind;
  ModelConfig model;
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> attr(0, static_cast<int>(tg.attributes().size()) - 1);
  int checked = 0, identical = 0;
  for (int t = 0; t < tg.last_step(); t += 3) {
    const auto adj = induce_graph(tg, ind, t, threads());
    for (int d : {0, 1, 4}) {
      if (t + d > tg.last_step()) continue;
      const auto& eval = tg.snapshot(t + d).attrs;
      for (NodeId i = 0; i < eval.size(); i += 7) {
        const auto truth = derive_labels(eval[i], lm);
        if (truth.empty()) continue;
        const EvalKey key{i, t, d};
        const auto before = predict_score(adj, eval, truth, lm, model, key);
        auto mutated = eval;
        std::vector<SparseVector::Entry> e;
        for (int q = 0; q < 5; ++q) e.push_back({static_cast<AttrId>(attr(gen)), 50.0});
        mutated[i] = SparseVector::from_unsorted(e);
        const auto after = predict_score(adj, mutated, truth, lm, model, key);
        ++checked;
        identical += before.has_value() == after.has_value() &&
                     (!before || std::memcmp(&*before, &*after, sizeof(double)) == 0);
      }
    }
  }
  report("A6-privacy-contract", checked > 0 && identical == checked,
         std::to_string(identical) + "/" + std::to_string(checked) +
             " mutated evaluations bit-identical");
}

// ------------------------------------------------------------ determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void determinism(const std::string& cli) {
  if (cli.empty()) {
    report("determinism", false, "no CLI path given");
    return;
  }
  const fs::path root = scratch("determinism");
  SynthConfig s;
  s.n_nodes = 120;
  s.n_steps = 10;
  s.regime = SynthRegime::kDrift;
  s.rho = 0.1;
  auto cfg = config_for_synth(s, root / "unused");
  cfg.shadow.s = 3;
  cfg.predictor.resamples = 5;
  std::ofstream(root / "config.json") << config_to_json(cfg).dump(2);

  const std::vector<std::pair<std::string, unsigned>> runs = {{"a", 1}, {"b", 1}, {"c", 8}};
  for (const auto& [name, n] : runs) {
    const std::string cmd = "\"" + cli + "\" run --config \"" + (root / "config.json").string() +
                            "\" --out-dir \"" + (root / name).string() + "\" --threads " +
                            std::to_string(n) + " > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      report("determinism", false, "run failed: " + cmd);
      return;
    }
  }
  int files = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    if (entry.path().extension() != ".csv") continue;
    ++files;
    const auto ref = slurp(entry.path());
    for (const char* other : {"b", "c"}) {
      differing += slurp(root / other / entry.path().filename()) != ref;
    }
  }
  report("determinism", files > 0 && differing == 0,
         std::to_string(files) + " CSVs compared across 2 same-seed runs and --threads 1 vs 8; " +
             std::to_string(differing) + " differ");
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  check("oracle-knn", knn_oracle);
  check("oracle-shadow", shadow_oracle);
  check("unit-oracles", unit_oracles);
  check("A1-static", static_regime);
  check("A3-reshuffle", reshuffle_regime);
  check("A4-A6-drift", [] {
    const auto w = drift_world();
    drift_regime(w);
    check("A5-predictor", [&] { predictor_sanity(w); });
    check("A6-privacy-contract", [&] { privacy_contract(w); });
  });
  check("determinism", [&] { determinism(cli); });
  std::printf("%d failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}
