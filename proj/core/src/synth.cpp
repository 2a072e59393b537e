#include "pshadow/synth.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "pshadow/errors.hpp"
#include "pshadow/format.hpp"
#include "pshadow/rng.hpp"

namespace pshadow {

namespace {

std::string padded(char prefix, int value, int count) {
  const int width = static_cast<int>(std::to_string(std::max(count - 1, 0)).size());
  std::string digits = std::to_string(value);
  return prefix + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(digits.size()))), '0') + digits;
}

// Inverse-CDF draw from a cumulative distribution.
int draw(const std::vector<double>& cdf, RngStream& rng) {
  const double u = rng.uniform() * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(),
                                                   static_cast<std::ptrdiff_t>(cdf.size()) - 1));
}

std::vector<double> cumulative(const std::vector<double>& p) {
  std::vector<double> cdf(p.size());
  std::partial_sum(p.begin(), p.end(), cdf.begin());
  return cdf;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_nodes < 2) throw ConfigError("synth.n_nodes must be >= 2");
  if (n_attrs < 1) throw ConfigError("synth.n_attrs must be >= 1");
  if (n_labels < 1 || n_labels > n_attrs) {
    throw ConfigError("synth.n_labels must be in [1, n_attrs]");
  }
  if (n_steps < 2) throw ConfigError("synth.n_steps must be >= 2");
  if (n_communities < 1 || n_communities > n_nodes || n_communities > n_attrs) {
    throw ConfigError("synth.n_communities must be in [1, min(n_nodes, n_attrs)]");
  }
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("synth.rho must be in [0, 1]");
  if (attrs_per_step < 1) throw ConfigError("synth.attrs_per_step must be >= 1");
  if (!(dirichlet_alpha > 0.0)) throw ConfigError("synth.dirichlet_alpha must be > 0");
  if (!(background >= 0.0 && background <= 1.0)) {
    throw ConfigError("synth.background must be in [0, 1]");
  }
}

std::string synth_node_name(const SynthConfig& cfg, int node) {
  return padded('n', node, cfg.n_nodes);
}

std::string synth_attr_name(const SynthConfig& cfg, int attr) {
  return padded('a', attr, cfg.n_attrs);
}

SynthData generate(const SynthConfig& cfg) {
  cfg.validate();
  RngStream rng(cfg.seed, StreamPurpose::kSynth);
  const int A = cfg.n_attrs;
  const int C = cfg.n_communities;
  const double uniform = 1.0 / A;

  SynthData data;
  std::vector<std::vector<double>> pref(static_cast<std::size_t>(C),
                                        std::vector<double>(static_cast<std::size_t>(A)));
  std::gamma_distribution<double> gamma(cfg.dirichlet_alpha, 1.0);
  for (int c = 0; c < C; ++c) {
    const int lo = c * A / C;
    const int hi = (c + 1) * A / C;
    std::vector<double> g(static_cast<std::size_t>(hi - lo));
    for (auto& x : g) x = gamma(rng);
    double sum = std::accumulate(g.begin(), g.end(), 0.0);
    if (!(sum > 0.0)) {
      std::fill(g.begin(), g.end(), 1.0);
      sum = static_cast<double>(g.size());
    }
    auto& p = pref[static_cast<std::size_t>(c)];
    for (int a = 0; a < A; ++a) p[static_cast<std::size_t>(a)] = cfg.background * uniform;
    for (int a = lo; a < hi; ++a) {
      p[static_cast<std::size_t>(a)] += (1.0 - cfg.background) * g[static_cast<std::size_t>(a - lo)] / sum;
    }
  }

  // Balanced random community assignment.
  std::vector<int> community(static_cast<std::size_t>(cfg.n_nodes));
  std::vector<int> perm(static_cast<std::size_t>(cfg.n_nodes));
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  for (std::size_t k = 0; k < perm.size(); ++k) {
    community[static_cast<std::size_t>(perm[k])] = static_cast<int>(k) % C;
  }

  const auto m = static_cast<std::size_t>(cfg.attrs_per_step);
  std::vector<std::vector<int>> slots(static_cast<std::size_t>(cfg.n_nodes), std::vector<int>(m));
  std::vector<std::string> node_names, attr_names;
  for (int i = 0; i < cfg.n_nodes; ++i) node_names.push_back(synth_node_name(cfg, i));
  for (int a = 0; a < A; ++a) attr_names.push_back(synth_attr_name(cfg, a));

  data.events.reserve(static_cast<std::size_t>(cfg.n_nodes) * m * static_cast<std::size_t>(cfg.n_steps));
  for (int t = 0; t < cfg.n_steps; ++t) {
    if (t > 0 && cfg.regime == SynthRegime::kDrift) {
      for (auto& p : pref) {
        for (auto& x : p) x = (1.0 - cfg.rho) * x + cfg.rho * uniform;
      }
    }
    if (t > 0 && cfg.regime == SynthRegime::kReshuffle) {
      for (auto& c : community) c = static_cast<int>(rng.below(static_cast<std::uint64_t>(C)));
    }
    std::vector<std::vector<double>> cdf;
    cdf.reserve(pref.size());
    for (const auto& p : pref) cdf.push_back(cumulative(p));

    for (int i = 0; i < cfg.n_nodes; ++i) {
      auto& s = slots[static_cast<std::size_t>(i)];
      const auto& node_cdf = cdf[static_cast<std::size_t>(community[static_cast<std::size_t>(i)])];
      for (auto& slot : s) {
        bool redraw = t == 0 || cfg.regime == SynthRegime::kReshuffle;
        if (!redraw && cfg.regime == SynthRegime::kDrift) redraw = rng.bernoulli(cfg.rho);
        if (redraw) slot = draw(node_cdf, rng);
      }
      for (int a : s) {
        data.events.push_back({t + 0.5, node_names[static_cast<std::size_t>(i)],
                               attr_names[static_cast<std::size_t>(a)], 1.0});
      }
    }
    data.community.push_back(community);
    data.preference.push_back(pref);
  }

  for (int a = 0; a < A; ++a) {
    const int label = static_cast<int>(static_cast<long>(a) * cfg.n_labels / A);
    data.labelmap.push_back({attr_names[static_cast<std::size_t>(a)],
                             {padded('L', label, cfg.n_labels)}});
  }
  return data;
}

BinningConfig synth_binning(const SynthConfig& cfg) {
  BinningConfig b;
  b.n_intervals = cfg.n_steps;
  b.t_min = 0.0;
  b.t_max = static_cast<double>(cfg.n_steps);
  return b;
}

void write_synth_files(const SynthData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream events(dir / "events.jsonl", std::ios::trunc);
  if (!events) throw DataError("cannot write " + (dir / "events.jsonl").string());
  for (const auto& e : data.events) {
    events << "{\"time\":" << format_double(e.time) << ",\"node\":\"" << e.node
           << "\",\"attr\":\"" << e.attr << "\",\"weight\":" << format_double(e.weight)
           << "}\n";
  }
  std::ofstream labels(dir / "labelmap.jsonl", std::ios::trunc);
  if (!labels) throw DataError("cannot write " + (dir / "labelmap.jsonl").string());
  for (const auto& e : data.labelmap) {
    labels << nlohmann::json{{"attr", e.attr}, {"labels", e.labels}}.dump() << '\n';
  }
}

}  // namespace pshadow
