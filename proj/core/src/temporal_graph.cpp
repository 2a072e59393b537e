#include "pshadow/temporal_graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "pshadow/errors.hpp"
#include "pshadow/rng.hpp"

namespace pshadow {

Dictionary::Dictionary(std::vector<std::string> names) {
  for (auto& n : names) {
    if (find(n)) throw DataError("duplicate dictionary entry: " + n);
    intern(n);
  }
}

std::uint32_t Dictionary::intern(std::string_view name) {
  std::string key(name);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(names_.size());
  names_.push_back(key);
  index_.emplace(std::move(key), id);
  return id;
}

std::optional<std::uint32_t> Dictionary::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Dictionary::at(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw DataError("unknown identifier: " + std::string(name));
}

SparseVector SparseVector::from_unsorted(std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.id < b.id || (a.id == b.id && a.weight < b.weight);
  });
  SparseVector out;
  for (const Entry& e : entries) {
    if (!out.entries_.empty() && out.entries_.back().id == e.id) {
      out.entries_.back().weight += e.weight;
    } else {
      out.entries_.push_back(e);
    }
  }
  std::erase_if(out.entries_, [](const Entry& e) { return !(e.weight > 0.0); });
  return out;
}

SparseVector SparseVector::from_sorted(std::vector<Entry> entries) {
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (!(entries[k].weight > 0.0) || !std::isfinite(entries[k].weight)) {
      throw InvariantError("sparse vector weight must be positive and finite");
    }
    if (k > 0 && entries[k - 1].id >= entries[k].id) {
      throw InvariantError("sparse vector ids must be strictly increasing");
    }
  }
  SparseVector out;
  out.entries_ = std::move(entries);
  return out;
}

double SparseVector::weight(AttrId id) const {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), id,
      [](const Entry& e, AttrId key) { return e.id < key; });
  return (it != entries_.end() && it->id == id) ? it->weight : 0.0;
}

double SparseVector::total() const {
  double s = 0.0;
  for (const Entry& e : entries_) s += e.weight;
  return s;
}

double SparseVector::norm() const {
  double s = 0.0;
  for (const Entry& e : entries_) s += e.weight * e.weight;
  return std::sqrt(s);
}

SparseVector& SparseVector::operator+=(const SparseVector& other) {
  if (other.empty()) return *this;
  if (empty()) {
    entries_ = other.entries_;
    return *this;
  }
  std::vector<Entry> merged;
  merged.reserve(entries_.size() + other.entries_.size());
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  while (a != entries_.end() && b != other.entries_.end()) {
    if (a->id < b->id) {
      merged.push_back(*a++);
    } else if (b->id < a->id) {
      merged.push_back(*b++);
    } else {
      merged.push_back({a->id, a->weight + b->weight});
      ++a;
      ++b;
    }
  }
  merged.insert(merged.end(), a, entries_.end());
  merged.insert(merged.end(), b, other.entries_.end());
  entries_ = std::move(merged);
  return *this;
}

SparseVector SparseVector::scaled(double factor) const {
  if (!(factor > 0.0)) return {};
  SparseVector out = *this;
  for (Entry& e : out.entries_) e.weight *= factor;
  return out;
}

double dot(const SparseVector& a, const SparseVector& b) {
  auto ea = a.entries();
  auto eb = b.entries();
  std::size_t i = 0, j = 0;
  double s = 0.0;
  while (i < ea.size() && j < eb.size()) {
    if (ea[i].id < eb[j].id) {
      ++i;
    } else if (eb[j].id < ea[i].id) {
      ++j;
    } else {
      s += ea[i].weight * eb[j].weight;
      ++i;
      ++j;
    }
  }
  return s;
}

std::size_t Adjacency::edge_count() const {
  std::size_t n = 0;
  for (const auto& l : lists) n += l.size();
  return n;
}

std::uint64_t Adjacency::fingerprint() const {
  std::uint64_t h = splitmix64(lists.size());
  for (std::size_t i = 0; i < lists.size(); ++i) {
    h = splitmix64(h ^ (i * 0x100000001b3ULL) ^ lists[i].size());
    for (NodeId j : lists[i]) h = splitmix64(h ^ j);
  }
  return h;
}

TemporalGraph::TemporalGraph(Dictionary nodes, Dictionary attributes,
                             std::vector<Snapshot> snapshots)
    : nodes_(std::move(nodes)),
      attributes_(std::move(attributes)),
      snapshots_(std::move(snapshots)) {
  const std::size_t n = nodes_.size();
  for (std::size_t t = 0; t < snapshots_.size(); ++t) {
    Snapshot& s = snapshots_[t];
    if (s.t != static_cast<int>(t)) {
      throw InvariantError("snapshots must be contiguous in t");
    }
    if (s.attrs.empty()) s.attrs.resize(n);
    if (s.edges.size() == 0) s.edges = Adjacency(n);
    if (s.attrs.size() != n || s.edges.size() != n) {
      throw InvariantError("snapshot sized inconsistently with node dictionary");
    }
    for (const auto& v : s.attrs) {
      for (const auto& e : v.entries()) {
        if (e.id >= attributes_.size()) {
          throw InvariantError("attribute id outside dictionary");
        }
      }
    }
    for (const auto& l : s.edges.lists) {
      for (std::size_t k = 0; k < l.size(); ++k) {
        if (l[k] >= n) throw InvariantError("edge endpoint outside dictionary");
        if (k > 0 && l[k - 1] >= l[k]) {
          throw InvariantError("adjacency list not sorted/deduplicated");
        }
      }
    }
  }
}

const Snapshot& TemporalGraph::snapshot(int t) const {
  if (t < 0 || t > last_step()) {
    throw std::out_of_range("timestep " + std::to_string(t) +
                            " outside [0, " + std::to_string(last_step()) + "]");
  }
  return snapshots_[static_cast<std::size_t>(t)];
}

LabelMap LabelMap::identity(const Dictionary& attributes, int threshold) {
  LabelMap lm;
  lm.identity_ = true;
  lm.threshold_ = threshold;
  lm.labels_ = attributes;
  lm.attr_to_labels_.resize(attributes.size());
  for (std::size_t a = 0; a < attributes.size(); ++a) {
    lm.attr_to_labels_[a] = {static_cast<LabelId>(a)};
  }
  return lm;
}

LabelMap LabelMap::mapped(Dictionary labels,
                          std::vector<std::vector<LabelId>> attr_to_labels,
                          int threshold) {
  LabelMap lm;
  lm.identity_ = false;
  lm.labels_ = std::move(labels);
  for (auto& ls : attr_to_labels) {
    std::sort(ls.begin(), ls.end());
    ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
    if (!ls.empty() && ls.back() >= lm.labels_.size()) {
      throw DataError("label id outside label dictionary");
    }
  }
  lm.attr_to_labels_ = std::move(attr_to_labels);
  lm.set_threshold(threshold);
  return lm;
}

void LabelMap::set_threshold(int threshold) {
  if (threshold < 0) throw ConfigError("label threshold must be >= 0");
  threshold_ = threshold;
}

std::span<const LabelId> LabelMap::labels_of(AttrId attr) const {
  if (attr >= attr_to_labels_.size()) return {};
  return attr_to_labels_[attr];
}

AttributeTable aggregate_window(const TemporalGraph& tg, int t_start, int w) {
  if (w < 1 || t_start < 0 ||
      static_cast<long>(t_start) + w > static_cast<long>(tg.num_steps())) {
    throw std::out_of_range("window [" + std::to_string(t_start) + ", " +
                            std::to_string(static_cast<long>(t_start) + w) +
                            ") outside [0, " + std::to_string(tg.num_steps()) +
                            ")");
  }
  AttributeTable out(tg.num_nodes());
  for (int t = t_start; t < t_start + w; ++t) {
    const auto& attrs = tg.snapshot(t).attrs;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += attrs[i];
  }
  return out;
}

LabelSet derive_labels(const SparseVector& attrs, const LabelMap& lm) {
  LabelSet out;
  if (lm.is_identity()) {
    for (const auto& e : attrs.entries()) out.push_back(e.id);
    return out;
  }
  std::map<LabelId, int> counts;
  for (const auto& e : attrs.entries()) {
    for (LabelId l : lm.labels_of(e.id)) ++counts[l];
  }
  for (const auto& [l, c] : counts) {
    if (c > lm.threshold()) out.push_back(l);
  }
  return out;
}

LabelSupport label_support(const SparseVector& attrs, const LabelMap& lm) {
  LabelSupport out;
  if (lm.is_identity()) {
    for (const auto& e : attrs.entries()) out.emplace_back(e.id, e.weight);
    return out;
  }
  std::map<LabelId, double> acc;
  for (const auto& e : attrs.entries()) {
    for (LabelId l : lm.labels_of(e.id)) acc[l] += e.weight;
  }
  for (const auto& [l, s] : acc) {
    if (s > 0.0) out.emplace_back(l, s);
  }
  return out;
}

}  // namespace pshadow
