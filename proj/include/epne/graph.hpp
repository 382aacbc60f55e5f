#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "epne/common.hpp"

namespace epne {

// Lower clamp applied to structural drift wherever it appears as a
// denominator.
inline constexpr double kDriftEps = 1e-3;

// One snapshot's undirected adjacency. Neighbor lists are sorted and
// duplicate-free after finalize().
class EdgeSet {
 public:
  EdgeSet() = default;
  explicit EdgeSet(int num_nodes) : adj_(static_cast<std::size_t>(num_nodes)) {}

  // Builder interface; call finalize() when done.
  void add_edge(int u, int v) {
    adj_[static_cast<std::size_t>(u)].push_back(v);
    adj_[static_cast<std::size_t>(v)].push_back(u);
  }

  void finalize() {
    edge_count_ = 0;
    for (auto& nb : adj_) {
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
      edge_count_ += static_cast<long long>(nb.size());
    }
    edge_count_ /= 2;
  }

  int num_nodes() const { return static_cast<int>(adj_.size()); }
  long long edge_count() const { return edge_count_; }
  int degree(int v) const { return static_cast<int>(adj_[static_cast<std::size_t>(v)].size()); }

  std::span<const int> neighbors(int v) const {
    const auto& nb = adj_[static_cast<std::size_t>(v)];
    return {nb.data(), nb.size()};
  }

  bool has_edge(int u, int v) const {
    const auto& nb = adj_[static_cast<std::size_t>(u)];
    return std::binary_search(nb.begin(), nb.end(), v);
  }

  // All (i, j) with i < j, in sorted order.
  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(static_cast<std::size_t>(edge_count_));
    for (int u = 0; u < num_nodes(); ++u)
      for (int v : neighbors(u))
        if (u < v) out.emplace_back(u, v);
    return out;
  }

 private:
  std::vector<std::vector<int>> adj_;
  long long edge_count_ = 0;
};

struct LoadStats {
  long long self_loops_dropped = 0;
  long long duplicates_collapsed = 0;
};

// Snapshot-structured temporal network over a fixed node set. Immutable after
// construction; safe for concurrent readers. Snapshots are 1-based (1..T).
class TemporalGraph {
 public:
  TemporalGraph(std::vector<std::string> names, std::vector<EdgeSet> snapshots,
                LoadStats stats = {})
      : names_(std::move(names)), snapshots_(std::move(snapshots)), stats_(stats) {
    if (snapshots_.empty()) throw DataError("temporal graph needs at least one snapshot");
    for (std::size_t i = 0; i < names_.size(); ++i) name_to_id_[names_[i]] = static_cast<int>(i);
  }

  int num_nodes() const { return static_cast<int>(names_.size()); }
  int num_snapshots() const { return static_cast<int>(snapshots_.size()); }

  const EdgeSet& snapshot(int t) const {
    if (t < 1 || t > num_snapshots())
      throw IndexError("snapshot index " + std::to_string(t) + " out of range [1, " +
                       std::to_string(num_snapshots()) + "]");
    return snapshots_[static_cast<std::size_t>(t - 1)];
  }

  const std::vector<std::string>& node_names() const { return names_; }
  const std::string& node_name(int v) const { return names_[static_cast<std::size_t>(v)]; }

  // -1 when the name is unknown.
  int node_id(const std::string& name) const {
    auto it = name_to_id_.find(name);
    return it == name_to_id_.end() ? -1 : it->second;
  }

  const LoadStats& load_stats() const { return stats_; }

 private:
  std::vector<std::string> names_;
  std::vector<EdgeSet> snapshots_;
  std::unordered_map<std::string, int> name_to_id_;
  LoadStats stats_;
};

// How the time column of an edge list maps to snapshot indices.
struct SnapshotSpec {
  enum class Kind { ById, ByInterval };
  Kind kind = Kind::ById;
  double interval_width = 0.0;

  static SnapshotSpec by_id() { return {}; }

  static SnapshotSpec by_interval(double width) {
    if (!(width > 0.0)) throw ConfigError("snapshot interval width must be > 0");
    return {Kind::ByInterval, width};
  }

  // "by-id" or "by-interval:<width>"
  static SnapshotSpec parse(const std::string& s) {
    if (s == "by-id") return by_id();
    const std::string prefix = "by-interval:";
    if (s.rfind(prefix, 0) == 0) {
      const std::string w = s.substr(prefix.size());
      char* end = nullptr;
      const double width = std::strtod(w.c_str(), &end);
      if (end == w.c_str() || *end != '\0' || !std::isfinite(width))
        throw ConfigError("bad snapshot interval width: '" + w + "'");
      return by_interval(width);
    }
    throw ConfigError("bad snapshot spec '" + s + "' (expected by-id or by-interval:<width>)");
  }
};

namespace detail {

inline bool split3(const std::string& line, std::string& a, std::string& b, std::string& c) {
  std::istringstream ss(line);
  std::string extra;
  if (!(ss >> a >> b >> c)) return false;
  if (ss >> extra) return false;
  return true;
}

inline double parse_time_field(const std::string& s, long long line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || !std::isfinite(v))
    throw ParseError("line " + std::to_string(line_no) + ": bad time value '" + s + "'");
  return v;
}

}  // namespace detail

// Loads a `src TAB dst TAB time` edge list. Lines starting with '#' are
// ignored. Node ids are arbitrary strings mapped to dense internal ids in
// first-appearance order. Duplicate edges within a snapshot collapse;
// self-loops are dropped and counted.
inline TemporalGraph load_edge_list(const std::string& path, const SnapshotSpec& spec) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open edge list: " + path);

  std::vector<std::string> names;
  std::unordered_map<std::string, int> ids;
  auto intern = [&](const std::string& name) {
    auto [it, inserted] = ids.try_emplace(name, static_cast<int>(names.size()));
    if (inserted) names.push_back(name);
    return it->second;
  };

  // bin -> list of (u, v); duplicates collapsed when building EdgeSets.
  std::map<long long, std::vector<std::pair<int, int>>> bins;
  LoadStats stats;
  std::string line;
  long long line_no = 0;
  long long raw_edges = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::string src, dst, time_s;
    if (!detail::split3(line, src, dst, time_s))
      throw ParseError("line " + std::to_string(line_no) + ": expected 'src dst time', got '" +
                       line + "'");
    const double raw_time = detail::parse_time_field(time_s, line_no);
    long long bin;
    if (spec.kind == SnapshotSpec::Kind::ById) {
      const double r = std::round(raw_time);
      if (std::abs(raw_time - r) > 1e-9)
        throw ParseError("line " + std::to_string(line_no) +
                         ": snapshot id must be an integer, got '" + time_s + "'");
      bin = static_cast<long long>(r);
    } else {
      bin = static_cast<long long>(std::floor(raw_time / spec.interval_width));
    }
    const int u = intern(src);
    const int v = intern(dst);
    if (u == v) {
      ++stats.self_loops_dropped;
      continue;
    }
    bins[bin].emplace_back(std::min(u, v), std::max(u, v));
    ++raw_edges;
  }

  if (raw_edges == 0) throw DataError("empty graph: no edges left after filtering " + path);
  if (stats.self_loops_dropped > 0)
    std::fprintf(stderr, "warning: dropped %lld self-loop(s) while loading %s\n",
                 stats.self_loops_dropped, path.c_str());

  const int n = static_cast<int>(names.size());
  std::vector<EdgeSet> snaps;
  snaps.reserve(bins.size());
  for (auto& [bin, pairs] : bins) {
    std::sort(pairs.begin(), pairs.end());
    EdgeSet es(n);
    std::pair<int, int> prev{-1, -1};
    for (const auto& e : pairs) {
      if (e == prev) {
        ++stats.duplicates_collapsed;
        continue;
      }
      es.add_edge(e.first, e.second);
      prev = e;
    }
    es.finalize();
    snaps.push_back(std::move(es));
  }
  return TemporalGraph(std::move(names), std::move(snaps), stats);
}

// Static edge union E = U_t E^t.
inline EdgeSet static_edges(const TemporalGraph& g) {
  EdgeSet out(g.num_nodes());
  for (int t = 1; t <= g.num_snapshots(); ++t) {
    const EdgeSet& es = g.snapshot(t);
    for (int u = 0; u < g.num_nodes(); ++u)
      for (int v : es.neighbors(u))
        if (u < v) out.add_edge(u, v);
  }
  out.finalize();
  return out;
}

// Jaccard distance between v's neighbor sets at t-1 and t. Zero when both
// sets are empty. Callers using this as a denominator clamp at kDriftEps.
inline double structural_drift(const TemporalGraph& g, int t, int v) {
  if (t < 2 || t > g.num_snapshots())
    throw IndexError("structural_drift: t=" + std::to_string(t) + " out of range [2, " +
                     std::to_string(g.num_snapshots()) + "]");
  std::span<const int> a = g.snapshot(t - 1).neighbors(v);
  std::span<const int> b = g.snapshot(t).neighbors(v);
  if (a.empty() && b.empty()) return 0.0;
  std::size_t i = 0, j = 0, both = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (a[i] > b[j]) {
      ++j;
    } else {
      ++both;
      ++i;
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - both;
  return 1.0 - static_cast<double>(both) / static_cast<double>(uni);
}

// Negative-sampling distribution P_n(v) proportional to deg_t(v)^power over
// nodes with degree >= 1 at snapshot t. O(log |V|) per draw.
class SamplingTable {
 public:
  SamplingTable(std::vector<double> weights, int snapshot_t)
      : weights_(std::move(weights)), t_(snapshot_t) {
    cum_.reserve(weights_.size());
    double total = 0.0;
    for (double w : weights_) {
      if (w < 0.0) throw DataError("negative sampling weight");
      total += w;
      cum_.push_back(total);
    }
    if (!(total > 0.0)) throw DataError("empty-table: all sampling weights are zero");
  }

  int sample(Rng& rng) const {
    const double x = rng.uniform() * cum_.back();
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), x);
    return static_cast<int>(std::min<std::size_t>(
        static_cast<std::size_t>(it - cum_.begin()), cum_.size() - 1));
  }

  int snapshot() const { return t_; }
  double weight(int v) const { return weights_[static_cast<std::size_t>(v)]; }
  double total_weight() const { return cum_.back(); }

 private:
  std::vector<double> weights_;
  std::vector<double> cum_;
  int t_ = 0;
};

inline SamplingTable build_negative_table(const TemporalGraph& g, int t, double power = 0.75) {
  const EdgeSet& es = g.snapshot(t);
  std::vector<double> w(static_cast<std::size_t>(g.num_nodes()), 0.0);
  for (int v = 0; v < g.num_nodes(); ++v) {
    const int deg = es.degree(v);
    if (deg > 0) w[static_cast<std::size_t>(v)] = std::pow(static_cast<double>(deg), power);
  }
  return SamplingTable(std::move(w), t);
}

}  // namespace epne
