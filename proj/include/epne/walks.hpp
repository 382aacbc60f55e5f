#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "epne/common.hpp"
#include "epne/graph.hpp"

namespace epne {

// One truncated random walk on snapshot t; nodes[0] is the start node and
// consecutive nodes are adjacent in E^t.
struct Walk {
  int t = 0;
  std::vector<int> nodes;
};

struct WalkSet {
  int t = 0;
  int walks_per_node = 0;
  int walk_length = 0;
  std::uint64_t seed = 0;
  std::vector<Walk> walks;
};

// Uniform next-neighbor walks, walks_per_node per node with degree >= 1 at t.
// A walk hitting a node with no neighbors terminates early. The RNG stream of
// each start node is derived from (seed, node id), so the result does not
// depend on how work is partitioned across workers.
inline WalkSet generate_walks(const TemporalGraph& g, int t, int walks_per_node, int walk_length,
                              std::uint64_t seed) {
  if (walks_per_node < 1) throw ConfigError("walks_per_node must be >= 1");
  if (walk_length < 1) throw ConfigError("walk_length must be >= 1");
  const EdgeSet& es = g.snapshot(t);
  WalkSet out;
  out.t = t;
  out.walks_per_node = walks_per_node;
  out.walk_length = walk_length;
  out.seed = seed;
  for (int v = 0; v < g.num_nodes(); ++v) {
    if (es.degree(v) == 0) continue;
    Rng rng(mix_seed(seed, {static_cast<std::uint64_t>(v)}));
    for (int w = 0; w < walks_per_node; ++w) {
      Walk walk;
      walk.t = t;
      walk.nodes.reserve(static_cast<std::size_t>(walk_length));
      int cur = v;
      walk.nodes.push_back(cur);
      for (int step = 1; step < walk_length; ++step) {
        const std::span<const int> nb = es.neighbors(cur);
        if (nb.empty()) break;
        cur = nb[rng.below(nb.size())];
        walk.nodes.push_back(cur);
      }
      out.walks.push_back(std::move(walk));
    }
  }
  return out;
}

// Emits (center, context) node pairs for every position pair within `window`
// hops along the walk. Pairs whose two positions hold the same node are
// skipped.
template <typename F>
inline void for_each_context(const Walk& walk, int window, F&& emit) {
  const int n = static_cast<int>(walk.nodes.size());
  for (int p = 0; p < n; ++p) {
    const int lo = std::max(0, p - window);
    const int hi = std::min(n - 1, p + window);
    for (int q = lo; q <= hi; ++q) {
      if (q == p) continue;
      if (walk.nodes[static_cast<std::size_t>(p)] == walk.nodes[static_cast<std::size_t>(q)])
        continue;
      emit(walk.nodes[static_cast<std::size_t>(p)], walk.nodes[static_cast<std::size_t>(q)]);
    }
  }
}

inline std::vector<std::pair<int, int>> contexts(const Walk& walk, int window) {
  if (window < 1) throw ConfigError("context window must be >= 1");
  std::vector<std::pair<int, int>> out;
  for_each_context(walk, window, [&](int i, int j) { out.emplace_back(i, j); });
  return out;
}

}  // namespace epne
