#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <queue>
#include <set>

#include "epne/synth.hpp"
#include "epne/walks.hpp"

using namespace epne;

namespace {

TemporalGraph path_graph(int n) {
  EdgeSet e(n);
  for (int v = 0; v + 1 < n; ++v) e.add_edge(v, v + 1);
  e.finalize();
  std::vector<std::string> names;
  for (int v = 0; v < n; ++v) names.push_back(std::to_string(v));
  return TemporalGraph(names, {e});
}

}  // namespace

TEST_CASE("walk on a single edge bounces deterministically") {
  const TemporalGraph g = path_graph(2);
  const WalkSet ws = generate_walks(g, 1, 1, 3, 42);
  REQUIRE(ws.walks.size() == 2);
  for (const Walk& w : ws.walks) {
    REQUIRE(w.nodes.size() == 3);
    REQUIRE(w.nodes[0] == w.nodes[2]);
    REQUIRE(w.nodes[0] != w.nodes[1]);
  }
}

TEST_CASE("walk counts: walks_per_node per non-isolated node") {
  EdgeSet e(7);
  e.add_edge(0, 1);
  e.add_edge(1, 2);
  e.add_edge(2, 3);
  e.add_edge(3, 4);
  e.finalize();  // nodes 5, 6 isolated
  const TemporalGraph g({"a", "b", "c", "d", "e", "f", "g"}, {e});
  const WalkSet ws = generate_walks(g, 1, 10, 5, 1);
  REQUIRE(ws.walks.size() == 50);
  std::map<int, int> starts;
  for (const Walk& w : ws.walks) ++starts[w.nodes.front()];
  for (int v = 0; v <= 4; ++v) REQUIRE(starts[v] == 10);
  REQUIRE(starts.count(5) == 0);
  REQUIRE(starts.count(6) == 0);
}

TEST_CASE("same seed gives identical walk sets") {
  const SynthResult s = synth_sbm(30, 2, 0.3, 0.02, 2, 3);
  const WalkSet a = generate_walks(s.graph, 1, 5, 8, 99);
  const WalkSet b = generate_walks(s.graph, 1, 5, 8, 99);
  REQUIRE(a.walks.size() == b.walks.size());
  for (std::size_t i = 0; i < a.walks.size(); ++i) REQUIRE(a.walks[i].nodes == b.walks[i].nodes);
  const WalkSet c = generate_walks(s.graph, 1, 5, 8, 100);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.walks.size() && !any_diff; ++i)
    any_diff = a.walks[i].nodes != c.walks[i].nodes;
  REQUIRE(any_diff);
}

TEST_CASE("walk edges exist in the snapshot") {
  const SynthResult s = synth_sbm(25, 2, 0.3, 0.05, 3, 17);
  for (int t = 1; t <= 3; ++t) {
    const WalkSet ws = generate_walks(s.graph, t, 3, 10, 7);
    for (const Walk& w : ws.walks)
      for (std::size_t i = 0; i + 1 < w.nodes.size(); ++i)
        REQUIRE(s.graph.snapshot(t).has_edge(w.nodes[i], w.nodes[i + 1]));
  }
}

TEST_CASE("contexts by definition on a 3-walk") {
  Walk w;
  w.t = 1;
  w.nodes = {10, 11, 12};
  const auto pairs = contexts(w, 1);
  const std::multiset<std::pair<int, int>> got(pairs.begin(), pairs.end());
  const std::multiset<std::pair<int, int>> want = {{10, 11}, {11, 10}, {11, 12}, {12, 11}};
  REQUIRE(got == want);
}

TEST_CASE("contexts of a singleton walk are empty") {
  Walk w;
  w.nodes = {3};
  REQUIRE(contexts(w, 5).empty());
}

TEST_CASE("contexts on 4 distinct nodes with window 3 enumerate all ordered pairs") {
  Walk w;
  w.nodes = {0, 1, 2, 3};
  const auto pairs = contexts(w, 3);
  // Independent enumeration oracle.
  std::multiset<std::pair<int, int>> want;
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q)
      if (p != q && std::abs(p - q) <= 3)
        want.emplace(w.nodes[static_cast<std::size_t>(p)], w.nodes[static_cast<std::size_t>(q)]);
  REQUIRE(pairs.size() == 12);
  REQUIRE(std::multiset<std::pair<int, int>>(pairs.begin(), pairs.end()) == want);
}

TEST_CASE("contexts skip repeated-node pairs") {
  Walk w;
  w.nodes = {5, 6, 5};
  const auto pairs = contexts(w, 2);
  for (const auto& [i, j] : pairs) REQUIRE(i != j);
  REQUIRE(pairs.size() == 4);  // (5,6),(6,5),(6,5),(5,6)
}

TEST_CASE("every context pair is reachable within window hops") {
  const SynthResult s = synth_sbm(20, 2, 0.25, 0.05, 1, 23);
  const EdgeSet& es = s.graph.snapshot(1);
  const int window = 3;
  auto within_hops = [&](int from, int to) {
    std::queue<std::pair<int, int>> q;
    std::set<int> seen{from};
    q.push({from, 0});
    while (!q.empty()) {
      auto [v, depth] = q.front();
      q.pop();
      if (v == to) return true;
      if (depth == window) continue;
      for (int nb : es.neighbors(v))
        if (seen.insert(nb).second) q.push({nb, depth + 1});
    }
    return false;
  };
  const WalkSet ws = generate_walks(s.graph, 1, 2, 8, 5);
  for (const Walk& w : ws.walks)
    for (const auto& [i, j] : contexts(w, window)) REQUIRE(within_hops(i, j));
}

TEST_CASE("next-hop frequencies are uniform over neighbors") {
  // Star with 4 leaves: every step away from the hub picks a leaf uniformly.
  EdgeSet e(5);
  for (int v = 1; v <= 4; ++v) e.add_edge(0, v);
  e.finalize();
  const TemporalGraph g({"h", "l1", "l2", "l3", "l4"}, {e});
  std::map<int, long long> counts;
  long long steps = 0;
  const WalkSet ws = generate_walks(g, 1, 2000, 101, 31);
  for (const Walk& w : ws.walks) {
    if (w.nodes.front() != 0) continue;
    for (std::size_t p = 1; p < w.nodes.size(); p += 2) {
      ++counts[w.nodes[p]];
      ++steps;
    }
  }
  REQUIRE(steps >= 100000);
  const double expected = static_cast<double>(steps) / 4.0;
  double chi2 = 0.0;
  for (int leaf = 1; leaf <= 4; ++leaf) {
    const double diff = static_cast<double>(counts[leaf]) - expected;
    chi2 += diff * diff / expected;
  }
  // dof 3; 16.27 is the 0.1% critical value.
  REQUIRE(chi2 < 16.27);
}
