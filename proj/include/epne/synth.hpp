#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "epne/common.hpp"
#include "epne/graph.hpp"

namespace epne {

// Planted-pattern generator parameters. Intra-community candidate pairs are
// partitioned into periodic / trend / stable classes; inter-community pairs
// are i.i.d. noise.
struct SynthSpec {
  int nodes = 200;
  int communities = 4;
  int snapshots = 24;  // T
  double p_in = 0.3;
  double p_out = 0.01;
  double periodic_frac = 0.5;  // rho
  int period = 4;              // P
  double duty = 0.5;
  double trend_frac = 0.25;
  std::uint64_t seed = 1;

  void validate() const {
    if (nodes < 2) throw ConfigError("synth: nodes must be >= 2");
    if (communities < 1 || communities > nodes)
      throw ConfigError("synth: communities must be in [1, nodes]");
    if (snapshots < 1) throw ConfigError("synth: snapshots must be >= 1");
    if (!(p_in > 0.0) || p_in > 1.0) throw ConfigError("synth: p_in must be in (0, 1]");
    if (p_out < 0.0 || p_out >= p_in)
      throw ConfigError("synth: p_out must satisfy 0 <= p_out < p_in");
    if (periodic_frac < 0.0 || periodic_frac > 1.0)
      throw ConfigError("synth: periodic fraction must be in [0, 1]");
    if (trend_frac < 0.0 || periodic_frac + trend_frac > 1.0)
      throw ConfigError("synth: periodic + trend fractions must not exceed 1");
    if (period < 2) throw ConfigError("synth: period must be >= 2");
    if (!(duty > 0.0) || duty > 1.0) throw ConfigError("synth: duty must be in (0, 1]");
  }
};

struct SynthResult {
  TemporalGraph graph;
  std::vector<std::pair<std::string, std::string>> node_labels;  // (node, community)
  // (src, dst, class) for intra-community pairs present in the static union.
  std::vector<std::tuple<std::string, std::string, std::string>> edge_labels;
};

namespace detail {

enum class EdgeClass { Stable, Periodic, Trend };

inline const char* edge_class_name(EdgeClass c) {
  switch (c) {
    case EdgeClass::Periodic:
      return "periodic";
    case EdgeClass::Trend:
      return "trend";
    default:
      return "stable";
  }
}

}  // namespace detail

// Temporal SBM with planted evolutionary patterns:
//   stable   edges: present with prob p_in in every snapshot
//   periodic edges: present with prob p_in only when (t mod P) < duty*P
//   trend    edges: present with prob p_in * (t / T)
// Node labels are communities; edge labels attach to static-union edges.
inline SynthResult synth_periodic(const SynthSpec& spec) {
  spec.validate();
  const int n = spec.nodes;
  const int c = spec.communities;
  const int T = spec.snapshots;

  std::vector<int> community(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v)
    community[static_cast<std::size_t>(v)] = static_cast<int>(
        static_cast<long long>(v) * c / n);

  std::vector<std::pair<int, int>> intra, inter;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      (community[static_cast<std::size_t>(i)] == community[static_cast<std::size_t>(j)] ? intra
                                                                                        : inter)
          .emplace_back(i, j);

  Rng rng(mix_seed(spec.seed, {kSeedSynth}));
  // Deterministic Fisher-Yates over intra pairs, then prefix partition.
  for (std::size_t i = intra.size(); i > 1; --i)
    std::swap(intra[i - 1], intra[rng.below(i)]);
  const auto n_periodic = static_cast<std::size_t>(
      std::llround(spec.periodic_frac * static_cast<double>(intra.size())));
  const auto n_trend = std::min(intra.size() - n_periodic,
                                static_cast<std::size_t>(std::llround(
                                    spec.trend_frac * static_cast<double>(intra.size()))));
  std::vector<detail::EdgeClass> cls(intra.size(), detail::EdgeClass::Stable);
  for (std::size_t p = 0; p < n_periodic; ++p) cls[p] = detail::EdgeClass::Periodic;
  for (std::size_t p = n_periodic; p < n_periodic + n_trend; ++p)
    cls[p] = detail::EdgeClass::Trend;

  const double duty_window = spec.duty * spec.period;
  std::vector<EdgeSet> snaps;
  snaps.reserve(static_cast<std::size_t>(T));
  for (int t = 1; t <= T; ++t) {
    EdgeSet es(n);
    for (std::size_t p = 0; p < intra.size(); ++p) {
      double prob = 0.0;
      switch (cls[p]) {
        case detail::EdgeClass::Stable:
          prob = spec.p_in;
          break;
        case detail::EdgeClass::Periodic:
          prob = (t % spec.period) < duty_window ? spec.p_in : 0.0;
          break;
        case detail::EdgeClass::Trend:
          prob = spec.p_in * static_cast<double>(t) / T;
          break;
      }
      if (prob > 0.0 && rng.uniform() < prob) es.add_edge(intra[p].first, intra[p].second);
    }
    if (spec.p_out > 0.0)
      for (const auto& [i, j] : inter)
        if (rng.uniform() < spec.p_out) es.add_edge(i, j);
    es.finalize();
    snaps.push_back(std::move(es));
  }

  std::vector<std::string> names(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) names[static_cast<std::size_t>(v)] = std::to_string(v);

  SynthResult out{TemporalGraph(names, std::move(snaps)), {}, {}};
  out.node_labels.reserve(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v)
    out.node_labels.emplace_back(names[static_cast<std::size_t>(v)],
                                 std::to_string(community[static_cast<std::size_t>(v)]));

  const EdgeSet uni = static_edges(out.graph);
  for (std::size_t p = 0; p < intra.size(); ++p)
    if (uni.has_edge(intra[p].first, intra[p].second))
      out.edge_labels.emplace_back(names[static_cast<std::size_t>(intra[p].first)],
                                   names[static_cast<std::size_t>(intra[p].second)],
                                   detail::edge_class_name(cls[p]));
  std::sort(out.edge_labels.begin(), out.edge_labels.end());

  const double expected_degree = spec.p_in * (static_cast<double>(n) / c - 1.0);
  if (expected_degree < 1.0)
    std::fprintf(stderr, "warning: expected intra-community degree %.2f < 1, embeddings will be noisy\n",
                 expected_degree);
  return out;
}

// Static-community control: every snapshot drawn i.i.d. from the same SBM.
inline SynthResult synth_sbm(int n, int c, double p_in, double p_out, int T,
                             std::uint64_t seed) {
  SynthSpec spec;
  spec.nodes = n;
  spec.communities = c;
  spec.snapshots = T;
  spec.p_in = p_in;
  spec.p_out = p_out;
  spec.periodic_frac = 0.0;
  spec.trend_frac = 0.0;
  spec.seed = seed;
  SynthResult out = synth_periodic(spec);
  out.edge_labels.clear();  // all edges are "stable"; no temporal classes to learn
  return out;
}

}  // namespace epne
