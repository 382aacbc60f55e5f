#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "epne/graph.hpp"
#include "epne/synth.hpp"

using namespace epne;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path.string();
}

}  // namespace

TEST_CASE("load_edge_list builds snapshots by id") {
  const auto path = write_temp("epne_edges_basic.tsv",
                               "a\tb\t1\n"
                               "b\tc\t1\n"
                               "a\tb\t2\n");
  const TemporalGraph g = load_edge_list(path, SnapshotSpec::by_id());
  REQUIRE(g.num_snapshots() == 2);
  REQUIRE(g.num_nodes() == 3);
  REQUIRE(g.snapshot(1).edge_count() == 2);
  REQUIRE(g.snapshot(2).edge_count() == 1);
  const int a = g.node_id("a"), b = g.node_id("b"), c = g.node_id("c");
  REQUIRE(g.snapshot(1).has_edge(a, b));
  REQUIRE(g.snapshot(1).has_edge(c, b));
  REQUIRE(g.snapshot(2).has_edge(b, a));
  REQUIRE_FALSE(g.snapshot(2).has_edge(b, c));
}

TEST_CASE("load_edge_list drops self-loops and errors on empty graphs") {
  const auto path = write_temp("epne_edges_selfloop.tsv", "a\ta\t1\n");
  REQUIRE_THROWS_AS(load_edge_list(path, SnapshotSpec::by_id()), DataError);
}

TEST_CASE("load_edge_list bins timestamps by interval") {
  const auto path = write_temp("epne_edges_interval.tsv",
                               "a\tb\t0\n"
                               "b\tc\t3599\n"
                               "a\tc\t3600\n");
  const TemporalGraph g = load_edge_list(path, SnapshotSpec::by_interval(3600));
  REQUIRE(g.num_snapshots() == 2);
  REQUIRE(g.snapshot(1).edge_count() == 2);
  REQUIRE(g.snapshot(2).edge_count() == 1);
}

TEST_CASE("load_edge_list reports the offending line") {
  const auto path = write_temp("epne_edges_bad.tsv",
                               "# comment\n"
                               "a\tb\t1\n"
                               "oops\n");
  try {
    load_edge_list(path, SnapshotSpec::by_id());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("load_edge_list collapses duplicates within a snapshot") {
  const auto path = write_temp("epne_edges_dup.tsv",
                               "a\tb\t1\n"
                               "b\ta\t1\n"
                               "a\tb\t1\n");
  const TemporalGraph g = load_edge_list(path, SnapshotSpec::by_id());
  REQUIRE(g.num_snapshots() == 1);
  REQUIRE(g.snapshot(1).edge_count() == 1);
  REQUIRE(g.load_stats().duplicates_collapsed == 2);
}

TEST_CASE("static_edges is the union over snapshots") {
  EdgeSet e1(3), e2(3);
  e1.add_edge(0, 1);
  e1.finalize();
  e2.add_edge(1, 2);
  e2.finalize();
  const TemporalGraph g({"a", "b", "c"}, {e1, e2});
  const EdgeSet uni = static_edges(g);
  REQUIRE(uni.edge_count() == 2);
  REQUIRE(uni.has_edge(0, 1));
  REQUIRE(uni.has_edge(1, 2));
  REQUIRE_FALSE(uni.has_edge(0, 2));
}

TEST_CASE("static_edges of identical snapshots equals one snapshot") {
  EdgeSet e(3);
  e.add_edge(0, 1);
  e.add_edge(1, 2);
  e.finalize();
  const TemporalGraph g({"a", "b", "c"}, {e, e, e});
  REQUIRE(static_edges(g).edge_count() == e.edge_count());
  const TemporalGraph single({"a", "b", "c"}, {e});
  REQUIRE(static_edges(single).edge_count() == e.edge_count());
}

TEST_CASE("static_edges contains every snapshot (random graphs)") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SynthResult s = synth_sbm(30, 3, 0.4, 0.05, 4, seed);
    const EdgeSet uni = static_edges(s.graph);
    for (int t = 1; t <= s.graph.num_snapshots(); ++t)
      for (const auto& [i, j] : s.graph.snapshot(t).edges()) REQUIRE(uni.has_edge(i, j));
  }
}

TEST_CASE("structural_drift matches hand-computed Jaccard distances") {
  // t=1: N(v0) = {1, 2}; t=2 variants below.
  EdgeSet e1(6), e2(6), e3(6);
  e1.add_edge(0, 1);
  e1.add_edge(0, 2);
  e1.finalize();
  // identical neighborhoods
  e2 = e1;
  const TemporalGraph same({"a", "b", "c", "d", "e", "f"}, {e1, e2});
  REQUIRE(structural_drift(same, 2, 0) == 0.0);

  // N^{t-1} = {1, 2}, N^t = {2, 3}: 1 - 1/3 = 2/3
  EdgeSet e2b(6);
  e2b.add_edge(0, 2);
  e2b.add_edge(0, 3);
  e2b.finalize();
  const TemporalGraph shifted({"a", "b", "c", "d", "e", "f"}, {e1, e2b});
  REQUIRE_THAT(structural_drift(shifted, 2, 0), Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-15));

  // disjoint: {} vs {5}
  e3.add_edge(0, 5);
  e3.finalize();
  EdgeSet empty(6);
  empty.add_edge(1, 2);  // keep the snapshot non-degenerate elsewhere
  empty.finalize();
  const TemporalGraph fresh({"a", "b", "c", "d", "e", "f"}, {empty, e3});
  REQUIRE(structural_drift(fresh, 2, 0) == 1.0);

  // both empty
  REQUIRE(structural_drift(fresh, 2, 4) == 0.0);

  REQUIRE_THROWS_AS(structural_drift(fresh, 1, 0), IndexError);
  REQUIRE_THROWS_AS(structural_drift(fresh, 3, 0), IndexError);
}

TEST_CASE("structural_drift stays in [0, 1] on random graphs") {
  const SynthResult s = synth_periodic(SynthSpec{.nodes = 40, .communities = 2, .snapshots = 6,
                                                 .seed = 7});
  for (int t = 2; t <= s.graph.num_snapshots(); ++t)
    for (int v = 0; v < s.graph.num_nodes(); ++v) {
      const double d = structural_drift(s.graph, t, v);
      REQUIRE(d >= 0.0);
      REQUIRE(d <= 1.0);
    }
}

TEST_CASE("negative table weights follow degree^power") {
  // Star around hub a gives deg(a)=16; chain edge gives deg ratio 16:1.
  EdgeSet e(18);
  for (int v = 1; v <= 16; ++v) e.add_edge(0, v);
  e.finalize();
  std::vector<std::string> names;
  for (int v = 0; v < 18; ++v) names.push_back(std::to_string(v));
  const TemporalGraph g(names, {e});
  const SamplingTable table = build_negative_table(g, 1, 0.75);
  REQUIRE_THAT(table.weight(0) / table.weight(1), Catch::Matchers::WithinAbs(8.0, 1e-12));
  REQUIRE(table.weight(17) == 0.0);  // isolated

  const SamplingTable uniform = build_negative_table(g, 1, 0.0);
  REQUIRE(uniform.weight(0) == uniform.weight(1));
}

TEST_CASE("negative table with one connected node always samples it") {
  EdgeSet e(3);
  e.add_edge(0, 1);
  e.finalize();
  // Power 0.75 over degrees {1,1,0}: node 2 never drawn.
  const TemporalGraph g({"a", "b", "c"}, {e});
  const SamplingTable table = build_negative_table(g, 1, 0.75);
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) REQUIRE(table.sample(rng) != 2);
}

TEST_CASE("negative table empirical frequency converges to deg^power") {
  const SynthResult s = synth_sbm(50, 2, 0.4, 0.05, 1, 11);
  const SamplingTable table = build_negative_table(s.graph, 1, 0.75);
  std::vector<long long> counts(50, 0);
  Rng rng(123);
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(table.sample(rng))];
  double tv = 0.0;
  for (int v = 0; v < 50; ++v) {
    const double expect = table.weight(v) / table.total_weight();
    tv += std::abs(static_cast<double>(counts[static_cast<std::size_t>(v)]) / draws - expect);
  }
  tv *= 0.5;
  REQUIRE(tv < 0.01);
}

TEST_CASE("negative table requires at least one edge") {
  EdgeSet empty(3), e(3);
  empty.finalize();
  e.add_edge(0, 1);
  e.finalize();
  const TemporalGraph g({"a", "b", "c"}, {empty, e});
  REQUIRE_THROWS_AS(build_negative_table(g, 1, 0.75), DataError);
  REQUIRE_NOTHROW(build_negative_table(g, 2, 0.75));
}
