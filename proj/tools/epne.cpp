// Command-line front end: train / eval / synth / project / features-dump.
// Exit codes: 0 success, 2 config or input error, 3 numeric failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "epne/epne.hpp"

namespace fs = std::filesystem;
using namespace epne;

namespace {

int effective_workers(int flag_workers) {
  if (const char* env = std::getenv("EPNE_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      throw ConfigError("EPNE_WORKERS must be a positive integer");
    return static_cast<int>(v);
  }
  return flag_workers;
}

TemporalGraph load_graph(const RunConfig& rc) {
  if (rc.data.edges.empty()) throw ConfigError("data.edges is required");
  return load_edge_list(rc.data.edges, rc.data.spec);
}

// Reads the per-snapshot checkpoints written by `train` back into a store,
// mapping rows by node name.
EmbeddingStore load_store(const RunConfig& rc, const TemporalGraph& g) {
  const int T = g.num_snapshots();
  std::optional<EmbeddingStore> store;
  for (int t = 1; t <= T; ++t) {
    const std::string path = (fs::path(rc.out_dir) / checkpoint_name(t)).string();
    const Checkpoint cp = read_checkpoint(path);
    if (!store) store.emplace(g.num_nodes(), cp.dim);
    if (cp.dim != store->dim()) throw DataError(path + ": inconsistent embedding dimension");
    store->append_snapshot();
    for (std::size_t row = 0; row < cp.names.size(); ++row) {
      const int v = g.node_id(cp.names[row]);
      if (v < 0) throw DataError(path + ": unknown node '" + cp.names[row] + "'");
      std::span<double> dst = store->vec(t, v);
      for (int k = 0; k < cp.dim; ++k)
        dst[static_cast<std::size_t>(k)] = cp.vecs[row * cp.dim + static_cast<std::size_t>(k)];
    }
  }
  if (!store) throw DataError("no checkpoints found under " + rc.out_dir);
  return std::move(*store);
}

int cmd_train(const std::string& config_path, int workers_flag) {
  RunConfig rc = RunConfig::load(config_path);
  if (workers_flag > 0) rc.train.workers = workers_flag;
  rc.train.workers = effective_workers(rc.train.workers);
  const TemporalGraph g = load_graph(rc);

  const TrainResult result = train_all(g, rc.train);

  fs::create_directories(rc.out_dir);
  const fs::path out(rc.out_dir);
  for (int t = 1; t <= g.num_snapshots(); ++t)
    write_checkpoint((out / checkpoint_name(t)).string(), result.store, t, g.node_names());
  write_decoder((out / "decoder.txt").string(), result.decoder);
  write_losses_tsv((out / "losses.tsv").string(), result.trace);
  write_node_map((out / "node_map.tsv").string(), g.node_names());
  const std::string mode = rc.train.deepwalk_equivalent() ? "deepwalk-equivalent" : "epne";
  write_manifest((out / "manifest.txt").string(), rc.raw_text, rc.train.seed, mode,
                 rc.train.workers);
  std::printf("trained %d snapshots over %d nodes (d=%d, mode=%s) -> %s\n", g.num_snapshots(),
              g.num_nodes(), rc.train.dim, mode.c_str(), rc.out_dir.c_str());
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& task, int workers_flag) {
  RunConfig rc = RunConfig::load(config_path);
  const int workers = effective_workers(workers_flag > 0 ? workers_flag : 1);
  const TemporalGraph g = load_graph(rc);
  const EmbeddingStore store = load_store(rc, g);

  EvalOptions opt;
  opt.lambda = rc.eval.lambda;
  opt.iters = rc.eval.iters;
  opt.repeats = rc.eval.repeats;
  opt.seed = rc.eval.seed;
  opt.snapshot = rc.eval.snapshot;
  opt.workers = workers;

  std::vector<ResultRow> rows;
  if (task == "node") {
    if (rc.data.node_labels.empty()) throw ConfigError("data.node_labels is required for eval node");
    const auto labels = read_node_labels(rc.data.node_labels);
    for (double ratio : rc.eval.ratios)
      rows.push_back({"node", ratio, node_task(store, g, labels, ratio, opt)});
  } else {
    if (rc.data.edge_labels.empty()) throw ConfigError("data.edge_labels is required for eval edge");
    const auto labels = read_edge_labels(rc.data.edge_labels);
    rows.push_back({"edge", rc.eval.edge_ratio, edge_task(store, g, labels, rc.eval.edge_ratio, opt)});
  }

  fs::create_directories(rc.out_dir);
  const std::string out_path =
      (fs::path(rc.out_dir) / ("results_" + task + ".tsv")).string();
  write_results_tsv(out_path, rows);
  for (const ResultRow& r : rows)
    std::printf("%s\t%.2f\tmacro %.4f +- %.4f\tmicro %.4f +- %.4f\n", r.task.c_str(),
                r.train_ratio, r.result.macro_mean, r.result.macro_std, r.result.micro_mean,
                r.result.micro_std);
  std::printf("results written to %s\n", out_path.c_str());
  return 0;
}

int cmd_synth(const SynthSpec& spec, const std::string& kind, const std::string& out_dir) {
  const SynthResult result = [&]() -> SynthResult {
    if (kind == "periodic") return synth_periodic(spec);
    if (kind == "sbm")
      return synth_sbm(spec.nodes, spec.communities, spec.p_in, spec.p_out, spec.snapshots,
                       spec.seed);
    throw ConfigError("synth kind must be periodic|sbm, got '" + kind + "'");
  }();

  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  char comment[256];
  std::snprintf(comment, sizeof(comment),
                "synthetic %s network: n=%d c=%d T=%d p_in=%g p_out=%g rho=%g P=%d duty=%g "
                "trend=%g seed=%llu",
                kind.c_str(), spec.nodes, spec.communities, spec.snapshots, spec.p_in, spec.p_out,
                spec.periodic_frac, spec.period, spec.duty, spec.trend_frac,
                static_cast<unsigned long long>(spec.seed));
  write_edge_list((out / "edges.tsv").string(), result.graph, comment);
  write_node_labels((out / "node_labels.tsv").string(), result.node_labels);
  if (!result.edge_labels.empty())
    write_edge_labels((out / "edge_labels.tsv").string(), result.edge_labels);
  std::ofstream manifest = std::ofstream((out / "synth_manifest.txt").string());
  manifest << "kind = " << kind << "\nnodes = " << spec.nodes
           << "\ncommunities = " << spec.communities << "\nsnapshots = " << spec.snapshots
           << "\np_in = " << spec.p_in << "\np_out = " << spec.p_out
           << "\nperiodic_frac = " << spec.periodic_frac << "\nperiod = " << spec.period
           << "\nduty = " << spec.duty << "\ntrend_frac = " << spec.trend_frac
           << "\nseed = " << spec.seed << '\n';
  long long total_edges = 0;
  for (int t = 1; t <= result.graph.num_snapshots(); ++t)
    total_edges += result.graph.snapshot(t).edge_count();
  std::printf("synthesized %d nodes, %d snapshots, %lld temporal edges -> %s\n",
              result.graph.num_nodes(), result.graph.num_snapshots(), total_edges,
              out_dir.c_str());
  return 0;
}

int cmd_project(const std::string& checkpoint, const std::string& labels_path,
                const std::string& out_path, std::uint64_t seed) {
  const Checkpoint cp = read_checkpoint(checkpoint);
  const int n = static_cast<int>(cp.names.size());
  EmbeddingStore store(n, cp.dim);
  store.append_snapshot();
  for (int v = 0; v < n; ++v) {
    std::span<double> dst = store.vec(1, v);
    for (int k = 0; k < cp.dim; ++k)
      dst[static_cast<std::size_t>(k)] =
          cp.vecs[static_cast<std::size_t>(v) * cp.dim + static_cast<std::size_t>(k)];
  }
  const Projection proj = project_2d(store, 1, {}, seed);

  std::vector<std::string> labels(cp.names.size());
  if (!labels_path.empty()) {
    std::map<std::string, std::string> by_name;
    for (const auto& [node, label] : read_node_labels(labels_path)) by_name[node] = label;
    for (std::size_t i = 0; i < cp.names.size(); ++i) {
      auto it = by_name.find(cp.names[i]);
      if (it != by_name.end()) labels[i] = it->second;
    }
  }
  write_projection_csv(out_path, cp.names, proj, labels);
  std::printf("projected %d vectors -> %s\n", n, out_path.c_str());
  return 0;
}

int cmd_features_dump(const std::string& config_path, int snapshot, const std::string& out_path) {
  const RunConfig rc = RunConfig::load(config_path);
  const TemporalGraph g = load_graph(rc);
  const EmbeddingStore store = load_store(rc, g);
  const int t = snapshot < 0 ? store.num_snapshots() : snapshot;
  if (t < 2 || t > store.num_snapshots())
    throw ConfigError("features-dump: snapshot must be in [2, T]");
  const KernelBank bank = rc.train.make_bank();
  const int m = std::min(rc.train.history_len, t - 1);
  const KernelBank bank_m = bank.truncated(m);

  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write " + out_path);
  const int fl = feature_length(store.dim(), bank, rc.train.feature_mode);
  out << "# node";
  for (int k = 0; k < fl; ++k) out << "\tf" << k;
  out << '\n';
  for (int v = 0; v < g.num_nodes(); ++v) {
    const FeatureVector f =
        temporal_features(store.history(v, t, rc.train.history_len), bank_m,
                          rc.train.feature_mode);
    out << g.node_name(v);
    for (double x : f.values) out << '\t' << format_double(x);
    out << '\n';
  }
  std::printf("dumped %d feature vectors (len %d, t=%d) -> %s\n", g.num_nodes(), fl, t,
              out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EPNE: evolutionary-pattern preserving temporal network embedding"};
  app.require_subcommand(1);

  std::string config_path, task, kind = "periodic", out_dir, checkpoint, labels_path, out_path;
  int workers_flag = 0;
  int snapshot = -1;
  SynthSpec spec;

  CLI::App* train = app.add_subcommand("train", "Train embeddings from a config file");
  train->add_option("--config", config_path, "run config file")->required();
  train->add_option("--workers", workers_flag, "parallel workers (default 1 = deterministic)");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate trained embeddings");
  eval->add_option("task", task, "node|edge")->required()->check(CLI::IsMember({"node", "edge"}));
  eval->add_option("--config", config_path, "run config file")->required();
  eval->add_option("--workers", workers_flag, "parallel workers for repeat splits");

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic temporal network");
  synth->add_option("--kind", kind, "periodic|sbm (default periodic)");
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--nodes", spec.nodes, "node count");
  synth->add_option("--communities", spec.communities, "community count");
  synth->add_option("--snapshots", spec.snapshots, "snapshot count T");
  synth->add_option("--p-in", spec.p_in, "intra-community edge probability");
  synth->add_option("--p-out", spec.p_out, "inter-community edge probability");
  synth->add_option("--rho", spec.periodic_frac, "periodic fraction of intra pairs");
  synth->add_option("--period", spec.period, "period P of periodic edges");
  synth->add_option("--duty", spec.duty, "duty cycle fraction");
  synth->add_option("--trend-frac", spec.trend_frac, "trend fraction of intra pairs");
  synth->add_option("--seed", spec.seed, "rng seed");

  CLI::App* project = app.add_subcommand("project", "PCA-project a checkpoint to 2-D");
  project->add_option("--checkpoint", checkpoint, "embedding checkpoint file")->required();
  project->add_option("--labels", labels_path, "optional node label file");
  project->add_option("--out", out_path, "output CSV")->required();
  std::uint64_t proj_seed = 1;
  project->add_option("--seed", proj_seed, "power-iteration seed");

  CLI::App* fdump = app.add_subcommand("features-dump", "Dump per-node temporal features");
  fdump->add_option("--config", config_path, "run config file")->required();
  fdump->add_option("--snapshot", snapshot, "snapshot t (default: final)");
  fdump->add_option("--out", out_path, "output TSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, workers_flag);
    if (eval->parsed()) return cmd_eval(config_path, task, workers_flag);
    if (synth->parsed()) return cmd_synth(spec, kind, out_dir);
    if (project->parsed()) return cmd_project(checkpoint, labels_path, out_path, proj_seed);
    if (fdump->parsed()) return cmd_features_dump(config_path, snapshot, out_path);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
