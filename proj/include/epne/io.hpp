#pragma once

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "epne/common.hpp"
#include "epne/eval.hpp"
#include "epne/graph.hpp"
#include "epne/model.hpp"

namespace epne {

// Round-trip-exact decimal rendering of a double.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  return in;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Checkpoints: word2vec-style text, header `|V| d t`, then one
// `node_name v1 ... vd` line per node.
// ---------------------------------------------------------------------------

inline std::string checkpoint_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "embeddings_t%03d.txt", t);
  return buf;
}

inline void write_checkpoint(const std::string& path, const EmbeddingStore& store, int t,
                             const std::vector<std::string>& names) {
  std::ofstream out = detail::open_out(path);
  out << store.num_nodes() << ' ' << store.dim() << ' ' << t << '\n';
  for (int v = 0; v < store.num_nodes(); ++v) {
    out << names[static_cast<std::size_t>(v)];
    for (double x : store.vec(t, v)) out << ' ' << format_double(x);
    out << '\n';
  }
}

struct Checkpoint {
  int t = 0;
  int dim = 0;
  std::vector<std::string> names;
  std::vector<double> vecs;  // num_nodes x dim
};

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  Checkpoint cp;
  int num_nodes = 0;
  std::string header;
  if (!std::getline(in, header)) throw ParseError(path + ": missing checkpoint header");
  {
    std::istringstream hs(header);
    if (!(hs >> num_nodes >> cp.dim >> cp.t) || num_nodes < 1 || cp.dim < 1)
      throw ParseError(path + ": bad checkpoint header '" + header + "'");
  }
  cp.names.reserve(static_cast<std::size_t>(num_nodes));
  cp.vecs.reserve(static_cast<std::size_t>(num_nodes) * cp.dim);
  std::string line;
  for (int v = 0; v < num_nodes; ++v) {
    if (!std::getline(in, line))
      throw ParseError(path + ": expected " + std::to_string(num_nodes) + " rows, got " +
                       std::to_string(v));
    std::istringstream ls(line);
    std::string name;
    ls >> name;
    cp.names.push_back(name);
    for (int k = 0; k < cp.dim; ++k) {
      double x;
      if (!(ls >> x)) throw ParseError(path + ": row " + std::to_string(v + 2) + " truncated");
      cp.vecs.push_back(x);
    }
  }
  return cp;
}

inline void write_decoder(const std::string& path, const Decoder& dec) {
  std::ofstream out = detail::open_out(path);
  out << dec.out_dim << ' ' << 2 * dec.feat_dim << '\n';
  for (int r = 0; r < dec.out_dim; ++r) {
    const std::span<const double> row = dec.row(r);
    for (std::size_t c = 0; c < row.size(); ++c)
      out << (c ? " " : "") << format_double(row[c]);
    out << '\n';
  }
}

inline Decoder read_decoder(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  Decoder dec;
  int cols = 0;
  if (!(in >> dec.out_dim >> cols) || dec.out_dim < 1 || cols < 2 || cols % 2 != 0)
    throw ParseError(path + ": bad decoder header");
  dec.feat_dim = cols / 2;
  dec.w.resize(static_cast<std::size_t>(dec.out_dim) * cols);
  for (double& x : dec.w)
    if (!(in >> x)) throw ParseError(path + ": decoder matrix truncated");
  return dec;
}

// ---------------------------------------------------------------------------
// Label files: `node TAB label` and `src TAB dst TAB label`.
// ---------------------------------------------------------------------------

inline std::vector<std::pair<std::string, std::string>> read_node_labels(
    const std::string& path) {
  std::ifstream in = detail::open_in(path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string node, label, extra;
    if (!(ls >> node >> label) || (ls >> extra))
      throw ParseError(path + " line " + std::to_string(line_no) + ": expected 'node label'");
    out.emplace_back(node, label);
  }
  return out;
}

inline std::vector<std::tuple<std::string, std::string, std::string>> read_edge_labels(
    const std::string& path) {
  std::ifstream in = detail::open_in(path);
  std::vector<std::tuple<std::string, std::string, std::string>> out;
  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string src, dst, label, extra;
    if (!(ls >> src >> dst >> label) || (ls >> extra))
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": expected 'src dst label'");
    out.emplace_back(src, dst, label);
  }
  return out;
}

inline void write_node_labels(const std::string& path,
                              const std::vector<std::pair<std::string, std::string>>& labels) {
  std::ofstream out = detail::open_out(path);
  for (const auto& [node, label] : labels) out << node << '\t' << label << '\n';
}

inline void write_edge_labels(
    const std::string& path,
    const std::vector<std::tuple<std::string, std::string, std::string>>& labels) {
  std::ofstream out = detail::open_out(path);
  for (const auto& [src, dst, label] : labels) out << src << '\t' << dst << '\t' << label << '\n';
}

inline void write_edge_list(const std::string& path, const TemporalGraph& g,
                            const std::string& header_comment = "") {
  std::ofstream out = detail::open_out(path);
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  for (int t = 1; t <= g.num_snapshots(); ++t)
    for (const auto& [i, j] : g.snapshot(t).edges())
      out << g.node_name(i) << '\t' << g.node_name(j) << '\t' << t << '\n';
}

inline void write_node_map(const std::string& path, const std::vector<std::string>& names) {
  std::ofstream out = detail::open_out(path);
  for (std::size_t v = 0; v < names.size(); ++v) out << v << '\t' << names[v] << '\n';
}

// ---------------------------------------------------------------------------
// Run outputs: loss trace, eval results, projection, manifest.
// ---------------------------------------------------------------------------

inline void write_losses_tsv(const std::string& path, const LossTrace& trace) {
  std::ofstream out = detail::open_out(path);
  out << "epoch\tt\tl_struct\tl_temporal\tl_smooth\ttotal\n";
  char buf[160];
  for (const EpochStats& e : trace.epochs) {
    std::snprintf(buf, sizeof(buf), "%d\t%d\t%.6f\t%.6f\t%.6f\t%.6f\n", e.epoch, e.t,
                  e.struct_mean, e.temporal_mean, e.smooth_mean, e.total);
    out << buf;
  }
}

struct ResultRow {
  std::string task;
  double train_ratio = 0.0;
  TaskResult result;
};

inline void write_results_tsv(const std::string& path, const std::vector<ResultRow>& rows) {
  std::ofstream out = detail::open_out(path);
  out << "task\ttrain_ratio\tmacro_f1_mean\tmacro_f1_std\tmicro_f1_mean\tmicro_f1_std\n";
  char buf[200];
  for (const ResultRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s\t%.2f\t%.4f\t%.4f\t%.4f\t%.4f\n", r.task.c_str(),
                  r.train_ratio, r.result.macro_mean, r.result.macro_std, r.result.micro_mean,
                  r.result.micro_std);
    out << buf;
  }
}

inline void write_projection_csv(const std::string& path, const std::vector<std::string>& names,
                                 const Projection& proj,
                                 const std::vector<std::string>& labels) {
  std::ofstream out = detail::open_out(path);
  out << "node,x,y,label\n";
  char buf[120];
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,", proj.coords[i][0], proj.coords[i][1]);
    out << names[i] << buf << (i < labels.size() ? labels[i] : "") << '\n';
  }
}

// Enough to reproduce a run exactly: config echo, its hash, seed, version.
inline void write_manifest(const std::string& path, const std::string& config_text,
                           std::uint64_t seed, const std::string& mode, int workers) {
  std::ofstream out = detail::open_out(path);
  char hash[24];
  std::snprintf(hash, sizeof(hash), "%016" PRIx64, fnv1a64(config_text));
  out << "version = " << kVersion << '\n';
  out << "config_hash = " << hash << '\n';
  out << "seed = " << seed << '\n';
  out << "mode = " << mode << '\n';
  out << "workers = " << workers << '\n';
  out << "# ---- config echo ----\n";
  out << config_text;
  if (!config_text.empty() && config_text.back() != '\n') out << '\n';
}

}  // namespace epne
