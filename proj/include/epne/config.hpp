#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "epne/common.hpp"
#include "epne/graph.hpp"
#include "epne/model.hpp"

namespace epne {

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace detail

// Flat `key = value` text with [section] headers, no nesting. Order is kept
// so manifests echo configs verbatim.
class KvConfig {
 public:
  struct Entry {
    std::string section, key, value;
  };

  static KvConfig parse_string(const std::string& text) {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    long long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::string t = detail::trim(line);
      if (t.empty() || t[0] == '#') continue;
      if (t.front() == '[') {
        if (t.back() != ']')
          throw ConfigError("config line " + std::to_string(line_no) + ": bad section header '" +
                            t + "'");
        section = detail::trim(t.substr(1, t.size() - 2));
        if (section.empty())
          throw ConfigError("config line " + std::to_string(line_no) + ": empty section name");
        continue;
      }
      const std::size_t eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
      Entry e{section, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1))};
      if (e.key.empty())
        throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      cfg.entries_.push_back(std::move(e));
    }
    return cfg;
  }

  static KvConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    KvConfig cfg = parse_string(ss.str());
    cfg.raw_text_ = ss.str();
    return cfg;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  const std::string& raw_text() const { return raw_text_; }

  bool has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    const Entry* e = find(section, key);
    return e ? e->value : fallback;
  }

  double get_double(const std::string& section, const std::string& key, double fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    char* end = nullptr;
    const double v = std::strtod(e->value.c_str(), &end);
    if (end == e->value.c_str() || *end != '\0')
      throw ConfigError(section + "." + key + ": expected a number, got '" + e->value + "'");
    return v;
  }

  long long get_int(const std::string& section, const std::string& key, long long fallback) const {
    const double v = get_double(section, key, static_cast<double>(fallback));
    const auto r = static_cast<long long>(std::llround(v));
    if (std::abs(v - static_cast<double>(r)) > 1e-9)
      throw ConfigError(section + "." + key + ": expected an integer");
    return r;
  }

  bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
    if (e->value == "false" || e->value == "0" || e->value == "no") return false;
    throw ConfigError(section + "." + key + ": expected a boolean, got '" + e->value + "'");
  }

  std::vector<double> get_list(const std::string& section, const std::string& key,
                               std::vector<double> fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    std::vector<double> out;
    std::string item;
    std::istringstream ss(e->value);
    while (std::getline(ss, item, ',')) {
      item = detail::trim(item);
      if (item.empty()) continue;
      char* end = nullptr;
      const double v = std::strtod(item.c_str(), &end);
      if (end == item.c_str() || *end != '\0')
        throw ConfigError(section + "." + key + ": bad list item '" + item + "'");
      out.push_back(v);
    }
    if (out.empty()) throw ConfigError(section + "." + key + ": empty list");
    return out;
  }

  // Every present (section, key) must be in `known`, else ConfigError.
  void reject_unknown(const std::set<std::string>& known) const {
    for (const Entry& e : entries_) {
      const std::string full = e.section + "." + e.key;
      if (!known.count(full)) throw ConfigError("unknown config key: " + full);
    }
  }

 private:
  const Entry* find(const std::string& section, const std::string& key) const {
    for (const Entry& e : entries_)
      if (e.section == section && e.key == key) return &e;
    return nullptr;
  }

  std::vector<Entry> entries_;
  std::string raw_text_;
};

// Everything a run needs: data paths, kernel/train hyperparameters, eval
// protocol, output directory.
struct RunConfig {
  struct Data {
    std::string edges;
    SnapshotSpec spec;
    std::string node_labels;
    std::string edge_labels;
  } data;

  TrainConfig train;

  struct Eval {
    std::vector<double> ratios{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    double edge_ratio = 0.7;
    int repeats = 10;
    double lambda = 1.0;
    int iters = 500;
    int snapshot = -1;  // -1: final
    std::uint64_t seed = 1;
  } eval;

  std::string out_dir = "out";
  std::string raw_text;

  static RunConfig from_kv(const KvConfig& kv) {
    static const std::set<std::string> known = {
        "data.edges", "data.snapshots", "data.node_labels", "data.edge_labels",
        "kernels.history_len", "kernels.scales", "kernels.decay_rate", "kernels.custom_scales",
        "train.dim", "train.alpha", "train.beta", "train.negatives", "train.neg_power",
        "train.walks_per_node", "train.walk_length", "train.window", "train.epochs",
        "train.learning_rate", "train.seed", "train.feature_mode", "train.temporal_distance",
        "train.freeze_walks", "train.smooth_mode", "train.workers",
        "eval.ratios", "eval.edge_ratio", "eval.repeats", "eval.lambda", "eval.iters",
        "eval.snapshot", "eval.seed",
        "output.dir",
    };
    kv.reject_unknown(known);

    RunConfig rc;
    rc.raw_text = kv.raw_text();
    rc.data.edges = kv.get_string("data", "edges", "");
    rc.data.spec = SnapshotSpec::parse(kv.get_string("data", "snapshots", "by-id"));
    rc.data.node_labels = kv.get_string("data", "node_labels", "");
    rc.data.edge_labels = kv.get_string("data", "edge_labels", "");

    TrainConfig& t = rc.train;
    t.history_len = static_cast<int>(kv.get_int("kernels", "history_len", t.history_len));
    t.scales = static_cast<int>(kv.get_int("kernels", "scales", t.scales));
    t.decay_rate = kv.get_double("kernels", "decay_rate", t.decay_rate);
    if (kv.has("kernels", "custom_scales"))
      t.custom_scales = kv.get_list("kernels", "custom_scales", {});
    t.dim = static_cast<int>(kv.get_int("train", "dim", t.dim));
    t.alpha = kv.get_double("train", "alpha", t.alpha);
    t.beta = kv.get_double("train", "beta", t.beta);
    t.negatives = static_cast<int>(kv.get_int("train", "negatives", t.negatives));
    t.neg_power = kv.get_double("train", "neg_power", t.neg_power);
    t.walks_per_node = static_cast<int>(kv.get_int("train", "walks_per_node", t.walks_per_node));
    t.walk_length = static_cast<int>(kv.get_int("train", "walk_length", t.walk_length));
    t.window = static_cast<int>(kv.get_int("train", "window", t.window));
    t.epochs = static_cast<int>(kv.get_int("train", "epochs", t.epochs));
    t.learning_rate = kv.get_double("train", "learning_rate", t.learning_rate);
    t.seed = static_cast<std::uint64_t>(kv.get_int("train", "seed", static_cast<long long>(t.seed)));
    t.feature_mode = parse_feature_mode(kv.get_string("train", "feature_mode", "full"));
    {
      const std::string d = kv.get_string("train", "temporal_distance", "one-minus-cos");
      if (d == "one-minus-cos")
        t.raw_cos = false;
      else if (d == "raw-cos")
        t.raw_cos = true;
      else
        throw ConfigError("train.temporal_distance: expected one-minus-cos|raw-cos, got '" + d +
                          "'");
    }
    t.freeze_walks = kv.get_bool("train", "freeze_walks", t.freeze_walks);
    {
      const std::string m = kv.get_string("train", "smooth_mode", "per-epoch");
      if (m == "per-epoch")
        t.smooth_per_sequence = false;
      else if (m == "per-sequence")
        t.smooth_per_sequence = true;
      else
        throw ConfigError("train.smooth_mode: expected per-epoch|per-sequence, got '" + m + "'");
    }
    t.workers = static_cast<int>(kv.get_int("train", "workers", t.workers));
    t.validate();

    rc.eval.ratios = kv.get_list("eval", "ratios", rc.eval.ratios);
    rc.eval.edge_ratio = kv.get_double("eval", "edge_ratio", rc.eval.edge_ratio);
    rc.eval.repeats = static_cast<int>(kv.get_int("eval", "repeats", rc.eval.repeats));
    rc.eval.lambda = kv.get_double("eval", "lambda", rc.eval.lambda);
    rc.eval.iters = static_cast<int>(kv.get_int("eval", "iters", rc.eval.iters));
    {
      const std::string s = kv.get_string("eval", "snapshot", "final");
      if (s == "final") {
        rc.eval.snapshot = -1;
      } else {
        rc.eval.snapshot = static_cast<int>(kv.get_int("eval", "snapshot", -1));
        if (rc.eval.snapshot < 1) throw ConfigError("eval.snapshot: expected 'final' or t >= 1");
      }
    }
    rc.eval.seed = static_cast<std::uint64_t>(
        kv.get_int("eval", "seed", static_cast<long long>(rc.eval.seed)));
    for (double r : rc.eval.ratios)
      if (!(r > 0.0) || r >= 1.0) throw ConfigError("eval.ratios: ratios must be in (0, 1)");
    if (!(rc.eval.edge_ratio > 0.0) || rc.eval.edge_ratio >= 1.0)
      throw ConfigError("eval.edge_ratio must be in (0, 1)");
    if (rc.eval.repeats < 1) throw ConfigError("eval.repeats must be >= 1");
    if (rc.eval.lambda < 0.0) throw ConfigError("eval.lambda must be >= 0");
    if (rc.eval.iters < 1) throw ConfigError("eval.iters must be >= 1");

    rc.out_dir = kv.get_string("output", "dir", rc.out_dir);
    if (rc.out_dir.empty()) throw ConfigError("output.dir must not be empty");
    return rc;
  }

  static RunConfig load(const std::string& path) { return from_kv(KvConfig::parse_file(path)); }
};

}  // namespace epne
