#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "epne/common.hpp"
#include "epne/graph.hpp"
#include "epne/model.hpp"

namespace epne {

struct LabeledDataset {
  int feat_dim = 0;
  int num_classes = 0;
  std::vector<double> x;  // row-major size() x feat_dim
  std::vector<int> y;

  std::size_t size() const { return y.size(); }

  std::span<const double> row(std::size_t i) const {
    return {x.data() + i * static_cast<std::size_t>(feat_dim),
            static_cast<std::size_t>(feat_dim)};
  }

  void add(std::span<const double> features, int label) {
    x.insert(x.end(), features.begin(), features.end());
    y.push_back(label);
  }
};

// Multinomial logistic regression, weights C x (feat_dim + 1) with the bias
// in the last column. The bias is not regularized.
struct LinearClassifier {
  int num_classes = 0;
  int feat_dim = 0;
  double lambda = 0.0;
  std::vector<double> w;

  std::span<const double> row(int c) const {
    return {w.data() + static_cast<std::size_t>(c) * (feat_dim + 1),
            static_cast<std::size_t>(feat_dim + 1)};
  }

  int predict(std::span<const double> x) const {
    int best = 0;
    double best_score = score(0, x);
    for (int c = 1; c < num_classes; ++c) {
      const double s = score(c, x);
      if (s > best_score) {
        best_score = s;
        best = c;
      }
    }
    return best;
  }

  double score(int c, std::span<const double> x) const {
    const std::span<const double> wc = row(c);
    return dot(wc.subspan(0, x.size()), x) + wc[x.size()];
  }
};

namespace detail {

// Mean cross-entropy + (lambda/2)||W_no_bias||^2 and its gradient. The
// per-sample mean convention makes the fit invariant to duplicating rows.
inline double logreg_objective(const LabeledDataset& data, double lambda,
                               const std::vector<double>& w, std::vector<double>* grad) {
  const int C = data.num_classes;
  const int D = data.feat_dim;
  const std::size_t n = data.size();
  const int cols = D + 1;
  if (grad) grad->assign(w.size(), 0.0);
  double loss = 0.0;
  std::vector<double> logits(static_cast<std::size_t>(C));
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> xi = data.row(i);
    double mx = -1e300;
    for (int c = 0; c < C; ++c) {
      const double* wc = w.data() + static_cast<std::size_t>(c) * cols;
      double z = wc[D];
      for (int k = 0; k < D; ++k) z += wc[k] * xi[static_cast<std::size_t>(k)];
      logits[static_cast<std::size_t>(c)] = z;
      mx = std::max(mx, z);
    }
    double denom = 0.0;
    for (int c = 0; c < C; ++c) {
      logits[static_cast<std::size_t>(c)] = std::exp(logits[static_cast<std::size_t>(c)] - mx);
      denom += logits[static_cast<std::size_t>(c)];
    }
    const int yi = data.y[i];
    loss -= std::log(logits[static_cast<std::size_t>(yi)] / denom);
    if (grad) {
      for (int c = 0; c < C; ++c) {
        const double p = logits[static_cast<std::size_t>(c)] / denom;
        const double coef = (p - (c == yi ? 1.0 : 0.0)) / static_cast<double>(n);
        double* gc = grad->data() + static_cast<std::size_t>(c) * cols;
        for (int k = 0; k < D; ++k) gc[k] += coef * xi[static_cast<std::size_t>(k)];
        gc[D] += coef;
      }
    }
  }
  loss /= static_cast<double>(n);
  double reg = 0.0;
  for (int c = 0; c < C; ++c) {
    const double* wc = w.data() + static_cast<std::size_t>(c) * cols;
    for (int k = 0; k < D; ++k) reg += wc[k] * wc[k];
    if (grad) {
      double* gc = grad->data() + static_cast<std::size_t>(c) * cols;
      for (int k = 0; k < D; ++k) gc[k] += lambda * wc[k];
    }
  }
  return loss + 0.5 * lambda * reg;
}

}  // namespace detail

// Full-batch gradient descent with backtracking (Armijo) line search.
// Converges when the gradient norm drops below 1e-6 or iters run out. The
// objective never increases across accepted steps.
inline LinearClassifier fit_logreg(const LabeledDataset& train, double lambda, int iters,
                                   std::uint64_t /*seed*/ = 0) {
  if (train.size() == 0) throw DataError("fit_logreg: empty training set");
  {
    std::vector<int> seen;
    for (int y : train.y)
      if (std::find(seen.begin(), seen.end(), y) == seen.end()) seen.push_back(y);
    if (seen.size() < 2) throw DataError("degenerate-task: training set has a single class");
  }
  if (lambda < 0.0) throw ConfigError("fit_logreg: lambda must be >= 0");

  LinearClassifier clf;
  clf.num_classes = train.num_classes;
  clf.feat_dim = train.feat_dim;
  clf.lambda = lambda;
  clf.w.assign(static_cast<std::size_t>(train.num_classes) * (train.feat_dim + 1), 0.0);

  std::vector<double> grad;
  std::vector<double> trial(clf.w.size());
  double loss = detail::logreg_objective(train, lambda, clf.w, &grad);
  double step = 1.0;
  for (int it = 0; it < iters; ++it) {
    double gnorm2 = 0.0;
    for (double gv : grad) gnorm2 += gv * gv;
    if (std::sqrt(gnorm2) < 1e-6) break;
    step = std::min(step * 2.0, 1e6);
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      for (std::size_t k = 0; k < clf.w.size(); ++k) trial[k] = clf.w[k] - step * grad[k];
      const double trial_loss = detail::logreg_objective(train, lambda, trial, nullptr);
      if (trial_loss <= loss - 1e-4 * step * gnorm2) {
        clf.w = trial;
        loss = trial_loss;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no admissible step left at this scale
    loss = detail::logreg_objective(train, lambda, clf.w, &grad);
  }
  return clf;
}

// (macro_f1, micro_f1) over C classes. Per-class F1 is 0 when precision and
// recall are both undefined; micro-F1 over pooled counts equals accuracy for
// single-label multiclass.
inline std::pair<double, double> f1_scores(std::span<const int> pred, std::span<const int> gold,
                                           int num_classes) {
  if (pred.size() != gold.size()) throw ShapeError("f1_scores: length mismatch");
  std::vector<long long> tp(static_cast<std::size_t>(num_classes), 0);
  std::vector<long long> fp(static_cast<std::size_t>(num_classes), 0);
  std::vector<long long> fn(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == gold[i]) {
      ++tp[static_cast<std::size_t>(pred[i])];
    } else {
      ++fp[static_cast<std::size_t>(pred[i])];
      ++fn[static_cast<std::size_t>(gold[i])];
    }
  }
  double macro = 0.0;
  long long tp_all = 0, fp_all = 0, fn_all = 0;
  for (int c = 0; c < num_classes; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    const double denom = static_cast<double>(2 * tp[ci] + fp[ci] + fn[ci]);
    macro += denom > 0.0 ? 2.0 * static_cast<double>(tp[ci]) / denom : 0.0;
    tp_all += tp[ci];
    fp_all += fp[ci];
    fn_all += fn[ci];
  }
  macro /= static_cast<double>(num_classes);
  const double micro_denom = static_cast<double>(2 * tp_all + fp_all + fn_all);
  const double micro = micro_denom > 0.0 ? 2.0 * static_cast<double>(tp_all) / micro_denom : 0.0;
  return {macro, micro};
}

struct EvalOptions {
  double lambda = 1.0;
  int iters = 500;
  int repeats = 10;
  std::uint64_t seed = 1;
  int snapshot = -1;  // -1: final snapshot
  int workers = 1;
};

struct TaskResult {
  double macro_mean = 0.0, macro_std = 0.0;
  double micro_mean = 0.0, micro_std = 0.0;
  int repeats = 0;
  long long skipped = 0;  // label records that matched no embedded instance
};

namespace detail {

inline int class_id(std::map<std::string, int>& classes, const std::string& label) {
  return classes.emplace(label, static_cast<int>(classes.size())).first->second;
}

// Remaps class ids to the sorted order of their label strings so results do
// not depend on file order.
inline void canonicalize_classes(std::map<std::string, int>& classes, std::vector<int>& y) {
  std::vector<int> remap(classes.size());
  int next = 0;
  for (auto& [label, id] : classes) {  // std::map iterates keys in order
    remap[static_cast<std::size_t>(id)] = next;
    id = next++;
  }
  for (int& v : y) v = remap[static_cast<std::size_t>(v)];
}

// Stratified split of instance indices; every class with >= 2 instances keeps
// at least one on each side.
inline void stratified_split(std::span<const int> y, int num_classes, double train_ratio,
                             Rng& rng, std::vector<std::size_t>& train_idx,
                             std::vector<std::size_t>& test_idx) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < y.size(); ++i)
    by_class[static_cast<std::size_t>(y[i])].push_back(i);
  train_idx.clear();
  test_idx.clear();
  for (auto& members : by_class) {
    for (std::size_t i = members.size(); i > 1; --i)
      std::swap(members[i - 1], members[rng.below(i)]);
    if (members.empty()) continue;
    std::size_t n_train;
    if (members.size() == 1) {
      n_train = 1;
    } else {
      const auto want = static_cast<std::size_t>(
          std::llround(train_ratio * static_cast<double>(members.size())));
      n_train = std::clamp<std::size_t>(want, 1, members.size() - 1);
    }
    for (std::size_t i = 0; i < members.size(); ++i)
      (i < n_train ? train_idx : test_idx).push_back(members[i]);
  }
}

inline TaskResult run_repeats(const LabeledDataset& data, double train_ratio,
                              const EvalOptions& opt, long long skipped) {
  if (data.num_classes < 2) throw DataError("degenerate-task: fewer than 2 classes");
  if (!(train_ratio > 0.0) || train_ratio >= 1.0)
    throw ConfigError("train_ratio must be in (0, 1)");
  std::vector<double> macros(static_cast<std::size_t>(opt.repeats));
  std::vector<double> micros(static_cast<std::size_t>(opt.repeats));

  auto one_repeat = [&](int rep) {
    Rng rng(mix_seed(opt.seed, {kSeedEvalSplit, static_cast<std::uint64_t>(rep)}));
    std::vector<std::size_t> train_idx, test_idx;
    stratified_split(data.y, data.num_classes, train_ratio, rng, train_idx, test_idx);
    LabeledDataset train, test;
    train.feat_dim = test.feat_dim = data.feat_dim;
    train.num_classes = test.num_classes = data.num_classes;
    for (std::size_t i : train_idx) train.add(data.row(i), data.y[i]);
    for (std::size_t i : test_idx) test.add(data.row(i), data.y[i]);
    const LinearClassifier clf = fit_logreg(train, opt.lambda, opt.iters, opt.seed);
    std::vector<int> pred(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) pred[i] = clf.predict(test.row(i));
    const auto [macro, micro] = f1_scores(pred, test.y, data.num_classes);
    macros[static_cast<std::size_t>(rep)] = macro;
    micros[static_cast<std::size_t>(rep)] = micro;
  };

  const int workers = std::max(1, std::min(opt.workers, opt.repeats));
  if (workers == 1) {
    for (int rep = 0; rep < opt.repeats; ++rep) one_repeat(rep);
  } else {
    std::vector<std::thread> pool;
    for (int tid = 0; tid < workers; ++tid)
      pool.emplace_back([&, tid] {
        for (int rep = tid; rep < opt.repeats; rep += workers) one_repeat(rep);
      });
    for (auto& th : pool) th.join();
  }

  auto mean_std = [](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double v : xs) mean += v;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    if (xs.size() > 1) {
      for (double v : xs) var += (v - mean) * (v - mean);
      var /= static_cast<double>(xs.size() - 1);
    }
    return std::pair<double, double>{mean, std::sqrt(var)};
  };
  TaskResult out;
  out.repeats = opt.repeats;
  out.skipped = skipped;
  std::tie(out.macro_mean, out.macro_std) = mean_std(macros);
  std::tie(out.micro_mean, out.micro_std) = mean_std(micros);
  return out;
}

inline int resolve_snapshot(const EmbeddingStore& store, int requested) {
  const int t = requested < 0 ? store.num_snapshots() : requested;
  if (t < 1 || t > store.num_snapshots())
    throw IndexError("eval: snapshot " + std::to_string(requested) + " out of range");
  return t;
}

}  // namespace detail

// Node classification on u_i^t (default: final snapshot) with stratified
// random splits; label records for unknown nodes are skipped and counted.
inline TaskResult node_task(const EmbeddingStore& store, const TemporalGraph& g,
                            const std::vector<std::pair<std::string, std::string>>& labels,
                            double train_ratio, const EvalOptions& opt = {}) {
  const int t = detail::resolve_snapshot(store, opt.snapshot);
  LabeledDataset data;
  data.feat_dim = store.dim();
  std::map<std::string, int> classes;
  long long skipped = 0;
  std::vector<char> used(static_cast<std::size_t>(g.num_nodes()), 0);
  for (const auto& [name, label] : labels) {
    const int v = g.node_id(name);
    if (v < 0) {
      ++skipped;
      continue;
    }
    if (used[static_cast<std::size_t>(v)]) continue;
    used[static_cast<std::size_t>(v)] = 1;
    data.add(store.vec(t, v), detail::class_id(classes, label));
  }
  data.num_classes = static_cast<int>(classes.size());
  detail::canonicalize_classes(classes, data.y);
  if (skipped > 0)
    std::fprintf(stderr, "warning: %lld node label(s) matched no graph node\n", skipped);
  return detail::run_repeats(data, train_ratio, opt, skipped);
}

// Edge classification with features [u_i^t (+) u_j^t], endpoints in canonical
// (smaller internal id first) order. Labeled edges absent from the static
// union are skipped and counted.
inline TaskResult edge_task(const EmbeddingStore& store, const TemporalGraph& g,
                            const std::vector<std::tuple<std::string, std::string, std::string>>&
                                labels,
                            double train_ratio = 0.7, const EvalOptions& opt = {}) {
  const int t = detail::resolve_snapshot(store, opt.snapshot);
  const EdgeSet uni = static_edges(g);
  LabeledDataset data;
  data.feat_dim = 2 * store.dim();
  std::map<std::string, int> classes;
  long long skipped = 0;
  std::vector<double> feat(static_cast<std::size_t>(2 * store.dim()));
  for (const auto& [src, dst, label] : labels) {
    int i = g.node_id(src);
    int j = g.node_id(dst);
    if (i < 0 || j < 0 || i == j || !uni.has_edge(i, j)) {
      ++skipped;
      continue;
    }
    if (i > j) std::swap(i, j);
    const std::span<const double> ui = store.vec(t, i);
    const std::span<const double> uj = store.vec(t, j);
    std::copy(ui.begin(), ui.end(), feat.begin());
    std::copy(uj.begin(), uj.end(), feat.begin() + store.dim());
    data.add(feat, detail::class_id(classes, label));
  }
  data.num_classes = static_cast<int>(classes.size());
  detail::canonicalize_classes(classes, data.y);
  if (skipped > 0)
    std::fprintf(stderr, "warning: %lld edge label(s) not present in the static union\n", skipped);
  return detail::run_repeats(data, train_ratio, opt, skipped);
}

struct Projection {
  std::vector<std::array<double, 2>> coords;  // aligned with the input node list
  bool rank_deficient = false;
};

// Top-2 PCA by power iteration with deflation. Component signs are fixed by
// making the largest-magnitude loading positive.
inline Projection project_2d(const EmbeddingStore& store, int t, std::span<const int> nodes,
                             std::uint64_t seed = 1) {
  const int tt = detail::resolve_snapshot(store, t);
  std::vector<int> all;
  if (nodes.empty()) {
    all.resize(static_cast<std::size_t>(store.num_nodes()));
    for (int v = 0; v < store.num_nodes(); ++v) all[static_cast<std::size_t>(v)] = v;
    nodes = all;
  }
  const std::size_t n = nodes.size();
  if (n < 2) throw DataError("project_2d: need at least 2 nodes");
  const int d = store.dim();

  std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
  for (int v : nodes) axpy(1.0, store.vec(tt, v), mean);
  scal(1.0 / static_cast<double>(n), mean);
  std::vector<double> x(n * static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> row = store.vec(tt, nodes[i]);
    for (int k = 0; k < d; ++k)
      x[i * d + static_cast<std::size_t>(k)] =
          row[static_cast<std::size_t>(k)] - mean[static_cast<std::size_t>(k)];
  }

  std::vector<double> cov(static_cast<std::size_t>(d) * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (int a = 0; a < d; ++a) {
      const double xa = x[i * d + static_cast<std::size_t>(a)];
      for (int b = 0; b < d; ++b)
        cov[static_cast<std::size_t>(a) * d + b] += xa * x[i * d + static_cast<std::size_t>(b)];
    }

  auto power_iter = [&](const std::vector<double>& c, Rng& rng, std::vector<double>& v) {
    v.resize(static_cast<std::size_t>(d));
    for (double& e : v) e = rng.uniform(-1.0, 1.0);
    double vn = nrm2(v);
    for (double& e : v) e /= vn;
    std::vector<double> next(static_cast<std::size_t>(d));
    for (int it = 0; it < 1000; ++it) {
      for (int a = 0; a < d; ++a)
        next[static_cast<std::size_t>(a)] =
            dot({c.data() + static_cast<std::size_t>(a) * d, static_cast<std::size_t>(d)}, v);
      const double nn = nrm2(next);
      if (nn == 0.0) return 0.0;
      for (double& e : next) e /= nn;
      double diff = 0.0;
      for (int a = 0; a < d; ++a)
        diff = std::max(diff, std::abs(next[static_cast<std::size_t>(a)] -
                                       v[static_cast<std::size_t>(a)]));
      v = next;
      if (diff < 1e-13) break;
    }
    std::vector<double> cv(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a)
      cv[static_cast<std::size_t>(a)] =
          dot({c.data() + static_cast<std::size_t>(a) * d, static_cast<std::size_t>(d)}, v);
    return dot(cv, v);
  };

  auto fix_sign = [&](std::vector<double>& v) {
    std::size_t arg = 0;
    for (std::size_t k = 1; k < v.size(); ++k)
      if (std::abs(v[k]) > std::abs(v[arg])) arg = k;
    if (v[arg] < 0.0)
      for (double& e : v) e = -e;
  };

  Projection out;
  out.coords.resize(n);
  std::vector<double> v1, v2;
  Rng rng1(mix_seed(seed, {kSeedProjection, 1}));
  const double lam1 = power_iter(cov, rng1, v1);
  if (lam1 <= 0.0) {
    std::fprintf(stderr, "warning: projection input has no variance\n");
    out.rank_deficient = true;
    for (auto& cpt : out.coords) cpt = {0.0, 0.0};
    return out;
  }
  fix_sign(v1);

  std::vector<double> deflated = cov;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      deflated[static_cast<std::size_t>(a) * d + b] -=
          lam1 * v1[static_cast<std::size_t>(a)] * v1[static_cast<std::size_t>(b)];
  Rng rng2(mix_seed(seed, {kSeedProjection, 2}));
  const double lam2 = power_iter(deflated, rng2, v2);
  if (lam2 <= lam1 * 1e-12) {
    out.rank_deficient = true;
    v2.assign(static_cast<std::size_t>(d), 0.0);
    std::fprintf(stderr, "warning: projection input is rank deficient; second column zeroed\n");
  } else {
    fix_sign(v2);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> row{x.data() + i * d, static_cast<std::size_t>(d)};
    out.coords[i] = {dot(row, v1), out.rank_deficient ? 0.0 : dot(row, v2)};
  }
  return out;
}

}  // namespace epne
