#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "epne/common.hpp"
#include "epne/graph.hpp"
#include "epne/kernels.hpp"
#include "epne/walks.hpp"

namespace epne {

// Pairs whose difference or decoded prediction falls below this norm are
// skipped by the temporal loss (cosine undefined).
inline constexpr double kNormEps = 1e-8;

// ---------------------------------------------------------------------------
// Per-snapshot embeddings u_i^t. Snapshots below the newest one are frozen
// history; only the slice being trained is written.
// ---------------------------------------------------------------------------
class EmbeddingStore {
 public:
  EmbeddingStore(int num_nodes, int dim) : num_nodes_(num_nodes), dim_(dim) {
    if (num_nodes < 1 || dim < 1) throw ConfigError("embedding store needs nodes >= 1, dim >= 1");
  }

  int num_nodes() const { return num_nodes_; }
  int dim() const { return dim_; }
  int num_snapshots() const { return static_cast<int>(slices_.size()); }

  // Adds a zero-initialized slice; returns its snapshot index.
  int append_snapshot() {
    slices_.emplace_back(static_cast<std::size_t>(num_nodes_) * dim_, 0.0);
    return num_snapshots();
  }

  std::span<double> vec(int t, int node) {
    check(t, node);
    return {slices_[static_cast<std::size_t>(t - 1)].data() +
                static_cast<std::size_t>(node) * dim_,
            static_cast<std::size_t>(dim_)};
  }

  std::span<const double> vec(int t, int node) const {
    check(t, node);
    return {slices_[static_cast<std::size_t>(t - 1)].data() +
                static_cast<std::size_t>(node) * dim_,
            static_cast<std::size_t>(dim_)};
  }

  std::vector<double>& slice(int t) {
    check(t, 0);
    return slices_[static_cast<std::size_t>(t - 1)];
  }
  const std::vector<double>& slice(int t) const {
    check(t, 0);
    return slices_[static_cast<std::size_t>(t - 1)];
  }

  // History window (u^{t-m}, ..., u^{t-1}) with m = min(h, t-1), oldest first.
  HistoryWindow history(int node, int t, int h) const {
    check(t, node);
    HistoryWindow w;
    w.dim = dim_;
    const int m = std::min(h, t - 1);
    w.rows.reserve(static_cast<std::size_t>(m));
    for (int s = t - m; s <= t - 1; ++s) w.rows.push_back(vec(s, node));
    return w;
  }

 private:
  void check(int t, int node) const {
    if (t < 1 || t > num_snapshots())
      throw IndexError("embedding store: snapshot " + std::to_string(t) + " out of range");
    if (node < 0 || node >= num_nodes_)
      throw IndexError("embedding store: node " + std::to_string(node) + " out of range");
  }

  int num_nodes_;
  int dim_;
  std::vector<std::vector<double>> slices_;
};

// ---------------------------------------------------------------------------
// Trainable decoder g(s_i, s_j) = sigmoid(W (s_i (+) s_j)), W: d x 2 d_s.
// ---------------------------------------------------------------------------
struct Decoder {
  int out_dim = 0;
  int feat_dim = 0;
  std::vector<double> w;  // row-major out_dim x (2 * feat_dim)

  static Decoder create(int out_dim, int feat_dim, Rng& rng) {
    Decoder d;
    d.out_dim = out_dim;
    d.feat_dim = feat_dim;
    d.w.resize(static_cast<std::size_t>(out_dim) * 2 * feat_dim);
    const double a = std::sqrt(6.0 / (out_dim + 2.0 * feat_dim));
    for (double& x : d.w) x = rng.uniform(-a, a);
    return d;
  }

  std::span<double> row(int r) {
    return {w.data() + static_cast<std::size_t>(r) * 2 * feat_dim,
            static_cast<std::size_t>(2 * feat_dim)};
  }
  std::span<const double> row(int r) const {
    return {w.data() + static_cast<std::size_t>(r) * 2 * feat_dim,
            static_cast<std::size_t>(2 * feat_dim)};
  }
};

inline std::vector<double> decode_relpos(std::span<const double> si, std::span<const double> sj,
                                         const Decoder& dec) {
  if (static_cast<int>(si.size()) != dec.feat_dim || static_cast<int>(sj.size()) != dec.feat_dim)
    throw ShapeError("decode_relpos: feature length " + std::to_string(si.size()) + "/" +
                     std::to_string(sj.size()) + " does not match decoder feat_dim " +
                     std::to_string(dec.feat_dim));
  std::vector<double> out(static_cast<std::size_t>(dec.out_dim));
  for (int r = 0; r < dec.out_dim; ++r) {
    const std::span<const double> row = dec.row(r);
    const double z = dot(row.subspan(0, si.size()), si) + dot(row.subspan(si.size()), sj);
    out[static_cast<std::size_t>(r)] = sigmoid(z);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training configuration (Eq. 15 weights and all SGD knobs).
// ---------------------------------------------------------------------------
struct TrainConfig {
  int dim = 32;
  int history_len = 8;   // h
  int scales = 3;        // L
  std::vector<double> custom_scales;
  double decay_rate = 0.5;
  double alpha = 1.0;  // temporal weight
  double beta = 0.01;  // smoothness weight
  int negatives = 5;   // k
  double neg_power = 0.75;
  int walks_per_node = 10;
  int walk_length = 10;
  int window = 5;
  int epochs = 10;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
  FeatureMode feature_mode = FeatureMode::Full;
  bool raw_cos = false;            // ablation: minimize raw cosine instead of 1 - cos
  bool freeze_walks = false;       // reuse the epoch-0 walks every epoch
  bool smooth_per_sequence = false;
  int workers = 1;

  void validate() const {
    if (dim < 1) throw ConfigError("train.dim must be >= 1");
    if (history_len < 2) throw ConfigError("kernels.history_len must be >= 2");
    if (custom_scales.empty() && (scales < 1 || (1LL << scales) > history_len))
      throw ConfigError("kernels.scales must satisfy 1 <= L <= log2(history_len)");
    if (alpha < 0.0) throw ConfigError("train.alpha must be >= 0");
    if (beta < 0.0) throw ConfigError("train.beta must be >= 0");
    if (negatives < 1) throw ConfigError("train.negatives must be >= 1");
    if (neg_power < 0.0) throw ConfigError("train.neg_power must be >= 0");
    if (walks_per_node < 1) throw ConfigError("train.walks_per_node must be >= 1");
    if (walk_length < 1) throw ConfigError("train.walk_length must be >= 1");
    if (window < 1) throw ConfigError("train.window must be >= 1");
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
    if (workers < 1) throw ConfigError("train.workers must be >= 1");
    if (!(decay_rate > 0.0)) throw ConfigError("kernels.decay_rate must be > 0");
  }

  KernelBank make_bank() const {
    return custom_scales.empty() ? KernelBank::dyadic(history_len, scales, decay_rate)
                                 : KernelBank::custom(history_len, custom_scales, decay_rate);
  }

  bool deepwalk_equivalent() const { return alpha == 0.0 && beta == 0.0; }
};

// ---------------------------------------------------------------------------
// Pair-level gradient kernels. The SGD loop and the batch evaluators (used by
// the finite-difference and rotation checks) share these.
// ---------------------------------------------------------------------------

// Skip-gram negative-sampling gradients are linear combinations of the
// involved vectors:
//   grad_ui = coef_pos * uj + sum_n coef_neg[n] * un
//   grad_uj = coef_pos * ui
//   grad_un = coef_neg[n] * ui
struct StructPairGrad {
  double loss = 0.0;
  double coef_pos = 0.0;
  std::vector<double> coef_neg;
};

inline void struct_pair_grads(std::span<const double> ui, std::span<const double> uj,
                              const std::vector<std::span<const double>>& negs,
                              StructPairGrad& out) {
  const double dot_ij = dot(ui, uj);
  out.loss = -log_sigmoid(dot_ij);
  out.coef_pos = -sigmoid(-dot_ij);
  out.coef_neg.resize(negs.size());
  for (std::size_t n = 0; n < negs.size(); ++n) {
    const double dot_in = dot(ui, negs[n]);
    out.loss -= log_sigmoid(-dot_in);
    out.coef_neg[n] = sigmoid(dot_in);
  }
}

struct TemporalScratch {
  std::vector<double> x, y, dDdx, dDdz;
  void resize(int d) {
    x.resize(static_cast<std::size_t>(d));
    y.resize(static_cast<std::size_t>(d));
    dDdx.resize(static_cast<std::size_t>(d));
    dDdz.resize(static_cast<std::size_t>(d));
  }
};

// D(u_i - u_j, g(s_i, s_j)) with D = 1 - cos (or raw cos for the ablation).
// On success fills scratch.dDdx (gradient w.r.t. u_i; u_j gets its negative)
// and scratch.dDdz (chain term for W: dD/dW[r][c] = dDdz[r] * cat[c]).
// Returns (loss, skipped).
inline std::pair<double, bool> temporal_pair_grads(std::span<const double> ui,
                                                   std::span<const double> uj,
                                                   std::span<const double> si,
                                                   std::span<const double> sj, const Decoder& dec,
                                                   bool raw_cos, TemporalScratch& s) {
  const int d = dec.out_dim;
  s.resize(d);
  const std::size_t ds = si.size();
  for (int r = 0; r < d; ++r) {
    const std::span<const double> row = dec.row(r);
    const double z = dot(row.subspan(0, ds), si) + dot(row.subspan(ds), sj);
    s.y[static_cast<std::size_t>(r)] = sigmoid(z);
  }
  for (int r = 0; r < d; ++r)
    s.x[static_cast<std::size_t>(r)] =
        ui[static_cast<std::size_t>(r)] - uj[static_cast<std::size_t>(r)];
  const double nx = nrm2(s.x);
  const double ny = nrm2(s.y);
  if (nx < kNormEps || ny < kNormEps) return {0.0, true};
  const double dxy = dot(s.x, s.y);
  const double cosv = dxy / (nx * ny);
  const double sign = raw_cos ? 1.0 : -1.0;
  const double loss = raw_cos ? cosv : 1.0 - cosv;
  const double inv_nxny = 1.0 / (nx * ny);
  const double c_nx2 = cosv / (nx * nx);
  const double c_ny2 = cosv / (ny * ny);
  for (int r = 0; r < d; ++r) {
    const auto ri = static_cast<std::size_t>(r);
    s.dDdx[ri] = sign * (s.y[ri] * inv_nxny - c_nx2 * s.x[ri]);
    const double dcdy = s.x[ri] * inv_nxny - c_ny2 * s.y[ri];
    s.dDdz[ri] = sign * dcdy * s.y[ri] * (1.0 - s.y[ri]);
  }
  return {loss, false};
}

// ---------------------------------------------------------------------------
// Batch loss evaluators over the time-t slice. Sampling is frozen (negatives
// are passed in), so these are exact functions of the parameters and suit
// finite-difference oracles.
// ---------------------------------------------------------------------------

struct PairBatch {
  std::vector<std::pair<int, int>> pairs;
  std::vector<std::vector<int>> negatives;  // negatives[p] belongs to pairs[p]
};

inline double struct_loss(const EmbeddingStore& store, int t, const PairBatch& batch,
                          std::vector<double>* grad = nullptr) {
  const int d = store.dim();
  if (grad) grad->assign(static_cast<std::size_t>(store.num_nodes()) * d, 0.0);
  double total = 0.0;
  StructPairGrad pg;
  std::vector<std::span<const double>> negs;
  for (std::size_t p = 0; p < batch.pairs.size(); ++p) {
    const auto [i, j] = batch.pairs[p];
    negs.clear();
    for (int n : batch.negatives[p]) negs.push_back(store.vec(t, n));
    struct_pair_grads(store.vec(t, i), store.vec(t, j), negs, pg);
    total += pg.loss;
    if (grad) {
      std::span<double> gi{grad->data() + static_cast<std::size_t>(i) * d,
                           static_cast<std::size_t>(d)};
      std::span<double> gj{grad->data() + static_cast<std::size_t>(j) * d,
                           static_cast<std::size_t>(d)};
      axpy(pg.coef_pos, store.vec(t, j), gi);
      axpy(pg.coef_pos, store.vec(t, i), gj);
      for (std::size_t n = 0; n < negs.size(); ++n) {
        axpy(pg.coef_neg[n], negs[n], gi);
        std::span<double> gn{
            grad->data() + static_cast<std::size_t>(batch.negatives[p][n]) * d,
            static_cast<std::size_t>(d)};
        axpy(pg.coef_neg[n], store.vec(t, i), gn);
      }
    }
  }
  return total;
}

struct TemporalDiag {
  long long pairs = 0;
  long long contributed = 0;
  long long skipped_norm = 0;
  long long skipped_degenerate = 0;
};

// Temporal loss over explicit pairs. Historical embeddings enter only through
// the (frozen) features, so gradients flow to the time-t vectors and W alone.
inline double temporal_loss(const EmbeddingStore& store, int t,
                            const std::vector<std::pair<int, int>>& pairs, const Decoder& dec,
                            const KernelBank& bank, FeatureMode mode, bool raw_cos,
                            std::vector<double>* grad_u = nullptr,
                            std::vector<double>* grad_w = nullptr, TemporalDiag* diag = nullptr) {
  if (t < 2) throw IndexError("temporal_loss requires t >= 2");
  const int d = store.dim();
  if (grad_u) grad_u->assign(static_cast<std::size_t>(store.num_nodes()) * d, 0.0);
  if (grad_w) grad_w->assign(dec.w.size(), 0.0);
  const int m = std::min(bank.window_len, t - 1);
  const KernelBank bank_m = bank.truncated(m);
  std::vector<std::optional<FeatureVector>> cache(static_cast<std::size_t>(store.num_nodes()));
  auto features = [&](int v) -> const FeatureVector& {
    auto& slot = cache[static_cast<std::size_t>(v)];
    if (!slot) slot = temporal_features(store.history(v, t, bank.window_len), bank_m, mode);
    return *slot;
  };
  double total = 0.0;
  TemporalScratch scratch;
  TemporalDiag local;
  for (const auto& [i, j] : pairs) {
    ++local.pairs;
    const FeatureVector& si = features(i);
    const FeatureVector& sj = features(j);
    if (si.degenerate || sj.degenerate) {
      ++local.skipped_degenerate;
      continue;
    }
    const auto [loss, skipped] =
        temporal_pair_grads(store.vec(t, i), store.vec(t, j), si.values, sj.values, dec, raw_cos,
                            scratch);
    if (skipped) {
      ++local.skipped_norm;
      continue;
    }
    ++local.contributed;
    total += loss;
    if (grad_u) {
      std::span<double> gi{grad_u->data() + static_cast<std::size_t>(i) * d,
                           static_cast<std::size_t>(d)};
      std::span<double> gj{grad_u->data() + static_cast<std::size_t>(j) * d,
                           static_cast<std::size_t>(d)};
      axpy(1.0, scratch.dDdx, gi);
      axpy(-1.0, scratch.dDdx, gj);
    }
    if (grad_w) {
      const std::size_t ds = si.values.size();
      for (int r = 0; r < d; ++r) {
        double* row = grad_w->data() + static_cast<std::size_t>(r) * 2 * ds;
        const double c = scratch.dDdz[static_cast<std::size_t>(r)];
        for (std::size_t cix = 0; cix < ds; ++cix) row[cix] += c * si.values[cix];
        for (std::size_t cix = 0; cix < ds; ++cix) row[ds + cix] += c * sj.values[cix];
      }
    }
  }
  if (diag) *diag = local;
  return total;
}

// Drift-weighted displacement penalty sum_i ||u_i^t - u_i^{t-1}|| / drift_i,
// drift clamped below at kDriftEps. u^{t-1} is constant.
inline double smooth_loss(const EmbeddingStore& store, const TemporalGraph& g, int t,
                          std::vector<double>* grad = nullptr) {
  if (t < 2) throw IndexError("smooth_loss requires t >= 2");
  const int d = store.dim();
  if (grad) grad->assign(static_cast<std::size_t>(store.num_nodes()) * d, 0.0);
  double total = 0.0;
  std::vector<double> delta(static_cast<std::size_t>(d));
  for (int v = 0; v < store.num_nodes(); ++v) {
    const std::span<const double> cur = store.vec(t, v);
    const std::span<const double> prev = store.vec(t - 1, v);
    for (int r = 0; r < d; ++r)
      delta[static_cast<std::size_t>(r)] =
          cur[static_cast<std::size_t>(r)] - prev[static_cast<std::size_t>(r)];
    const double nd = nrm2(delta);
    if (nd == 0.0) continue;
    const double drift = std::max(structural_drift(g, t, v), kDriftEps);
    total += nd / drift;
    if (grad) {
      std::span<double> gv{grad->data() + static_cast<std::size_t>(v) * d,
                           static_cast<std::size_t>(d)};
      axpy(1.0 / (nd * drift), delta, gv);
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Incremental per-snapshot SGD (Algorithm-1 style trainer).
// ---------------------------------------------------------------------------

struct EpochStats {
  int t = 0;
  int epoch = 0;
  double lr = 0.0;
  long long struct_pairs = 0;
  long long temporal_pairs = 0;  // contributing (non-skipped) pairs
  long long skipped_norm = 0;
  long long skipped_degenerate = 0;
  long long smooth_nodes = 0;
  double struct_mean = 0.0;
  double temporal_mean = 0.0;
  double smooth_mean = 0.0;
  double total = 0.0;  // struct_mean + alpha*temporal_mean + beta*smooth_mean
};

struct LossTrace {
  std::vector<EpochStats> epochs;
  bool skip_warning = false;
};

namespace detail {

// Lazily computed per-node temporal features at snapshot t. History is frozen
// during the snapshot, so entries never change once written; concurrent
// duplicate computation writes identical bytes and is tolerated in hogwild
// mode.
class FeatureCache {
 public:
  FeatureCache(const EmbeddingStore& store, int t, const KernelBank& bank_m, int full_h,
               FeatureMode mode, int feat_len)
      : store_(store),
        t_(t),
        bank_m_(bank_m),
        full_h_(full_h),
        mode_(mode),
        feat_len_(feat_len),
        data_(static_cast<std::size_t>(store.num_nodes()) * feat_len),
        ready_(static_cast<std::size_t>(store.num_nodes())) {
    for (auto& r : ready_) r.store(0, std::memory_order_relaxed);
  }

  std::span<const double> get(int v) {
    auto& flag = ready_[static_cast<std::size_t>(v)];
    if (flag.load(std::memory_order_acquire) == 0) {
      const FeatureVector f =
          temporal_features(store_.history(v, t_, full_h_), bank_m_, mode_);
      std::copy(f.values.begin(), f.values.end(),
                data_.begin() + static_cast<std::size_t>(v) * feat_len_);
      flag.store(1, std::memory_order_release);
    }
    return {data_.data() + static_cast<std::size_t>(v) * feat_len_,
            static_cast<std::size_t>(feat_len_)};
  }

 private:
  const EmbeddingStore& store_;
  int t_;
  const KernelBank& bank_m_;
  int full_h_;
  FeatureMode mode_;
  int feat_len_;
  std::vector<double> data_;
  std::vector<std::atomic<std::uint8_t>> ready_;
};

// One gradient step on the smoothness term for node v. The step length is
// capped at ||u^t - u^{t-1}|| so a clamped drift cannot overshoot past the
// previous vector. Returns the node's loss contribution at the pre-step
// values.
inline double apply_smooth_step(std::span<double> cur, std::span<const double> prev,
                                double drift_clamped, double lr_beta,
                                std::vector<double>& delta) {
  const int d = static_cast<int>(cur.size());
  for (int r = 0; r < d; ++r)
    delta[static_cast<std::size_t>(r)] =
        cur[static_cast<std::size_t>(r)] - prev[static_cast<std::size_t>(r)];
  const double nd = nrm2(delta);
  if (nd == 0.0) return 0.0;
  const double step = std::min(lr_beta / drift_clamped, nd);
  axpy(-step / nd, delta, cur);
  return nd / drift_clamped;
}

struct WorkerTally {
  double struct_sum = 0.0;
  double temporal_sum = 0.0;
  long long struct_pairs = 0;
  long long temporal_pairs = 0;
  long long skipped_norm = 0;
  long long skipped_degenerate = 0;
  bool nonfinite = false;
  int bad_i = -1, bad_j = -1;
};

}  // namespace detail

// Trains the time-t slice (appended here) and continues training the shared
// decoder. Snapshots below t must already be present. At t = 1 the temporal
// and smoothness terms are inactive.
inline LossTrace train_snapshot(const TemporalGraph& g, int t, EmbeddingStore& store, Decoder& dec,
                                const TrainConfig& cfg) {
  cfg.validate();
  if (store.num_snapshots() != t - 1)
    throw ShapeError("train_snapshot: store has " + std::to_string(store.num_snapshots()) +
                     " snapshots, expected " + std::to_string(t - 1));
  const int V = g.num_nodes();
  const int d = cfg.dim;
  store.append_snapshot();

  // Warm start from u^{t-1}; fresh uniform init at t = 1.
  {
    Rng rng(mix_seed(cfg.seed, {kSeedInit, static_cast<std::uint64_t>(t)}));
    for (int v = 0; v < V; ++v) {
      std::span<double> u = store.vec(t, v);
      if (t == 1) {
        for (double& x : u) x = rng.uniform(-0.5 / d, 0.5 / d);
      } else {
        const std::span<const double> prev = store.vec(t - 1, v);
        for (int r = 0; r < d; ++r)
          u[static_cast<std::size_t>(r)] = prev[static_cast<std::size_t>(r)] + 1e-3 * rng.normal();
      }
    }
  }

  const EdgeSet& es = g.snapshot(t);
  const bool has_edges = es.edge_count() > 0;
  std::optional<SamplingTable> table;
  if (has_edges) table.emplace(build_negative_table(g, t, cfg.neg_power));

  const KernelBank bank = cfg.make_bank();
  const int m = std::min(cfg.history_len, t - 1);
  const bool temporal_active = cfg.alpha > 0.0 && t >= 2 && m >= 2;
  const bool smooth_active = cfg.beta > 0.0 && t >= 2;
  std::optional<KernelBank> bank_m;
  const int feat_len = feature_length(d, bank, cfg.feature_mode);
  if (dec.out_dim != d || dec.feat_dim != feat_len)
    throw ShapeError("train_snapshot: decoder shape does not match config");
  std::optional<detail::FeatureCache> feats;
  if (temporal_active) {
    bank_m.emplace(bank.truncated(m));
    feats.emplace(store, t, *bank_m, cfg.history_len, cfg.feature_mode, feat_len);
  }

  std::vector<double> drift_c;
  if (smooth_active) {
    drift_c.resize(static_cast<std::size_t>(V));
    for (int v = 0; v < V; ++v)
      drift_c[static_cast<std::size_t>(v)] = std::max(structural_drift(g, t, v), kDriftEps);
  }

  LossTrace trace;
  const std::size_t ds = static_cast<std::size_t>(feat_len);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.epochs > 1
                          ? cfg.learning_rate * (1.0 - 0.9 * epoch / (cfg.epochs - 1))
                          : cfg.learning_rate;
    EpochStats stats;
    stats.t = t;
    stats.epoch = epoch;
    stats.lr = lr;

    WalkSet walks;
    if (has_edges) {
      const std::uint64_t wseed =
          mix_seed(cfg.seed, {kSeedWalks, static_cast<std::uint64_t>(t),
                              static_cast<std::uint64_t>(cfg.freeze_walks ? 0 : epoch)});
      walks = generate_walks(g, t, cfg.walks_per_node, cfg.walk_length, wseed);
    }

    const int workers = std::max(1, std::min<int>(cfg.workers, std::max<std::size_t>(
                                                                   1, walks.walks.size())));

    auto process_range = [&](std::size_t begin, std::size_t end, int tid,
                             detail::WorkerTally& tally) {
      Rng neg_rng(mix_seed(cfg.seed, {kSeedNegatives, static_cast<std::uint64_t>(t),
                                      static_cast<std::uint64_t>(epoch),
                                      static_cast<std::uint64_t>(tid)}));
      std::vector<double> coef_neg(static_cast<std::size_t>(cfg.negatives));
      TemporalScratch ts;
      std::vector<int> neg_ids(static_cast<std::size_t>(cfg.negatives));
      std::vector<std::span<const double>> neg_vecs(static_cast<std::size_t>(cfg.negatives));
      std::vector<double> delta_ui(static_cast<std::size_t>(d));
      std::vector<double> smooth_delta(static_cast<std::size_t>(d));
      std::vector<double>& slab = store.slice(t);
      auto uvec = [&](int v) {
        return std::span<double>{slab.data() + static_cast<std::size_t>(v) * d,
                                 static_cast<std::size_t>(d)};
      };
      for (std::size_t widx = begin; widx < end; ++widx) {
        const Walk& walk = walks.walks[widx];
        for_each_context(walk, cfg.window, [&](int i, int j) {
          std::span<double> ui = uvec(i);
          std::span<double> uj = uvec(j);
          // Draw negatives (resampling i and j) before touching any vector.
          int drawn = 0;
          for (int n = 0; n < cfg.negatives; ++n) {
            int cand = -1;
            for (int tries = 0; tries < 100; ++tries) {
              cand = table->sample(neg_rng);
              if (cand != i && cand != j) break;
              cand = -1;
            }
            if (cand < 0) continue;
            neg_ids[static_cast<std::size_t>(drawn)] = cand;
            neg_vecs[static_cast<std::size_t>(drawn)] = uvec(cand);
            ++drawn;
          }
          const auto negs_used =
              std::span<const std::span<const double>>(neg_vecs.data(),
                                                       static_cast<std::size_t>(drawn));
          // Gradients at the pre-update values.
          const double dot_ij = dot(ui, uj);
          double pair_loss = -log_sigmoid(dot_ij);
          const double coef_pos = -sigmoid(-dot_ij);
          for (int n = 0; n < drawn; ++n) {
            const double dot_in = dot(ui, negs_used[static_cast<std::size_t>(n)]);
            pair_loss -= log_sigmoid(-dot_in);
            coef_neg[static_cast<std::size_t>(n)] = sigmoid(dot_in);
          }
          tally.struct_sum += pair_loss;
          ++tally.struct_pairs;

          bool temporal_here = false;
          double tloss = 0.0;
          if (cfg.alpha > 0.0 && t >= 2 && !temporal_active) {
            ++tally.skipped_degenerate;  // window shorter than the minimum Haar support
          }
          if (temporal_active) {
            const std::span<const double> si = feats->get(i);
            const std::span<const double> sj = feats->get(j);
            const auto [loss, skipped] =
                temporal_pair_grads(ui, uj, si, sj, dec, cfg.raw_cos, ts);
            if (skipped) {
              ++tally.skipped_norm;
            } else {
              temporal_here = true;
              tloss = loss;
              tally.temporal_sum += loss;
              ++tally.temporal_pairs;
            }
          }
          if (!std::isfinite(pair_loss) || !std::isfinite(tloss)) {
            tally.nonfinite = true;
            tally.bad_i = i;
            tally.bad_j = j;
            return;
          }

          // delta_ui gathers everything touching u_i before any write.
          std::fill(delta_ui.begin(), delta_ui.end(), 0.0);
          axpy(coef_pos, uj, std::span<double>(delta_ui));
          for (int n = 0; n < drawn; ++n)
            axpy(coef_neg[static_cast<std::size_t>(n)], negs_used[static_cast<std::size_t>(n)],
                 std::span<double>(delta_ui));

          axpy(-lr * coef_pos, ui, uj);
          for (int n = 0; n < drawn; ++n)
            axpy(-lr * coef_neg[static_cast<std::size_t>(n)], ui,
                 uvec(neg_ids[static_cast<std::size_t>(n)]));
          axpy(-lr, delta_ui, ui);

          if (temporal_here) {
            const double lr_a = lr * cfg.alpha;
            axpy(-lr_a, ts.dDdx, ui);
            axpy(lr_a, ts.dDdx, uj);
            const std::span<const double> si = feats->get(i);
            const std::span<const double> sj = feats->get(j);
            for (int r = 0; r < d; ++r) {
              double* row = dec.w.data() + static_cast<std::size_t>(r) * 2 * ds;
              const double c = -lr_a * ts.dDdz[static_cast<std::size_t>(r)];
              for (std::size_t cix = 0; cix < ds; ++cix) row[cix] += c * si[cix];
              for (std::size_t cix = 0; cix < ds; ++cix) row[ds + cix] += c * sj[cix];
            }
          }
        });
        if (tally.nonfinite) return;
        if (smooth_active && cfg.smooth_per_sequence) {
          const int v = walk.nodes.front();
          detail::apply_smooth_step(uvec(v), store.vec(t - 1, v),
                                    drift_c[static_cast<std::size_t>(v)], lr * cfg.beta,
                                    smooth_delta);
        }
      }
    };

    std::vector<detail::WorkerTally> tallies(static_cast<std::size_t>(workers));
    if (workers == 1) {
      process_range(0, walks.walks.size(), 0, tallies[0]);
    } else {
      std::vector<std::thread> pool;
      const std::size_t chunk = (walks.walks.size() + workers - 1) / workers;
      for (int tid = 0; tid < workers; ++tid) {
        const std::size_t begin = static_cast<std::size_t>(tid) * chunk;
        const std::size_t end = std::min(walks.walks.size(), begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end, tid] {
          process_range(begin, end, tid, tallies[static_cast<std::size_t>(tid)]);
        });
      }
      for (auto& th : pool) th.join();
    }

    double struct_sum = 0.0, temporal_sum = 0.0;
    for (const auto& tally : tallies) {
      if (tally.nonfinite)
        throw NumericError("non-finite loss at t=" + std::to_string(t) +
                           " epoch=" + std::to_string(epoch) + " pair=(" +
                           std::to_string(tally.bad_i) + "," + std::to_string(tally.bad_j) +
                           ") lr=" + std::to_string(lr));
      struct_sum += tally.struct_sum;
      temporal_sum += tally.temporal_sum;
      stats.struct_pairs += tally.struct_pairs;
      stats.temporal_pairs += tally.temporal_pairs;
      stats.skipped_norm += tally.skipped_norm;
      stats.skipped_degenerate += tally.skipped_degenerate;
    }

    double smooth_sum = 0.0;
    if (smooth_active) {
      std::vector<double> smooth_delta(static_cast<std::size_t>(d));
      for (int v = 0; v < V; ++v) {
        if (cfg.smooth_per_sequence && es.degree(v) > 0) continue;
        smooth_sum += detail::apply_smooth_step(store.vec(t, v), store.vec(t - 1, v),
                                                drift_c[static_cast<std::size_t>(v)],
                                                lr * cfg.beta, smooth_delta);
        ++stats.smooth_nodes;
      }
    }

    stats.struct_mean = stats.struct_pairs > 0 ? struct_sum / stats.struct_pairs : 0.0;
    stats.temporal_mean = stats.temporal_pairs > 0 ? temporal_sum / stats.temporal_pairs : 0.0;
    stats.smooth_mean = stats.smooth_nodes > 0 ? smooth_sum / stats.smooth_nodes : 0.0;
    stats.total =
        stats.struct_mean + cfg.alpha * stats.temporal_mean + cfg.beta * stats.smooth_mean;
    if (!std::isfinite(stats.total))
      throw NumericError("non-finite epoch loss at t=" + std::to_string(t) +
                         " epoch=" + std::to_string(epoch) + " lr=" + std::to_string(lr));
    trace.epochs.push_back(stats);
  }

  long long considered = 0, skipped = 0;
  for (const auto& e : trace.epochs) {
    considered += e.temporal_pairs + e.skipped_norm;
    skipped += e.skipped_norm;
  }
  if (considered > 0 && skipped * 10 > considered) {
    trace.skip_warning = true;
    std::fprintf(stderr, "warning: %.1f%% of temporal pairs skipped by the norm guard at t=%d\n",
                 100.0 * skipped / considered, t);
  }
  return trace;
}

struct TrainResult {
  EmbeddingStore store;
  Decoder decoder;
  LossTrace trace;
};

// Sequential incremental training over all snapshots; the decoder is shared
// and keeps training across snapshots.
inline TrainResult train_all(const TemporalGraph& g, const TrainConfig& cfg) {
  cfg.validate();
  EmbeddingStore store(g.num_nodes(), cfg.dim);
  const KernelBank bank = cfg.make_bank();
  Rng drng(mix_seed(cfg.seed, {kSeedDecoder}));
  Decoder dec = Decoder::create(cfg.dim, feature_length(cfg.dim, bank, cfg.feature_mode), drng);
  LossTrace trace;
  for (int t = 1; t <= g.num_snapshots(); ++t) {
    LossTrace part = train_snapshot(g, t, store, dec, cfg);
    trace.epochs.insert(trace.epochs.end(), part.epochs.begin(), part.epochs.end());
    trace.skip_warning = trace.skip_warning || part.skip_warning;
  }
  return {std::move(store), std::move(dec), std::move(trace)};
}

}  // namespace epne
