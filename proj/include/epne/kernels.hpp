#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "epne/common.hpp"

namespace epne {

// A fixed causal-convolution kernel over a history window of length h.
// Index k = 0 is the oldest step (t-h), k = h-1 the most recent (t-1).
struct Kernel {
  enum class Kind { Haar, Decay };

  Kind kind = Kind::Decay;
  int level = 0;  // Haar: 1-based scale level (0 for custom scales)
  int shift = 0;  // Haar: first index of the span
  double rate = 0.0;  // Decay: decay rate per snapshot of age
  std::vector<double> weights;

  // Haar evaluation metadata: + on [pos_begin, pos_end), - on [neg_begin,
  // neg_end), both halves of equal length, magnitude `mag`. A kernel whose
  // span is too short to hold a zero-mean step has empty halves and is zero.
  int pos_begin = 0, pos_end = 0, neg_begin = 0, neg_end = 0;
  double mag = 0.0;

  bool is_zero() const { return kind == Kernel::Kind::Haar && pos_end == pos_begin; }
};

namespace detail {

// Haar step on span [s, e) of a window of length h. The older half is
// positive, the recent half negative; a middle element of an odd span stays
// zero so the weights sum to zero exactly.
inline Kernel make_haar(int h, int level, long long s, long long e) {
  Kernel k;
  k.kind = Kernel::Kind::Haar;
  k.level = level;
  k.shift = static_cast<int>(s);
  k.weights.assign(static_cast<std::size_t>(h), 0.0);
  const long long span = e - s;
  const long long half = span / 2;
  if (half >= 1) {
    k.mag = 1.0 / std::sqrt(static_cast<double>(2 * half));
    k.pos_begin = static_cast<int>(s);
    k.pos_end = static_cast<int>(s + half);
    k.neg_begin = static_cast<int>(e - half);
    k.neg_end = static_cast<int>(e);
    for (int i = k.pos_begin; i < k.pos_end; ++i) k.weights[static_cast<std::size_t>(i)] = k.mag;
    for (int i = k.neg_begin; i < k.neg_end; ++i) k.weights[static_cast<std::size_t>(i)] = -k.mag;
  }
  return k;
}

// `count` kernels of nominal support `support` tiling [0, h) left to right.
inline void append_scale(std::vector<Kernel>& out, int h, int level, int count,
                         long long support) {
  for (int k = 0; k < count; ++k) {
    const long long s = std::llround(static_cast<double>(k) * h / count);
    const long long e = std::min<long long>(s + support, h);
    out.push_back(make_haar(h, level, s, e));
  }
}

}  // namespace detail

// Dyadic Haar bank: level l in {1..L} holds 2^(l-1) kernels of support
// round(h / 2^(l-1)), shifts tiling the window left to right.
inline std::vector<Kernel> haar_bank(int h, int L) {
  if (h < 2) throw ConfigError("haar_bank: window length must be >= 2");
  if (L < 1 || (1 << L) > h)
    throw ConfigError("haar_bank: scale count L=" + std::to_string(L) +
                      " too large for window length h=" + std::to_string(h));
  std::vector<Kernel> out;
  out.reserve((1u << L) - 1);
  for (int l = 1; l <= L; ++l) {
    const int count = 1 << (l - 1);
    const long long support = std::llround(static_cast<double>(h) / count);
    detail::append_scale(out, h, l, count, support);
  }
  return out;
}

// Exponential age weighting: weight at index k is exp(-rate * age) with
// age = h-1-k, so the most recent step carries weight 1.
inline Kernel decay_kernel(int h, double rate) {
  if (h < 1) throw ConfigError("decay_kernel: window length must be >= 1");
  if (!(rate > 0.0)) throw ConfigError("decay_kernel: rate must be > 0");
  Kernel k;
  k.kind = Kernel::Kind::Decay;
  k.rate = rate;
  k.weights.resize(static_cast<std::size_t>(h));
  for (int i = 0; i < h; ++i)
    k.weights[static_cast<std::size_t>(i)] = std::exp(-rate * static_cast<double>(h - 1 - i));
  return k;
}

// The history window U_i^(t-h, t): rows (u^{t-h}, ..., u^{t-1}), oldest
// first, truncated to the available length when fewer than h past snapshots
// exist. Rows are read-only views into an EmbeddingStore.
struct HistoryWindow {
  int dim = 0;
  std::vector<std::span<const double>> rows;

  int length() const { return static_cast<int>(rows.size()); }
};

// Weighted vector sum sum_k u^{t-h+k} f(k). Haar kernels are evaluated as the
// difference of their two half sums so a constant window maps to an exact
// zero vector.
inline std::vector<double> causal_conv(const HistoryWindow& window, const Kernel& kernel) {
  if (static_cast<int>(kernel.weights.size()) != window.length())
    throw ShapeError("causal_conv: kernel length " + std::to_string(kernel.weights.size()) +
                     " != window length " + std::to_string(window.length()));
  std::vector<double> out(static_cast<std::size_t>(window.dim), 0.0);
  if (kernel.kind == Kernel::Kind::Haar) {
    if (kernel.is_zero()) return out;
    std::vector<double> pos(out.size(), 0.0);
    std::vector<double> neg(out.size(), 0.0);
    for (int k = kernel.pos_begin; k < kernel.pos_end; ++k)
      axpy(1.0, window.rows[static_cast<std::size_t>(k)], pos);
    for (int k = kernel.neg_begin; k < kernel.neg_end; ++k)
      axpy(1.0, window.rows[static_cast<std::size_t>(k)], neg);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (pos[i] - neg[i]) * kernel.mag;
    return out;
  }
  for (int k = 0; k < window.length(); ++k)
    axpy(kernel.weights[static_cast<std::size_t>(k)], window.rows[static_cast<std::size_t>(k)],
         out);
  return out;
}

// Which feature blocks to emit: the complete model uses both, the ablations
// keep only the decay (time) or only the Haar (frequency) blocks.
enum class FeatureMode { Full, TimeOnly, FreqOnly };

inline FeatureMode parse_feature_mode(const std::string& s) {
  if (s == "full") return FeatureMode::Full;
  if (s == "time") return FeatureMode::TimeOnly;
  if (s == "freq") return FeatureMode::FreqOnly;
  throw ConfigError("bad feature_mode '" + s + "' (expected full|time|freq)");
}

// The fixed kernel bank: Haar kernels (levels 1..L, shifts left to right)
// followed by one decay kernel. Kernel count and ordering depend only on
// (L or custom scale fractions), never on the window length, so the feature
// layout stays stable when the bank is regenerated for truncated windows.
struct KernelBank {
  int window_len = 0;
  int scales = 0;                  // L; 0 when custom fractions are used
  std::vector<double> fractions;   // custom scale fractions of the window
  std::vector<int> scale_counts;   // kernels per scale (custom mode)
  double decay_rate = 0.0;
  std::vector<Kernel> haar;
  Kernel decay;

  static KernelBank dyadic(int h, int L, double decay_rate) {
    KernelBank b;
    b.window_len = h;
    b.scales = L;
    b.decay_rate = decay_rate;
    b.haar = haar_bank(h, L);
    b.decay = decay_kernel(h, decay_rate);
    return b;
  }

  // Scale fractions b_i of the window; support round(b_i * h), tiled
  // round(h / support) times across the window.
  static KernelBank custom(int h, const std::vector<double>& fractions, double decay_rate) {
    if (h < 2) throw ConfigError("custom kernel bank: window length must be >= 2");
    if (fractions.empty()) throw ConfigError("custom kernel bank: no scale fractions given");
    KernelBank b;
    b.window_len = h;
    b.fractions = fractions;
    b.decay_rate = decay_rate;
    for (double f : fractions) {
      if (!(f > 0.0) || f > 1.0)
        throw ConfigError("custom scale fraction must be in (0, 1], got " + std::to_string(f));
      long long support = std::llround(f * h);
      support = std::max<long long>(1, std::min<long long>(support, h));
      const int count = static_cast<int>(
          std::max<long long>(1, std::llround(static_cast<double>(h) / support)));
      b.scale_counts.push_back(count);
      detail::append_scale(b.haar, h, 0, count, support);
    }
    b.decay = decay_kernel(h, decay_rate);
    return b;
  }

  // Same scale structure rebuilt for a shorter window m < window_len. Scales
  // whose support shrinks below 2 become zero kernels, keeping the kernel
  // count and ordering intact.
  KernelBank truncated(int m) const {
    if (m < 1) throw ConfigError("truncated bank: window length must be >= 1");
    if (m >= window_len) return *this;
    KernelBank b;
    b.window_len = m;
    b.scales = scales;
    b.fractions = fractions;
    b.scale_counts = scale_counts;
    b.decay_rate = decay_rate;
    if (scales > 0) {
      for (int l = 1; l <= scales; ++l) {
        const int count = 1 << (l - 1);
        const long long support = std::llround(static_cast<double>(m) / count);
        detail::append_scale(b.haar, m, l, count, support);
      }
    } else {
      for (std::size_t i = 0; i < fractions.size(); ++i) {
        long long support = std::llround(fractions[i] * m);
        support = std::max<long long>(1, std::min<long long>(support, m));
        detail::append_scale(b.haar, m, 0, scale_counts[i], support);
      }
    }
    b.decay = decay_kernel(m, decay_rate);
    return b;
  }

  int haar_count() const { return static_cast<int>(haar.size()); }

  int blocks(FeatureMode mode) const {
    switch (mode) {
      case FeatureMode::TimeOnly:
        return 1;
      case FeatureMode::FreqOnly:
        return haar_count();
      default:
        return 1 + haar_count();
    }
  }
};

// Complete temporal features of one node: time-domain block (decay kernel)
// followed by the frequency-domain blocks in bank order. Windows shorter than
// the minimum Haar support (length < 2) yield an all-zero frequency part and
// are flagged degenerate.
struct FeatureVector {
  std::vector<double> values;
  bool degenerate = false;
};

inline int feature_length(int dim, const KernelBank& bank, FeatureMode mode = FeatureMode::Full) {
  return dim * bank.blocks(mode);
}

inline FeatureVector temporal_features(const HistoryWindow& window, const KernelBank& bank,
                                       FeatureMode mode = FeatureMode::Full) {
  if (window.length() != bank.window_len)
    throw ShapeError("temporal_features: window length " + std::to_string(window.length()) +
                     " != bank window length " + std::to_string(bank.window_len));
  if (window.length() < 1) throw ShapeError("temporal_features: empty window");
  FeatureVector out;
  out.degenerate = window.length() < 2;
  out.values.reserve(static_cast<std::size_t>(feature_length(window.dim, bank, mode)));
  if (mode != FeatureMode::FreqOnly) {
    const std::vector<double> time = causal_conv(window, bank.decay);
    out.values.insert(out.values.end(), time.begin(), time.end());
  }
  if (mode != FeatureMode::TimeOnly) {
    for (const Kernel& k : bank.haar) {
      const std::vector<double> block = causal_conv(window, k);
      out.values.insert(out.values.end(), block.begin(), block.end());
    }
  }
  return out;
}

}  // namespace epne
