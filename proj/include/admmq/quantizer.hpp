// Quantization level sets and Euclidean projection. Levels are {-a, +a}
// (binary) or {-a, 0, +a} (ternary) with a single positive scaling factor per
// layer. Projected values are produced as exact copies of +-a, so feasibility
// is a bitwise property.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <admmq/common.hpp>
#include <admmq/tensor.hpp>

namespace admmq {

enum class QuantMode { binary, ternary, excluded };

inline const char* quant_mode_name(QuantMode m) {
  switch (m) {
    case QuantMode::binary: return "binary";
    case QuantMode::ternary: return "ternary";
    case QuantMode::excluded: return "excluded";
  }
  return "?";
}

inline QuantMode quant_mode_from_string(const std::string& s) {
  if (s == "binary") return QuantMode::binary;
  if (s == "ternary") return QuantMode::ternary;
  if (s == "excluded") return QuantMode::excluded;
  throw ConfigError("unknown quantization mode '" + s + "'");
}

inline int level_count(QuantMode m) {
  return m == QuantMode::binary ? 2 : m == QuantMode::ternary ? 3 : 0;
}

// Per weight-bearing layer, in model order.
struct SchemeEntry {
  std::string layer;
  QuantMode mode = QuantMode::excluded;
  double alpha = 0.0;  // set by init_alpha / updated by each projection
};

struct QuantScheme {
  std::vector<SchemeEntry> entries;

  const SchemeEntry* find(const std::string& layer) const {
    for (const SchemeEntry& e : entries)
      if (e.layer == layer) return &e;
    return nullptr;
  }
};

struct QuantizedLayer {
  Tensor values;  // every entry is exactly -alpha, +alpha, or 0 (ternary)
  double alpha = 0.0;
  QuantMode mode = QuantMode::binary;
};

// Scaling factor initialization: mean of absolute weight values.
inline double init_alpha(const Tensor& weights) {
  if (weights.empty()) throw QuantError("init_alpha: empty tensor");
  double sum = 0.0;
  for (double w : weights.values()) sum += std::fabs(w);
  double alpha = sum / static_cast<double>(weights.numel());
  if (alpha == 0.0)
    throw QuantError("init_alpha: all-zero tensor has no positive scaling factor");
  return alpha;
}

// Elementwise nearest level for a fixed alpha. Ties: the exact-zero binary
// tie goes to +alpha; the ternary midpoint |w| == alpha/2 goes to 0 (the
// smaller-magnitude level).
inline QuantizedLayer project_fixed_alpha(const Tensor& weights, QuantMode mode,
                                          double alpha) {
  if (alpha <= 0.0)
    throw QuantError("project_fixed_alpha: alpha must be positive");
  QuantizedLayer q;
  q.alpha = alpha;
  q.mode = mode;
  q.values = Tensor(weights.shape());
  if (mode == QuantMode::binary) {
    for (std::size_t i = 0; i < weights.numel(); ++i)
      q.values[i] = weights[i] >= 0.0 ? alpha : -alpha;
  } else {
    const double half = alpha / 2.0;
    for (std::size_t i = 0; i < weights.numel(); ++i) {
      double w = weights[i];
      q.values[i] = std::fabs(w) <= half ? 0.0 : std::copysign(alpha, w);
    }
  }
  return q;
}

inline bool is_feasible(const Tensor& t, QuantMode mode, double alpha) {
  if (mode == QuantMode::excluded) return true;
  if (alpha <= 0.0) return false;
  for (double v : t.values()) {
    if (v == alpha || v == -alpha) continue;
    if (mode == QuantMode::ternary && v == 0.0) continue;
    return false;
  }
  return true;
}

namespace detail {

// Membership fast path: if the tensor already lies in a level set (alpha =
// its max magnitude), the projection is the tensor itself with objective 0.
inline bool already_feasible(const Tensor& w, QuantMode mode, double* alpha) {
  double mx = 0.0;
  for (double v : w.values()) mx = std::max(mx, std::fabs(v));
  if (mx == 0.0) return false;
  if (!is_feasible(w, mode, mx)) return false;
  *alpha = mx;
  return true;
}

inline double quant_objective(const Tensor& w, const Tensor& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.numel(); ++i) {
    double d = w[i] - q[i];
    s += d * d;
  }
  return s;
}

}  // namespace detail

// Joint (alpha, assignment) minimizer of ||W - Q||_F^2 by alternating
// minimization: assignment = nearest level at the current alpha, alpha = mean
// |w| over the entries currently assigned to +-alpha (the closed-form
// optimum for a fixed assignment). Starts from init_alpha; stops at an
// assignment fixed point. The objective sequence is non-increasing; the
// optional trace captures it for diagnostics.
inline QuantizedLayer project_optimal(const Tensor& weights, QuantMode mode,
                                      std::vector<double>* objective_trace = nullptr) {
  if (weights.empty()) throw QuantError("project_optimal: empty tensor");
  double alpha = 0.0;
  if (detail::already_feasible(weights, mode, &alpha)) {
    QuantizedLayer q;
    q.values = weights;
    q.alpha = alpha;
    q.mode = mode;
    if (objective_trace) objective_trace->push_back(0.0);
    return q;
  }
  alpha = init_alpha(weights);  // throws on the all-zero tensor

  const std::size_t n = weights.numel();
  std::vector<std::int8_t> assign(n, 0), prev;
  for (int iter = 0; iter < 100; ++iter) {
    QuantizedLayer q = project_fixed_alpha(weights, mode, alpha);
    if (objective_trace)
      objective_trace->push_back(detail::quant_objective(weights, q.values));
    prev.swap(assign);
    assign.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      assign[i] = q.values[i] == 0.0 ? 0 : (q.values[i] > 0.0 ? 1 : -1);

    // alpha step: mean |w| over assigned entries (closed-form optimum for
    // this assignment)
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (assign[i] != 0) {
        sum += std::fabs(weights[i]);
        ++count;
      }
    }
    if (count == 0) {
      // All entries snapped to 0 (spec'd ternary safeguard; cannot arise
      // from the mean-|w| start). Pin the largest-magnitude entry.
      std::size_t best = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (std::fabs(weights[i]) > std::fabs(weights[best])) best = i;
      alpha = std::fabs(weights[best]);
      assign[best] = weights[best] >= 0.0 ? 1 : -1;
    } else {
      alpha = sum / static_cast<double>(count);
    }
    if (assign == prev) break;
  }
  QuantizedLayer out = project_fixed_alpha(weights, mode, alpha);
  if (objective_trace)
    objective_trace->push_back(detail::quant_objective(weights, out.values));
  return out;
}

}  // namespace admmq
