// ADMM splitting loop for weight quantization: proximal W-update (first-order
// training on the augmented Lagrangian), analytic Q-update (Euclidean
// projection), dual U-update, geometric multi-rho schedule, and a final hard
// projection so the returned weights are exactly feasible.
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <admmq/common.hpp>
#include <admmq/model.hpp>
#include <admmq/optimizer.hpp>
#include <admmq/quantizer.hpp>
#include <admmq/rng.hpp>

namespace admmq {

// rho(k) = min(initial * growth^floor(k / period), max); non-decreasing in k.
struct RhoSchedule {
  double initial = 1e-3;
  double growth = 10.0;
  int period = 3;
  double max = 1e-1;

  double at(int k) const {
    return std::min(initial * std::pow(growth, static_cast<double>(k / period)),
                    max);
  }
};

struct AdmmConfig {
  int epochs_per_w_update = 3;
  int max_iterations = 30;
  double tolerance = 1e-3;  // on max_i ||W_i - Q_i||_F / ||W_i||_F
  RhoSchedule rho;
  int rho_iteration_offset = 0;  // lets a progressive run continue the schedule
  OptimizerConfig optimizer;
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs_per_w_update < 1 || max_iterations < 1 || batch_size < 1)
      throw ConfigError("admm: all counts must be >= 1");
    if (tolerance <= 0.0) throw ConfigError("admm: tolerance must be > 0");
    if (rho.initial <= 0.0 || rho.growth < 1.0 || rho.period < 1 ||
        rho.max <= 0.0)
      throw ConfigError("admm: invalid rho schedule");
  }
};

// Per quantized layer: auxiliary Q, scaled dual U, penalty factor rho.
struct AdmmLayerState {
  std::size_t layer_index = 0;  // into Model::layers (unused off-model paths)
  std::string name;
  QuantMode mode = QuantMode::binary;
  QuantizedLayer q;
  Tensor u;
  double rho = 0.0;
};

struct AdmmState {
  std::vector<AdmmLayerState> layers;
  int k = 0;
};

// 0/0 counts as converged; a zero-weight layer with a nonzero Q does not.
inline double layer_residual(const Tensor& w, const Tensor& q) {
  double wn = frobenius_norm(w);
  double d = frobenius_norm_diff(w, q);
  if (wn == 0.0) return d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return d / wn;
}

inline AdmmState init_admm_state(const Model& model, const QuantScheme& scheme,
                                 double rho0) {
  AdmmState st;
  auto widx = model.weight_layer_indices();
  if (scheme.entries.size() != widx.size())
    throw ConfigError("scheme has " + std::to_string(scheme.entries.size()) +
                      " entries for " + std::to_string(widx.size()) +
                      " weight-bearing layers");
  for (std::size_t i = 0; i < widx.size(); ++i) {
    const Layer& l = model.layers[widx[i]];
    const SchemeEntry& e = scheme.entries[i];
    if (e.layer != l.name)
      throw ConfigError("scheme entry '" + e.layer +
                        "' does not match model layer '" + l.name + "'");
    if (e.mode == QuantMode::excluded) continue;
    AdmmLayerState ls;
    ls.layer_index = widx[i];
    ls.name = l.name;
    ls.mode = e.mode;
    ls.q = project_optimal(l.weights, e.mode);
    ls.u = Tensor(l.weights.shape());
    ls.rho = rho0;
    st.layers.push_back(std::move(ls));
  }
  if (st.layers.empty())
    throw ConfigError("quantization scheme excludes every layer");
  return st;
}

// Augmented Lagrangian value: f + sum_i rho_i/2 ||W_i - Q_i + U_i||_F^2.
inline double augmented_loss(const Model& model, const AdmmState& st,
                             const Batch& batch) {
  double f = loss(forward(model, batch.inputs), batch.labels);
  double penalty = 0.0;
  for (const AdmmLayerState& ls : st.layers) {
    const Tensor& w = model.layers[ls.layer_index].weights;
    if (!w.same_shape(ls.q.values) || !w.same_shape(ls.u))
      throw ConfigError("augmented_loss: state shape mismatch at '" + ls.name + "'");
    double s = 0.0;
    for (std::size_t i = 0; i < w.numel(); ++i) {
      double d = w[i] - ls.q.values[i] + ls.u[i];
      s += d * d;
    }
    penalty += 0.5 * ls.rho * s;
  }
  return f + penalty;
}

// Gradient of the augmented Lagrangian: df/dW plus rho_i (W_i - Q_i + U_i)
// on each quantized layer; excluded layers see only df.
inline Gradients augmented_grad(const Model& model, const AdmmState& st,
                                const Batch& batch, double* f_loss = nullptr) {
  Gradients g = backward(model, batch, f_loss);
  for (const AdmmLayerState& ls : st.layers) {
    const Tensor& w = model.layers[ls.layer_index].weights;
    Tensor& gw = g.weights[ls.layer_index];
    for (std::size_t i = 0; i < w.numel(); ++i)
      gw[i] += ls.rho * (w[i] - ls.q.values[i] + ls.u[i]);
  }
  return g;
}

// Proximal step: approximately minimizes the augmented Lagrangian over W with
// epochs of minibatch first-order updates. Returns the mean data loss seen.
inline double w_update(Model& model, const AdmmState& st, const Dataset& train,
                       const AdmmConfig& cfg, OptimizerState& opt, Rng& rng) {
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  for (int e = 0; e < cfg.epochs_per_w_update; ++e) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t b = std::min(cfg.batch_size, order.size() - start);
      Batch batch = make_batch(
          train, std::span<const std::size_t>(order.data() + start, b));
      double f = 0.0;
      Gradients g = augmented_grad(model, st, batch, &f);
      if (!std::isfinite(f))
        throw DivergenceError("non-finite training loss at ADMM iteration " +
                              std::to_string(st.k));
      optimizer_step(model, g, opt);
      loss_sum += f;
      ++loss_count;
    }
  }
  return loss_sum / static_cast<double>(loss_count);
}

namespace detail {

inline void q_update_layer(const Tensor& w, AdmmLayerState& ls) {
  Tensor target(w.shape());
  for (std::size_t j = 0; j < w.numel(); ++j) target[j] = w[j] + ls.u[j];
  ls.q = project_optimal(target, ls.mode);
}

inline void u_update_layer(const Tensor& w, AdmmLayerState& ls) {
  for (std::size_t j = 0; j < ls.u.numel(); ++j)
    ls.u[j] += w[j] - ls.q.values[j];
}

}  // namespace detail

// Projection step: Q_i <- Pi(W_i + U_i), re-optimizing alpha each time.
inline void q_update(const Model& model, AdmmState& st) {
  for (AdmmLayerState& ls : st.layers)
    detail::q_update_layer(model.layers[ls.layer_index].weights, ls);
}

// Dual ascent: U_i <- U_i + W_i - Q_i; advances the iteration counter.
inline void u_update(const Model& model, AdmmState& st) {
  for (AdmmLayerState& ls : st.layers)
    detail::u_update_layer(model.layers[ls.layer_index].weights, ls);
  st.k += 1;
}

// Trace CSV schema: k,layer,rho,residual,train_loss,val_accuracy.
// One row per (iteration, layer), one summary row (layer = "all") per
// iteration; progressive runs append one extra row (layer = "step") per step.
struct TraceRow {
  int k = 0;
  std::string layer;
  double rho = 0.0;
  double residual = 0.0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

inline void write_trace_csv(const std::string& path,
                            const std::vector<TraceRow>& rows) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write trace '" + path + "'");
  f << "k,layer,rho,residual,train_loss,val_accuracy\n";
  char line[256];
  for (const TraceRow& r : rows) {
    std::snprintf(line, sizeof(line), "%d,%s,%.12g,%.12g,%.12g,%.12g\n", r.k,
                  r.layer.c_str(), r.rho, r.residual, r.train_loss,
                  r.val_accuracy);
    f << line;
  }
}

// ---------------------------------------------------------------------------
// Generic iteration core. The network and quadratic paths share this loop and
// differ only in how the proximal step is carried out.

struct AdmmLoopConfig {
  int max_iterations = 30;
  double tolerance = 1e-3;
  RhoSchedule rho;
  int rho_iteration_offset = 0;
};

struct AdmmHooks {
  // Minimizes the augmented Lagrangian over W for iteration k; returns the
  // training-loss figure recorded in the trace.
  std::function<double(int k)> proximal;
  // Validation metric of the current quantized snapshot (for the trace).
  std::function<double()> metric;
};

struct AdmmLoopResult {
  std::vector<TraceRow> trace;
  bool converged = false;
  bool budget_exhausted = false;
};

namespace detail {

inline double trace_iteration(const std::vector<Tensor*>& weights,
                              const AdmmState& st, double rho,
                              double train_loss, double metric,
                              std::vector<TraceRow>& rows) {
  double max_res = 0.0;
  for (std::size_t i = 0; i < st.layers.size(); ++i) {
    double res = layer_residual(*weights[i], st.layers[i].q.values);
    max_res = std::max(max_res, res);
    rows.push_back({st.k, st.layers[i].name, rho, res, train_loss, metric});
  }
  rows.push_back({st.k, "all", rho, max_res, train_loss, metric});
  return max_res;
}

}  // namespace detail

// `weights[i]` aliases the live W tensor of state layer i; the state is
// advanced in place. On return the weights have been hard-projected
// (W <- Q), so the result is feasible even when the budget ran out.
inline AdmmLoopResult run_admm_loop(const std::vector<Tensor*>& weights,
                                    AdmmState& state, const AdmmLoopConfig& cfg,
                                    const AdmmHooks& hooks) {
  if (weights.size() != state.layers.size())
    throw ConfigError("run_admm_loop: weights/state size mismatch");
  AdmmLoopResult out;
  double rho0 = cfg.rho.at(cfg.rho_iteration_offset);
  for (AdmmLayerState& ls : state.layers) ls.rho = rho0;

  double max_res = detail::trace_iteration(weights, state, rho0, 0.0,
                                           hooks.metric ? hooks.metric() : 0.0,
                                           out.trace);
  if (max_res < cfg.tolerance) {
    out.converged = true;
  } else {
    for (int k = 0; k < cfg.max_iterations; ++k) {
      double rho_k = cfg.rho.at(cfg.rho_iteration_offset + k);
      for (AdmmLayerState& ls : state.layers) ls.rho = rho_k;
      double train_loss = hooks.proximal(k);
      for (std::size_t i = 0; i < state.layers.size(); ++i) {
        detail::q_update_layer(*weights[i], state.layers[i]);
        detail::u_update_layer(*weights[i], state.layers[i]);
      }
      state.k += 1;
      max_res = detail::trace_iteration(weights, state, rho_k, train_loss,
                                        hooks.metric ? hooks.metric() : 0.0,
                                        out.trace);
      log_debug("admm k=%d rho=%g max_residual=%g train_loss=%g", state.k,
                rho_k, max_res, train_loss);
      if (max_res < cfg.tolerance) {
        out.converged = true;
        break;
      }
    }
  }
  out.budget_exhausted = !out.converged;
  // Hard projection: the returned weights are exactly feasible.
  for (std::size_t i = 0; i < state.layers.size(); ++i)
    *weights[i] = state.layers[i].q.values;
  return out;
}

// ---------------------------------------------------------------------------
// Network instantiation.

struct AdmmNetResult {
  Model model;          // hard-projected, feasible on all quantized layers
  QuantScheme scheme;   // alphas updated to the final projection
  AdmmState state;
  std::vector<TraceRow> trace;
  bool converged = false;
  bool budget_exhausted = false;
  double val_accuracy = 0.0;  // of the returned (feasible) model
};

inline AdmmNetResult run_admm(const Model& start, const QuantScheme& scheme,
                              const DataSplit& data, const AdmmConfig& cfg) {
  cfg.validate();
  AdmmNetResult out;
  out.model = start;
  out.scheme = scheme;

  AdmmState st =
      init_admm_state(out.model, scheme, cfg.rho.at(cfg.rho_iteration_offset));
  std::vector<Tensor*> weights;
  for (const AdmmLayerState& ls : st.layers)
    weights.push_back(&out.model.layers[ls.layer_index].weights);

  OptimizerState opt(out.model, cfg.optimizer);
  Rng rng(mix_seed(cfg.seed, 0xad33));

  AdmmHooks hooks;
  hooks.proximal = [&](int) {
    return w_update(out.model, st, data.train, cfg, opt, rng);
  };
  hooks.metric = [&]() {
    // Accuracy of the quantized snapshot: evaluate with W swapped to Q.
    Model snap = out.model;
    for (const AdmmLayerState& ls : st.layers)
      snap.layers[ls.layer_index].weights = ls.q.values;
    return evaluate(snap, data.val);
  };

  AdmmLoopConfig loop_cfg{cfg.max_iterations, cfg.tolerance, cfg.rho,
                          cfg.rho_iteration_offset};
  AdmmLoopResult r = run_admm_loop(weights, st, loop_cfg, hooks);

  out.state = std::move(st);
  out.trace = std::move(r.trace);
  out.converged = r.converged;
  out.budget_exhausted = r.budget_exhausted;
  for (const AdmmLayerState& ls : out.state.layers)
    for (SchemeEntry& e : out.scheme.entries)
      if (e.layer == ls.name) e.alpha = ls.q.alpha;
  out.val_accuracy = evaluate(out.model, data.val);
  return out;
}

// Builds a scheme for every weight-bearing layer; listed layers are excluded.
inline QuantScheme make_scheme(const Model& model, QuantMode mode,
                               const std::vector<std::string>& exclude = {}) {
  QuantScheme s;
  for (std::size_t idx : model.weight_layer_indices()) {
    const Layer& l = model.layers[idx];
    SchemeEntry e;
    e.layer = l.name;
    bool excluded = false;
    for (const std::string& x : exclude) excluded |= (x == l.name);
    e.mode = excluded ? QuantMode::excluded : mode;
    s.entries.push_back(std::move(e));
  }
  for (const std::string& x : exclude)
    if (!s.find(x))
      throw ConfigError("excluded layer '" + x + "' not found in model");
  return s;
}

// Initializes every non-excluded entry's alpha from the model weights.
inline void init_scheme_alphas(QuantScheme& scheme, const Model& model) {
  for (SchemeEntry& e : scheme.entries) {
    if (e.mode == QuantMode::excluded) continue;
    const Layer* l = model.find_layer(e.layer);
    if (!l) throw ConfigError("scheme layer '" + e.layer + "' not in model");
    e.alpha = init_alpha(l->weights);
  }
}

}  // namespace admmq
