// First-order optimizers: plain SGD and Adam.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <admmq/common.hpp>
#include <admmq/model.hpp>

namespace admmq {

enum class OptAlgo { sgd, adam };

struct OptimizerConfig {
  OptAlgo algo = OptAlgo::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  OptimizerConfig cfg;
  long long t = 0;  // adam step count
  std::vector<Tensor> m_w, v_w, m_b, v_b;

  OptimizerState() = default;
  OptimizerState(const Model& model, OptimizerConfig c) : cfg(c) {
    if (cfg.lr <= 0.0) throw ConfigError("optimizer learning rate must be > 0");
    m_w.resize(model.layers.size());
    v_w.resize(model.layers.size());
    m_b.resize(model.layers.size());
    v_b.resize(model.layers.size());
    if (cfg.algo == OptAlgo::adam) {
      for (std::size_t i = 0; i < model.layers.size(); ++i) {
        if (!model.layers[i].has_weights()) continue;
        m_w[i] = Tensor(model.layers[i].weights.shape());
        v_w[i] = Tensor(model.layers[i].weights.shape());
        m_b[i] = Tensor(model.layers[i].bias.shape());
        v_b[i] = Tensor(model.layers[i].bias.shape());
      }
    }
  }
};

namespace detail {

inline void check_finite(const Tensor& g, const std::string& what) {
  if (!g.all_finite())
    throw DivergenceError("non-finite gradient in " + what);
}

inline void sgd_apply(Tensor& theta, const Tensor& g, double lr) {
  for (std::size_t i = 0; i < theta.numel(); ++i) theta[i] -= lr * g[i];
}

inline void adam_apply(Tensor& theta, const Tensor& g, Tensor& m, Tensor& v,
                       const OptimizerConfig& c, double bc1, double bc2) {
  for (std::size_t i = 0; i < theta.numel(); ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
    double mhat = m[i] / bc1;
    double vhat = v[i] / bc2;
    theta[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

}  // namespace detail

inline void optimizer_step(Model& model, const Gradients& grads,
                           OptimizerState& st) {
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    Layer& l = model.layers[i];
    if (!l.has_weights()) continue;
    if (!grads.weights[i].same_shape(l.weights) ||
        !grads.bias[i].same_shape(l.bias))
      throw ConfigError("optimizer_step: gradient shape mismatch at layer '" +
                        l.name + "'");
    detail::check_finite(grads.weights[i], "weights of '" + l.name + "'");
    detail::check_finite(grads.bias[i], "bias of '" + l.name + "'");
  }
  if (st.cfg.algo == OptAlgo::sgd) {
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
      if (!model.layers[i].has_weights()) continue;
      detail::sgd_apply(model.layers[i].weights, grads.weights[i], st.cfg.lr);
      detail::sgd_apply(model.layers[i].bias, grads.bias[i], st.cfg.lr);
    }
  } else {
    st.t += 1;
    double bc1 = 1.0 - std::pow(st.cfg.beta1, static_cast<double>(st.t));
    double bc2 = 1.0 - std::pow(st.cfg.beta2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
      if (!model.layers[i].has_weights()) continue;
      detail::adam_apply(model.layers[i].weights, grads.weights[i], st.m_w[i],
                         st.v_w[i], st.cfg, bc1, bc2);
      detail::adam_apply(model.layers[i].bias, grads.bias[i], st.m_b[i],
                         st.v_b[i], st.cfg, bc1, bc2);
    }
  }
}

}  // namespace admmq
