// Model = ordered layer list + the passes over it: forward, softmax
// cross-entropy loss, backward, accuracy evaluation, seeded initialization.
#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <admmq/data.hpp>
#include <admmq/layers.hpp>
#include <admmq/rng.hpp>
#include <admmq/tensor.hpp>

namespace admmq {

struct Batch {
  Tensor inputs;            // [B, ...]
  std::vector<int> labels;  // length B
};

struct Model {
  std::vector<Layer> layers;
  Shape input_shape;  // per-sample, e.g. {1, 28, 28}

  std::size_t weight_layer_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers) n += l.has_weights();
    return n;
  }
  std::vector<std::size_t> weight_layer_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (layers[i].has_weights()) idx.push_back(i);
    return idx;
  }
  const Layer* find_layer(const std::string& name) const {
    for (const Layer& l : layers)
      if (l.name == name) return &l;
    return nullptr;
  }
  int num_classes() const {
    for (auto it = layers.rbegin(); it != layers.rend(); ++it)
      if (it->kind == LayerKind::dense)
        return static_cast<int>(it->out_features);
    return 0;
  }
};

// Checks that layer shapes compose from the declared input shape.
inline void validate_model(const Model& m) {
  if (m.layers.empty()) throw ConfigError("model has no layers");
  Shape s = m.input_shape;
  for (const Layer& l : m.layers) s = layer_output_shape(l, s);
  if (s.size() != 1)
    throw ConfigError("model output is not a class vector; final shape " +
                      shape_str(s));
}

inline Tensor forward(const Model& m, const Tensor& inputs) {
  Tensor x = inputs;
  for (const Layer& l : m.layers) x = layer_forward(l, x);
  return x;
}

struct ForwardPass {
  std::vector<LayerContext> ctx;  // one per layer
  Tensor logits;
};

inline ForwardPass forward_cached(const Model& m, const Tensor& inputs) {
  ForwardPass fp;
  fp.ctx.resize(m.layers.size());
  Tensor x = inputs;
  for (std::size_t i = 0; i < m.layers.size(); ++i)
    x = layer_forward(m.layers[i], x, &fp.ctx[i]);
  fp.logits = std::move(x);
  return fp;
}

// Mean softmax cross-entropy over the batch (log-sum-exp stabilized).
inline double loss(const Tensor& logits, std::span<const int> labels) {
  const std::size_t B = logits.dim(0), C = logits.dim(1);
  if (labels.size() != B)
    throw DataError("loss: batch size mismatch between logits and labels");
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = logits.data() + b * C;
    int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= C)
      throw DataError("loss: label " + std::to_string(y) +
                      " out of range for " + std::to_string(C) + " classes");
    double mx = row[0];
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) sum += std::exp(row[c] - mx);
    total += std::log(sum) + mx - row[y];
  }
  return total / static_cast<double>(B);
}

// d(mean CE)/d(logits) = (softmax - onehot) / B; also reports the loss.
inline Tensor loss_gradient(const Tensor& logits, std::span<const int> labels,
                            double* loss_out = nullptr) {
  const std::size_t B = logits.dim(0), C = logits.dim(1);
  if (labels.size() != B)
    throw DataError("loss: batch size mismatch between logits and labels");
  Tensor g(logits.shape());
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = logits.data() + b * C;
    int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= C)
      throw DataError("loss: label " + std::to_string(y) +
                      " out of range for " + std::to_string(C) + " classes");
    double mx = row[0];
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) sum += std::exp(row[c] - mx);
    for (std::size_t c = 0; c < C; ++c)
      g[b * C + c] = std::exp(row[c] - mx) / sum / static_cast<double>(B);
    g[b * C + y] -= 1.0 / static_cast<double>(B);
    total += std::log(sum) + mx - row[y];
  }
  if (loss_out) *loss_out = total / static_cast<double>(B);
  return g;
}

// One gradient tensor per layer; empty where the layer has no parameters.
struct Gradients {
  std::vector<Tensor> weights;
  std::vector<Tensor> bias;
};

inline Gradients make_gradients(const Model& m) {
  Gradients g;
  g.weights.resize(m.layers.size());
  g.bias.resize(m.layers.size());
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    if (m.layers[i].has_weights()) {
      g.weights[i] = Tensor(m.layers[i].weights.shape());
      g.bias[i] = Tensor(m.layers[i].bias.shape());
    }
  }
  return g;
}

inline Gradients backward(const Model& m, const Batch& batch,
                          double* loss_out = nullptr) {
  ForwardPass fp = forward_cached(m, batch.inputs);
  Gradients g = make_gradients(m);
  Tensor grad = loss_gradient(fp.logits, batch.labels, loss_out);
  for (std::size_t i = m.layers.size(); i-- > 0;) {
    const Layer& l = m.layers[i];
    grad = layer_backward(l, fp.ctx[i], grad,
                          l.has_weights() ? &g.weights[i] : nullptr,
                          l.has_weights() ? &g.bias[i] : nullptr);
  }
  return g;
}

// Fraction of argmax-correct predictions. Argmax ties break to the lowest
// class index.
inline double evaluate(const Model& m, const Dataset& ds,
                       std::size_t eval_batch = 256) {
  if (ds.size() == 0) throw DataError("evaluate: empty dataset");
  const std::size_t n = ds.size(), sample = ds.sample_numel();
  std::size_t correct = 0;
  for (std::size_t start = 0; start < n; start += eval_batch) {
    std::size_t b = std::min(eval_batch, n - start);
    Shape shape = ds.images.shape();
    shape[0] = b;
    Tensor inputs(shape);
    std::copy(ds.images.data() + start * sample,
              ds.images.data() + (start + b) * sample, inputs.data());
    Tensor logits = forward(m, inputs);
    const std::size_t C = logits.dim(1);
    for (std::size_t i = 0; i < b; ++i) {
      const double* row = logits.data() + i * C;
      std::size_t best = 0;
      for (std::size_t c = 1; c < C; ++c)
        if (row[c] > row[best]) best = c;  // strict: ties keep lowest index
      correct += (static_cast<int>(best) == ds.labels[start + i]);
    }
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

// He-style uniform fan-in initialization; each layer draws from its own
// stream derived from (seed, layer position) so nets are reproducible.
inline void init_weights(Model& m, std::uint64_t seed) {
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    Layer& l = m.layers[i];
    if (!l.has_weights()) continue;
    std::size_t fan_in = l.kind == LayerKind::dense
                             ? l.in_features
                             : l.in_channels * l.kernel * l.kernel;
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    Rng rng(mix_seed(seed, i));
    for (double& w : l.weights.values()) w = rng.uniform(-limit, limit);
    l.bias.fill(0.0);
  }
}

inline Batch make_batch(const Dataset& ds,
                        std::span<const std::size_t> idx) {
  const std::size_t sample = ds.sample_numel();
  Shape shape = ds.images.shape();
  shape[0] = idx.size();
  Batch b;
  b.inputs = Tensor(shape);
  b.labels.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const double* src = ds.images.data() + idx[i] * sample;
    std::copy(src, src + sample, b.inputs.data() + i * sample);
    b.labels[i] = ds.labels[idx[i]];
  }
  return b;
}

// The canonical LeNet-5 variant used throughout:
// conv 6@5x5 -> pool 2 -> conv 16@5x5 -> pool 2 -> fc 120 -> fc 84 -> fc 10.
inline Model lenet5() {
  Model m;
  m.input_shape = {1, 28, 28};
  m.layers.push_back(make_conv2d("conv1", 1, 6, 5));
  m.layers.push_back(make_relu("relu1"));
  m.layers.push_back(make_maxpool2d("pool1", 2));
  m.layers.push_back(make_conv2d("conv2", 6, 16, 5));
  m.layers.push_back(make_relu("relu2"));
  m.layers.push_back(make_maxpool2d("pool2", 2));
  m.layers.push_back(make_flatten("flatten"));
  m.layers.push_back(make_dense("fc1", 16 * 4 * 4, 120));
  m.layers.push_back(make_relu("relu3"));
  m.layers.push_back(make_dense("fc2", 120, 84));
  m.layers.push_back(make_relu("relu4"));
  m.layers.push_back(make_dense("fc3", 84, 10));
  return m;
}

inline bool models_equal_bitwise(const Model& a, const Model& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (!bitwise_equal(a.layers[i].weights, b.layers[i].weights)) return false;
    if (!bitwise_equal(a.layers[i].bias, b.layers[i].bias)) return false;
  }
  return true;
}

}  // namespace admmq
