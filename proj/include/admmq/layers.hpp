// Layer zoo: dense, conv2d, maxpool2d, relu, flatten. Inputs carry a leading
// batch dimension; conv/pool operate on [B, C, H, W], dense on [B, F].
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <admmq/common.hpp>
#include <admmq/gemm.hpp>
#include <admmq/tensor.hpp>

namespace admmq {

enum class LayerKind { dense, conv2d, maxpool2d, relu, flatten };

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::relu: return "relu";
    case LayerKind::flatten: return "flatten";
  }
  return "?";
}

struct Layer {
  LayerKind kind = LayerKind::relu;
  std::string name;

  Tensor weights;  // dense: [out, in]; conv2d: [cout, cin, k, k]
  Tensor bias;     // dense/conv2d: [out]

  // dense
  std::size_t in_features = 0, out_features = 0;
  // conv2d
  std::size_t in_channels = 0, out_channels = 0, kernel = 0, stride = 1,
              padding = 0;
  // maxpool2d
  std::size_t pool = 0, pool_stride = 0;

  bool has_weights() const {
    return kind == LayerKind::dense || kind == LayerKind::conv2d;
  }
};

inline Layer make_dense(std::string name, std::size_t in, std::size_t out) {
  Layer l;
  l.kind = LayerKind::dense;
  l.name = std::move(name);
  l.in_features = in;
  l.out_features = out;
  l.weights = Tensor({out, in});
  l.bias = Tensor({out});
  return l;
}

inline Layer make_conv2d(std::string name, std::size_t cin, std::size_t cout,
                         std::size_t kernel, std::size_t stride = 1,
                         std::size_t padding = 0) {
  Layer l;
  l.kind = LayerKind::conv2d;
  l.name = std::move(name);
  l.in_channels = cin;
  l.out_channels = cout;
  l.kernel = kernel;
  l.stride = stride;
  l.padding = padding;
  l.weights = Tensor({cout, cin, kernel, kernel});
  l.bias = Tensor({cout});
  return l;
}

inline Layer make_maxpool2d(std::string name, std::size_t pool,
                            std::size_t stride = 0) {
  Layer l;
  l.kind = LayerKind::maxpool2d;
  l.name = std::move(name);
  l.pool = pool;
  l.pool_stride = stride ? stride : pool;
  return l;
}

inline Layer make_relu(std::string name) {
  Layer l;
  l.kind = LayerKind::relu;
  l.name = std::move(name);
  return l;
}

inline Layer make_flatten(std::string name) {
  Layer l;
  l.kind = LayerKind::flatten;
  l.name = std::move(name);
  return l;
}

[[noreturn]] inline void shape_fail(const Layer& l, const Shape& in,
                                    const std::string& why) {
  throw ConfigError("layer '" + l.name + "' (" + layer_kind_name(l.kind) +
                    "): input shape " + shape_str(in) + " rejected: " + why);
}

// Per-sample output shape (no batch dimension in `in`).
inline Shape layer_output_shape(const Layer& l, const Shape& in) {
  switch (l.kind) {
    case LayerKind::dense: {
      if (in.size() != 1 || in[0] != l.in_features)
        shape_fail(l, in, "expected [" + std::to_string(l.in_features) + "]");
      return {l.out_features};
    }
    case LayerKind::conv2d: {
      if (in.size() != 3 || in[0] != l.in_channels)
        shape_fail(l, in, "expected [C=" + std::to_string(l.in_channels) + ",H,W]");
      std::size_t h = in[1] + 2 * l.padding, w = in[2] + 2 * l.padding;
      if (h < l.kernel || w < l.kernel)
        shape_fail(l, in, "kernel larger than padded input");
      return {l.out_channels, (h - l.kernel) / l.stride + 1,
              (w - l.kernel) / l.stride + 1};
    }
    case LayerKind::maxpool2d: {
      if (in.size() != 3) shape_fail(l, in, "expected [C,H,W]");
      if (in[1] < l.pool || in[2] < l.pool)
        shape_fail(l, in, "pool window larger than input");
      return {in[0], (in[1] - l.pool) / l.pool_stride + 1,
              (in[2] - l.pool) / l.pool_stride + 1};
    }
    case LayerKind::relu:
      return in;
    case LayerKind::flatten: {
      return {shape_numel(in)};
    }
  }
  shape_fail(l, in, "unknown layer kind");
}

// im2col: img [C,H,W] -> col [C*k*k, OH*OW], zero padding.
inline void im2col(const double* img, std::size_t C, std::size_t H,
                   std::size_t W, std::size_t kernel, std::size_t stride,
                   std::size_t pad, std::size_t OH, std::size_t OW,
                   double* col) {
  const std::size_t P = OH * OW;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ki = 0; ki < kernel; ++ki) {
      for (std::size_t kj = 0; kj < kernel; ++kj) {
        double* row = col + ((c * kernel + ki) * kernel + kj) * P;
        for (std::size_t oh = 0; oh < OH; ++oh) {
          std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * stride + ki) -
                              static_cast<std::ptrdiff_t>(pad);
          for (std::size_t ow = 0; ow < OW; ++ow) {
            std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * stride + kj) -
                                static_cast<std::ptrdiff_t>(pad);
            double v = 0.0;
            if (ih >= 0 && ih < static_cast<std::ptrdiff_t>(H) && iw >= 0 &&
                iw < static_cast<std::ptrdiff_t>(W))
              v = img[(c * H + static_cast<std::size_t>(ih)) * W +
                      static_cast<std::size_t>(iw)];
            row[oh * OW + ow] = v;
          }
        }
      }
    }
  }
}

// col2im scatter-add, the adjoint of im2col.
inline void col2im_add(const double* col, std::size_t C, std::size_t H,
                       std::size_t W, std::size_t kernel, std::size_t stride,
                       std::size_t pad, std::size_t OH, std::size_t OW,
                       double* img) {
  const std::size_t P = OH * OW;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ki = 0; ki < kernel; ++ki) {
      for (std::size_t kj = 0; kj < kernel; ++kj) {
        const double* row = col + ((c * kernel + ki) * kernel + kj) * P;
        for (std::size_t oh = 0; oh < OH; ++oh) {
          std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * stride + ki) -
                              static_cast<std::ptrdiff_t>(pad);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t ow = 0; ow < OW; ++ow) {
            std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * stride + kj) -
                                static_cast<std::ptrdiff_t>(pad);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) continue;
            img[(c * H + static_cast<std::size_t>(ih)) * W +
                static_cast<std::size_t>(iw)] += row[oh * OW + ow];
          }
        }
      }
    }
  }
}

// What backward needs from the forward pass.
struct LayerContext {
  Tensor input;                     // dense, conv2d, relu
  Shape input_shape;                // flatten (per-batch shape)
  std::vector<std::size_t> argmax;  // maxpool2d: winning input flat index
};

// Forward for a whole batch. `ctx`, when given, captures backward state.
inline Tensor layer_forward(const Layer& l, const Tensor& x,
                            LayerContext* ctx = nullptr) {
  if (x.ndim() < 2) shape_fail(l, x.shape(), "missing batch dimension");
  const std::size_t B = x.dim(0);
  Shape in_sample(x.shape().begin() + 1, x.shape().end());
  Shape out_sample = layer_output_shape(l, in_sample);
  Shape out_shape;
  out_shape.push_back(B);
  out_shape.insert(out_shape.end(), out_sample.begin(), out_sample.end());
  Tensor y(out_shape);

  switch (l.kind) {
    case LayerKind::dense: {
      // y = x * W^T + b
      gemm_nt(B, l.in_features, l.out_features, x.data(), l.weights.data(),
              y.data());
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < l.out_features; ++o)
          y[b * l.out_features + o] += l.bias[o];
      if (ctx) ctx->input = x;
      break;
    }
    case LayerKind::conv2d: {
      const std::size_t C = l.in_channels, H = in_sample[1], W = in_sample[2];
      const std::size_t OH = out_sample[1], OW = out_sample[2];
      const std::size_t K = C * l.kernel * l.kernel, P = OH * OW;
      std::vector<double> col(K * P);
      for (std::size_t b = 0; b < B; ++b) {
        im2col(x.data() + b * C * H * W, C, H, W, l.kernel, l.stride,
               l.padding, OH, OW, col.data());
        double* yb = y.data() + b * l.out_channels * P;
        gemm_nn(l.out_channels, K, P, l.weights.data(), col.data(), yb);
        for (std::size_t o = 0; o < l.out_channels; ++o) {
          double bo = l.bias[o];
          for (std::size_t p = 0; p < P; ++p) yb[o * P + p] += bo;
        }
      }
      if (ctx) ctx->input = x;
      break;
    }
    case LayerKind::maxpool2d: {
      const std::size_t C = in_sample[0], H = in_sample[1], W = in_sample[2];
      const std::size_t OH = out_sample[1], OW = out_sample[2];
      if (ctx) {
        ctx->argmax.assign(B * C * OH * OW, 0);
        ctx->input_shape = x.shape();
      }
      std::size_t oidx = 0;
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
          const double* plane = x.data() + (b * C + c) * H * W;
          for (std::size_t oh = 0; oh < OH; ++oh) {
            for (std::size_t ow = 0; ow < OW; ++ow, ++oidx) {
              std::size_t best = (oh * l.pool_stride) * W + ow * l.pool_stride;
              double bv = plane[best];
              for (std::size_t pi = 0; pi < l.pool; ++pi)
                for (std::size_t pj = 0; pj < l.pool; ++pj) {
                  std::size_t idx =
                      (oh * l.pool_stride + pi) * W + ow * l.pool_stride + pj;
                  if (plane[idx] > bv) {  // first max wins on ties
                    bv = plane[idx];
                    best = idx;
                  }
                }
              y[oidx] = bv;
              if (ctx) ctx->argmax[oidx] = (b * C + c) * H * W + best;
            }
          }
        }
      }
      break;
    }
    case LayerKind::relu: {
      for (std::size_t i = 0; i < x.numel(); ++i)
        y[i] = x[i] > 0.0 ? x[i] : 0.0;
      if (ctx) ctx->input = x;
      break;
    }
    case LayerKind::flatten: {
      for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i];
      if (ctx) ctx->input_shape = x.shape();
      break;
    }
  }
  return y;
}

// Backward for a whole batch; returns grad wrt the layer input and fills
// grad_w/grad_b for weight-bearing layers (tensors allocated by the caller,
// accumulated into with fixed sample order).
inline Tensor layer_backward(const Layer& l, const LayerContext& ctx,
                             const Tensor& grad_out, Tensor* grad_w,
                             Tensor* grad_b) {
  const std::size_t B = grad_out.dim(0);
  switch (l.kind) {
    case LayerKind::dense: {
      const Tensor& x = ctx.input;
      // dW[o,i] = sum_b dY[b,o] x[b,i]; db[o] = sum_b dY[b,o]; dX = dY W
      gemm_tn(B, l.out_features, l.in_features, grad_out.data(), x.data(),
              grad_w->data());
      for (std::size_t o = 0; o < l.out_features; ++o) {
        double acc = 0.0;
        for (std::size_t b = 0; b < B; ++b)
          acc += grad_out[b * l.out_features + o];
        (*grad_b)[o] = acc;
      }
      Tensor dx(x.shape());
      gemm_nn(B, l.out_features, l.in_features, grad_out.data(),
              l.weights.data(), dx.data());
      return dx;
    }
    case LayerKind::conv2d: {
      const Tensor& x = ctx.input;
      const std::size_t C = l.in_channels, H = x.dim(2), W = x.dim(3);
      const std::size_t OH = grad_out.dim(2), OW = grad_out.dim(3);
      const std::size_t K = C * l.kernel * l.kernel, P = OH * OW;
      Tensor dx(x.shape());
      std::vector<double> col(K * P), dcol(K * P);
      grad_w->fill(0.0);
      grad_b->fill(0.0);
      for (std::size_t b = 0; b < B; ++b) {
        const double* dyb = grad_out.data() + b * l.out_channels * P;
        im2col(x.data() + b * C * H * W, C, H, W, l.kernel, l.stride,
               l.padding, OH, OW, col.data());
        // dW += dY_b * col^T
        gemm_nt(l.out_channels, P, K, dyb, col.data(), grad_w->data(), true);
        for (std::size_t o = 0; o < l.out_channels; ++o) {
          double acc = 0.0;
          for (std::size_t p = 0; p < P; ++p) acc += dyb[o * P + p];
          (*grad_b)[o] += acc;
        }
        // dcol = W^T dY_b, then scatter back
        gemm_tn(l.out_channels, K, P, l.weights.data(), dyb, dcol.data());
        col2im_add(dcol.data(), C, H, W, l.kernel, l.stride, l.padding, OH, OW,
                   dx.data() + b * C * H * W);
      }
      return dx;
    }
    case LayerKind::maxpool2d: {
      Tensor dx(ctx.input_shape);  // zero-initialized; winners scatter-add
      for (std::size_t i = 0; i < grad_out.numel(); ++i)
        dx[ctx.argmax[i]] += grad_out[i];
      return dx;
    }
    case LayerKind::relu: {
      const Tensor& x = ctx.input;
      Tensor dx(x.shape());
      for (std::size_t i = 0; i < x.numel(); ++i)
        dx[i] = x[i] > 0.0 ? grad_out[i] : 0.0;
      return dx;
    }
    case LayerKind::flatten: {
      Tensor dx(ctx.input_shape);
      for (std::size_t i = 0; i < grad_out.numel(); ++i) dx[i] = grad_out[i];
      return dx;
    }
  }
  throw ConfigError("layer_backward: unknown layer kind");
}

}  // namespace admmq
