// Copyright 2026 The uwssl Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Differentiable ops. Layouts: sequences are [B, T, C]; images are NHWC.
// Every op reduces over its trailing "feature" axis unless stated.

#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "uwssl/nn/tensor.hpp"

namespace uwssl::nn {

namespace kernels {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;
using CStrided = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using MStrided = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace kernels

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require<ShapeError>(a.shape() == b.shape(), op, ": shapes ", shape_str(a.shape()), " and ", shape_str(b.shape()),
                      " differ");
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Buffer y(a.values());
  const auto& bv = b.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return make_result("add", a.shape(), std::move(y), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (double* g = input_grad(self, k)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

/// Residual connection: x + scale * f.
inline Tensor residual_add(const Tensor& x, const Tensor& f, double scale = 1.0) {
  require_same_shape(x, f, "residual_add");
  Buffer y(x.values());
  const auto& fv = f.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += scale * fv[i];
  return make_result("residual_add", x.shape(), std::move(y), {x, f}, [scale](Node& self) {
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = input_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += scale * self.grad[i];
    }
  });
}

inline Tensor scale(const Tensor& a, double s) {
  Buffer y(a.values());
  for (double& v : y) v *= s;
  return make_result("scale", a.shape(), std::move(y), {a}, [s](Node& self) {
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += s * self.grad[i];
    }
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Buffer y(a.values());
  const auto& bv = b.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return make_result("mul", a.shape(), std::move(y), {a, b}, [](Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (double* g = input_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_result("sum", {1}, {s}, {a}, [](Node& self) {
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.inputs[0]->value.size(); ++i) g[i] += self.grad[0];
    }
  });
}

inline Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

/// sum_i w_i * a_i for a fixed weight vector; turns any op into a scalar.
inline Tensor weighted_sum(const Tensor& a, std::vector<double> w) {
  require<ShapeError>(w.size() == a.size(), "weighted_sum: ", w.size(), " weights for ", a.size(), " values");
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * a.values()[i];
  auto wp = std::make_shared<std::vector<double>>(std::move(w));
  return make_result("weighted_sum", {1}, {s}, {a}, [wp](Node& self) {
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < wp->size(); ++i) g[i] += self.grad[0] * (*wp)[i];
    }
  });
}

inline Tensor reshape(const Tensor& a, Shape shape) {
  require<ShapeError>(numel(shape) == a.size(), "reshape: ", shape_str(a.shape()), " -> ", shape_str(shape));
  return make_result("reshape", std::move(shape), a.values(), {a}, [](Node& self) {
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

/// [B, ...] -> [B, prod(...)]
inline Tensor flatten(const Tensor& a) {
  require<ShapeError>(a.rank() >= 2, "flatten needs rank >= 2, got ", shape_str(a.shape()));
  return reshape(a, {a.dim(0), a.size() / a.dim(0)});
}

/// y = x W + b over the last axis. x: [..., in], W: [in, out], b: [out] or undefined.
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b = Tensor()) {
  require<ShapeError>(w.rank() == 2 && x.rank() >= 1 && x.shape().back() == w.dim(0), "linear: input ",
                      shape_str(x.shape()), " vs weight ", shape_str(w.shape()));
  const std::size_t in = w.dim(0), out = w.dim(1), rows = x.size() / in;
  if (b.defined()) require<ShapeError>(b.rank() == 1 && b.dim(0) == out, "linear: bias ", shape_str(b.shape()));
  Shape shape = x.shape();
  shape.back() = out;
  Buffer y(rows * out);
  kernels::MMap Y(y.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(out));
  Y.noalias() = kernels::CMap(x.values().data(), rows, in) * kernels::CMap(w.values().data(), in, out);
  if (b.defined()) Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.values().data(), out);
  std::vector<Tensor> inputs{x, w};
  if (b.defined()) inputs.push_back(b);
  return make_result("linear", std::move(shape), std::move(y), std::move(inputs), [rows, in, out](Node& self) {
    kernels::CMap dY(self.grad.data(), rows, out);
    if (double* g = input_grad(self, 0)) {
      kernels::MMap(g, rows, in).noalias() += dY * kernels::CMap(self.inputs[1]->value.data(), in, out).transpose();
    }
    if (double* g = input_grad(self, 1)) {
      kernels::MMap(g, in, out).noalias() += kernels::CMap(self.inputs[0]->value.data(), rows, in).transpose() * dY;
    }
    if (self.inputs.size() > 2) {
      if (double* g = input_grad(self, 2)) Eigen::Map<Eigen::RowVectorXd>(g, out) += dY.colwise().sum();
    }
  });
}

/// Alias of linear over the channel axis of a [B, T, C] sequence.
inline Tensor pointwise_conv(const Tensor& x, const Tensor& w, const Tensor& b = Tensor()) {
  return linear(x, w, b);
}

inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5) {
  const std::size_t c = x.shape().back();
  require<ShapeError>(gamma.size() == c && beta.size() == c, "layer_norm: feature dim ", c, " vs params ",
                      gamma.size());
  const std::size_t rows = x.size() / c;
  auto xhat = std::make_shared<Buffer>(x.size());
  auto inv_std = std::make_shared<Buffer>(rows);
  Buffer y(x.size());
  const auto& xv = x.values();
  const auto& gv = gamma.values();
  const auto& bv = beta.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += xr[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (xr[j] - mu) * is;
      (*xhat)[r * c + j] = h;
      y[r * c + j] = gv[j] * h + bv[j];
    }
  }
  return make_result("layer_norm", x.shape(), std::move(y), {x, gamma, beta}, [xhat, inv_std, rows, c](Node& self) {
    const auto& gv = self.inputs[1]->value;
    double* gx = input_grad(self, 0);
    double* gg = input_grad(self, 1);
    double* gb = input_grad(self, 2);
    Buffer dxhat(c);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* dy = self.grad.data() + r * c;
      const double* h = xhat->data() + r * c;
      double m1 = 0.0, m2 = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        dxhat[j] = dy[j] * gv[j];
        m1 += dxhat[j];
        m2 += dxhat[j] * h[j];
        if (gg) gg[j] += dy[j] * h[j];
        if (gb) gb[j] += dy[j];
      }
      if (gx) {
        m1 /= static_cast<double>(c);
        m2 /= static_cast<double>(c);
        for (std::size_t j = 0; j < c; ++j) gx[r * c + j] += (*inv_std)[r] * (dxhat[j] - m1 - h[j] * m2);
      }
    }
  });
}

inline Tensor softmax(const Tensor& x) {
  const std::size_t c = x.shape().back();
  const std::size_t rows = x.size() / c;
  Buffer y(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.values().data() + r * c;
    double* yr = y.data() + r * c;
    const double mx = *std::max_element(xr, xr + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += (yr[j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < c; ++j) yr[j] /= s;
  }
  return make_result("softmax", x.shape(), std::move(y), {x}, [rows, c](Node& self) {
    if (double* g = input_grad(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* yr = self.value.data() + r * c;
        const double* dy = self.grad.data() + r * c;
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += dy[j] * yr[j];
        for (std::size_t j = 0; j < c; ++j) g[r * c + j] += yr[j] * (dy[j] - dot);
      }
    }
  });
}

inline Tensor swish(const Tensor& x) {
  Buffer y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x.values()[i] * kernels::sigmoid(x.values()[i]);
  return make_result("swish", x.shape(), std::move(y), {x}, [](Node& self) {
    if (double* g = input_grad(self, 0)) {
      const auto& xv = self.inputs[0]->value;
      for (std::size_t i = 0; i < xv.size(); ++i) {
        const double s = kernels::sigmoid(xv[i]);
        g[i] += self.grad[i] * s * (1.0 + xv[i] * (1.0 - s));
      }
    }
  });
}

inline Tensor relu(const Tensor& x) {
  Buffer y(x.values());
  for (double& v : y) v = v > 0.0 ? v : 0.0;
  return make_result("relu", x.shape(), std::move(y), {x}, [](Node& self) {
    if (double* g = input_grad(self, 0)) {
      const auto& xv = self.inputs[0]->value;
      for (std::size_t i = 0; i < xv.size(); ++i)
        if (xv[i] > 0.0) g[i] += self.grad[i];
    }
  });
}

/// Gated linear unit over the last axis: [..., 2C] -> [..., C], a * sigmoid(b).
inline Tensor glu(const Tensor& x) {
  const std::size_t c2 = x.shape().back();
  require<ShapeError>(c2 % 2 == 0, "glu needs an even last dimension, got ", c2);
  const std::size_t c = c2 / 2, rows = x.size() / c2;
  Shape shape = x.shape();
  shape.back() = c;
  Buffer y(rows * c);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.values().data() + r * c2;
    for (std::size_t j = 0; j < c; ++j) y[r * c + j] = xr[j] * kernels::sigmoid(xr[c + j]);
  }
  return make_result("glu", std::move(shape), std::move(y), {x}, [rows, c](Node& self) {
    if (double* g = input_grad(self, 0)) {
      const auto& xv = self.inputs[0]->value;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xv.data() + r * 2 * c;
        double* gr = g + r * 2 * c;
        for (std::size_t j = 0; j < c; ++j) {
          const double s = kernels::sigmoid(xr[c + j]);
          const double dy = self.grad[r * c + j];
          gr[j] += dy * s;
          gr[c + j] += dy * xr[j] * s * (1.0 - s);
        }
      }
    }
  });
}

/// Depthwise convolution along T with "same" zero padding.
/// x: [B, T, C], w: [K, C] (K odd), b: [C].
inline Tensor depthwise_conv1d(const Tensor& x, const Tensor& w, const Tensor& b) {
  require<ShapeError>(x.rank() == 3 && w.rank() == 2 && w.dim(1) == x.dim(2) && w.dim(0) % 2 == 1 &&
                          b.size() == x.dim(2),
                      "depthwise_conv1d: input ", shape_str(x.shape()), " weight ", shape_str(w.shape()));
  const std::size_t B = x.dim(0), T = x.dim(1), C = x.dim(2), K = w.dim(0);
  const long pad = static_cast<long>(K / 2);
  Buffer y(x.size());
  const auto& xv = x.values();
  const auto& wv = w.values();
  for (std::size_t bi = 0; bi < B; ++bi) {
    for (std::size_t t = 0; t < T; ++t) {
      double* yr = y.data() + (bi * T + t) * C;
      for (std::size_t c = 0; c < C; ++c) yr[c] = b.values()[c];
      for (std::size_t k = 0; k < K; ++k) {
        const long src = static_cast<long>(t) + static_cast<long>(k) - pad;
        if (src < 0 || src >= static_cast<long>(T)) continue;
        const double* xr = xv.data() + (bi * T + static_cast<std::size_t>(src)) * C;
        const double* wr = wv.data() + k * C;
        for (std::size_t c = 0; c < C; ++c) yr[c] += wr[c] * xr[c];
      }
    }
  }
  return make_result("depthwise_conv1d", x.shape(), std::move(y), {x, w, b}, [B, T, C, K, pad](Node& self) {
    const auto& xv = self.inputs[0]->value;
    const auto& wv = self.inputs[1]->value;
    double* gx = input_grad(self, 0);
    double* gw = input_grad(self, 1);
    double* gb = input_grad(self, 2);
    for (std::size_t bi = 0; bi < B; ++bi) {
      for (std::size_t t = 0; t < T; ++t) {
        const double* dy = self.grad.data() + (bi * T + t) * C;
        if (gb)
          for (std::size_t c = 0; c < C; ++c) gb[c] += dy[c];
        for (std::size_t k = 0; k < K; ++k) {
          const long src = static_cast<long>(t) + static_cast<long>(k) - pad;
          if (src < 0 || src >= static_cast<long>(T)) continue;
          const std::size_t off = (bi * T + static_cast<std::size_t>(src)) * C;
          if (gx)
            for (std::size_t c = 0; c < C; ++c) gx[off + c] += dy[c] * wv[k * C + c];
          if (gw)
            for (std::size_t c = 0; c < C; ++c) gw[k * C + c] += dy[c] * xv[off + c];
        }
      }
    }
  });
}

/// Running statistics owned by a batch-norm layer.
struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormState(std::size_t c = 0) : running_mean(c, 0.0), running_var(c, 1.0) {}
};

/// Normalizes each channel (last axis) over every other axis. In training
/// mode uses batch statistics and updates the running estimates; in eval
/// mode uses the running estimates.
inline Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                         bool training) {
  const std::size_t C = x.shape().back();
  require<ShapeError>(gamma.size() == C && beta.size() == C && state.running_mean.size() == C,
                      "batch_norm: channel dim ", C, " vs params ", gamma.size());
  const std::size_t N = x.size() / C;
  const auto& xv = x.values();
  const auto& gv = gamma.values();
  const auto& bv = beta.values();
  std::vector<double> mean(C, 0.0), var(C, 0.0);
  if (training) {
    require(N > 1, "batch_norm in training mode needs more than one value per channel");
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c) mean[c] += xv[n * C + c];
    for (double& m : mean) m /= static_cast<double>(N);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c) var[c] += (xv[n * C + c] - mean[c]) * (xv[n * C + c] - mean[c]);
    for (std::size_t c = 0; c < C; ++c) {
      const double biased = var[c] / static_cast<double>(N);
      const double unbiased = var[c] / static_cast<double>(N - 1);
      var[c] = biased;
      state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mean[c];
      state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] + state.momentum * unbiased;
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }
  auto inv_std = std::make_shared<Buffer>(C);
  for (std::size_t c = 0; c < C; ++c) (*inv_std)[c] = 1.0 / std::sqrt(var[c] + state.eps);
  auto xhat = std::make_shared<Buffer>(x.size());
  Buffer y(x.size());
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const double h = (xv[n * C + c] - mean[c]) * (*inv_std)[c];
      (*xhat)[n * C + c] = h;
      y[n * C + c] = gv[c] * h + bv[c];
    }
  }
  return make_result("batch_norm", x.shape(), std::move(y), {x, gamma, beta},
                     [xhat, inv_std, N, C, training](Node& self) {
                       const auto& gv = self.inputs[1]->value;
                       double* gx = input_grad(self, 0);
                       double* gg = input_grad(self, 1);
                       double* gb = input_grad(self, 2);
                       Buffer m1(C, 0.0), m2(C, 0.0);
                       for (std::size_t n = 0; n < N; ++n) {
                         for (std::size_t c = 0; c < C; ++c) {
                           const double dy = self.grad[n * C + c];
                           const double h = (*xhat)[n * C + c];
                           if (gg) gg[c] += dy * h;
                           if (gb) gb[c] += dy;
                           m1[c] += dy * gv[c];
                           m2[c] += dy * gv[c] * h;
                         }
                       }
                       if (!gx) return;
                       for (std::size_t c = 0; c < C; ++c) {
                         m1[c] /= static_cast<double>(N);
                         m2[c] /= static_cast<double>(N);
                       }
                       for (std::size_t n = 0; n < N; ++n) {
                         for (std::size_t c = 0; c < C; ++c) {
                           const double dxhat = self.grad[n * C + c] * gv[c];
                           gx[n * C + c] += training ? (*inv_std)[c] * (dxhat - m1[c] - (*xhat)[n * C + c] * m2[c])
                                                     : (*inv_std)[c] * dxhat;
                         }
                       }
                     });
}

/// Mean over axis 1: [B, T, C] -> [B, C].
inline Tensor mean_pool(const Tensor& x) {
  require<ShapeError>(x.rank() == 3, "mean_pool expects [B, T, C], got ", shape_str(x.shape()));
  const std::size_t B = x.dim(0), T = x.dim(1), C = x.dim(2);
  Buffer y(B * C, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c) y[b * C + c] += x.values()[(b * T + t) * C + c];
  for (double& v : y) v /= static_cast<double>(T);
  return make_result("mean_pool", {B, C}, std::move(y), {x}, [B, T, C](Node& self) {
    if (double* g = input_grad(self, 0)) {
      const double inv = 1.0 / static_cast<double>(T);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t c = 0; c < C; ++c) g[(b * T + t) * C + c] += inv * self.grad[b * C + c];
    }
  });
}

/// Scaled dot-product attention over packed projections.
/// qkv: [B, T, 3D] laid out as [Q | K | V]; returns [B, T, D] with heads
/// concatenated. If probs_out is set it receives [B, H, T, T] weights.
inline Tensor attention(const Tensor& qkv, std::size_t n_heads, std::vector<double>* probs_out = nullptr) {
  require<ShapeError>(qkv.rank() == 3 && qkv.dim(2) % 3 == 0, "attention expects [B, T, 3D], got ",
                      shape_str(qkv.shape()));
  const std::size_t B = qkv.dim(0), T = qkv.dim(1), D = qkv.dim(2) / 3;
  require<ShapeError>(n_heads >= 1 && D % n_heads == 0, "model dim ", D, " not divisible by ", n_heads, " heads");
  const std::size_t H = n_heads, dh = D / H;
  const double s = 1.0 / std::sqrt(static_cast<double>(dh));
  const Eigen::Index t = static_cast<Eigen::Index>(T), d = static_cast<Eigen::Index>(dh);
  const Eigen::OuterStride<> stride3(static_cast<Eigen::Index>(3 * D)), stride1(static_cast<Eigen::Index>(D));
  auto probs = std::make_shared<Buffer>(B * H * T * T);
  Buffer y(B * T * D);
  const double* base = qkv.values().data();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      const double* qp = base + b * T * 3 * D + h * dh;
      kernels::CStrided Q(qp, t, d, stride3), K(qp + D, t, d, stride3), V(qp + 2 * D, t, d, stride3);
      kernels::MMap P(probs->data() + (b * H + h) * T * T, t, t);
      P.noalias() = s * (Q * K.transpose());
      for (Eigen::Index r = 0; r < t; ++r) {
        const double mx = P.row(r).maxCoeff();
        P.row(r) = (P.row(r).array() - mx).exp().matrix();
        P.row(r) /= P.row(r).sum();
      }
      kernels::MStrided(y.data() + b * T * D + h * dh, t, d, stride1).noalias() = P * V;
    }
  }
  if (probs_out) probs_out->assign(probs->begin(), probs->end());
  return make_result("attention", {B, T, D}, std::move(y), {qkv}, [probs, B, T, D, H, dh, s](Node& self) {
    double* g = input_grad(self, 0);
    if (!g) return;
    const Eigen::Index t = static_cast<Eigen::Index>(T), d = static_cast<Eigen::Index>(dh);
    const Eigen::OuterStride<> stride3(static_cast<Eigen::Index>(3 * D)), stride1(static_cast<Eigen::Index>(D));
    const double* base = self.inputs[0]->value.data();
    kernels::RowMat dP(t, t);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t h = 0; h < H; ++h) {
        const std::size_t off = b * T * 3 * D + h * dh;
        kernels::CStrided Q(base + off, t, d, stride3), K(base + off + D, t, d, stride3),
            V(base + off + 2 * D, t, d, stride3);
        kernels::MStrided dQ(g + off, t, d, stride3), dK(g + off + D, t, d, stride3), dV(g + off + 2 * D, t, d, stride3);
        kernels::CStrided dO(self.grad.data() + b * T * D + h * dh, t, d, stride1);
        kernels::CMap P(probs->data() + (b * H + h) * T * T, t, t);
        dV.noalias() += P.transpose() * dO;
        dP.noalias() = dO * V.transpose();
        // softmax backward, row-wise
        const Eigen::VectorXd rowdot = (dP.array() * P.array()).rowwise().sum();
        dP = (P.array() * (dP.array().colwise() - rowdot.array())).matrix();
        dQ.noalias() += s * (dP * K);
        dK.noalias() += s * (dP.transpose() * Q);
      }
    }
  });
}

/// 2-D convolution, NHWC. x: [B, H, W, Ci], w: [kh, kw, Ci, Co], b: [Co].
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) {
  require<ShapeError>(x.rank() == 4 && w.rank() == 4 && w.dim(2) == x.dim(3) && b.size() == w.dim(3) && stride >= 1,
                      "conv2d: input ", shape_str(x.shape()), " weight ", shape_str(w.shape()));
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), Ci = x.dim(3);
  const std::size_t kh = w.dim(0), kw = w.dim(1), Co = w.dim(3);
  require<ShapeError>(H + 2 * pad >= kh && W + 2 * pad >= kw, "conv2d: kernel larger than padded input");
  const std::size_t Ho = (H + 2 * pad - kh) / stride + 1, Wo = (W + 2 * pad - kw) / stride + 1;
  const std::size_t P = Ho * Wo, Kc = kh * kw * Ci;
  auto im2col = [=](const double* xb, Buffer& cols) {
    cols.assign(P * Kc, 0.0);
    for (std::size_t oy = 0; oy < Ho; ++oy)
      for (std::size_t ox = 0; ox < Wo; ++ox)
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
          if (iy < 0 || iy >= static_cast<long>(H)) continue;
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
            if (ix < 0 || ix >= static_cast<long>(W)) continue;
            const double* src = xb + (static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)) * Ci;
            std::copy(src, src + Ci, cols.data() + (oy * Wo + ox) * Kc + (ky * kw + kx) * Ci);
          }
        }
  };
  Buffer y(B * P * Co);
  Buffer cols;
  kernels::CMap Wm(w.values().data(), static_cast<Eigen::Index>(Kc), static_cast<Eigen::Index>(Co));
  const Eigen::Map<const Eigen::RowVectorXd> bias(b.values().data(), static_cast<Eigen::Index>(Co));
  for (std::size_t bi = 0; bi < B; ++bi) {
    im2col(x.values().data() + bi * H * W * Ci, cols);
    kernels::MMap Y(y.data() + bi * P * Co, static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(Co));
    Y.noalias() = kernels::CMap(cols.data(), P, Kc) * Wm;
    Y.rowwise() += bias;
  }
  return make_result(
      "conv2d", {B, Ho, Wo, Co}, std::move(y), {x, w, b},
      [=](Node& self) {
        double* gx = input_grad(self, 0);
        double* gw = input_grad(self, 1);
        double* gb = input_grad(self, 2);
        const auto& xv = self.inputs[0]->value;
        kernels::CMap Wm(self.inputs[1]->value.data(), static_cast<Eigen::Index>(Kc), static_cast<Eigen::Index>(Co));
        Buffer cols, dcols(P * Kc);
        for (std::size_t bi = 0; bi < B; ++bi) {
          kernels::CMap dY(self.grad.data() + bi * P * Co, static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(Co));
          if (gb) Eigen::Map<Eigen::RowVectorXd>(gb, static_cast<Eigen::Index>(Co)) += dY.colwise().sum();
          if (gw) {
            im2col(xv.data() + bi * H * W * Ci, cols);
            kernels::MMap(gw, Kc, Co).noalias() += kernels::CMap(cols.data(), P, Kc).transpose() * dY;
          }
          if (gx) {
            kernels::MMap(dcols.data(), P, Kc).noalias() = dY * Wm.transpose();
            double* gxb = gx + bi * H * W * Ci;
            for (std::size_t oy = 0; oy < Ho; ++oy)
              for (std::size_t ox = 0; ox < Wo; ++ox)
                for (std::size_t ky = 0; ky < kh; ++ky) {
                  const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                  if (iy < 0 || iy >= static_cast<long>(H)) continue;
                  for (std::size_t kx = 0; kx < kw; ++kx) {
                    const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                    if (ix < 0 || ix >= static_cast<long>(W)) continue;
                    double* dst = gxb + (static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)) * Ci;
                    const double* src = dcols.data() + (oy * Wo + ox) * Kc + (ky * kw + kx) * Ci;
                    for (std::size_t c = 0; c < Ci; ++c) dst[c] += src[c];
                  }
                }
          }
        }
      });
}

}  // namespace uwssl::nn
