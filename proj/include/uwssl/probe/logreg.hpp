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


// Linear probe: multinomial logistic regression on standardized features,
// plus accuracy / weighted-F1 metrics.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "uwssl/core/error.hpp"

namespace uwssl::probe {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct ProbeConfig {
  double l2 = 1e-4;
  double tolerance = 1e-6;  // gradient norm
  std::size_t max_iterations = 5000;
};

inline void to_json(nlohmann::json& j, const ProbeConfig& c) {
  j = {{"l2", c.l2}, {"tolerance", c.tolerance}, {"max_iterations", c.max_iterations}};
}

struct ProbeModel {
  Matrix weight;  // d x K
  Vector bias;    // K
  Vector mean;    // d, from training features
  Vector scale;   // d, population std (1 where constant)
  std::size_t iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;

  std::size_t n_classes() const { return static_cast<std::size_t>(bias.size()); }

  Matrix standardize(const Matrix& x) const {
    require<ShapeError>(x.cols() == mean.size(), "probe expects ", mean.size(), " features, got ", x.cols());
    return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  }
  Matrix decision_function(const Matrix& x) const {
    return (standardize(x) * weight).rowwise() + bias.transpose();
  }
  std::vector<int> predict(const Matrix& x) const {
    const Matrix z = decision_function(x);
    std::vector<int> out(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      Eigen::Index k = 0;
      z.row(i).maxCoeff(&k);
      out[static_cast<std::size_t>(i)] = static_cast<int>(k);
    }
    return out;
  }
};

namespace detail {

inline void require_finite(const Matrix& x, const char* what) {
  require<NonFiniteError>(x.allFinite(), what, " contains non-finite values");
}

// Mean cross-entropy + (l2/2)|W|^2; fills the gradient when asked.
inline double objective(const Matrix& xs, const std::vector<int>& y, const Matrix& w, const Vector& b, double l2,
                        Matrix* gw, Vector* gb) {
  const auto n = xs.rows();
  Matrix z = (xs * w).rowwise() + b.transpose();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = z.row(i).maxCoeff();
    z.row(i).array() -= mx;
    const double lse = std::log(z.row(i).array().exp().sum());
    loss += lse - z(i, y[static_cast<std::size_t>(i)]);
    if (gw) {
      z.row(i) = (z.row(i).array() - lse).exp().matrix();
      z(i, y[static_cast<std::size_t>(i)]) -= 1.0;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  if (gw) {
    *gw = xs.transpose() * z * inv_n + l2 * w;
    *gb = z.colwise().sum().transpose() * inv_n;
  }
  return loss * inv_n + 0.5 * l2 * w.squaredNorm();
}

}  // namespace detail

/// Full-batch gradient descent with Armijo backtracking, from zero weights.
inline ProbeModel fit_probe(const Matrix& x, const std::vector<int>& y, std::size_t n_classes,
                            const ProbeConfig& cfg = {}) {
  require<ShapeError>(static_cast<std::size_t>(x.rows()) == y.size(), "probe: ", x.rows(), " feature rows vs ",
                      y.size(), " labels");
  require<InvalidArgument>(x.rows() > 0, "probe: empty training set");
  detail::require_finite(x, "probe training features");
  std::vector<std::size_t> counts(n_classes, 0);
  for (int c : y) {
    require<InvalidArgument>(c >= 0 && static_cast<std::size_t>(c) < n_classes, "probe: label ", c,
                             " outside [0, ", n_classes, ")");
    ++counts[static_cast<std::size_t>(c)];
  }
  const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t k) { return k > 0; });
  require<InvalidArgument>(present >= 2, "probe: training set has ", present, " class(es); at least 2 are needed");

  ProbeModel m;
  const auto d = x.cols();
  const auto k = static_cast<Eigen::Index>(n_classes);
  m.mean = x.colwise().mean().transpose();
  m.scale = ((x.rowwise() - m.mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(m.scale[j] > 1e-12)) m.scale[j] = 1.0;
  }
  const Matrix xs = m.standardize(x);
  m.weight = Matrix::Zero(d, k);
  m.bias = Vector::Zero(k);

  Matrix gw;
  Vector gb;
  double f = detail::objective(xs, y, m.weight, m.bias, cfg.l2, &gw, &gb);
  double step = 1.0;
  for (m.iterations = 0; m.iterations < cfg.max_iterations; ++m.iterations) {
    const double g2 = gw.squaredNorm() + gb.squaredNorm();
    m.grad_norm = std::sqrt(g2);
    if (m.grad_norm <= cfg.tolerance) {
      m.converged = true;
      break;
    }
    step = std::min(step * 2.0, 1e3);
    Matrix w_new;
    Vector b_new;
    double f_new = 0.0;
    for (int tries = 0; tries < 60; ++tries) {
      w_new = m.weight - step * gw;
      b_new = m.bias - step * gb;
      f_new = detail::objective(xs, y, w_new, b_new, cfg.l2, nullptr, nullptr);
      if (f_new <= f - 1e-4 * step * g2) break;
      step *= 0.5;
    }
    if (!(f_new < f)) break;  // no decrease at machine precision
    m.weight = std::move(w_new);
    m.bias = std::move(b_new);
    f = detail::objective(xs, y, m.weight, m.bias, cfg.l2, &gw, &gb);
  }
  if (!m.converged) m.grad_norm = std::sqrt(gw.squaredNorm() + gb.squaredNorm());
  if (m.grad_norm <= cfg.tolerance) m.converged = true;
  return m;
}

struct Metrics {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [truth][prediction]
  std::vector<double> precision, recall, f1;
  std::vector<std::size_t> support;
  std::size_t total = 0;
};

inline Metrics metrics_from_confusion(std::vector<std::vector<std::size_t>> confusion) {
  const std::size_t k = confusion.size();
  Metrics m;
  m.precision.assign(k, 0.0);
  m.recall.assign(k, 0.0);
  m.f1.assign(k, 0.0);
  m.support.assign(k, 0);
  std::vector<std::size_t> predicted(k, 0);
  std::size_t correct = 0;
  for (std::size_t t = 0; t < k; ++t) {
    require<ShapeError>(confusion[t].size() == k, "confusion matrix must be square");
    for (std::size_t p = 0; p < k; ++p) {
      m.support[t] += confusion[t][p];
      predicted[p] += confusion[t][p];
      m.total += confusion[t][p];
    }
    correct += confusion[t][t];
  }
  require<InvalidArgument>(m.total > 0, "metrics need at least one evaluated sample");
  const double total = static_cast<double>(m.total);
  for (std::size_t c = 0; c < k; ++c) {
    const double tp = static_cast<double>(confusion[c][c]);
    if (predicted[c] > 0) m.precision[c] = tp / static_cast<double>(predicted[c]);
    if (m.support[c] > 0) m.recall[c] = tp / static_cast<double>(m.support[c]);
    const double pr = m.precision[c] + m.recall[c];
    m.f1[c] = pr > 0.0 ? 2.0 * m.precision[c] * m.recall[c] / pr : 0.0;
    m.weighted_f1 += static_cast<double>(m.support[c]) / total * m.f1[c];
  }
  m.accuracy = static_cast<double>(correct) / total;
  m.confusion = std::move(confusion);
  return m;
}

inline Metrics metrics_from_predictions(const std::vector<int>& truth, const std::vector<int>& pred,
                                        std::size_t n_classes) {
  require<ShapeError>(truth.size() == pred.size(), "metrics: ", truth.size(), " labels vs ", pred.size(),
                      " predictions");
  std::vector<std::vector<std::size_t>> cm(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require<InvalidArgument>(truth[i] >= 0 && static_cast<std::size_t>(truth[i]) < n_classes && pred[i] >= 0 &&
                                 static_cast<std::size_t>(pred[i]) < n_classes,
                             "metrics: class id out of range at sample ", i);
    ++cm[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])];
  }
  return metrics_from_confusion(std::move(cm));
}

inline Metrics evaluate(const ProbeModel& probe, const Matrix& x, const std::vector<int>& y) {
  require<InvalidArgument>(x.rows() > 0, "evaluate: empty test set");
  detail::require_finite(x, "probe test features");
  return metrics_from_predictions(y, probe.predict(x), probe.n_classes());
}

inline nlohmann::json to_json(const Metrics& m, const std::vector<std::string>& class_names = {}) {
  nlohmann::json j;
  j["accuracy"] = m.accuracy;
  j["weighted_f1"] = m.weighted_f1;
  j["total"] = m.total;
  j["confusion"] = m.confusion;
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t c = 0; c < m.f1.size(); ++c) {
    per.push_back({{"class", c < class_names.size() ? class_names[c] : std::to_string(c)},
                   {"precision", m.precision[c]},
                   {"recall", m.recall[c]},
                   {"f1", m.f1[c]},
                   {"support", m.support[c]}});
  }
  j["per_class"] = per;
  return j;
}

}  // namespace uwssl::probe
