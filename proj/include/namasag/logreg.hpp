// Copyright 2026 The namasag Authors.
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

// Multinomial (softmax) logistic regression with an L2 penalty on the
// weights, fit with L-BFGS.

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "namasag/common.hpp"
#include "namasag/featurize.hpp"
#include "namasag/lbfgs.hpp"
#include "namasag/nam.hpp"

namespace namasag {

struct LogRegModel {
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
  std::vector<double> weights;     // K x D, row-major
  std::vector<double> intercepts;  // K
  double l2_strength = 1.0;
  std::vector<std::string> feature_names;

  double weight(std::size_t cls, std::size_t feature) const {
    return weights[cls * num_features + feature];
  }
};

inline std::vector<double> logreg_logits(const LogRegModel& m, std::span<const double> x) {
  if (x.size() != m.num_features) {
    throw UsageError("input has " + std::to_string(x.size()) + " features, model expects " +
                     std::to_string(m.num_features));
  }
  std::vector<double> z = m.intercepts;
  for (std::size_t c = 0; c < m.num_classes; ++c) {
    for (std::size_t j = 0; j < m.num_features; ++j) z[c] += m.weight(c, j) * x[j];
  }
  return z;
}

inline std::vector<double> logreg_predict(const LogRegModel& m, std::span<const double> x) {
  return softmax(logreg_logits(m, x));
}

// Mean cross-entropy + (l2 / 2) * ||W||^2 over the packed parameters
// [W (K x D, row-major), intercepts (K)]. Intercepts are not penalized.
class LogRegObjective {
 public:
  LogRegObjective(const FeatureMatrix& x, std::span<const int> labels, std::size_t classes,
                  double l2)
      : x_(x), labels_(labels), k_(classes), l2_(l2) {}

  std::size_t size() const { return k_ * (x_.cols + 1); }

  double operator()(std::span<const double> theta, std::span<double> grad) const {
    const std::size_t d = x_.cols;
    const std::size_t n = x_.rows;
    const double* w = theta.data();
    const double* b = theta.data() + k_ * d;
    std::fill(grad.begin(), grad.end(), 0.0);
    double* gw = grad.data();
    double* gb = grad.data() + k_ * d;
    std::vector<double> z(k_);
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      const auto xr = x_.row(r);
      for (std::size_t c = 0; c < k_; ++c) {
        double s = b[c];
        for (std::size_t j = 0; j < d; ++j) s += w[c * d + j] * xr[j];
        z[c] = s;
      }
      const double mx = *std::max_element(z.begin(), z.end());
      double lse = 0.0;
      for (double v : z) lse += std::exp(v - mx);
      const double log_norm = mx + std::log(lse);
      const auto y = static_cast<std::size_t>(labels_[r]);
      loss += log_norm - z[y];
      for (std::size_t c = 0; c < k_; ++c) {
        const double delta = (std::exp(z[c] - log_norm) - (c == y ? 1.0 : 0.0)) * inv_n;
        gb[c] += delta;
        for (std::size_t j = 0; j < d; ++j) gw[c * d + j] += delta * xr[j];
      }
    }
    loss *= inv_n;
    double sq = 0.0;
    for (std::size_t i = 0; i < k_ * d; ++i) {
      sq += w[i] * w[i];
      gw[i] += l2_ * w[i];
    }
    return loss + 0.5 * l2_ * sq;
  }

 private:
  const FeatureMatrix& x_;
  std::span<const int> labels_;
  std::size_t k_;
  double l2_;
};

struct LogRegFit {
  LogRegModel model;
  LbfgsResult optimizer;
};

// `start` optionally seeds the packed parameters; zeros otherwise.
inline LogRegFit train_logreg(const FeatureMatrix& features, std::span<const int> labels,
                              std::size_t num_classes, double l2_strength,
                              const LbfgsOptions& options = {},
                              std::span<const double> start = {}) {
  if (features.rows == 0) throw DataError("empty training set");
  if (features.rows != labels.size()) throw UsageError("feature rows and label count differ");
  if (num_classes < 2) throw UsageError("need at least two classes");
  if (!(l2_strength >= 0.0)) throw UsageError("l2_strength must be >= 0");
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= num_classes) {
      throw DataError("label " + std::to_string(labels[n]) + " at row " +
                      std::to_string(n + 1) + " out of range");
    }
  }
  bool single_class = true;
  for (int y : labels) single_class = single_class && y == labels[0];
  if (single_class) throw DataError("training data contains a single class");

  LogRegObjective obj(features, labels, num_classes, l2_strength);
  std::vector<double> x0(obj.size(), 0.0);
  if (!start.empty()) {
    if (start.size() != x0.size()) throw UsageError("train_logreg: bad start size");
    x0.assign(start.begin(), start.end());
  }
  LogRegFit fit;
  fit.optimizer = lbfgs_minimize(
      [&obj](std::span<const double> t, std::span<double> g) { return obj(t, g); }, x0,
      options);
  auto& m = fit.model;
  m.num_features = features.cols;
  m.num_classes = num_classes;
  m.l2_strength = l2_strength;
  m.feature_names = features.feature_names;
  const auto& t = fit.optimizer.x;
  m.weights.assign(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(num_classes * features.cols));
  m.intercepts.assign(t.begin() + static_cast<std::ptrdiff_t>(num_classes * features.cols), t.end());
  return fit;
}

inline nlohmann::json to_json(const LogRegModel& m) {
  return {{"type", "logreg"},
          {"num_features", m.num_features},
          {"num_classes", m.num_classes},
          {"feature_names", m.feature_names},
          {"l2_strength", m.l2_strength},
          {"weights", m.weights},
          {"intercepts", m.intercepts}};
}

inline LogRegModel logreg_from_json(const nlohmann::json& j) {
  if (j.value("type", "") != "logreg") {
    throw DataError("model document is not of type 'logreg'");
  }
  try {
    LogRegModel m;
    m.num_features = j.at("num_features").get<std::size_t>();
    m.num_classes = j.at("num_classes").get<std::size_t>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.l2_strength = j.at("l2_strength").get<double>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.intercepts = j.at("intercepts").get<std::vector<double>>();
    if (m.weights.size() != m.num_features * m.num_classes ||
        m.intercepts.size() != m.num_classes || m.feature_names.size() != m.num_features) {
      throw DataError("logreg model: inconsistent dimensions");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("logreg model: ") + e.what());
  }
}

}  // namespace namasag
