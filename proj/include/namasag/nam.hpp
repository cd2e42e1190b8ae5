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

// Neural Additive Model for K-class classification.
//
// Every feature i owns a subnetwork f_i: R -> R^K made of one ExU hidden
// layer and a linear head. Class logits are
//
//   logits = global_bias + sum_i f_i(x_i)
//
// and the centered contribution f_i(x_i) - centers_i is the explanation
// reported for feature i. Centers hold the training-set mean of f_i, so the
// centered shape functions average to zero over the training data.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "namasag/common.hpp"
#include "namasag/featurize.hpp"

namespace namasag {

// Hidden layer with units h_u(x) = clip(exp(w_u) * (x - b_u), 0, 1).
struct ExULayer {
  std::vector<double> weights;
  std::vector<double> biases;
  std::size_t units() const { return weights.size(); }
};

inline double exu_unit(double weight, double bias, double x) {
  return std::clamp(std::exp(weight) * (x - bias), 0.0, 1.0);
}

inline std::vector<double> exu_forward(const ExULayer& layer, double x) {
  std::vector<double> h(layer.units());
  for (std::size_t u = 0; u < h.size(); ++u) {
    h[u] = exu_unit(layer.weights[u], layer.biases[u], x);
  }
  return h;
}

struct FeatureNet {
  ExULayer exu;
  std::vector<double> head;       // units x classes, row-major
  std::vector<double> head_bias;  // classes
  std::size_t feature_index = 0;
};

struct NamModel {
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
  std::vector<FeatureNet> nets;
  std::vector<double> global_bias;  // K
  std::vector<double> centers;      // D x K, row-major
  std::vector<std::string> feature_names;
  std::string config_fingerprint;

  // All parameters zero; every feature net has `units` hidden units.
  static NamModel zeros(std::size_t features, std::size_t classes, std::size_t units) {
    if (features < 1) throw UsageError("NamModel needs at least one feature");
    if (classes < 2) throw UsageError("NamModel needs at least two classes");
    NamModel m;
    m.num_features = features;
    m.num_classes = classes;
    m.nets.resize(features);
    for (std::size_t i = 0; i < features; ++i) {
      auto& net = m.nets[i];
      net.exu.weights.assign(units, 0.0);
      net.exu.biases.assign(units, 0.0);
      net.head.assign(units * classes, 0.0);
      net.head_bias.assign(classes, 0.0);
      net.feature_index = i;
    }
    m.global_bias.assign(classes, 0.0);
    m.centers.assign(features * classes, 0.0);
    m.feature_names.resize(features);
    for (std::size_t i = 0; i < features; ++i) m.feature_names[i] = "x" + std::to_string(i);
    return m;
  }

  double center(std::size_t feature, std::size_t cls) const {
    return centers[feature * num_classes + cls];
  }

  // Raw (uncentered) f_i(x), added into `out` (length K).
  void accumulate_feature(std::size_t i, double x, std::span<double> out) const {
    const auto& net = nets[i];
    const std::size_t k = num_classes;
    for (std::size_t c = 0; c < k; ++c) out[c] += net.head_bias[c];
    for (std::size_t u = 0; u < net.exu.units(); ++u) {
      const double h = exu_unit(net.exu.weights[u], net.exu.biases[u], x);
      if (h == 0.0) continue;
      for (std::size_t c = 0; c < k; ++c) out[c] += h * net.head[u * k + c];
    }
  }

  std::vector<double> feature_output(std::size_t i, double x) const {
    std::vector<double> out(num_classes, 0.0);
    accumulate_feature(i, x, out);
    return out;
  }
};

namespace detail {

inline void check_input(const NamModel& m, std::size_t len) {
  if (len != m.num_features) {
    throw UsageError("input has " + std::to_string(len) + " features, model expects " +
                     std::to_string(m.num_features));
  }
}

inline void check_feature_index(const NamModel& m, std::size_t feature) {
  if (feature >= m.num_features) {
    throw UsageError("feature index " + std::to_string(feature) + " out of range");
  }
}

}  // namespace detail

inline std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    p[c] = std::exp(logits[c] - mx);
    sum += p[c];
  }
  for (double& v : p) v /= sum;
  return p;
}

inline std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline std::vector<double> nam_forward(const NamModel& model, std::span<const double> x) {
  detail::check_input(model, x.size());
  std::vector<double> logits = model.global_bias;
  for (std::size_t i = 0; i < model.num_features; ++i) {
    model.accumulate_feature(i, x[i], logits);
  }
  return logits;
}

inline std::vector<double> predict_proba(const NamModel& model, std::span<const double> x) {
  return softmax(nam_forward(model, x));
}

struct ContributionBreakdown {
  std::vector<double> per_feature;  // D x K centered contributions
  std::vector<double> bias_term;    // K
  std::vector<double> logits;       // K
};

inline ContributionBreakdown contributions(const NamModel& model,
                                           std::span<const double> x) {
  detail::check_input(model, x.size());
  const std::size_t k = model.num_classes;
  ContributionBreakdown out;
  out.per_feature.assign(model.num_features * k, 0.0);
  out.bias_term = model.global_bias;
  for (std::size_t i = 0; i < model.num_features; ++i) {
    std::span<double> row(out.per_feature.data() + i * k, k);
    model.accumulate_feature(i, x[i], row);
    for (std::size_t c = 0; c < k; ++c) row[c] -= model.center(i, c);
  }
  out.logits = nam_forward(model, x);
  return out;
}

// Centered per-class values of one feature's shape function; result[g][c].
inline std::vector<std::vector<double>> shape_function(const NamModel& model,
                                                       std::size_t feature,
                                                       std::span<const double> grid) {
  detail::check_feature_index(model, feature);
  std::vector<std::vector<double>> out;
  out.reserve(grid.size());
  for (double g : grid) {
    if (!std::isfinite(g)) throw UsageError("shape_function: non-finite grid point");
    auto v = model.feature_output(feature, g);
    for (std::size_t c = 0; c < v.size(); ++c) v[c] -= model.center(feature, c);
    out.push_back(std::move(v));
  }
  return out;
}

// Mean absolute centered contribution over rows and classes.
inline std::vector<double> feature_importance(const NamModel& model,
                                              const FeatureMatrix& features) {
  detail::check_input(model, features.cols);
  const std::size_t k = model.num_classes;
  std::vector<double> imp(model.num_features, 0.0);
  if (features.rows == 0) return imp;
  std::vector<double> f(k);
  for (std::size_t i = 0; i < model.num_features; ++i) {
    double acc = 0.0;
    for (std::size_t n = 0; n < features.rows; ++n) {
      std::fill(f.begin(), f.end(), 0.0);
      model.accumulate_feature(i, features.at(n, i), f);
      for (std::size_t c = 0; c < k; ++c) acc += std::abs(f[c] - model.center(i, c));
    }
    imp[i] = acc / static_cast<double>(features.rows * k);
  }
  return imp;
}

// Sets centers to the training-set mean of the raw feature outputs.
inline void calibrate_centers_in_place(NamModel& model, const FeatureMatrix& train) {
  detail::check_input(model, train.cols);
  if (train.rows == 0) throw DataError("calibrate_centers: empty feature matrix");
  const std::size_t k = model.num_classes;
  std::vector<double> sums(model.num_features * k, 0.0);
  for (std::size_t n = 0; n < train.rows; ++n) {
    for (std::size_t i = 0; i < model.num_features; ++i) {
      model.accumulate_feature(i, train.at(n, i), std::span<double>(sums.data() + i * k, k));
    }
  }
  const double inv = 1.0 / static_cast<double>(train.rows);
  for (double& s : sums) s *= inv;
  model.centers = std::move(sums);
}

inline NamModel calibrate_centers(NamModel model, const FeatureMatrix& train) {
  calibrate_centers_in_place(model, train);
  return model;
}

// ---------------------------------------------------------------------------
// Flat parameter view. Per net: exu weights (U), exu biases (U), head (U*K),
// head bias (K); then the global bias (K). Centers are not parameters.

inline std::size_t parameter_count(const NamModel& m) {
  std::size_t n = m.num_classes;
  for (const auto& net : m.nets) {
    n += 2 * net.exu.units() + net.head.size() + net.head_bias.size();
  }
  return n;
}

inline std::vector<double> get_parameters(const NamModel& m) {
  std::vector<double> p;
  p.reserve(parameter_count(m));
  for (const auto& net : m.nets) {
    p.insert(p.end(), net.exu.weights.begin(), net.exu.weights.end());
    p.insert(p.end(), net.exu.biases.begin(), net.exu.biases.end());
    p.insert(p.end(), net.head.begin(), net.head.end());
    p.insert(p.end(), net.head_bias.begin(), net.head_bias.end());
  }
  p.insert(p.end(), m.global_bias.begin(), m.global_bias.end());
  return p;
}

inline void set_parameters(NamModel& m, std::span<const double> p) {
  if (p.size() != parameter_count(m)) {
    throw UsageError("set_parameters: expected " + std::to_string(parameter_count(m)) +
                     " values, got " + std::to_string(p.size()));
  }
  auto it = p.begin();
  auto take = [&it](std::vector<double>& dst) {
    std::copy_n(it, dst.size(), dst.begin());
    it += static_cast<std::ptrdiff_t>(dst.size());
  };
  for (auto& net : m.nets) {
    take(net.exu.weights);
    take(net.exu.biases);
    take(net.head);
    take(net.head_bias);
  }
  take(m.global_bias);
}

// ---------------------------------------------------------------------------
// Training objective

struct LossAndGradients {
  double loss = 0.0;
  std::vector<double> gradients;  // same layout as get_parameters
};

// Mean softmax cross-entropy over the batch plus (weight_decay / 2) times the
// squared norm of ExU and head weights. `batch_x` is row-major with one row of
// D features per label. With dropout_rate > 0 each hidden activation is kept
// with probability 1 - rate and rescaled by 1 / (1 - rate); the mask is drawn
// from `rng` in (example, feature, unit) order.
inline LossAndGradients loss_and_gradients(const NamModel& model,
                                           std::span<const double> batch_x,
                                           std::span<const int> batch_y,
                                           double dropout_rate, Rng* rng,
                                           double weight_decay = 0.0) {
  const std::size_t d = model.num_features;
  const std::size_t k = model.num_classes;
  const std::size_t b = batch_y.size();
  if (b == 0) throw UsageError("loss_and_gradients: empty batch");
  if (batch_x.size() != b * d) throw UsageError("loss_and_gradients: batch shape mismatch");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw UsageError("dropout rate must be in [0, 1)");
  }
  if (dropout_rate > 0.0 && rng == nullptr) {
    throw UsageError("dropout requires a random stream");
  }
  for (int y : batch_y) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw DataError("label " + std::to_string(y) + " out of range [0, " +
                      std::to_string(k) + ")");
    }
  }

  // Offsets of each net's block in the flat layout.
  std::vector<std::size_t> offset(d + 1, 0);
  for (std::size_t i = 0; i < d; ++i) {
    const auto& net = model.nets[i];
    offset[i + 1] = offset[i] + 2 * net.exu.units() + net.head.size() + k;
  }
  LossAndGradients out;
  out.gradients.assign(offset[d] + k, 0.0);
  auto& grad = out.gradients;

  const double keep_scale = 1.0 / (1.0 - dropout_rate);
  const double inv_b = 1.0 / static_cast<double>(b);

  // Per-example scratch: masked activation and mask per (feature, unit).
  std::vector<std::vector<double>> act(d), mask(d), z(d);
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t u = model.nets[i].exu.units();
    act[i].resize(u);
    mask[i].resize(u);
    z[i].resize(u);
  }
  std::vector<double> logits(k), dlogit(k);

  double loss = 0.0;
  for (std::size_t n = 0; n < b; ++n) {
    const auto x = batch_x.subspan(n * d, d);
    std::copy(model.global_bias.begin(), model.global_bias.end(), logits.begin());
    for (std::size_t i = 0; i < d; ++i) {
      const auto& net = model.nets[i];
      for (std::size_t c = 0; c < k; ++c) logits[c] += net.head_bias[c];
      for (std::size_t u = 0; u < net.exu.units(); ++u) {
        const double zu = std::exp(net.exu.weights[u]) * (x[i] - net.exu.biases[u]);
        double m = 1.0;
        if (dropout_rate > 0.0) m = rng->uniform() < dropout_rate ? 0.0 : keep_scale;
        z[i][u] = zu;
        mask[i][u] = m;
        const double a = std::clamp(zu, 0.0, 1.0) * m;
        act[i][u] = a;
        if (a == 0.0) continue;
        for (std::size_t c = 0; c < k; ++c) logits[c] += a * net.head[u * k + c];
      }
    }
    const auto p = softmax(logits);
    const auto y = static_cast<std::size_t>(batch_y[n]);
    // log-softmax without forming log(p) of a tiny probability
    const double mx = *std::max_element(logits.begin(), logits.end());
    double lse = 0.0;
    for (double l : logits) lse += std::exp(l - mx);
    loss += -(logits[y] - mx - std::log(lse));

    for (std::size_t c = 0; c < k; ++c) dlogit[c] = (p[c] - (c == y ? 1.0 : 0.0)) * inv_b;
    for (std::size_t c = 0; c < k; ++c) grad[offset[d] + c] += dlogit[c];

    for (std::size_t i = 0; i < d; ++i) {
      const auto& net = model.nets[i];
      const std::size_t units = net.exu.units();
      const std::size_t w_off = offset[i];
      const std::size_t b_off = w_off + units;
      const std::size_t h_off = b_off + units;
      const std::size_t hb_off = h_off + units * k;
      for (std::size_t c = 0; c < k; ++c) grad[hb_off + c] += dlogit[c];
      for (std::size_t u = 0; u < units; ++u) {
        const double a = act[i][u];
        double dact = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
          grad[h_off + u * k + c] += a * dlogit[c];
          dact += net.head[u * k + c] * dlogit[c];
        }
        const double zu = z[i][u];
        // Zero derivative on the clipped plateaus and at the kinks.
        if (zu > 0.0 && zu < 1.0 && mask[i][u] != 0.0) {
          const double dz = dact * mask[i][u];
          grad[w_off + u] += dz * zu;
          grad[b_off + u] += -dz * std::exp(net.exu.weights[u]);
        }
      }
    }
  }
  out.loss = loss * inv_b;

  if (weight_decay > 0.0) {
    double penalty = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const auto& net = model.nets[i];
      const std::size_t units = net.exu.units();
      for (std::size_t u = 0; u < units; ++u) {
        const double w = net.exu.weights[u];
        penalty += w * w;
        grad[offset[i] + u] += weight_decay * w;
      }
      const std::size_t h_off = offset[i] + 2 * units;
      for (std::size_t j = 0; j < net.head.size(); ++j) {
        const double w = net.head[j];
        penalty += w * w;
        grad[h_off + j] += weight_decay * w;
      }
    }
    out.loss += 0.5 * weight_decay * penalty;
  }
  return out;
}

// ExU weights ~ Normal(4, 0.5), ExU biases ~ Uniform over the observed range
// of the feature, head weights ~ Normal(0, 0.1); biases of the heads and the
// global bias start at zero.
inline NamModel initialize_nam(const FeatureMatrix& train, std::size_t classes,
                               std::size_t units, Rng& rng) {
  if (train.rows == 0) throw DataError("cannot initialize from an empty feature matrix");
  NamModel m = NamModel::zeros(train.cols, classes, units);
  m.feature_names = train.feature_names;
  for (std::size_t i = 0; i < train.cols; ++i) {
    double lo = train.at(0, i), hi = lo;
    for (std::size_t n = 1; n < train.rows; ++n) {
      lo = std::min(lo, train.at(n, i));
      hi = std::max(hi, train.at(n, i));
    }
    auto& net = m.nets[i];
    for (std::size_t u = 0; u < units; ++u) {
      net.exu.weights[u] = rng.normal(4.0, 0.5);
      net.exu.biases[u] = rng.uniform(lo, hi);
    }
    for (double& w : net.head) w = rng.normal(0.0, 0.1);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const NamModel& m) {
  nlohmann::json j;
  j["type"] = "nam";
  j["num_features"] = m.num_features;
  j["num_classes"] = m.num_classes;
  j["feature_names"] = m.feature_names;
  j["config_fingerprint"] = m.config_fingerprint;
  j["global_bias"] = m.global_bias;
  j["centers"] = m.centers;
  j["nets"] = nlohmann::json::array();
  for (const auto& net : m.nets) {
    j["nets"].push_back({{"feature_index", net.feature_index},
                         {"exu_weights", net.exu.weights},
                         {"exu_biases", net.exu.biases},
                         {"head", net.head},
                         {"head_bias", net.head_bias}});
  }
  return j;
}

inline NamModel nam_from_json(const nlohmann::json& j) {
  if (j.value("type", "") != "nam") throw DataError("model document is not of type 'nam'");
  try {
    NamModel m;
    m.num_features = j.at("num_features").get<std::size_t>();
    m.num_classes = j.at("num_classes").get<std::size_t>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.config_fingerprint = j.value("config_fingerprint", "");
    m.global_bias = j.at("global_bias").get<std::vector<double>>();
    m.centers = j.at("centers").get<std::vector<double>>();
    for (const auto& jn : j.at("nets")) {
      FeatureNet net;
      net.feature_index = jn.at("feature_index").get<std::size_t>();
      net.exu.weights = jn.at("exu_weights").get<std::vector<double>>();
      net.exu.biases = jn.at("exu_biases").get<std::vector<double>>();
      net.head = jn.at("head").get<std::vector<double>>();
      net.head_bias = jn.at("head_bias").get<std::vector<double>>();
      if (net.exu.biases.size() != net.exu.units() ||
          net.head.size() != net.exu.units() * m.num_classes ||
          net.head_bias.size() != m.num_classes) {
        throw DataError("nam model: inconsistent net shapes");
      }
      m.nets.push_back(std::move(net));
    }
    if (m.nets.size() != m.num_features || m.feature_names.size() != m.num_features ||
        m.global_bias.size() != m.num_classes ||
        m.centers.size() != m.num_features * m.num_classes || m.num_classes < 2) {
      throw DataError("nam model: inconsistent dimensions");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("nam model: ") + e.what());
  }
}

}  // namespace namasag
