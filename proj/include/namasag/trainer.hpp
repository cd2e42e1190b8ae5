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

// Mini-batch NAM training. A run is fully determined by its inputs and
// TrainConfig: initialization, shuffling and dropout masks all come from
// streams derived from config.seed.

#pragma once

#include <chrono>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "namasag/common.hpp"
#include "namasag/evaluation.hpp"
#include "namasag/featurize.hpp"
#include "namasag/nam.hpp"

namespace namasag {

enum class Optimizer { adam, sgd };

struct TrainConfig {
  int epochs = 120;
  int batch_size = 64;
  double learning_rate = 0.002;
  double dropout = 0.15;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::adam;
  int hidden_units = 32;

  void validate() const {
    if (epochs < 1) throw UsageError("epochs must be >= 1");
    if (batch_size < 1) throw UsageError("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be > 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must be in [0, 1)");
    if (!(weight_decay >= 0.0)) throw UsageError("weight_decay must be >= 0");
    if (hidden_units < 1) throw UsageError("hidden_units must be >= 1");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"dropout", c.dropout},
          {"weight_decay", c.weight_decay},
          {"seed", c.seed},
          {"optimizer", c.optimizer == Optimizer::adam ? "adam" : "sgd"},
          {"hidden_units", c.hidden_units}};
}

// Fields absent from `j` keep the values already in `base`.
inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
  try {
    if (j.contains("epochs")) base.epochs = j["epochs"].get<int>();
    if (j.contains("batch_size")) base.batch_size = j["batch_size"].get<int>();
    if (j.contains("learning_rate")) base.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("dropout")) base.dropout = j["dropout"].get<double>();
    if (j.contains("weight_decay")) base.weight_decay = j["weight_decay"].get<double>();
    if (j.contains("seed")) base.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("hidden_units")) base.hidden_units = j["hidden_units"].get<int>();
    if (j.contains("optimizer")) {
      const auto name = j["optimizer"].get<std::string>();
      if (name == "adam") {
        base.optimizer = Optimizer::adam;
      } else if (name == "sgd") {
        base.optimizer = Optimizer::sgd;
      } else {
        throw UsageError("unknown optimizer '" + name + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("train config: ") + e.what());
  }
  return base;
}

// Cartesian product of a grid object {"field": [v1, v2, ...], ...}. Keys are
// visited in sorted order and the last key varies fastest.
inline std::vector<nlohmann::json> expand_grid(const nlohmann::json& grid) {
  if (!grid.is_object() || grid.empty()) throw UsageError("grid must be a non-empty object");
  std::vector<nlohmann::json> out{nlohmann::json::object()};
  for (const auto& [key, values] : grid.items()) {
    if (!values.is_array() || values.empty()) {
      throw UsageError("grid field '" + key + "' must be a non-empty array");
    }
    std::vector<nlohmann::json> next;
    for (const auto& partial : out) {
      for (const auto& v : values) {
        auto c = partial;
        c[key] = v;
        next.push_back(std::move(c));
      }
    }
    out = std::move(next);
  }
  return out;
}

inline std::string fingerprint(const TrainConfig& c) {
  return hex64(fnv1a64(to_json(c).dump()));
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long long step = 0;
};

// One Adam update (beta1 0.9, beta2 0.999, eps 1e-8) with bias correction.
inline void adam_step(std::span<double> params, std::span<const double> grads,
                      AdamState& state, double learning_rate) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  if (grads.size() != params.size()) throw UsageError("adam_step: shape mismatch");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw UsageError("adam_step: state shape mismatch");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = kBeta1 * state.m[i] + (1.0 - kBeta1) * grads[i];
    state.v[i] = kBeta2 * state.v[i] + (1.0 - kBeta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + kEps);
  }
}

inline void sgd_step(std::span<double> params, std::span<const double> grads,
                     double learning_rate) {
  if (grads.size() != params.size()) throw UsageError("sgd_step: shape mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= learning_rate * grads[i];
}

struct TrainReport {
  std::vector<double> epoch_losses;
  double final_train_qwk = 0.0;
  double wall_seconds = 0.0;
  TrainConfig config;
};

// Wall-clock time is left out unless asked for so reports stay reproducible.
inline nlohmann::json to_json(const TrainReport& r, bool include_timing = false) {
  nlohmann::json j{{"epoch_losses", r.epoch_losses},
                   {"final_train_qwk", r.final_train_qwk},
                   {"config", to_json(r.config)}};
  if (include_timing) j["wall_seconds"] = r.wall_seconds;
  return j;
}

inline std::vector<int> predict_classes(const NamModel& model, const FeatureMatrix& x) {
  std::vector<int> out(x.rows);
  for (std::size_t n = 0; n < x.rows; ++n) {
    out[n] = static_cast<int>(argmax(nam_forward(model, x.row(n))));
  }
  return out;
}

inline void check_labels(std::span<const int> labels, std::size_t classes) {
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= classes) {
      throw DataError("label " + std::to_string(labels[n]) + " at row " +
                      std::to_string(n + 1) + " out of range [0, " +
                      std::to_string(classes) + ")");
    }
  }
}

inline std::pair<NamModel, TrainReport> train_nam(const FeatureMatrix& features,
                                                  std::span<const int> labels,
                                                  std::size_t num_classes,
                                                  const TrainConfig& config) {
  config.validate();
  if (features.rows == 0) throw DataError("empty training set");
  if (features.rows != labels.size()) {
    throw UsageError("feature rows and label count differ");
  }
  if (num_classes < 2) throw UsageError("need at least two classes");
  check_labels(labels, num_classes);

  const auto start = std::chrono::steady_clock::now();
  Rng init_rng(derive_seed(config.seed, 0));
  Rng shuffle_rng(derive_seed(config.seed, 1));
  Rng dropout_rng(derive_seed(config.seed, 2));

  NamModel model = initialize_nam(features, num_classes,
                                  static_cast<std::size_t>(config.hidden_units), init_rng);
  model.config_fingerprint = fingerprint(config);

  const std::size_t n = features.rows;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> params = get_parameters(model);
  AdamState adam;
  std::vector<double> batch_x;
  std::vector<int> batch_y;

  TrainReport report;
  report.config = config;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < n; begin += bs) {
      const std::size_t end = std::min(n, begin + bs);
      batch_x.clear();
      batch_y.clear();
      for (std::size_t k = begin; k < end; ++k) {
        const auto row = features.row(order[k]);
        batch_x.insert(batch_x.end(), row.begin(), row.end());
        batch_y.push_back(labels[order[k]]);
      }
      const auto lg = loss_and_gradients(model, batch_x, batch_y, config.dropout,
                                         &dropout_rng, config.weight_decay);
      if (!std::isfinite(lg.loss)) {
        throw NumericalError("training loss became non-finite at epoch " +
                             std::to_string(epoch + 1));
      }
      epoch_loss += lg.loss * static_cast<double>(end - begin);
      if (config.optimizer == Optimizer::adam) {
        adam_step(params, lg.gradients, adam, config.learning_rate);
      } else {
        sgd_step(params, lg.gradients, config.learning_rate);
      }
      set_parameters(model, params);
    }
    report.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
  }

  calibrate_centers_in_place(model, features);
  const auto pred = predict_classes(model, features);
  report.final_train_qwk =
      qwk(pred, labels, 0, static_cast<int>(num_classes) - 1);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(model), std::move(report)};
}

}  // namespace namasag
