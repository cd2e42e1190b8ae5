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

// 5x2 cross-validated comparison of two model families on QWK.

#pragma once

#include <array>
#include <cstdio>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "namasag/dataset.hpp"
#include "namasag/evaluation.hpp"
#include "namasag/featurize.hpp"
#include "namasag/logreg.hpp"
#include "namasag/nam.hpp"
#include "namasag/trainer.hpp"

namespace namasag {

class Classifier {
 public:
  virtual ~Classifier() = default;
  // Zero-based class index.
  virtual int predict_class(std::span<const double> x) const = 0;
  virtual nlohmann::json to_json() const = 0;
};

class NamClassifier final : public Classifier {
 public:
  explicit NamClassifier(NamModel m) : model_(std::move(m)) {}
  int predict_class(std::span<const double> x) const override {
    return static_cast<int>(argmax(nam_forward(model_, x)));
  }
  nlohmann::json to_json() const override { return namasag::to_json(model_); }
  const NamModel& model() const { return model_; }

 private:
  NamModel model_;
};

class LogRegClassifier final : public Classifier {
 public:
  explicit LogRegClassifier(LogRegModel m) : model_(std::move(m)) {}
  int predict_class(std::span<const double> x) const override {
    return static_cast<int>(argmax(logreg_logits(model_, x)));
  }
  nlohmann::json to_json() const override { return namasag::to_json(model_); }
  const LogRegModel& model() const { return model_; }

 private:
  LogRegModel model_;
};

struct ModelTrainer {
  using Fit = std::function<std::unique_ptr<Classifier>(
      const FeatureMatrix& train, std::span<const int> labels, std::size_t num_classes,
      std::uint64_t seed)>;
  std::string name;
  Fit fit;
};

// The NAM trainer ignores config.seed and uses the per-cell seed instead.
inline ModelTrainer make_nam_trainer(TrainConfig config, std::string name = "NAM") {
  return {std::move(name),
          [config](const FeatureMatrix& x, std::span<const int> y, std::size_t k,
                   std::uint64_t seed) -> std::unique_ptr<Classifier> {
            auto c = config;
            c.seed = seed;
            return std::make_unique<NamClassifier>(train_nam(x, y, k, c).first);
          }};
}

inline ModelTrainer make_logreg_trainer(double l2_strength, LbfgsOptions options = {},
                                        std::string name = "Log Reg") {
  return {std::move(name),
          [l2_strength, options](const FeatureMatrix& x, std::span<const int> y,
                                 std::size_t k, std::uint64_t) -> std::unique_ptr<Classifier> {
            return std::make_unique<LogRegClassifier>(
                train_logreg(x, y, k, l2_strength, options).model);
          }};
}

struct ComparisonReport {
  std::string model_a;
  std::string model_b;
  std::string dataset = "data";
  std::uint64_t seed = 0;
  // [iteration][direction]; direction 0 trains on fold A and scores fold B.
  std::array<std::array<double, 2>, 5> qwk_a{};
  std::array<std::array<double, 2>, 5> qwk_b{};
  FoldMetrics metrics;
  double t_statistic = 0.0;
  double p_value_one_tailed = 0.5;
  double cohens_d = 0.0;
  nlohmann::json config = nlohmann::json::object();

  static std::vector<double> flatten(const std::array<std::array<double, 2>, 5>& q) {
    std::vector<double> v;
    for (const auto& it : q) v.insert(v.end(), it.begin(), it.end());
    return v;
  }
  static double mean(const std::array<std::array<double, 2>, 5>& q) {
    double s = 0.0;
    for (double v : flatten(q)) s += v;
    return s / 10.0;
  }
  double mean_qwk_a() const { return mean(qwk_a); }
  double mean_qwk_b() const { return mean(qwk_b); }
};

inline nlohmann::json to_json(const ComparisonReport& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t dir = 0; dir < 2; ++dir) {
      folds.push_back({{"iteration", i + 1},
                       {"train_fold", dir == 0 ? "a" : "b"},
                       {"qwk_a", r.qwk_a[i][dir]},
                       {"qwk_b", r.qwk_b[i][dir]},
                       {"difference", r.metrics.differences[i][dir]}});
    }
  }
  return {{"model_a", r.model_a},
          {"model_b", r.model_b},
          {"dataset", r.dataset},
          {"seed", r.seed},
          {"folds", folds},
          {"mean_qwk_a", r.mean_qwk_a()},
          {"mean_qwk_b", r.mean_qwk_b()},
          {"t_statistic", r.t_statistic},
          {"degrees_of_freedom", 5},
          {"p_value_one_tailed", r.p_value_one_tailed},
          {"cohens_d", r.cohens_d},
          {"config", r.config}};
}

// Text rendering laid out as a t-test table followed by a QWK-average table.
inline std::string format_comparison_table(const ComparisonReport& r) {
  char buf[256];
  std::string out;
  out += "5x2 Cross Validation Paired t-test (5 df) and Cohen's D Effect Sizes\n";
  std::snprintf(buf, sizeof(buf), "%-16s %10s %10s %10s\n",
                (r.model_a + " versus:").c_str(), "t(5)", "p-val", "Cohen's D");
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-16s %10s\n", "", r.dataset.c_str());
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-16s %10.4f %10.4f %10.3f\n", r.model_b.c_str(),
                r.t_statistic, r.p_value_one_tailed, r.cohens_d);
  out += buf;
  out += "\n5x2 Cross Validation QWK Averages\n";
  std::snprintf(buf, sizeof(buf), "%-16s %10s\n", "Model", r.dataset.c_str());
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-16s %10.4f\n", r.model_b.c_str(), r.mean_qwk_b());
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-16s %10.4f\n", r.model_a.c_str(), r.mean_qwk_a());
  out += buf;
  return out;
}

// Called once per fitted model; `which` is 0 for trainer A and 1 for B.
using CellObserver = std::function<void(std::size_t iteration, std::size_t direction,
                                        int which, const Classifier& model)>;

// Runs both trainers on the ten train/score cells of the 5x2 plan over
// precomputed features. Rows of `features` align with `corpus.responses`.
// Both trainers receive the same per-cell seed.
inline ComparisonReport compare_on_features(const FeatureMatrix& features,
                                            const Corpus& corpus,
                                            const ModelTrainer& trainer_a,
                                            const ModelTrainer& trainer_b,
                                            std::uint64_t seed,
                                            const CellObserver& observe = {}) {
  if (features.rows != corpus.size()) {
    throw UsageError("feature rows do not match corpus size");
  }
  const FoldPlan plan = make_5x2_folds(corpus, seed);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < corpus.size(); ++i) index[corpus.responses[i].id] = i;
  const auto labels = corpus.labels();
  const auto k = static_cast<std::size_t>(corpus.num_classes());

  auto rows_of = [&](const std::vector<std::string>& ids) {
    std::vector<std::size_t> rows;
    rows.reserve(ids.size());
    for (const auto& id : ids) rows.push_back(index.at(id));
    return rows;
  };
  auto score = [&](const Classifier& model, const FeatureMatrix& x,
                   std::span<const std::size_t> rows) {
    std::vector<int> truth, pred;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      truth.push_back(corpus.responses[rows[r]].rating);
      pred.push_back(model.predict_class(x.row(r)) + corpus.rating_min);
    }
    return qwk(pred, truth, corpus.rating_min, corpus.rating_max);
  };

  ComparisonReport report;
  report.model_a = trainer_a.name;
  report.model_b = trainer_b.name;
  report.seed = seed;
  for (std::size_t it = 0; it < FoldPlan::kIterations; ++it) {
    const auto rows_a = rows_of(plan.iterations[it].fold_a);
    const auto rows_b = rows_of(plan.iterations[it].fold_b);
    for (std::size_t dir = 0; dir < 2; ++dir) {
      const auto& train_rows = dir == 0 ? rows_a : rows_b;
      const auto& test_rows = dir == 0 ? rows_b : rows_a;
      const FeatureMatrix train_x = features.select_rows(train_rows);
      const FeatureMatrix test_x = features.select_rows(test_rows);
      std::vector<int> train_y;
      for (auto r : train_rows) train_y.push_back(labels[r]);
      const std::uint64_t cell_seed = derive_seed(derive_seed(seed, 100 + it), dir);
      const auto model_a = trainer_a.fit(train_x, train_y, k, cell_seed);
      const auto model_b = trainer_b.fit(train_x, train_y, k, cell_seed);
      if (observe) {
        observe(it, dir, 0, *model_a);
        observe(it, dir, 1, *model_b);
      }
      report.qwk_a[it][dir] = score(*model_a, test_x, test_rows);
      report.qwk_b[it][dir] = score(*model_b, test_x, test_rows);
      report.metrics.differences[it][dir] = report.qwk_a[it][dir] - report.qwk_b[it][dir];
    }
  }
  const auto t = t_test_5x2(report.metrics);
  report.t_statistic = t.t_statistic;
  report.p_value_one_tailed = t.p_value_one_tailed;
  const auto all_a = ComparisonReport::flatten(report.qwk_a);
  const auto all_b = ComparisonReport::flatten(report.qwk_b);
  report.cohens_d = cohens_d(all_a, all_b);
  return report;
}

inline ComparisonReport run_5x2_comparison(const Corpus& corpus,
                                           std::span<const RubricPhrase> phrases,
                                           const EmbeddingProvider& provider,
                                           const ModelTrainer& trainer_a,
                                           const ModelTrainer& trainer_b,
                                           std::uint64_t seed, NgramRange range = {}) {
  const auto features = featurize_corpus(corpus, phrases, provider, range);
  return compare_on_features(features, corpus, trainer_a, trainer_b, seed);
}

}  // namespace namasag
