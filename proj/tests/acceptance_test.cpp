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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <sys/wait.h>

#include <boost/math/distributions/students_t.hpp>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "namasag/comparison.hpp"
#include "namasag/report.hpp"
#include "test_support.hpp"

namespace namasag {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Collects failure notes; a criterion passes when no check failed.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    failed_ = failed_ || !ok;
  }
  bool ok() const { return !failed_; }
  std::string notes() const {
    std::string s;
    for (const auto& f : failures_) s += (s.empty() ? "" : "; ") + f;
    return s;
  }

 private:
  bool failed_ = false;
  std::vector<std::string> failures_;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------

std::string criterion_qwk(Checks& c) {
  const auto t0 = Clock::now();
  const std::vector<int> perfect{1, 2, 3, 4, 5};
  c.expect(qwk(perfect, perfect, 1, 5) == 1.0, "perfect agreement is not exactly 1");
  const std::vector<int> a{1, 2, 3, 1}, b{1, 2, 3, 3};
  const double hand = qwk(a, b, 1, 3);
  c.expect(std::abs(hand - 0.3846153846) <= 1e-9, "hand case gave " + num(hand));
  Rng rng(2718);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int k = 2 + static_cast<int>(rng.below(5));
    const std::size_t n = 2 + rng.below(60);
    std::vector<int> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = 1 + static_cast<int>(rng.below(k));
      y[i] = rng.uniform() < 0.4 ? x[i] : 1 + static_cast<int>(rng.below(k));
    }
    const double ref = testing::qwk_reference(x, y, 1, k);
    if (!std::isfinite(ref)) continue;
    worst = std::max(worst, std::abs(qwk(x, y, 1, k) - ref));
  }
  c.expect(worst <= 1e-12, "brute-force gap " + num(worst));
  const double secs = seconds_since(t0);
  c.expect(secs < 1.0, "runtime " + num(secs) + " s");
  return "hand=" + num(hand) + " max_gap=" + num(worst) + " time=" + num(secs) + "s";
}

std::string criterion_student_t(Checks& c) {
  const double p1 = student_t_upper_tail(2.015, 5);
  const double p2 = student_t_upper_tail(2.1732, 5);
  c.expect(std::abs(p1 - 0.05) <= 5e-4, "p(2.015)=" + num(p1));
  c.expect(std::abs(p2 - 0.0409) <= 1e-3, "p(2.1732)=" + num(p2));
  double worst = 0.0;
  for (int df = 1; df <= 30; ++df) {
    const boost::math::students_t dist(df);
    for (double t = -20.0; t <= 20.0; t += 0.25) {
      const double ref = boost::math::cdf(boost::math::complement(dist, t));
      worst = std::max(worst, std::abs(student_t_upper_tail(t, df) - ref));
    }
  }
  c.expect(worst < 1e-8, "error vs reference " + num(worst));
  return "p(2.015,5)=" + num(p1) + " p(2.1732,5)=" + num(p2) + " max_err=" + num(worst);
}

std::string criterion_gradients(Checks& c) {
  const auto t0 = Clock::now();
  Rng rng(31415);
  double worst = 0.0;
  std::size_t checked = 0;
  for (int model = 0; model < 20; ++model) {
    const std::size_t d = 1 + rng.below(4), u = 1 + rng.below(8), k = 2 + rng.below(4);
    auto m = testing::random_nam(d, u, k, rng);
    const std::size_t b = 8;
    std::vector<double> x(b * d);
    for (double& v : x) v = rng.uniform();
    std::vector<int> y(b);
    for (int& v : y) v = static_cast<int>(rng.below(k));
    if (!testing::move_away_from_kinks(m, x, d, 1e-3, rng)) {
      c.expect(false, "could not sample away from kinks");
      continue;
    }
    const auto analytic = loss_and_gradients(m, x, y, 0.0, nullptr).gradients;
    const auto fd = testing::central_differences(
        [&](std::span<const double> p) {
          NamModel q = m;
          set_parameters(q, p);
          return loss_and_gradients(q, x, y, 0.0, nullptr).loss;
        },
        get_parameters(m), 1e-5);
    for (std::size_t i = 0; i < fd.size(); ++i) {
      worst = std::max(worst, testing::relative_error(analytic[i], fd[i]));
      ++checked;
    }
  }
  c.expect(worst < 1e-4, "max relative error " + num(worst));
  const double secs = seconds_since(t0);
  c.expect(secs < 30.0, "runtime " + num(secs) + " s");
  return "params=" + std::to_string(checked) + " max_rel_err=" + num(worst) +
         " time=" + num(secs) + "s";
}

std::string criterion_additivity(Checks& c) {
  Rng rng(1618);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = 1 + rng.below(8), k = 2 + rng.below(4);
    auto m = testing::random_nam(d, 1 + rng.below(8), k, rng);
    FeatureMatrix train(20, d);
    for (double& v : train.values) v = rng.uniform();
    calibrate_centers_in_place(m, train);
    std::vector<double> x(d);
    for (double& v : x) v = rng.uniform(-0.25, 1.25);
    const auto br = contributions(m, x);
    for (std::size_t cls = 0; cls < k; ++cls) {
      double s = br.bias_term[cls];
      for (std::size_t i = 0; i < d; ++i) s += br.per_feature[i * k + cls] + m.center(i, cls);
      worst = std::max(worst, std::abs(s - br.logits[cls]));
    }
  }
  c.expect(worst <= 1e-9, "max gap " + num(worst));
  return "inputs=1000 max_gap=" + num(worst);
}

std::string criterion_centering(Checks& c) {
  Rng rng(4669);
  double worst = 0.0;
  for (int t = 0; t < 25; ++t) {
    const std::size_t d = 1 + rng.below(6), k = 2 + rng.below(4);
    auto m = testing::random_nam(d, 1 + rng.below(8), k, rng);
    FeatureMatrix train(10 + rng.below(200), d);
    for (double& v : train.values) v = rng.uniform();
    calibrate_centers_in_place(m, train);
    std::vector<double> mean(d * k, 0.0);
    for (std::size_t r = 0; r < train.rows; ++r) {
      const auto br = contributions(m, train.row(r));
      for (std::size_t q = 0; q < mean.size(); ++q) mean[q] += br.per_feature[q];
    }
    for (double v : mean) worst = std::max(worst, std::abs(v / static_cast<double>(train.rows)));
  }
  c.expect(worst <= 1e-9, "max centered mean " + num(worst));
  return "models=25 max_mean=" + num(worst);
}

std::string criterion_synthetic(Checks& c) {
  const auto t0 = Clock::now();
  const auto s = testing::make_synthetic(1200, 10, 5, testing::GroundTruth::linear, 0.25, 42);
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t i = 0; i < 1200; ++i) (i < 960 ? train_rows : test_rows).push_back(i);
  const auto xtr = s.features.select_rows(train_rows);
  const auto xte = s.features.select_rows(test_rows);
  std::vector<int> ytr, yte;
  for (auto i : train_rows) ytr.push_back(s.labels[i]);
  for (auto i : test_rows) yte.push_back(s.labels[i]);

  TrainConfig config;  // 120 epochs, batch 64, lr 0.002, dropout 0.15
  config.seed = 1;
  const auto nam = train_nam(xtr, ytr, 5, config).first;
  const double nam_qwk = qwk(predict_classes(nam, xte), yte, 0, 4);
  c.expect(nam_qwk >= 0.80, "NAM held-out QWK " + num(nam_qwk));

  auto lr_qwk = [&](double l2) {
    const auto fit = train_logreg(xtr, ytr, 5, l2);
    std::vector<int> pred;
    for (std::size_t r = 0; r < xte.rows; ++r) {
      pred.push_back(static_cast<int>(argmax(logreg_logits(fit.model, xte.row(r)))));
    }
    return qwk(pred, yte, 0, 4);
  };
  // Penalty 1/N on the mean loss equals the usual library default C = 1 on
  // the summed loss.
  const double lr_library = lr_qwk(1.0 / static_cast<double>(xtr.rows));
  const double lr_unit = lr_qwk(1.0);
  c.expect(lr_library >= 0.60, "LR held-out QWK " + num(lr_library));

  const auto nl = testing::make_synthetic(1200, 10, 5, testing::GroundTruth::nonlinear, 0.25, 43);
  const auto cmp = compare_on_features(nl.features, nl.corpus, make_nam_trainer(config),
                                       make_logreg_trainer(1.0 / 600.0), 7);
  c.expect(cmp.t_statistic > 0.0, "nonlinear t " + num(cmp.t_statistic));
  const double secs = seconds_since(t0);
  c.expect(secs < 300.0, "runtime " + num(secs) + " s");
  return "nam_qwk=" + num(nam_qwk) + " lr_qwk(l2=1/N)=" + num(lr_library) +
         " [lr_qwk(l2=1)=" + num(lr_unit) + "] nonlinear t=" + num(cmp.t_statistic) +
         " p=" + num(cmp.p_value_one_tailed) + " qwk nam/lr=" + num(cmp.mean_qwk_a()) + "/" +
         num(cmp.mean_qwk_b()) + " time=" + num(secs) + "s";
}

double rosen(std::span<const double> x, std::span<double> g) {
  const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
  g[0] = -2.0 * a - 400.0 * x[0] * b;
  g[1] = 200.0 * b;
  return a * a + 100.0 * b * b;
}

std::string criterion_lbfgs(Checks& c) {
  const auto q1 = lbfgs_minimize(
      [](std::span<const double> x, std::span<double> g) {
        g[0] = 2.0 * (x[0] - 3.0);
        return (x[0] - 3.0) * (x[0] - 3.0);
      },
      std::vector<double>{0.0});
  c.expect(std::abs(q1.x[0] - 3.0) <= 1e-6, "1-D quadratic x=" + num(q1.x[0]));
  const auto q2 = lbfgs_minimize(
      [](std::span<const double> x, std::span<double> g) {
        g[0] = 2.0 * x[0];
        g[1] = 20.0 * x[1];
        return x[0] * x[0] + 10.0 * x[1] * x[1];
      },
      std::vector<double>{1.0, 1.0});
  c.expect(std::abs(q2.x[0]) <= 1e-6 && std::abs(q2.x[1]) <= 1e-6, "anisotropic quadratic");
  const auto r = lbfgs_minimize(rosen, std::vector<double>{-1.2, 1.0});
  std::vector<double> g(2);
  const double rv = rosen(r.x, g);
  c.expect(std::abs(r.x[0] - 1.0) <= 1e-4 && std::abs(r.x[1] - 1.0) <= 1e-4,
           "Rosenbrock x=(" + num(r.x[0]) + "," + num(r.x[1]) + ")");
  c.expect(rv < 1e-8, "Rosenbrock value " + num(rv));

  Rng rng(99);
  FeatureMatrix fm(200, 6);
  for (double& v : fm.values) v = rng.uniform();
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    y[i] = static_cast<int>(std::min<std::size_t>(3, static_cast<std::size_t>(
                                                         (fm.at(i, 0) + fm.at(i, 1)) * 2.0)));
  }
  const auto fit = train_logreg(fm, y, 4, 0.01);
  c.expect(fit.optimizer.gradient_norm < 1e-5, "logreg gradient norm " +
                                                   num(fit.optimizer.gradient_norm));
  std::vector<double> start(4 * 7);
  for (double& v : start) v = rng.normal(0.0, 2.0);
  const auto fit2 = train_logreg(fm, y, 4, 0.01, {}, start);
  const double gap = std::abs(fit.optimizer.value - fit2.optimizer.value);
  c.expect(gap <= 1e-8, "restart objective gap " + num(gap));
  return "rosenbrock_iters=" + std::to_string(r.iterations) + " value=" + num(rv) +
         " logreg_grad=" + num(fit.optimizer.gradient_norm) + " restart_gap=" + num(gap);
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_file(e.path().string());
  }
  return files;
}

int run_compare(const fs::path& out) {
  const std::string cmd = std::string("\"") + NAMASAG_CLI + "\" compare --corpus \"" +
                          testing::data_path("synthetic_ki.csv") + "\" --phrases \"" +
                          testing::data_path("ki_phrases.json") + "\" --seed 1 --out \"" +
                          out.string() + "\" >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string criterion_determinism(Checks& c) {
  const auto out = fs::temp_directory_path() / "namasag_acceptance" / "compare";
  fs::remove_all(out);
  c.expect(run_compare(out) == 0, "first compare run failed");
  const auto first = snapshot(out);
  fs::remove_all(out);
  c.expect(run_compare(out) == 0, "second compare run failed");
  const auto second = snapshot(out);
  std::size_t models = 0;
  for (const auto& [name, bytes] : first) models += name.rfind("models", 0) == 0;
  c.expect(first.count("manifest.json") && first.count("comparison.json") &&
               first.count("comparison.txt") && models == 20,
           "missing artifacts");
  c.expect(first == second, "artifacts differ between runs");
  for (const auto& [name, bytes] : first) {
    auto it = second.find(name);
    if (it == second.end() || it->second != bytes) c.expect(false, name + " differs");
  }
  return "files=" + std::to_string(first.size()) + " models=" + std::to_string(models);
}

std::string criterion_featurization(Checks& c) {
  const auto phrases = load_phrases(testing::data_path("ki_phrases.json"));
  std::size_t n_phrase = 0, n_keyword = 0;
  for (const auto& p : phrases) (p.kind == PhraseKind::phrase ? n_phrase : n_keyword)++;
  const FallbackEmbedder provider;
  double worst_verbatim = 0.0;
  for (const auto& p : phrases) {
    const double v = phrase_feature("well I think " + p.text + " when you tap it", p, provider);
    worst_verbatim = std::max(worst_verbatim, std::abs(v - 1.0));
  }
  c.expect(worst_verbatim <= 1e-9, "verbatim gap " + num(worst_verbatim));
  const auto corpus = load_corpus(testing::data_path("synthetic_ki.csv"), 1, 5);
  const auto fm = featurize_corpus(corpus, phrases, provider);
  double lo = 1.0, hi = 0.0;
  for (double v : fm.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  c.expect(lo >= 0.0 && hi <= 1.0, "range [" + num(lo) + ", " + num(hi) + "]");
  c.expect(fm.cols == 62 && n_phrase == 34 && n_keyword == 28,
           "columns " + std::to_string(fm.cols));
  return "columns=" + std::to_string(fm.cols) + " (" + std::to_string(n_phrase) + "+" +
         std::to_string(n_keyword) + ") range=[" + num(lo) + "," + num(hi) +
         "] verbatim_gap=" + num(worst_verbatim);
}

namespace ptree = boost::property_tree;

void collect(const ptree::ptree& node, const std::string& tag,
             std::vector<const ptree::ptree*>& out) {
  for (const auto& [name, child] : node) {
    if (name == tag) out.push_back(&child);
    if (name != "<xmlattr>") collect(child, tag, out);
  }
}

std::string criterion_explanations(Checks& c) {
  const auto phrases = load_phrases(testing::data_path("ki_phrases.json"));
  const auto corpus = load_corpus(testing::data_path("synthetic_ki.csv"), 1, 5);
  const auto fm = featurize_corpus(corpus, phrases, FallbackEmbedder{});
  TrainConfig config;
  config.seed = 5;
  const auto model = train_nam(fm, corpus.labels(), 5, config).first;
  const auto shapes = export_shapes(model, fm);
  std::size_t files = 0, mismatches = 0;
  for (const auto& e : shapes) {
    for (const auto& subset : {extreme_classes(5), all_classes(5)}) {
      std::istringstream in(render_shape_svg(e, subset));
      ptree::ptree tree;
      try {
        ptree::read_xml(in, tree);
      } catch (const std::exception& ex) {
        c.expect(false, e.feature + ": XML parse failed");
        continue;
      }
      ++files;
      std::vector<const ptree::ptree*> lines;
      collect(tree, "polyline", lines);
      c.expect(lines.size() == subset.size(), e.feature + ": polyline count");
      const auto expected = shape_function(model, e.feature_index, e.grid);
      for (std::size_t i = 0; i < lines.size() && i < subset.size(); ++i) {
        std::istringstream vs(lines[i]->get<std::string>("<xmlattr>.data-values"));
        std::string tok;
        std::size_t g = 0;
        while (vs >> tok) {
          if (g >= expected.size() || parse_double(tok) != expected[g][subset[i]]) ++mismatches;
          ++g;
        }
        if (g != expected.size()) ++mismatches;
      }
    }
  }
  c.expect(mismatches == 0, std::to_string(mismatches) + " curve values differ");
  const auto importance = make_importance_export(model.feature_names, feature_importance(model, fm));
  std::istringstream in(render_importance_svg(importance));
  ptree::ptree tree;
  ptree::read_xml(in, tree);
  std::vector<const ptree::ptree*> rects;
  collect(tree, "rect", rects);
  std::size_t bars = 0;
  for (const auto* r : rects) bars += r->get<std::string>("<xmlattr>.class", "") == "bar";
  c.expect(bars == 40, "importance bars " + std::to_string(bars));
  return "svgs=" + std::to_string(files) + " value_mismatches=" + std::to_string(mismatches) +
         " importance_bars=" + std::to_string(bars);
}

}  // namespace
}  // namespace namasag

int main() {
  using namasag::Checks;
  struct Criterion {
    int id;
    const char* name;
    std::function<std::string(Checks&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "QWK oracle suite", namasag::criterion_qwk},
      {2, "Student-t consistency", namasag::criterion_student_t},
      {3, "Gradient check", namasag::criterion_gradients},
      {4, "Additivity identity", namasag::criterion_additivity},
      {5, "Centering", namasag::criterion_centering},
      {6, "Synthetic end-to-end", namasag::criterion_synthetic},
      {7, "L-BFGS suite", namasag::criterion_lbfgs},
      {8, "Determinism", namasag::criterion_determinism},
      {9, "Featurization contracts", namasag::criterion_featurization},
      {10, "Explanation artifacts", namasag::criterion_explanations},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Checks checks;
    std::string detail;
    try {
      detail = cr.run(checks);
    } catch (const std::exception& e) {
      checks.expect(false, std::string("exception: ") + e.what());
    }
    const bool ok = checks.ok();
    failed += !ok;
    std::printf("[%s] %2d %-24s %s%s%s\n", ok ? "PASS" : "FAIL", cr.id, cr.name, detail.c_str(),
                ok ? "" : " | ", ok ? "" : checks.notes().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
