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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "namasag/featurize.hpp"
#include "namasag/nam.hpp"
#include "test_support.hpp"

namespace namasag {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::data_path;

struct RunResult {
  int code = -1;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / "namasag_cli_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) { return read_file(p.string()); }

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

RunResult run_cli(const std::string& args, const fs::path& err_file) {
  const std::string cmd =
      std::string("\"") + NAMASAG_CLI + "\" " + args + " >/dev/null 2>\"" + err_file.string() + "\"";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = fs::exists(err_file) ? slurp(err_file) : "";
  return r;
}

std::string data_flags() {
  return "--corpus \"" + data_path("synthetic_ki.csv") + "\" --phrases \"" +
         data_path("ki_phrases.json") + "\"";
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

TEST(Cli, FeaturizeWritesManifestThatVerifies) {
  const auto dir = scratch("featurize");
  const auto out = dir / "out";
  auto r = run_cli("featurize " + data_flags() + " --seed 3 --out \"" + out.string() + "\"",
                   dir / "err.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto fm = parse_feature_csv(slurp(out / "features.csv"));
  EXPECT_EQ(fm.cols, 62u);
  EXPECT_EQ(fm.rows, 240u);
  const auto manifest = json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["command"], "featurize");
  EXPECT_EQ(manifest["seed"], 3);
  EXPECT_TRUE(manifest["artifacts"].contains("features.csv"));
  EXPECT_TRUE(manifest["artifacts"].contains("cache_misses.json"));

  r = run_cli("--verify-manifest \"" + out.string() + "\"", dir / "err2.txt");
  EXPECT_EQ(r.code, 0) << r.err;
  spit(out / "features.csv", slurp(out / "features.csv") + "tampered\n");
  r = run_cli("--verify-manifest \"" + out.string() + "\"", dir / "err3.txt");
  EXPECT_EQ(r.code, 3);
}

TEST(Cli, ExitCodesByErrorKind) {
  const auto dir = scratch("codes");
  auto r = run_cli("train --no-such-flag", dir / "e1.txt");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("kind=usage code=2"), std::string::npos) << r.err;
  EXPECT_EQ(count_occurrences(r.err, "\n"), 1u);

  r = run_cli("featurize --corpus /definitely/missing.csv --phrases \"" +
                  data_path("ki_phrases.json") + "\" --out \"" + (dir / "o").string() + "\"",
              dir / "e2.txt");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("kind=data code=3"), std::string::npos) << r.err;

  r = run_cli("train --model nam " + data_flags() + " --epochs 1 --learning-rate 1e300 --out \"" +
                  (dir / "o2").string() + "\"",
              dir / "e3.txt");
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("kind=numerical code=4"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "o2" / "model.json"));
  EXPECT_FALSE(fs::exists(dir / "o2" / "manifest.json"));

  r = run_cli("train --model nam " + data_flags() + " --epochs 0 --out \"" +
                  (dir / "o3").string() + "\"",
              dir / "e4.txt");
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, FlagsOverrideConfigFile) {
  const auto dir = scratch("config");
  const json cfg{{"corpus", data_path("synthetic_ki.csv")},
                 {"phrases", data_path("ki_phrases.json")},
                 {"seed", 1},
                 {"l2_strength", 0.5},
                 {"train", {{"epochs", 2}, {"batch_size", 32}}}};
  spit(dir / "config.json", cfg.dump());
  const auto out = dir / "out";
  const auto r = run_cli("train --model nam --config \"" + (dir / "config.json").string() +
                             "\" --seed 2 --batch-size 16 --out \"" + out.string() + "\"",
                         dir / "err.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(m["seed"], 2);
  EXPECT_EQ(m["config"]["train"]["epochs"], 2);
  EXPECT_EQ(m["config"]["train"]["batch_size"], 16);
  EXPECT_EQ(m["config"]["l2_strength"], 0.5);
  const auto report = json::parse(slurp(out / "train_report.json"));
  EXPECT_EQ(report["epoch_losses"].size(), 2u);
}

TEST(Cli, TrainExplainArtifacts) {
  const auto dir = scratch("explain");
  const auto model_dir = dir / "model";
  auto r = run_cli("train --model nam " + data_flags() + " --epochs 3 --out \"" +
                       model_dir.string() + "\"",
                   dir / "e1.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto model = json::parse(slurp(model_dir / "model.json"));
  EXPECT_EQ(model["type"], "nam");
  EXPECT_EQ(model["rating_min"], 1);
  EXPECT_EQ(model["rating_max"], 5);

  const auto out = dir / "explain";
  r = run_cli("explain " + data_flags() + " --model-file \"" + (model_dir / "model.json").string() +
                  "\" --out \"" + out.string() + "\"",
              dir / "e2.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_occurrences(slurp(out / "importance.svg"), "class=\"bar\""), 40u);
  std::size_t svgs = 0;
  for (const auto& entry : fs::directory_iterator(out / "shapes")) {
    ++svgs;
    EXPECT_EQ(count_occurrences(slurp(entry.path()), "<polyline"), 2u) << entry.path();
  }
  EXPECT_EQ(svgs, 62u);
  EXPECT_EQ(count_occurrences(slurp(out / "importance.csv"), "\n"), 63u);

  const auto all = dir / "explain_all";
  r = run_cli("explain " + data_flags() + " --model-file \"" + (model_dir / "model.json").string() +
                  "\" --all-classes --top-n 10 --out \"" + all.string() + "\"",
              dir / "e3.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_occurrences(slurp(all / "importance.svg"), "class=\"bar\""), 10u);
  EXPECT_EQ(count_occurrences(slurp(all / "shapes" / "000_i_don_t_know.svg"), "<polyline"), 5u);
}

TEST(Cli, ExplainRejectsLogRegWithoutLeavingOutputs) {
  const auto dir = scratch("explain_lr");
  const auto model_dir = dir / "model";
  auto r = run_cli("train --model logreg " + data_flags() + " --out \"" + model_dir.string() + "\"",
                   dir / "e1.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = dir / "explain";
  r = run_cli("explain " + data_flags() + " --model-file \"" + (model_dir / "model.json").string() +
                  "\" --out \"" + out.string() + "\"",
              dir / "e2.txt");
  EXPECT_EQ(r.code, 3);
  EXPECT_FALSE(fs::exists(out / "manifest.json"));
}

TEST(Cli, FailedRunRemovesPartialOutputs) {
  const auto dir = scratch("partial");
  const auto model_dir = dir / "model";
  auto r = run_cli("train --model nam " + data_flags() + " --epochs 1 --out \"" +
                       model_dir.string() + "\"",
                   dir / "e1.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  // A regular file where the shapes directory should go makes the per-feature
  // writes fail after the importance files are already on disk.
  const auto out = dir / "explain";
  fs::create_directories(out);
  spit(out / "shapes", "in the way");
  r = run_cli("explain " + data_flags() + " --model-file \"" + (model_dir / "model.json").string() +
                  "\" --out \"" + out.string() + "\"",
              dir / "e2.txt");
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_FALSE(fs::exists(out / "importance.csv"));
  EXPECT_FALSE(fs::exists(out / "importance.svg"));
  EXPECT_FALSE(fs::exists(out / "shapes.csv"));
  EXPECT_FALSE(fs::exists(out / "manifest.json"));
}

TEST(Cli, PredictRanksDominantPhraseFirst) {
  // Hand-built NAM on the fixture features: only "water has more mass" carries
  // weight, pushing toward the top rating in proportion to its similarity.
  const auto phrases = load_phrases(data_path("ki_phrases.json"));
  const auto corpus = load_corpus(data_path("synthetic_ki.csv"), 1, 5);
  const auto fm = featurize_corpus(corpus, phrases, FallbackEmbedder{});
  std::size_t target = phrases.size();
  for (std::size_t j = 0; j < phrases.size(); ++j) {
    if (phrases[j].text == "water has more mass") target = j;
  }
  ASSERT_LT(target, phrases.size());
  NamModel m = NamModel::zeros(fm.cols, 5, 1);
  m.feature_names = fm.feature_names;
  m.nets[target].head = {-5.0, -5.0, -5.0, -5.0, 20.0};
  calibrate_centers_in_place(m, fm);
  auto doc = to_json(m);
  doc["rating_min"] = 1;
  doc["rating_max"] = 5;

  const auto dir = scratch("predict");
  spit(dir / "model.json", doc.dump());
  spit(dir / "input.csv", "id,text\nq1,\"The pitch is lower because water has more mass.\"\nq2,idk\n");
  const auto out = dir / "out";
  const auto r = run_cli("predict --phrases \"" + data_path("ki_phrases.json") +
                             "\" --model-file \"" + (dir / "model.json").string() +
                             "\" --input \"" + (dir / "input.csv").string() + "\" --top-k 5 --out \"" +
                             out.string() + "\"",
                         dir / "err.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto preds = parse_csv(slurp(out / "predictions.csv"));
  ASSERT_EQ(preds.size(), 3u);
  EXPECT_EQ(preds[0].fields[1], "predicted_rating");
  EXPECT_EQ(preds[1].fields[0], "q1");
  EXPECT_EQ(preds[1].fields[1], "5");
  double total = 0.0;
  for (std::size_t c = 2; c < preds[1].fields.size(); ++c) total += parse_double(preds[1].fields[c]);
  EXPECT_NEAR(total, 1.0, 1e-12);

  const auto contrib = parse_csv(slurp(out / "contributions.csv"));
  ASSERT_EQ(contrib.size(), 1u + 2u * 5u);
  bool seen_in_top_k = false;
  for (std::size_t i = 1; i <= 5; ++i) {
    EXPECT_EQ(contrib[i].fields[0], "q1");
    seen_in_top_k = seen_in_top_k || contrib[i].fields[2] == "water has more mass";
  }
  EXPECT_TRUE(seen_in_top_k);
  EXPECT_EQ(contrib[1].fields[2], "water has more mass");
  EXPECT_EQ(contrib[1].fields[1], "1");
}

TEST(Cli, TrainGridPicksBestPointAndRefits) {
  const auto dir = scratch("grid");
  const auto out = dir / "out";
  spit(dir / "grid.json", R"({"l2_strength": [1000.0, 0.01]})");
  auto r = run_cli("train --model logreg " + data_flags() + " --seed 2 --grid \"" +
                       (dir / "grid.json").string() + "\" --out \"" + out.string() + "\"",
                   dir / "err.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto results = json::parse(slurp(out / "grid_results.json"));
  ASSERT_EQ(results.size(), 2u);
  EXPECT_GT(results[1]["mean_qwk"].get<double>(), results[0]["mean_qwk"].get<double>());
  const auto report = json::parse(slurp(out / "train_report.json"));
  EXPECT_DOUBLE_EQ(report["l2_strength"].get<double>(), 0.01);
  EXPECT_EQ(run_cli("--verify-manifest \"" + out.string() + "\"", dir / "v.txt").code, 0);

  spit(dir / "bad.json", R"({"seed": [1, 2]})");
  EXPECT_EQ(run_cli("train " + data_flags() + " --grid \"" + (dir / "bad.json").string() +
                        "\" --out \"" + (dir / "bad").string() + "\"",
                    dir / "err2.txt")
                .code,
            2);
}

TEST(Cli, CompareWritesReportsAndModels) {
  const auto dir = scratch("compare");
  const auto out = dir / "out";
  const auto r = run_cli("compare " + data_flags() + " --epochs 2 --seed 4 --dataset KI --out \"" +
                             out.string() + "\"",
                         dir / "err.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(slurp(out / "comparison.json"));
  EXPECT_EQ(report["folds"].size(), 10u);
  EXPECT_EQ(report["dataset"], "KI");
  EXPECT_NE(slurp(out / "comparison.txt").find("QWK Averages"), std::string::npos);
  std::size_t models = 0;
  for (const auto& e : fs::directory_iterator(out / "models")) models += e.is_regular_file();
  EXPECT_EQ(models, 20u);
  EXPECT_EQ(json::parse(slurp(out / "models" / "nam_iter1_traina.json"))["type"], "nam");
  EXPECT_EQ(json::parse(slurp(out / "models" / "logreg_iter5_trainb.json"))["type"], "logreg");
  const auto folds = fold_plan_from_json(json::parse(slurp(out / "folds.json")));
  EXPECT_EQ(folds.seed, 4u);
  EXPECT_EQ(run_cli("--verify-manifest \"" + out.string() + "\"", dir / "err2.txt").code, 0);
}

}  // namespace
}  // namespace namasag
