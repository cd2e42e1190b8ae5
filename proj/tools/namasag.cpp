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

// namasag command-line tool.
//
//   namasag featurize --corpus C --phrases P [--embedding-cache E] --out DIR
//   namasag train     --model nam|logreg ...
//   namasag compare   ...
//   namasag explain   --model-file M ...
//   namasag predict   --model-file M --input CSV ...
//   namasag --verify-manifest DIR
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

#include <openssl/evp.h>

#include <array>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "namasag/common.hpp"
#include "namasag/comparison.hpp"
#include "namasag/dataset.hpp"
#include "namasag/featurize.hpp"
#include "namasag/logreg.hpp"
#include "namasag/nam.hpp"
#include "namasag/report.hpp"
#include "namasag/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace namasag::cli {

// Flag values; unset optionals fall back to the config file, then defaults.
struct Flags {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> corpus;
  std::optional<std::string> phrases;
  std::optional<std::string> embedding_cache;
  std::optional<int> rating_min;
  std::optional<int> rating_max;
  std::optional<std::string> dataset;
  std::optional<double> l2_strength;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
  std::optional<double> dropout;
  std::optional<double> weight_decay;
  std::optional<std::string> optimizer;
  std::optional<int> hidden_units;
};

struct RunConfig {
  std::string corpus;
  std::string phrases;
  std::string embedding_cache;  // empty: fallback embedder only
  int rating_min = 1;
  int rating_max = 5;
  std::string dataset = "data";
  TrainConfig train;
  double l2_strength = 1.0;
  std::uint64_t seed = 0;
  std::string out = "out";
};

json to_json(const RunConfig& c) {
  return {{"corpus", c.corpus},
          {"phrases", c.phrases},
          {"embedding_cache", c.embedding_cache},
          {"rating_min", c.rating_min},
          {"rating_max", c.rating_max},
          {"dataset", c.dataset},
          {"train", namasag::to_json(c.train)},
          {"l2_strength", c.l2_strength},
          {"seed", c.seed},
          {"out", c.out}};
}

RunConfig resolve(const Flags& f) {
  RunConfig c;
  if (f.config_path) {
    json j;
    try {
      j = json::parse(read_file(*f.config_path));
    } catch (const json::exception& e) {
      throw UsageError("config file: " + std::string(e.what()));
    }
    try {
      c.corpus = j.value("corpus", c.corpus);
      c.phrases = j.value("phrases", c.phrases);
      c.embedding_cache = j.value("embedding_cache", c.embedding_cache);
      c.rating_min = j.value("rating_min", c.rating_min);
      c.rating_max = j.value("rating_max", c.rating_max);
      c.dataset = j.value("dataset", c.dataset);
      c.l2_strength = j.value("l2_strength", c.l2_strength);
      c.seed = j.value("seed", c.seed);
      c.out = j.value("out", c.out);
      if (j.contains("train")) c.train = train_config_from_json(j["train"], c.train);
    } catch (const json::exception& e) {
      throw UsageError("config file: " + std::string(e.what()));
    }
  }
  if (f.corpus) c.corpus = *f.corpus;
  if (f.phrases) c.phrases = *f.phrases;
  if (f.embedding_cache) c.embedding_cache = *f.embedding_cache;
  if (f.rating_min) c.rating_min = *f.rating_min;
  if (f.rating_max) c.rating_max = *f.rating_max;
  if (f.dataset) c.dataset = *f.dataset;
  if (f.l2_strength) c.l2_strength = *f.l2_strength;
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.out = *f.out;
  if (f.epochs) c.train.epochs = *f.epochs;
  if (f.batch_size) c.train.batch_size = *f.batch_size;
  if (f.learning_rate) c.train.learning_rate = *f.learning_rate;
  if (f.dropout) c.train.dropout = *f.dropout;
  if (f.weight_decay) c.train.weight_decay = *f.weight_decay;
  if (f.hidden_units) c.train.hidden_units = *f.hidden_units;
  if (f.optimizer) c.train = train_config_from_json({{"optimizer", *f.optimizer}}, c.train);
  c.train.seed = c.seed;
  c.train.validate();
  if (!(c.l2_strength >= 0.0)) throw UsageError("l2_strength must be >= 0");
  return c;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw DataError("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

// Writes artifacts under one directory, remembers their hashes, and deletes
// everything it wrote unless commit() is reached.
class OutputDir {
 public:
  explicit OutputDir(std::string root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) throw DataError("cannot create output directory '" + root_ + "': " + ec.message());
  }
  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;

  ~OutputDir() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& rel : written_) fs::remove(fs::path(root_) / rel, ec);
    fs::remove(fs::path(root_) / "manifest.json", ec);
  }

  void write(const std::string& rel, std::string_view content) {
    const auto path = fs::path(root_) / rel;
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    written_.push_back(rel);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write failed for '" + path.string() + "'");
    hashes_[rel] = sha256_hex(content);
  }

  void commit(const std::string& command, const RunConfig& config, json extra = json::object()) {
    json m;
    m["command"] = command;
    m["seed"] = config.seed;
    m["config"] = to_json(config);
    m["artifacts"] = hashes_;
    for (auto& [k, v] : extra.items()) m[k] = v;
    const auto path = fs::path(root_) / "manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << m.dump(2) << '\n';
    committed_ = true;
  }

 private:
  std::string root_;
  std::vector<std::string> written_;
  std::map<std::string, std::string> hashes_;
  bool committed_ = false;
};

struct Inputs {
  Corpus corpus;
  std::vector<RubricPhrase> phrases;
  std::unique_ptr<CachedEmbedder> provider;
};

Inputs load_inputs(const RunConfig& c) {
  if (c.corpus.empty()) throw UsageError("--corpus is required");
  if (c.phrases.empty()) throw UsageError("--phrases is required");
  Inputs in;
  in.corpus = load_corpus(c.corpus, c.rating_min, c.rating_max);
  in.phrases = load_phrases(c.phrases);
  in.provider = std::make_unique<CachedEmbedder>(
      c.embedding_cache.empty() ? CachedEmbedder{} : CachedEmbedder::load(c.embedding_cache));
  return in;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json misses_report(const RunConfig& c, const CachedEmbedder& provider) {
  const auto misses = provider.misses();
  json j{{"provider", c.embedding_cache.empty() ? "fallback" : "cache+fallback"},
         {"cached_entries", provider.cached_count()},
         {"miss_count", misses.size()}};
  j["misses"] = c.embedding_cache.empty() ? std::vector<std::string>{} : misses;
  return j;
}

void cmd_featurize(const RunConfig& c) {
  auto in = load_inputs(c);
  const auto fm = featurize_corpus(in.corpus, in.phrases, *in.provider);
  OutputDir out(c.out);
  out.write("features.csv", format_feature_csv(fm));
  out.write("cache_misses.json", dump(misses_report(c, *in.provider)));
  out.commit("featurize", c);
}

// Model documents carry the rating scale next to the model parameters.
json model_document(json model, const RunConfig& c) {
  model["rating_min"] = c.rating_min;
  model["rating_max"] = c.rating_max;
  return model;
}

// Applies one grid point to a copy of `c`. NAM grids take TrainConfig
// fields; logreg grids take only l2_strength.
RunConfig apply_grid_point(RunConfig c, const std::string& model_kind, const json& point) {
  for (const auto& [key, value] : point.items()) {
    if (model_kind == "logreg") {
      if (key != "l2_strength") throw UsageError("logreg grid accepts only 'l2_strength'");
      try {
        c.l2_strength = value.get<double>();
      } catch (const json::exception& e) {
        throw UsageError("grid: " + std::string(e.what()));
      }
      if (!(c.l2_strength >= 0.0)) throw UsageError("l2_strength must be >= 0");
    } else {
      if (key == "seed" || !to_json(c.train).contains(key)) {
        throw UsageError("nam grid cannot set '" + key + "'");
      }
      c.train = train_config_from_json(json{{key, value}}, c.train);
    }
  }
  c.train.validate();
  return c;
}

ModelTrainer trainer_for(const RunConfig& c, const std::string& model_kind) {
  return model_kind == "nam" ? make_nam_trainer(c.train) : make_logreg_trainer(c.l2_strength);
}

// Scores every grid point by mean QWK over both directions of the first
// twofold split and returns the winning config (first on ties).
RunConfig run_grid(const RunConfig& c, const std::string& model_kind, const json& grid,
                   const Inputs& in, const FeatureMatrix& fm, json& results) {
  const auto points = expand_grid(grid);
  const auto plan = make_5x2_folds(in.corpus, c.seed);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < in.corpus.size(); ++i) index[in.corpus.responses[i].id] = i;
  auto rows_of = [&](const std::vector<std::string>& ids) {
    std::vector<std::size_t> rows;
    for (const auto& id : ids) rows.push_back(index.at(id));
    return rows;
  };
  const std::array<std::vector<std::size_t>, 2> folds{rows_of(plan.iterations[0].fold_a),
                                                      rows_of(plan.iterations[0].fold_b)};
  const auto labels = in.corpus.labels();
  const auto k = static_cast<std::size_t>(in.corpus.num_classes());
  const std::uint64_t cell_seed = derive_seed(c.seed, 200);

  results = json::array();
  std::size_t best = 0;
  double best_qwk = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < points.size(); ++p) {
    const auto candidate = apply_grid_point(c, model_kind, points[p]);
    const auto trainer = trainer_for(candidate, model_kind);
    std::array<double, 2> scores{};
    for (std::size_t dir = 0; dir < 2; ++dir) {
      const auto& train_rows = folds[dir];
      const auto& test_rows = folds[1 - dir];
      std::vector<int> train_y, truth, pred;
      for (auto r : train_rows) train_y.push_back(labels[r]);
      const auto model = trainer.fit(fm.select_rows(train_rows), train_y, k, cell_seed);
      for (auto r : test_rows) {
        truth.push_back(labels[r]);
        pred.push_back(model->predict_class(fm.row(r)));
      }
      scores[dir] = qwk(pred, truth, 0, static_cast<int>(k) - 1);
    }
    const double mean = 0.5 * (scores[0] + scores[1]);
    results.push_back({{"params", points[p]},
                       {"qwk_train_a", scores[0]},
                       {"qwk_train_b", scores[1]},
                       {"mean_qwk", mean}});
    if (mean > best_qwk) {
      best_qwk = mean;
      best = p;
    }
  }
  return apply_grid_point(c, model_kind, points[best]);
}

void cmd_train(const RunConfig& base, const std::string& model_kind,
               const std::optional<std::string>& grid_path) {
  auto in = load_inputs(base);
  const auto fm = featurize_corpus(in.corpus, in.phrases, *in.provider);
  const auto labels = in.corpus.labels();
  const auto k = static_cast<std::size_t>(in.corpus.num_classes());
  json grid_results;
  RunConfig c = base;
  if (grid_path) {
    json grid;
    try {
      grid = json::parse(read_file(*grid_path));
    } catch (const json::exception& e) {
      throw UsageError("grid file: " + std::string(e.what()));
    }
    c = run_grid(base, model_kind, grid, in, fm, grid_results);
  }
  OutputDir out(c.out);
  if (grid_path) out.write("grid_results.json", dump(grid_results));
  if (model_kind == "nam") {
    auto [model, report] = train_nam(fm, labels, k, c.train);
    out.write("model.json", dump(model_document(to_json(model), c)));
    out.write("train_report.json", dump(to_json(report)));
    std::fprintf(stderr, "namasag: trained nam in %.2f s\n", report.wall_seconds);
  } else if (model_kind == "logreg") {
    auto fit = train_logreg(fm, labels, k, c.l2_strength);
    const auto pred = [&] {
      std::vector<int> p;
      for (std::size_t r = 0; r < fm.rows; ++r) {
        p.push_back(static_cast<int>(argmax(logreg_logits(fit.model, fm.row(r)))));
      }
      return p;
    }();
    json report{{"iterations", fit.optimizer.iterations},
                {"converged", fit.optimizer.converged},
                {"objective", fit.optimizer.value},
                {"gradient_norm", fit.optimizer.gradient_norm},
                {"final_train_qwk", qwk(pred, labels, 0, static_cast<int>(k) - 1)},
                {"l2_strength", c.l2_strength}};
    out.write("model.json", dump(model_document(to_json(fit.model), c)));
    out.write("train_report.json", dump(report));
  } else {
    throw UsageError("--model must be 'nam' or 'logreg'");
  }
  json extra{{"model", model_kind}};
  if (grid_path) extra["grid_file"] = *grid_path;
  out.commit("train", c, extra);
}

void cmd_compare(const RunConfig& c) {
  auto in = load_inputs(c);
  const auto fm = featurize_corpus(in.corpus, in.phrases, *in.provider);
  OutputDir out(c.out);
  const auto save_model = [&](std::size_t it, std::size_t dir, int which,
                              const Classifier& model) {
    char name[64];
    std::snprintf(name, sizeof(name), "models/%s_iter%zu_train%c.json",
                  which == 0 ? "nam" : "logreg", it + 1, dir == 0 ? 'a' : 'b');
    out.write(name, dump(model_document(model.to_json(), c)));
  };
  auto report = compare_on_features(fm, in.corpus, make_nam_trainer(c.train),
                                    make_logreg_trainer(c.l2_strength), c.seed, save_model);
  report.dataset = c.dataset;
  report.config = to_json(c);
  out.write("comparison.json", dump(to_json(report)));
  out.write("comparison.txt", format_comparison_table(report));
  out.write("folds.json", dump(to_json(make_5x2_folds(in.corpus, c.seed))));
  out.commit("compare", c);
}

json load_model_document(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError("model file '" + path + "': " + e.what());
  }
}

void check_feature_names(const std::vector<std::string>& model_names,
                         const FeatureMatrix& fm) {
  if (model_names != fm.feature_names) {
    throw DataError("model features do not match the phrase file");
  }
}

std::string slug(std::string_view name) {
  std::string s;
  for (unsigned char ch : name) {
    if (std::isalnum(ch)) {
      s.push_back(static_cast<char>(std::tolower(ch)));
    } else if (!s.empty() && s.back() != '_') {
      s.push_back('_');
    }
  }
  while (!s.empty() && s.back() == '_') s.pop_back();
  return s.empty() ? "feature" : s;
}

struct ExplainOptions {
  std::size_t top_n = 40;
  std::size_t grid_size = 100;
  std::size_t bins = 20;
  bool all_classes = false;
  bool shared_y = false;
};

void cmd_explain(const RunConfig& c, const std::string& model_path, const ExplainOptions& o) {
  const auto doc = load_model_document(model_path);
  if (doc.value("type", "") != "nam") {
    throw DataError("explain needs a model of type 'nam', got '" + doc.value("type", "") + "'");
  }
  const auto model = nam_from_json(doc);
  auto in = load_inputs(c);
  const auto fm = featurize_corpus(in.corpus, in.phrases, *in.provider);
  check_feature_names(model.feature_names, fm);
  const int offset = doc.value("rating_min", c.rating_min);

  const auto importance = make_importance_export(model.feature_names, feature_importance(model, fm));
  const auto shapes = export_shapes(model, fm, o.grid_size, o.bins);
  const auto classes = o.all_classes ? all_classes(model.num_classes)
                                     : extreme_classes(model.num_classes);
  ShapeSvgOptions svg;
  svg.class_offset = offset;
  if (o.shared_y) {
    double lo = 0.0, hi = 0.0;
    for (const auto& e : shapes) {
      for (const auto& row : e.values) {
        for (auto cls : classes) {
          lo = std::min(lo, row[cls]);
          hi = std::max(hi, row[cls]);
        }
      }
    }
    svg.y_range = std::pair{lo, hi};
  }

  OutputDir out(c.out);
  out.write("importance.csv", format_importance_csv(importance));
  out.write("importance.svg", render_importance_svg(importance, o.top_n));
  out.write("shapes.csv", format_shape_csv(shapes, offset));
  out.write("density.csv", format_density_csv(shapes));
  char prefix[16];
  for (const auto& e : shapes) {
    std::snprintf(prefix, sizeof(prefix), "%03zu_", e.feature_index);
    out.write("shapes/" + std::string(prefix) + slug(e.feature) + ".svg",
              render_shape_svg(e, classes, svg));
  }
  out.commit("explain", c, {{"model_file", model_path}, {"top_n", o.top_n}});
}

// Input CSV with header `id,text` or `id,text,rating`.
Corpus load_prediction_input(const std::string& path, const RunConfig& c) {
  const auto records = parse_csv(read_file(path));
  if (records.empty() || records[0].fields.size() < 2 || records[0].fields[0] != "id" ||
      records[0].fields[1] != "text") {
    throw DataError("prediction input must have header 'id,text[,rating]'");
  }
  Corpus corpus;
  corpus.rating_min = c.rating_min;
  corpus.rating_max = c.rating_max;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i].fields;
    if (f.size() < 2) throw DataError("row " + std::to_string(i) + ": expected id,text");
    corpus.responses.push_back({f[0], f[1], c.rating_min});
  }
  if (corpus.responses.empty()) throw DataError("empty prediction input");
  return corpus;
}

void cmd_predict(const RunConfig& c, const std::string& model_path, const std::string& input,
                 std::size_t top_k) {
  const auto doc = load_model_document(model_path);
  const std::string type = doc.value("type", "");
  if (type != "nam" && type != "logreg") throw DataError("unknown model type '" + type + "'");
  const int rmin = doc.value("rating_min", c.rating_min);

  if (c.phrases.empty()) throw UsageError("--phrases is required");
  const auto phrases = load_phrases(c.phrases);
  const auto provider = c.embedding_cache.empty() ? CachedEmbedder{}
                                                  : CachedEmbedder::load(c.embedding_cache);
  const auto corpus = load_prediction_input(input, c);
  const auto fm = featurize_corpus(corpus, phrases, provider);

  std::optional<NamModel> nam;
  std::optional<LogRegModel> lr;
  std::size_t k = 0;
  if (type == "nam") {
    nam = nam_from_json(doc);
    check_feature_names(nam->feature_names, fm);
    k = nam->num_classes;
  } else {
    lr = logreg_from_json(doc);
    check_feature_names(lr->feature_names, fm);
    k = lr->num_classes;
  }

  std::string pred_csv = "id,predicted_rating";
  for (std::size_t cls = 0; cls < k; ++cls) pred_csv += ",prob_" + std::to_string(rmin + static_cast<int>(cls));
  pred_csv += '\n';
  std::string contrib_csv = "id,rank,feature,contribution\n";

  for (std::size_t r = 0; r < fm.rows; ++r) {
    const auto x = fm.row(r);
    std::vector<double> probs;
    std::vector<double> contrib(fm.cols);
    std::size_t best = 0;
    if (nam) {
      const auto br = contributions(*nam, x);
      probs = softmax(br.logits);
      best = argmax(probs);
      for (std::size_t i = 0; i < fm.cols; ++i) contrib[i] = br.per_feature[i * k + best];
    } else {
      probs = logreg_predict(*lr, x);
      best = argmax(probs);
      for (std::size_t i = 0; i < fm.cols; ++i) contrib[i] = lr->weight(best, i) * x[i];
    }
    pred_csv += csv_field(fm.response_ids[r]) + ',' + std::to_string(rmin + static_cast<int>(best));
    for (double p : probs) pred_csv += ',' + format_double(p);
    pred_csv += '\n';

    std::vector<std::size_t> order(fm.cols);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(contrib[a]) > std::abs(contrib[b]);
    });
    for (std::size_t rank = 0; rank < std::min(top_k, order.size()); ++rank) {
      const auto i = order[rank];
      contrib_csv += csv_field(fm.response_ids[r]) + ',' + std::to_string(rank + 1) + ',' +
                     csv_field(fm.feature_names[i]) + ',' + format_double(contrib[i]) + '\n';
    }
  }
  OutputDir out(c.out);
  out.write("predictions.csv", pred_csv);
  out.write("contributions.csv", contrib_csv);
  out.commit("predict", c, {{"model_file", model_path}, {"input", input}, {"top_k", top_k}});
}

// Recomputes artifact hashes; returns the number of mismatches.
int verify_manifest(const std::string& dir) {
  json m;
  try {
    m = json::parse(read_file((fs::path(dir) / "manifest.json").string()));
  } catch (const json::exception& e) {
    throw DataError("manifest: " + std::string(e.what()));
  }
  int bad = 0;
  for (auto& [rel, hash] : m.at("artifacts").items()) {
    std::string actual;
    try {
      actual = sha256_hex(read_file((fs::path(dir) / rel).string()));
    } catch (const DataError&) {
      actual = "missing";
    }
    const bool ok = actual == hash.get<std::string>();
    std::printf("%s %s\n", ok ? "ok" : "MISMATCH", rel.c_str());
    if (!ok) ++bad;
  }
  return bad;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numerical: return 4;
  }
  return 3;
}

const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::data: return "data";
    case ErrorKind::numerical: return "numerical";
  }
  return "data";
}

void report_error(ErrorKind kind, std::string message) {
  for (char& ch : message) {
    if (ch == '\n' || ch == '\r') ch = ' ';
    if (ch == '"') ch = '\'';
  }
  std::fprintf(stderr, "namasag: error kind=%s code=%d message=\"%s\"\n", kind_name(kind),
               exit_code(kind), message.c_str());
}

int run(int argc, char** argv) {
  CLI::App app{"Explainable short-answer grading with neural additive models"};
  app.require_subcommand(0, 1);
  Flags f;
  std::optional<std::string> verify_dir;
  app.add_option("--config", f.config_path, "JSON run configuration");
  app.add_option("--seed", f.seed, "Run seed");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--verify-manifest", verify_dir, "Check artifact hashes in DIR/manifest.json");

  auto add_data_flags = [&f](CLI::App* sub) {
    sub->add_option("--corpus", f.corpus, "Corpus CSV (id,text,rating)");
    sub->add_option("--phrases", f.phrases, "Rubric phrase JSON");
    sub->add_option("--embedding-cache", f.embedding_cache, "JSONL embedding cache");
    sub->add_option("--rating-min", f.rating_min, "Lowest rating");
    sub->add_option("--rating-max", f.rating_max, "Highest rating");
    sub->add_option("--seed", f.seed, "Run seed");
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--config", f.config_path, "JSON run configuration");
  };
  auto add_train_flags = [&f](CLI::App* sub) {
    sub->add_option("--epochs", f.epochs);
    sub->add_option("--batch-size", f.batch_size);
    sub->add_option("--learning-rate", f.learning_rate);
    sub->add_option("--dropout", f.dropout);
    sub->add_option("--weight-decay", f.weight_decay);
    sub->add_option("--optimizer", f.optimizer)->check(CLI::IsMember({"adam", "sgd"}));
    sub->add_option("--hidden-units", f.hidden_units);
    sub->add_option("--l2", f.l2_strength, "Logistic-regression L2 strength");
  };

  auto* featurize = app.add_subcommand("featurize", "Write the phrase-similarity feature matrix");
  add_data_flags(featurize);

  std::string model_kind = "nam";
  auto* train = app.add_subcommand("train", "Train a NAM or logistic-regression model");
  add_data_flags(train);
  add_train_flags(train);
  train->add_option("--model", model_kind, "nam or logreg")->check(CLI::IsMember({"nam", "logreg"}));
  std::optional<std::string> grid_path;
  train->add_option("--grid", grid_path, "JSON grid {field: [values]}; best point is refit");

  auto* compare = app.add_subcommand("compare", "5x2 cross-validated NAM vs logistic regression");
  add_data_flags(compare);
  add_train_flags(compare);
  compare->add_option("--dataset", f.dataset, "Dataset label for the report table");

  std::string model_path;
  ExplainOptions explain_opts;
  auto* explain = app.add_subcommand("explain", "Export feature importances and shape functions");
  add_data_flags(explain);
  explain->add_option("--model-file", model_path, "Serialized NAM")->required();
  explain->add_option("--top-n", explain_opts.top_n, "Bars in the importance chart");
  explain->add_option("--grid-size", explain_opts.grid_size);
  explain->add_option("--bins", explain_opts.bins);
  explain->add_flag("--all-classes", explain_opts.all_classes, "Draw every class curve");
  explain->add_flag("--shared-y", explain_opts.shared_y, "One y-axis range for all plots");

  std::string input_path;
  std::size_t top_k = 5;
  auto* predict = app.add_subcommand("predict", "Score responses with a trained model");
  add_data_flags(predict);
  predict->add_option("--model-file", model_path, "Serialized model")->required();
  predict->add_option("--input", input_path, "CSV with id,text")->required();
  predict->add_option("--top-k", top_k, "Contributions listed per response");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error(ErrorKind::usage, e.what());
    return 2;
  }

  try {
    if (verify_dir) return verify_manifest(*verify_dir) == 0 ? 0 : 3;
    const RunConfig config = resolve(f);
    if (*featurize) {
      cmd_featurize(config);
    } else if (*train) {
      cmd_train(config, model_kind, grid_path);
    } else if (*compare) {
      cmd_compare(config);
    } else if (*explain) {
      cmd_explain(config, model_path, explain_opts);
    } else if (*predict) {
      cmd_predict(config, model_path, input_path, top_k);
    } else {
      report_error(ErrorKind::usage, "no subcommand given");
      return 2;
    }
  } catch (const Error& e) {
    report_error(e.kind(), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    report_error(ErrorKind::data, e.what());
    return 3;
  }
  return 0;
}

}  // namespace namasag::cli

int main(int argc, char** argv) { return namasag::cli::run(argc, argv); }
