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

// Graded response corpora and stratified 5x2 cross-validation splits.

#pragma once

#include <array>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "namasag/common.hpp"

namespace namasag {

struct Response {
  std::string id;
  std::string text;
  int rating = 0;
};

struct Corpus {
  std::vector<Response> responses;
  int rating_min = 1;
  int rating_max = 5;

  int num_classes() const { return rating_max - rating_min + 1; }
  std::size_t size() const { return responses.size(); }

  // Zero-based class labels in row order.
  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(responses.size());
    for (const auto& r : responses) out.push_back(r.rating - rating_min);
    return out;
  }
};

// Parses CSV with header `id,text,rating`. Data rows are numbered from 1.
inline Corpus parse_corpus(std::string_view csv, int rating_min, int rating_max) {
  if (rating_max <= rating_min) {
    throw UsageError("rating range must span at least two classes");
  }
  const auto records = parse_csv(csv);
  if (records.empty()) throw DataError("empty corpus");
  const auto& header = records.front().fields;
  if (header.size() != 3 || trim(header[0]) != "id" || trim(header[1]) != "text" ||
      trim(header[2]) != "rating") {
    throw DataError("corpus header must be 'id,text,rating'");
  }
  if (records.size() == 1) throw DataError("empty corpus");

  Corpus corpus;
  corpus.rating_min = rating_min;
  corpus.rating_max = rating_max;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto row = std::to_string(i);
    const auto& f = records[i].fields;
    if (f.size() != 3) {
      throw DataError("row " + row + ": expected 3 fields, found " +
                      std::to_string(f.size()));
    }
    Response r;
    r.id = std::string(trim(f[0]));
    r.text = f[1];
    if (r.id.empty()) throw DataError("row " + row + ": empty id");
    if (trim(r.text).empty()) throw DataError("row " + row + ": empty text");
    long long rating = 0;
    if (!parse_int(trim(f[2]), rating)) {
      throw DataError("row " + row + ": rating '" + f[2] + "' is not an integer");
    }
    if (rating < rating_min || rating > rating_max) {
      throw DataError("row " + row + ": rating " + std::to_string(rating) +
                      " outside [" + std::to_string(rating_min) + ", " +
                      std::to_string(rating_max) + "]");
    }
    r.rating = static_cast<int>(rating);
    if (!seen.insert(r.id).second) {
      throw DataError("row " + row + ": duplicate id '" + r.id + "'");
    }
    corpus.responses.push_back(std::move(r));
  }
  return corpus;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Corpus load_corpus(const std::string& path, int rating_min, int rating_max) {
  return parse_corpus(read_file(path), rating_min, rating_max);
}

inline std::string format_corpus(const Corpus& corpus) {
  std::string out = "id,text,rating\n";
  for (const auto& r : corpus.responses) {
    out += csv_field(r.id) + ',' + csv_field(r.text) + ',' +
           std::to_string(r.rating) + '\n';
  }
  return out;
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << format_corpus(corpus);
}

// ---------------------------------------------------------------------------
// 5x2 folds

struct FoldPair {
  std::vector<std::string> fold_a;
  std::vector<std::string> fold_b;
};

struct FoldPlan {
  static constexpr std::size_t kIterations = 5;
  std::uint64_t seed = 0;
  std::array<FoldPair, kIterations> iterations;
};

// Five independent stratified halvings. Within each class the members are
// shuffled and split in half; when a class has an odd count the extra member
// alternates between folds so overall fold sizes stay balanced. Ids in each
// fold keep corpus order.
inline FoldPlan make_5x2_folds(const Corpus& corpus, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < corpus.responses.size(); ++i) {
    by_class[corpus.responses[i].rating].push_back(i);
  }
  for (int c = corpus.rating_min; c <= corpus.rating_max; ++c) {
    const auto it = by_class.find(c);
    const std::size_t n = it == by_class.end() ? 0 : it->second.size();
    if (n < 2) {
      throw DataError("rating class " + std::to_string(c) + " has " +
                      std::to_string(n) + " member(s); 5x2 folds need at least 2");
    }
  }

  FoldPlan plan;
  plan.seed = seed;
  for (std::size_t iter = 0; iter < FoldPlan::kIterations; ++iter) {
    Rng rng(derive_seed(seed, iter));
    std::vector<char> in_a(corpus.responses.size(), 0);
    bool extra_to_a = rng.below(2) == 0;
    for (auto& [rating, members] : by_class) {
      auto shuffled = members;
      rng.shuffle(shuffled);
      std::size_t take = shuffled.size() / 2;
      if (shuffled.size() % 2 == 1) {
        if (extra_to_a) ++take;
        extra_to_a = !extra_to_a;
      }
      for (std::size_t k = 0; k < take; ++k) in_a[shuffled[k]] = 1;
    }
    auto& pair = plan.iterations[iter];
    for (std::size_t i = 0; i < corpus.responses.size(); ++i) {
      (in_a[i] ? pair.fold_a : pair.fold_b).push_back(corpus.responses[i].id);
    }
  }
  return plan;
}

inline nlohmann::json to_json(const FoldPlan& plan) {
  nlohmann::json j;
  j["seed"] = plan.seed;
  j["iterations"] = nlohmann::json::array();
  for (const auto& p : plan.iterations) {
    j["iterations"].push_back({{"fold_a", p.fold_a}, {"fold_b", p.fold_b}});
  }
  return j;
}

inline FoldPlan fold_plan_from_json(const nlohmann::json& j) {
  FoldPlan plan;
  plan.seed = j.at("seed").get<std::uint64_t>();
  const auto& its = j.at("iterations");
  if (its.size() != FoldPlan::kIterations) {
    throw DataError("fold plan must have exactly 5 iterations");
  }
  for (std::size_t i = 0; i < FoldPlan::kIterations; ++i) {
    plan.iterations[i].fold_a = its[i].at("fold_a").get<std::vector<std::string>>();
    plan.iterations[i].fold_b = its[i].at("fold_b").get<std::vector<std::string>>();
  }
  return plan;
}

}  // namespace namasag
