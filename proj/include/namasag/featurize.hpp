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

// Rubric-phrase featurization. Each feature is the largest cosine similarity
// between a rubric phrase and any 1..5-gram of the response.

#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "namasag/common.hpp"
#include "namasag/dataset.hpp"

namespace namasag {

enum class PhraseKind { phrase, keyword };

struct RubricPhrase {
  std::string text;
  PhraseKind kind = PhraseKind::phrase;
};

struct EmbeddingVector {
  std::vector<double> values;
  std::size_t dim() const { return values.size(); }
};

// Any deterministic text embedder. Implementations must be safe to call
// concurrently through a const reference.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::size_t dim() const = 0;
};

// Lowercases ASCII letters, drops every byte that is not an ASCII letter,
// digit or whitespace, then splits on whitespace.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else if (c < 0x80 && std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

// Tokens re-joined by single spaces; the canonical form used for embedding.
inline std::string normalize_text(std::string_view text) {
  std::string out;
  for (const auto& t : tokenize(text)) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

// Contiguous n-grams ordered by n ascending, then start position.
inline std::vector<std::string> extract_ngrams(std::span<const std::string> tokens,
                                               std::size_t n_min, std::size_t n_max) {
  if (n_min < 1 || n_min > n_max) {
    throw UsageError("extract_ngrams: need 1 <= n_min <= n_max");
  }
  std::vector<std::string> grams;
  const std::size_t top = std::min(n_max, tokens.size());
  for (std::size_t n = n_min; n <= top; ++n) {
    for (std::size_t start = 0; start + n <= tokens.size(); ++start) {
      std::string g = tokens[start];
      for (std::size_t k = 1; k < n; ++k) {
        g.push_back(' ');
        g += tokens[start + k];
      }
      grams.push_back(std::move(g));
    }
  }
  return grams;
}

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw NumericalError("cosine_similarity: dimension mismatch (" +
                         std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) +
                         ")");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw NumericalError("cosine_similarity: zero-norm vector");
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Built-in embedder: hashed character trigrams.

class FallbackEmbedder final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDim = 64;

  std::size_t dim() const override { return kDim; }

  // Trigram counts of " " + lowercase(text) + " " hashed into 64 buckets,
  // L2-normalized. Text with no trigram maps to the unit vector e_0.
  EmbeddingVector embed(std::string_view text) const override {
    std::string padded = " ";
    for (unsigned char c : text) padded.push_back(static_cast<char>(std::tolower(c)));
    padded.push_back(' ');
    EmbeddingVector v{std::vector<double>(kDim, 0.0)};
    if (trim(text).empty() || padded.size() < 3) {
      v.values[0] = 1.0;
      return v;
    }
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      const auto h = fnv1a64(std::string_view(padded).substr(i, 3));
      v.values[h % kDim] += 1.0;
    }
    double norm = 0.0;
    for (double x : v.values) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v.values) x /= norm;
    return v;
  }
};

inline EmbeddingVector fallback_embed(std::string_view text) {
  return FallbackEmbedder{}.embed(text);
}

// Precomputed embeddings from a JSONL cache, with the fallback embedder for
// texts that are not cached. Misses are recorded for reporting.
class CachedEmbedder final : public EmbeddingProvider {
 public:
  CachedEmbedder() = default;

  static CachedEmbedder from_jsonl(std::string_view content) {
    CachedEmbedder e;
    e.dim_ = 0;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= content.size()) {
      auto nl = content.find('\n', pos);
      if (nl == std::string_view::npos) nl = content.size();
      const auto line = trim(content.substr(pos, nl - pos));
      pos = nl + 1;
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& ex) {
        throw DataError("embedding cache line " + std::to_string(line_no) + ": " +
                        ex.what());
      }
      if (!j.contains("text") || !j.contains("vector")) {
        throw DataError("embedding cache line " + std::to_string(line_no) +
                        ": need 'text' and 'vector'");
      }
      EmbeddingVector v{j["vector"].get<std::vector<double>>()};
      if (v.dim() == 0) {
        throw DataError("embedding cache line " + std::to_string(line_no) +
                        ": empty vector");
      }
      for (double x : v.values) {
        if (!std::isfinite(x)) {
          throw DataError("embedding cache line " + std::to_string(line_no) +
                          ": non-finite entry");
        }
      }
      if (e.dim_ == 0) e.dim_ = v.dim();
      if (v.dim() != e.dim_) {
        throw DataError("embedding cache line " + std::to_string(line_no) +
                        ": dimension " + std::to_string(v.dim()) + " != " +
                        std::to_string(e.dim_));
      }
      e.cache_.insert_or_assign(j["text"].get<std::string>(), std::move(v));
    }
    if (e.dim_ == 0) e.dim_ = FallbackEmbedder::kDim;
    return e;
  }

  static CachedEmbedder load(const std::string& path) {
    return from_jsonl(read_file(path));
  }

  std::size_t dim() const override { return dim_; }
  std::size_t cached_count() const { return cache_.size(); }

  EmbeddingVector embed(std::string_view text) const override {
    if (auto it = cache_.find(std::string(text)); it != cache_.end()) return it->second;
    {
      std::lock_guard lock(misses_->mu);
      misses_->texts.insert(std::string(text));
    }
    if (dim_ != FallbackEmbedder::kDim) {
      throw DataError("embedding cache has no entry for '" + std::string(text) +
                      "' and its dimension " + std::to_string(dim_) +
                      " differs from the fallback embedder");
    }
    return fallback_.embed(text);
  }

  // Sorted, de-duplicated texts that fell through to the fallback.
  std::vector<std::string> misses() const {
    std::lock_guard lock(misses_->mu);
    return {misses_->texts.begin(), misses_->texts.end()};
  }

 private:
  std::unordered_map<std::string, EmbeddingVector> cache_;
  std::size_t dim_ = FallbackEmbedder::kDim;
  FallbackEmbedder fallback_;
  struct MissLog {
    std::mutex mu;
    std::set<std::string> texts;
  };
  std::shared_ptr<MissLog> misses_ = std::make_shared<MissLog>();
};

// ---------------------------------------------------------------------------
// Features

struct NgramRange {
  std::size_t n_min = 1;
  std::size_t n_max = 5;
};

namespace detail {

inline EmbeddingVector embed_checked(const EmbeddingProvider& provider,
                                     const std::string& text) {
  try {
    return provider.embed(text);
  } catch (const Error& e) {
    throw DataError("embedding failed for n-gram '" + text + "': " + e.what());
  }
}

// Max cosine against the precomputed n-gram embeddings; 0 when there are none.
inline double max_similarity(std::span<const EmbeddingVector> grams,
                             const EmbeddingVector& phrase) {
  if (grams.empty()) return 0.0;
  double best = -1.0;
  for (const auto& g : grams) best = std::max(best, cosine_similarity(g, phrase));
  return best;
}

}  // namespace detail

// Phrases are compared in the same normalized token form as n-grams, so a
// phrase of at most n_max tokens that occurs verbatim scores exactly 1.
inline double phrase_feature(std::string_view response_text, const RubricPhrase& phrase,
                             const EmbeddingProvider& provider, NgramRange range = {}) {
  const auto tokens = tokenize(response_text);
  if (tokens.empty()) return 0.0;
  const auto phrase_vec = detail::embed_checked(provider, normalize_text(phrase.text));
  double best = -1.0;
  for (const auto& g : extract_ngrams(tokens, range.n_min, range.n_max)) {
    best = std::max(best, cosine_similarity(detail::embed_checked(provider, g), phrase_vec));
  }
  return best;
}

struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major
  std::vector<std::string> feature_names;
  std::vector<std::string> response_ids;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c)
      : rows(r), cols(c), values(r * c, 0.0), feature_names(c), response_ids(r) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }

  // Rows selected by index, in the given order.
  FeatureMatrix select_rows(std::span<const std::size_t> idx) const {
    FeatureMatrix out(idx.size(), cols);
    out.feature_names = feature_names;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(idx[k] * cols), cols,
                  out.values.begin() + static_cast<std::ptrdiff_t>(k * cols));
      out.response_ids[k] = response_ids[idx[k]];
    }
    return out;
  }
};

inline FeatureMatrix featurize_corpus(const Corpus& corpus,
                                      std::span<const RubricPhrase> phrases,
                                      const EmbeddingProvider& provider,
                                      NgramRange range = {}) {
  if (phrases.empty()) throw DataError("phrase list is empty");
  std::unordered_set<std::string> names;
  std::vector<EmbeddingVector> phrase_vecs;
  for (const auto& p : phrases) {
    if (trim(p.text).empty()) throw DataError("phrase text is empty");
    if (!names.insert(p.text).second) {
      throw DataError("duplicate phrase text '" + p.text + "'");
    }
    phrase_vecs.push_back(detail::embed_checked(provider, normalize_text(p.text)));
  }

  FeatureMatrix fm(corpus.size(), phrases.size());
  for (std::size_t j = 0; j < phrases.size(); ++j) fm.feature_names[j] = phrases[j].text;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& resp = corpus.responses[i];
    fm.response_ids[i] = resp.id;
    const auto tokens = tokenize(resp.text);
    std::vector<EmbeddingVector> grams;
    if (!tokens.empty()) {
      for (const auto& g : extract_ngrams(tokens, range.n_min, range.n_max)) {
        grams.push_back(detail::embed_checked(provider, g));
      }
    }
    for (std::size_t j = 0; j < phrases.size(); ++j) {
      fm.at(i, j) = detail::max_similarity(grams, phrase_vecs[j]);
    }
  }
  return fm;
}

// ---------------------------------------------------------------------------
// Files

inline std::vector<RubricPhrase> parse_phrases(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("phrase file: ") + e.what());
  }
  if (!j.is_array()) throw DataError("phrase file must be a JSON array");
  std::vector<RubricPhrase> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    if (!e.is_object() || !e.contains("text") || !e["text"].is_string()) {
      throw DataError("phrase entry " + std::to_string(i) + ": missing 'text'");
    }
    RubricPhrase p;
    p.text = e["text"].get<std::string>();
    const std::string kind = e.value("kind", "phrase");
    if (kind == "phrase") {
      p.kind = PhraseKind::phrase;
    } else if (kind == "keyword") {
      p.kind = PhraseKind::keyword;
    } else {
      throw DataError("phrase entry " + std::to_string(i) + ": unknown kind '" + kind +
                      "'");
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<RubricPhrase> load_phrases(const std::string& path) {
  return parse_phrases(read_file(path));
}

inline std::string format_feature_csv(const FeatureMatrix& fm) {
  std::string out = "response_id";
  for (const auto& n : fm.feature_names) out += ',' + csv_field(n);
  out += '\n';
  for (std::size_t i = 0; i < fm.rows; ++i) {
    out += csv_field(fm.response_ids[i]);
    for (std::size_t j = 0; j < fm.cols; ++j) out += ',' + format_double(fm.at(i, j));
    out += '\n';
  }
  return out;
}

inline FeatureMatrix parse_feature_csv(std::string_view csv) {
  const auto records = parse_csv(csv);
  if (records.empty() || records[0].fields.empty() ||
      records[0].fields[0] != "response_id") {
    throw DataError("feature csv must start with a 'response_id' column");
  }
  const auto& header = records[0].fields;
  FeatureMatrix fm(records.size() - 1, header.size() - 1);
  fm.feature_names.assign(header.begin() + 1, header.end());
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i].fields;
    if (f.size() != header.size()) {
      throw DataError("feature csv row " + std::to_string(i) + ": wrong field count");
    }
    fm.response_ids[i - 1] = f[0];
    for (std::size_t j = 1; j < f.size(); ++j) fm.at(i - 1, j - 1) = parse_double(f[j]);
  }
  return fm;
}

}  // namespace namasag
