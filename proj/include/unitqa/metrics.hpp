// Copyright 2026 The UnitQA Authors.
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

// Answer scoring: SQuAD-style normalization, token F1, exact match, BLEU1,
// ROUGE-L and WER, plus dataset-level report aggregation. Extractive sets
// report F1/EM, abstractive sets report BLEU1/ROUGE-L.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "unitqa/errors.hpp"

namespace unitqa {

// Lowercase, strip punctuation, drop the articles {a, an, the}, split on
// whitespace.
inline std::vector<std::string> normalize_text(const std::string& s) {
  std::string cleaned;
  cleaned.reserve(s.size());
  for (const char ch : s) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::ispunct(uc)) continue;
    cleaned.push_back(static_cast<char>(std::tolower(uc)));
  }
  std::vector<std::string> tokens;
  std::istringstream iss(cleaned);
  std::string tok;
  while (iss >> tok) {
    if (tok == "a" || tok == "an" || tok == "the") continue;
    tokens.push_back(tok);
  }
  return tokens;
}

namespace detail {

inline std::map<std::string, int> bag(const std::vector<std::string>& toks) {
  std::map<std::string, int> b;
  for (const auto& t : toks) ++b[t];
  return b;
}

inline int multiset_overlap(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const auto ba = bag(a);
  const auto bb = bag(b);
  int overlap = 0;
  for (const auto& [tok, n] : ba) {
    const auto it = bb.find(tok);
    if (it != bb.end()) overlap += std::min(n, it->second);
  }
  return overlap;
}

// Word-level Levenshtein distance, unit costs.
inline int edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

inline int lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      cur[j] = (a[i - 1] == b[j - 1]) ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
    std::fill(cur.begin(), cur.end(), 0);
  }
  return prev[m];
}

}  // namespace detail

// Bag-of-tokens overlap F1 after normalization. Both empty -> 1, one empty -> 0.
inline double token_f1(const std::string& pred, const std::string& gold) {
  const auto p = normalize_text(pred);
  const auto g = normalize_text(gold);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  const int overlap = detail::multiset_overlap(p, g);
  if (overlap == 0) return 0.0;
  const double prec = static_cast<double>(overlap) / static_cast<double>(p.size());
  const double rec = static_cast<double>(overlap) / static_cast<double>(g.size());
  return 2.0 * prec * rec / (prec + rec);
}

inline double exact_match(const std::string& pred, const std::string& gold) {
  return normalize_text(pred) == normalize_text(gold) ? 1.0 : 0.0;
}

// Clipped unigram precision times brevity penalty exp(min(0, 1 - |gold|/|pred|)).
// No smoothing; empty prediction scores 0.
inline double bleu1(const std::string& pred, const std::string& gold) {
  const auto p = normalize_text(pred);
  const auto g = normalize_text(gold);
  if (p.empty()) return 0.0;
  const int clipped = detail::multiset_overlap(p, g);
  const double precision = static_cast<double>(clipped) / static_cast<double>(p.size());
  const double bp = std::exp(std::min(0.0, 1.0 - static_cast<double>(g.size()) / static_cast<double>(p.size())));
  return precision * bp;
}

// LCS F-measure with beta = 1: P = LCS/|pred|, R = LCS/|gold|.
inline double rouge_l(const std::string& pred, const std::string& gold) {
  const auto p = normalize_text(pred);
  const auto g = normalize_text(gold);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  const int lcs = detail::lcs_length(p, g);
  if (lcs == 0) return 0.0;
  const double prec = static_cast<double>(lcs) / static_cast<double>(p.size());
  const double rec = static_cast<double>(lcs) / static_cast<double>(g.size());
  return 2.0 * prec * rec / (prec + rec);
}

// Word error rate on raw token lists (no normalization applied).
inline double wer_tokens(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  if (ref.empty()) throw InvalidInputError("WER reference is empty");
  return static_cast<double>(detail::edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

// Word error rate after normalization; may exceed 1.
inline double wer(const std::string& ref, const std::string& hyp) {
  const auto r = normalize_text(ref);
  if (r.empty()) throw InvalidInputError("WER reference is empty after normalization");
  return wer_tokens(r, normalize_text(hyp));
}

enum class EvalMode { kExtractive, kAbstractive };

struct ExampleScore {
  std::string id;
  std::optional<double> f1, em, bleu1, rouge_l;
};

// Aggregates are arithmetic means of per-example scores, times 100.
struct EvalReport {
  std::string dataset_name;
  int n_examples = 0;
  std::optional<double> f1, em, bleu1, rouge_l, wer;
  std::vector<ExampleScore> rows;
};

struct Prediction {
  std::string id;
  std::string text;
};

inline EvalReport evaluate_dataset(const std::vector<Prediction>& predictions,
                                   const std::vector<Prediction>& golds, EvalMode mode,
                                   const std::string& dataset_name = "dataset") {
  if (predictions.size() != golds.size()) {
    throw InvalidInputError("prediction/gold count mismatch: " + std::to_string(predictions.size()) +
                            " vs " + std::to_string(golds.size()));
  }
  if (golds.empty()) throw InvalidInputError("cannot evaluate an empty dataset");
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) by_id[p.id] = &p;

  EvalReport report;
  report.dataset_name = dataset_name;
  report.n_examples = static_cast<int>(golds.size());
  double sum_a = 0.0, sum_b = 0.0;
  for (const auto& gold : golds) {
    const auto it = by_id.find(gold.id);
    if (it == by_id.end()) throw InvalidInputError("no prediction for id " + gold.id);
    ExampleScore row;
    row.id = gold.id;
    if (mode == EvalMode::kExtractive) {
      row.f1 = token_f1(it->second->text, gold.text);
      row.em = exact_match(it->second->text, gold.text);
      sum_a += *row.f1;
      sum_b += *row.em;
    } else {
      row.bleu1 = bleu1(it->second->text, gold.text);
      row.rouge_l = rouge_l(it->second->text, gold.text);
      sum_a += *row.bleu1;
      sum_b += *row.rouge_l;
    }
    report.rows.push_back(std::move(row));
  }
  const double n = static_cast<double>(report.n_examples);
  if (mode == EvalMode::kExtractive) {
    report.f1 = 100.0 * sum_a / n;
    report.em = 100.0 * sum_b / n;
  } else {
    report.bleu1 = 100.0 * sum_a / n;
    report.rouge_l = 100.0 * sum_b / n;
  }
  return report;
}

}  // namespace unitqa
