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

// Joint text + unit token vocabulary. ID layout is contiguous: the five
// specials first, then text tokens (frequency desc, then lexicographic),
// then K unit tokens rendered as "<u_i>". Unit-token embedding rows are
// initialized by copying uniformly sampled text-token rows.

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "unitqa/errors.hpp"
#include "unitqa/rng.hpp"
#include "unitqa/serial.hpp"
#include "unitqa/unit_codec.hpp"

namespace unitqa {

inline std::vector<std::string> whitespace_tokenize(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kSep = 3;
  static constexpr int kUnk = 4;
  static constexpr int kSpecialCount = 5;

  static Vocabulary build(const std::vector<std::string>& text_corpus, int unit_count) {
    std::map<std::string, long long> freq;
    for (const std::string& line : text_corpus) {
      for (const std::string& tok : whitespace_tokenize(line)) ++freq[tok];
    }
    if (freq.empty() && unit_count == 0) {
      throw InvalidInputError("vocabulary needs a non-empty corpus or unit tokens");
    }
    if (unit_count < 0) throw InvalidInputError("unit_count must be nonnegative");

    std::vector<std::pair<std::string, long long>> types(freq.begin(), freq.end());
    std::sort(types.begin(), types.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });

    Vocabulary v;
    v.unit_count_ = unit_count;
    v.text_tokens_.reserve(types.size());
    for (auto& [tok, n] : types) v.text_tokens_.push_back(tok);
    v.rebuild_index();
    return v;
  }

  int text_token_count() const { return static_cast<int>(text_tokens_.size()); }
  int unit_token_count() const { return unit_count_; }
  int text_begin() const { return kSpecialCount; }
  int text_end() const { return kSpecialCount + text_token_count(); }
  int unit_begin() const { return text_end(); }
  int total_size() const { return text_end() + unit_count_; }

  bool is_text(int id) const { return id >= text_begin() && id < text_end(); }
  bool is_unit(int id) const { return id >= unit_begin() && id < total_size(); }
  bool is_special(int id) const { return id >= 0 && id < kSpecialCount; }

  // Text token -> ID, unknown types map to UNK.
  int text_id(const std::string& tok) const {
    const auto it = index_.find(tok);
    return it != index_.end() ? it->second : kUnk;
  }

  // Unit -> joint-vocabulary ID.
  int unit_id(int unit) const {
    if (unit < 0 || unit >= unit_count_) {
      throw InvalidInputError("unit " + std::to_string(unit) + " outside [0, " +
                              std::to_string(unit_count_) + ")");
    }
    return unit_begin() + unit;
  }

  // Joint-vocabulary ID -> unit, only valid for unit-token IDs.
  int unit_of(int id) const {
    if (!is_unit(id)) throw InvalidInputError("ID " + std::to_string(id) + " is not a unit token");
    return id - unit_begin();
  }

  std::string token_of(int id) const {
    switch (id) {
      case kPad: return "<pad>";
      case kBos: return "<bos>";
      case kEos: return "<eos>";
      case kSep: return "<sep>";
      case kUnk: return "<unk>";
      default: break;
    }
    if (is_text(id)) return text_tokens_[static_cast<std::size_t>(id - text_begin())];
    if (is_unit(id)) return "<u_" + std::to_string(id - unit_begin()) + ">";
    throw InvalidInputError("ID " + std::to_string(id) + " outside vocabulary");
  }

  std::vector<int> text_ids(const std::vector<std::string>& toks) const {
    std::vector<int> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(text_id(t));
    return out;
  }

  std::vector<int> unit_ids(const std::vector<int>& units) const {
    std::vector<int> out;
    out.reserve(units.size());
    for (const int u : units) out.push_back(unit_id(u));
    return out;
  }

  const std::vector<std::string>& text_tokens() const { return text_tokens_; }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["special_tokens"] = {{"<pad>", kPad}, {"<bos>", kBos}, {"<eos>", kEos},
                           {"<sep>", kSep}, {"<unk>", kUnk}};
    j["text_tokens"] = text_tokens_;
    j["unit_token_count"] = unit_count_;
    return j;
  }

  static Vocabulary from_json(const nlohmann::json& j) {
    Vocabulary v;
    v.text_tokens_ = j.at("text_tokens").get<std::vector<std::string>>();
    v.unit_count_ = j.at("unit_token_count").get<int>();
    v.rebuild_index();
    return v;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    out << to_json().dump(2) << "\n";
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open for reading: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }

  // Stable content hash, recorded in checkpoints to catch vocabulary drift.
  std::uint64_t hash() const { return fnv1a64_bytes(to_json().dump()); }

 private:
  void rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < text_tokens_.size(); ++i) {
      index_[text_tokens_[i]] = kSpecialCount + static_cast<int>(i);
    }
  }

  std::vector<std::string> text_tokens_;
  int unit_count_ = 0;
  std::unordered_map<std::string, int> index_;
};

// Encoder layout [BOS] Q [SEP] P [EOS]. If the result would exceed max_len
// the passage tail is dropped first, then (only if the question alone is
// too long) the question tail.
inline std::vector<int> encode_pair(const std::vector<int>& question_ids,
                                    const std::vector<int>& passage_ids, int max_len) {
  if (max_len < 4) throw InvalidInputError("encode_pair needs max_len >= 4");
  const std::size_t budget = static_cast<std::size_t>(max_len) - 3;  // BOS, SEP, EOS
  const std::size_t q_keep = std::min(question_ids.size(), budget);
  const std::size_t p_keep = std::min(passage_ids.size(), budget - q_keep);
  std::vector<int> out;
  out.reserve(q_keep + p_keep + 3);
  out.push_back(Vocabulary::kBos);
  out.insert(out.end(), question_ids.begin(), question_ids.begin() + static_cast<std::ptrdiff_t>(q_keep));
  out.push_back(Vocabulary::kSep);
  out.insert(out.end(), passage_ids.begin(), passage_ids.begin() + static_cast<std::ptrdiff_t>(p_keep));
  out.push_back(Vocabulary::kEos);
  return out;
}

// Copies a uniformly sampled text-token row (with replacement) into every
// unit-token row. Rows are copied bit-for-bit; deterministic under seed.
template <typename S>
void init_unit_embeddings(Mat<S>& table, const Vocabulary& vocab, std::uint64_t seed) {
  if (table.rows() != vocab.total_size()) {
    throw InvalidInputError("embedding rows " + std::to_string(table.rows()) +
                            " != vocabulary size " + std::to_string(vocab.total_size()));
  }
  if (vocab.text_token_count() == 0) {
    throw InvalidInputError("cannot sample unit embeddings: no text tokens");
  }
  Rng rng(seed);
  for (int u = vocab.unit_begin(); u < vocab.total_size(); ++u) {
    const int src = vocab.text_begin() + rng.uniform_int(vocab.text_token_count());
    table.row(u) = table.row(src);
  }
}

}  // namespace unitqa
