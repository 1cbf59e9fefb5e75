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

// QA example records, the JSONL dataset manifest, and training-stage
// hyperparameter specs. One manifest line carries the text view and,
// optionally, the unit view of an example; text-only stages simply omit
// the unit fields.

#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unitqa/errors.hpp"
#include "unitqa/unit_codec.hpp"

namespace unitqa {

inline bool is_contiguous_subsequence(const std::vector<std::string>& needle,
                                      const std::vector<std::string>& hay) {
  if (needle.empty()) return true;
  if (needle.size() > hay.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < needle.size(); ++j) {
      if (hay[i + j] != needle[j]) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  }
  return false;
}

struct TextQAExample {
  std::string id;
  std::string kind;  // "extractive" | "abstractive"
  std::vector<std::string> question_text, passage_text, answer_text;

  void validate() const {
    if (question_text.empty() || passage_text.empty()) {
      throw InvalidInputError("example " + id + ": empty question or passage");
    }
    if (kind != "extractive" && kind != "abstractive") {
      throw InvalidInputError("example " + id + ": unknown kind '" + kind + "'");
    }
    if (kind == "extractive" && !is_contiguous_subsequence(answer_text, passage_text)) {
      throw InvalidInputError("example " + id + ": extractive answer not contiguous in passage");
    }
  }
};

struct UnitQAExample {
  std::string id;
  UnitSequence question_units, passage_units;  // deduplicated
  UnitSequence answer_units;                   // may be empty until converted
  int span_begin_frame = -1, span_end_frame = -1;  // raw passage frames, [begin, end)

  bool has_span() const { return span_begin_frame >= 0 && span_end_frame >= 0; }

  void validate(int k) const {
    question_units.validate();
    passage_units.validate();
    if (!question_units.deduplicated || !passage_units.deduplicated) {
      throw InvalidInputError("example " + id + ": unit sequences must be deduplicated");
    }
    auto check_range = [&](const UnitSequence& s) {
      for (const int u : s.units) {
        if (u < 0 || u >= k) throw InvalidInputError("example " + id + ": unit ID outside codebook");
      }
    };
    check_range(question_units);
    check_range(passage_units);
    if (has_span()) {
      if (span_begin_frame >= span_end_frame || span_end_frame > passage_units.total_frames()) {
        throw InvalidInputError("example " + id + ": span outside passage frames");
      }
    }
  }
};

// The on-disk manifest record: superset of the text and unit views.
struct ManifestExample {
  std::string id;
  std::string kind;
  std::vector<std::string> question_text, passage_text, answer_text;
  bool has_units = false;
  UnitSequence question_units, passage_units;
  int span_begin_frame = -1, span_end_frame = -1;

  TextQAExample text_view() const {
    TextQAExample t{id, kind, question_text, passage_text, answer_text};
    t.validate();
    return t;
  }

  UnitQAExample unit_view() const {
    if (!has_units) throw InvalidStateError("example " + id + " carries no units");
    UnitQAExample u;
    u.id = id;
    u.question_units = question_units;
    u.passage_units = passage_units;
    u.span_begin_frame = span_begin_frame;
    u.span_end_frame = span_end_frame;
    return u;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["kind"] = kind;
    j["question_text"] = question_text;
    j["passage_text"] = passage_text;
    j["answer_text"] = answer_text;
    if (has_units) {
      j["question_units"] = question_units.units;
      j["question_durations"] = question_units.durations;
      j["passage_units"] = passage_units.units;
      j["passage_durations"] = passage_units.durations;
    }
    if (span_begin_frame >= 0) j["answer_span_frames"] = {span_begin_frame, span_end_frame};
    return j;
  }

  static ManifestExample from_json(const nlohmann::json& j) {
    ManifestExample e;
    e.id = j.at("id").get<std::string>();
    e.kind = j.at("kind").get<std::string>();
    e.question_text = j.at("question_text").get<std::vector<std::string>>();
    e.passage_text = j.at("passage_text").get<std::vector<std::string>>();
    e.answer_text = j.at("answer_text").get<std::vector<std::string>>();
    if (j.contains("question_units")) {
      e.has_units = true;
      e.question_units.units = j.at("question_units").get<std::vector<int>>();
      e.question_units.durations = j.at("question_durations").get<std::vector<int>>();
      e.question_units.deduplicated = true;
      e.passage_units.units = j.at("passage_units").get<std::vector<int>>();
      e.passage_units.durations = j.at("passage_durations").get<std::vector<int>>();
      e.passage_units.deduplicated = true;
    }
    if (j.contains("answer_span_frames")) {
      const auto span = j.at("answer_span_frames").get<std::vector<int>>();
      if (span.size() != 2) throw InvalidInputError("answer_span_frames must be [begin, end)");
      e.span_begin_frame = span[0];
      e.span_end_frame = span[1];
    }
    return e;
  }
};

inline void write_manifest(const std::string& path, const std::vector<ManifestExample>& examples) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path);
  for (const auto& e : examples) out << e.to_json().dump() << "\n";
  if (!out) throw Error("write failed: " + path);
}

inline std::vector<ManifestExample> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open for reading: " + path);
  std::vector<ManifestExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(ManifestExample::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInputError(path + ":" + std::to_string(lineno) + ": bad manifest line: " + e.what());
    }
  }
  return out;
}

struct TrainSpec {
  std::string stage;  // "pretrain_tqa" | "finetune_unit"
  int epochs = 1;
  double lr = 1e-3;
  double weight_decay = 0.0;
  int batch_size = 8;
  std::uint64_t seed = 0;

  // Paper-echo defaults for the two stages.
  static TrainSpec pretrain_defaults() { return {"pretrain_tqa", 13, 0.0005, 0.01, 8, 0}; }
  static TrainSpec finetune_defaults() { return {"finetune_unit", 25, 0.0003, 0.001, 8, 0}; }

  void validate() const {
    if (stage != "pretrain_tqa" && stage != "finetune_unit") {
      throw InvalidInputError("unknown training stage '" + stage + "'");
    }
    if (epochs < 1) throw InvalidInputError("epochs must be positive");
    if (lr <= 0.0) throw InvalidInputError("lr must be positive");
    if (weight_decay < 0.0) throw InvalidInputError("weight_decay must be nonnegative");
    if (batch_size < 1) throw InvalidInputError("batch_size must be positive");
  }

  nlohmann::ordered_json to_json() const {
    return {{"stage", stage},     {"epochs", epochs},         {"lr", lr},
            {"weight_decay", weight_decay}, {"batch_size", batch_size}, {"seed", seed}};
  }

  // Starts from the stage's defaults, then applies overrides present in j.
  static TrainSpec from_json(const nlohmann::json& j) {
    const std::string stage = j.at("stage").get<std::string>();
    TrainSpec s = stage == "finetune_unit" ? finetune_defaults() : pretrain_defaults();
    s.stage = stage;
    if (j.contains("epochs")) s.epochs = j.at("epochs").get<int>();
    if (j.contains("lr")) s.lr = j.at("lr").get<double>();
    if (j.contains("weight_decay")) s.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("batch_size")) s.batch_size = j.at("batch_size").get<int>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    s.validate();
    return s;
  }
};

}  // namespace unitqa
