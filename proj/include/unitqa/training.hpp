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

// Two-stage training: text-QA pretraining, span-to-unit label conversion,
// unit fine-tuning, plus decoding helpers for both the text (cascade) and
// unit (end-to-end) inference paths. Batches bucket by encoder length;
// batch order is reshuffled per epoch from the stage seed, so arms sharing
// a seed see identical data order.

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "unitqa/beam.hpp"
#include "unitqa/dataset.hpp"
#include "unitqa/errors.hpp"
#include "unitqa/kmeans.hpp"
#include "unitqa/model.hpp"
#include "unitqa/optim.hpp"
#include "unitqa/rng.hpp"
#include "unitqa/synth.hpp"
#include "unitqa/unit_codec.hpp"
#include "unitqa/vocabulary.hpp"

namespace unitqa {

// A_u = RLE of the raw (frame-level) passage units inside the span.
inline UnitSequence convert_extractive_to_unit_labels(const UnitSequence& passage_units,
                                                      int span_begin_frame, int span_end_frame) {
  const std::vector<int> raw = rle_decode(passage_units);
  if (span_begin_frame < 0 || span_end_frame > static_cast<int>(raw.size()) ||
      span_begin_frame >= span_end_frame) {
    throw InvalidInputError("answer span outside passage frame range");
  }
  const std::vector<int> slice(raw.begin() + span_begin_frame, raw.begin() + span_end_frame);
  return rle_encode(slice);
}

inline std::vector<int> text_ids(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.text_id(t));
  return ids;
}

inline std::vector<int> unit_ids(const UnitSequence& seq, const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(seq.units.size());
  for (const int u : seq.units) ids.push_back(vocab.unit_id(u));
  return ids;
}

inline TrainExample make_text_train_example(const TextQAExample& ex, const Vocabulary& vocab,
                                            int max_len) {
  ex.validate();
  TrainExample t;
  t.encoder_ids = encode_pair(text_ids(ex.question_text, vocab), text_ids(ex.passage_text, vocab),
                              max_len);
  const std::vector<int> ans = text_ids(ex.answer_text, vocab);
  t.decoder_input_ids.push_back(Vocabulary::kBos);
  t.decoder_input_ids.insert(t.decoder_input_ids.end(), ans.begin(), ans.end());
  t.target_ids = ans;
  t.target_ids.push_back(Vocabulary::kEos);
  return t;
}

inline TrainExample make_unit_train_example(const UnitQAExample& ex, const Vocabulary& vocab,
                                            int max_len) {
  if (!ex.has_span()) throw InvalidInputError("example " + ex.id + ": unit training needs a span");
  const UnitSequence a_u =
      convert_extractive_to_unit_labels(ex.passage_units, ex.span_begin_frame, ex.span_end_frame);
  TrainExample t;
  t.encoder_ids = encode_pair(unit_ids(ex.question_units, vocab), unit_ids(ex.passage_units, vocab),
                              max_len);
  const std::vector<int> ans = unit_ids(a_u, vocab);
  t.decoder_input_ids.push_back(Vocabulary::kBos);
  t.decoder_input_ids.insert(t.decoder_input_ids.end(), ans.begin(), ans.end());
  t.target_ids = ans;
  t.target_ids.push_back(Vocabulary::kEos);
  return t;
}

// Length-bucketed batches with per-epoch shuffled batch order; returns the
// per-epoch mean losses.
template <typename S>
std::vector<double> run_training(Seq2SeqModel<S>& model, std::vector<TrainExample> examples,
                                 const TrainSpec& spec) {
  spec.validate();
  if (examples.empty()) throw InvalidInputError("empty training dataset");
  for (const TrainExample& ex : examples) {
    if (static_cast<int>(ex.target_ids.size()) + 1 > model.config.max_len) {
      throw InvalidInputError("training target exceeds max_len");
    }
  }
  std::stable_sort(examples.begin(), examples.end(),
                   [](const TrainExample& a, const TrainExample& b) {
                     return a.encoder_ids.size() < b.encoder_ids.size();
                   });
  std::vector<std::vector<TrainExample>> batches;
  for (std::size_t i = 0; i < examples.size(); i += static_cast<std::size_t>(spec.batch_size)) {
    const std::size_t end = std::min(examples.size(), i + static_cast<std::size_t>(spec.batch_size));
    batches.emplace_back(examples.begin() + static_cast<std::ptrdiff_t>(i),
                         examples.begin() + static_cast<std::ptrdiff_t>(end));
  }

  Trainer<S> trainer(&model);
  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(spec.epochs));
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    std::vector<std::size_t> order(batches.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(spec.seed, "train.epoch", static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);

    DropoutStream<S> drop(derive_seed(spec.seed, "train.dropout", static_cast<std::uint64_t>(epoch)),
                          model.config.dropout);
    DropoutStream<S>* drop_ptr = model.config.dropout > 0.0 ? &drop : nullptr;

    double sum = 0.0;
    for (const std::size_t b : order) {
      sum += trainer.train_step(batches[b], spec.lr, spec.weight_decay, Vocabulary::kPad, drop_ptr);
    }
    curve.push_back(sum / static_cast<double>(batches.size()));
  }
  return curve;
}

template <typename S>
std::vector<double> pretrain_tqa(Seq2SeqModel<S>& model, const std::vector<TextQAExample>& dataset,
                                 const Vocabulary& vocab, const TrainSpec& spec) {
  if (spec.stage != "pretrain_tqa") throw InvalidInputError("spec.stage must be pretrain_tqa");
  if (dataset.empty()) throw InvalidInputError("empty pretraining dataset");
  // Pretraining may run on a text-only model (units extended later).
  if (model.vocab_size() < vocab.text_end()) {
    throw InvalidStateError("model vocabulary smaller than the text vocabulary");
  }
  std::vector<TrainExample> train;
  train.reserve(dataset.size());
  for (const auto& ex : dataset) train.push_back(make_text_train_example(ex, vocab, model.config.max_len));
  return run_training(model, std::move(train), spec);
}

template <typename S>
std::vector<double> finetune_unit(Seq2SeqModel<S>& model, const std::vector<UnitQAExample>& dataset,
                                  const Vocabulary& vocab, const TrainSpec& spec) {
  if (spec.stage != "finetune_unit") throw InvalidInputError("spec.stage must be finetune_unit");
  if (dataset.empty()) throw InvalidInputError("empty fine-tuning dataset");
  if (vocab.unit_token_count() == 0) {
    throw InvalidStateError("vocabulary has no unit tokens; extend it before fine-tuning");
  }
  if (model.vocab_size() != vocab.total_size()) {
    throw InvalidStateError("model vocabulary size does not match vocabulary");
  }
  std::vector<TrainExample> train;
  train.reserve(dataset.size());
  for (const auto& ex : dataset) train.push_back(make_unit_train_example(ex, vocab, model.config.max_len));
  return run_training(model, std::move(train), spec);
}

// --- Inference paths ---

struct InferResult {
  UnitSequence answer;          // deduplicated units with predicted durations
  std::vector<int> raw_units;   // duration-expanded frame-level stream
  bool empty_answer = false;    // decode produced no unit tokens
};

// Quantize question/passage features, decode, keep unit tokens, re-expand
// with the duration model. The raw stream is what a vocoder would consume.
template <typename S>
InferResult infer_answer(const Seq2SeqModel<S>& model, const FrameFeatures& question_features,
                         const FrameFeatures& passage_features, const Codebook& codebook,
                         const DurationModel& duration_model, const Vocabulary& vocab,
                         const DecodeConfig& decode_config) {
  const UnitSequence q_u = rle_encode(assign_units(question_features, codebook));
  const UnitSequence p_u = rle_encode(assign_units(passage_features, codebook));
  const std::vector<int> enc =
      encode_pair(unit_ids(q_u, vocab), unit_ids(p_u, vocab), model.config.max_len);
  const std::vector<int> out = beam_decode(model, enc, decode_config);

  InferResult r;
  r.answer.deduplicated = true;
  for (const int id : out) {
    if (!vocab.is_unit(id)) continue;
    const int u = vocab.unit_of(id);
    // The decoder may emit repeats; the answer stays deduplicated.
    if (!r.answer.units.empty() && r.answer.units.back() == u) continue;
    r.answer.units.push_back(u);
  }
  r.empty_answer = r.answer.units.empty();
  r.answer = duration_model.expand(r.answer.units);
  r.answer.deduplicated = true;  // adjacent repeats were collapsed above
  r.raw_units = rle_decode(r.answer);
  return r;
}

// Cascade path: text in, text out. Returns the detokenized answer string.
template <typename S>
std::string infer_text_answer(const Seq2SeqModel<S>& model,
                              const std::vector<std::string>& question_text,
                              const std::vector<std::string>& passage_text, const Vocabulary& vocab,
                              const DecodeConfig& decode_config) {
  const std::vector<int> enc = encode_pair(text_ids(question_text, vocab),
                                           text_ids(passage_text, vocab), model.config.max_len);
  const std::vector<int> out = beam_decode(model, enc, decode_config);
  std::string s;
  for (const int id : out) {
    if (!vocab.is_text(id)) continue;
    if (!s.empty()) s += ' ';
    s += vocab.token_of(id);
  }
  return s;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string s;
  for (const auto& t : tokens) {
    if (!s.empty()) s += ' ';
    s += t;
  }
  return s;
}

}  // namespace unitqa
