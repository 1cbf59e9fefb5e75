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

// WER-robustness harness: corrupt gold transcripts to a target word error
// rate, score the cascade arm (text model over corrupted transcripts)
// against the end-to-end unit arm (which never reads transcripts), and
// emit the per-level comparison curve. Corruption is measurement-guided:
// edits are applied until the measured WER enters the target window.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "unitqa/beam.hpp"
#include "unitqa/dataset.hpp"
#include "unitqa/errors.hpp"
#include "unitqa/metrics.hpp"
#include "unitqa/model.hpp"
#include "unitqa/rng.hpp"
#include "unitqa/synth.hpp"
#include "unitqa/training.hpp"
#include "unitqa/vocabulary.hpp"

namespace unitqa {

constexpr double kWerTolerance = 0.02;

struct CorruptionSpec {
  double target_wer = 0.0;
  double p_substitution = 0.6;
  double p_insertion = 0.2;
  double p_deletion = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (target_wer < 0.0 || target_wer > 1.0) throw InvalidInputError("target_wer must be in [0,1]");
    if (p_substitution < 0.0 || p_insertion < 0.0 || p_deletion < 0.0) {
      throw InvalidInputError("op-mix proportions must be nonnegative");
    }
    const double sum = p_substitution + p_insertion + p_deletion;
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidInputError("op-mix proportions must sum to 1");
  }
};

struct CorruptionResult {
  std::vector<std::string> tokens;
  double measured_wer = 0.0;
  bool best_effort = false;  // measured WER left outside the target window
  int edit_count = 0;        // raw edit distance to the original
};

namespace robustness_detail {

struct Tagged {
  std::string token;
  int side;  // which input list the token belongs to (insertions inherit a neighbor's)
};

inline std::vector<std::string> untag(const std::vector<Tagged>& tagged, int side) {
  std::vector<std::string> out;
  for (const Tagged& t : tagged) {
    if (t.side == side) out.push_back(t.token);
  }
  return out;
}

// The measurement-guided edit loop over a side-tagged token list. Each
// accepted edit moves the measured WER up by exactly one grid step (edit
// distance is 1-Lipschitz in single edits); overshooting or non-advancing
// edits are rolled back, so the walk stops inside the window whenever the
// WER grid 1/len admits it.
inline std::vector<Tagged> guided_corrupt(const std::vector<Tagged>& original,
                                          const CorruptionSpec& spec,
                                          const std::vector<std::string>& token_pool,
                                          double& measured_out, bool& best_effort_out) {
  std::vector<std::string> ref;
  for (const Tagged& t : original) ref.push_back(t.token);

  std::vector<Tagged> cur = original;
  double measured = 0.0;
  if (spec.target_wer > 0.0) {
    Rng rng(spec.seed);
    auto random_token = [&]() {
      return token_pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(token_pool.size())))];
    };
    int stalls = 0;
    const int max_stalls = 64;
    while (measured < spec.target_wer - kWerTolerance && stalls < max_stalls) {
      std::vector<Tagged> next = cur;
      const double roll = rng.uniform();
      if (roll < spec.p_substitution && !next.empty()) {
        const std::size_t pos = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(next.size())));
        std::string repl = random_token();
        for (int t = 0; t < 16 && repl == next[pos].token; ++t) repl = random_token();
        next[pos].token = repl;
      } else if (roll < spec.p_substitution + spec.p_insertion) {
        const std::size_t pos = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(next.size()) + 1));
        const int side = pos > 0 ? next[pos - 1].side : (next.empty() ? 0 : next[0].side);
        next.insert(next.begin() + static_cast<std::ptrdiff_t>(pos), Tagged{random_token(), side});
      } else if (!next.empty()) {
        const std::size_t pos = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(next.size())));
        next.erase(next.begin() + static_cast<std::ptrdiff_t>(pos));
      }

      std::vector<std::string> hyp;
      for (const Tagged& t : next) hyp.push_back(t.token);
      const double next_wer = wer_tokens(ref, hyp);
      if (next_wer > spec.target_wer + kWerTolerance || next_wer <= measured) {
        ++stalls;  // overshoot or no progress; retry with fresh randomness
        continue;
      }
      cur = std::move(next);
      measured = next_wer;
      stalls = 0;
    }
  }
  measured_out = measured;
  best_effort_out = std::abs(measured - spec.target_wer) > kWerTolerance;
  return cur;
}

}  // namespace robustness_detail

// Applies substitution/insertion/deletion edits drawn from the op mix until
// wer(original, corrupted) lands within +/- kWerTolerance of the target.
// Overshooting edits are rolled back; when the window is unreachable (short
// inputs quantize WER coarsely) the closest achieved state is returned with
// best_effort set.
inline CorruptionResult corrupt_transcript(const std::vector<std::string>& tokens,
                                           const CorruptionSpec& spec,
                                           const std::vector<std::string>& token_pool) {
  spec.validate();
  if (tokens.empty()) throw InvalidInputError("cannot corrupt an empty transcript");
  if (token_pool.empty()) throw InvalidInputError("corruption needs a non-empty token pool");

  std::vector<robustness_detail::Tagged> tagged;
  for (const auto& t : tokens) tagged.push_back({t, 0});
  CorruptionResult r;
  const auto corrupted =
      robustness_detail::guided_corrupt(tagged, spec, token_pool, r.measured_wer, r.best_effort);
  r.tokens = robustness_detail::untag(corrupted, 0);
  r.edit_count = detail::edit_distance(tokens, r.tokens);
  return r;
}

struct PairCorruption {
  std::vector<std::string> question, passage;
  double measured_wer = 0.0;  // over the concatenated question+passage
  bool best_effort = false;
  int edit_count = 0;
  int ref_tokens = 0;
};

// Corrupts question and passage jointly so the measured WER window applies
// to the example as a whole (questions alone are often too short for the
// window to be reachable).
inline PairCorruption corrupt_pair(const std::vector<std::string>& question,
                                   const std::vector<std::string>& passage,
                                   const CorruptionSpec& spec,
                                   const std::vector<std::string>& token_pool) {
  spec.validate();
  if (question.empty() || passage.empty()) throw InvalidInputError("cannot corrupt an empty transcript");
  if (token_pool.empty()) throw InvalidInputError("corruption needs a non-empty token pool");

  std::vector<robustness_detail::Tagged> tagged;
  for (const auto& t : question) tagged.push_back({t, 0});
  for (const auto& t : passage) tagged.push_back({t, 1});

  PairCorruption r;
  const auto corrupted =
      robustness_detail::guided_corrupt(tagged, spec, token_pool, r.measured_wer, r.best_effort);
  r.question = robustness_detail::untag(corrupted, 0);
  r.passage = robustness_detail::untag(corrupted, 1);
  r.ref_tokens = static_cast<int>(question.size() + passage.size());
  std::vector<std::string> ref = question, hyp = r.question;
  ref.insert(ref.end(), passage.begin(), passage.end());
  hyp.insert(hyp.end(), r.passage.begin(), r.passage.end());
  r.edit_count = detail::edit_distance(ref, hyp);
  return r;
}

// Spearman rank correlation with tie-averaged ranks. Returns 0 when either
// side has zero rank variance.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInputError("spearman needs paired data, n >= 2");
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

struct CascadeRun {
  EvalReport report;
  double corpus_measured_wer = 0.0;  // aggregate: total edits / total reference tokens
  bool any_best_effort = false;
};

// Cascade arm: corrupt question and passage transcripts, run the text
// model, score extractively against the gold answer strings.
template <typename S>
CascadeRun run_cascade_arm(const Seq2SeqModel<S>& text_model,
                           const std::vector<ManifestExample>& dataset,
                           const CorruptionSpec& corruption, const Vocabulary& vocab,
                           const std::vector<std::string>& token_pool,
                           const DecodeConfig& decode_config,
                           const std::string& dataset_name = "cascade") {
  if (text_model.steps_trained == 0) {
    throw InvalidStateError("cascade arm requires a trained text model");
  }
  if (dataset.empty()) throw InvalidInputError("cascade arm dataset is empty");

  std::vector<Prediction> preds, golds;
  long long total_edits = 0, total_ref = 0;
  CascadeRun run;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const ManifestExample& ex = dataset[i];
    CorruptionSpec ex_spec = corruption;
    ex_spec.seed = derive_seed(corruption.seed, "corrupt.ex", static_cast<std::uint64_t>(i));
    const PairCorruption c = corrupt_pair(ex.question_text, ex.passage_text, ex_spec, token_pool);
    run.any_best_effort = run.any_best_effort || c.best_effort;
    total_edits += c.edit_count;
    total_ref += c.ref_tokens;

    preds.push_back({ex.id, infer_text_answer(text_model, c.question, c.passage, vocab, decode_config)});
    golds.push_back({ex.id, join_tokens(ex.answer_text)});
  }
  run.report = evaluate_dataset(preds, golds, EvalMode::kExtractive, dataset_name);
  run.corpus_measured_wer = static_cast<double>(total_edits) / static_cast<double>(total_ref);
  return run;
}

struct SweepRow {
  double wer_level_requested = 0.0;
  double wer_level_measured = 0.0;
  double cascade_f1 = 0.0;
  double e2e_f1 = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double spearman_cascade = 0.0;  // correlation of (level, cascade F1)
  bool any_best_effort = false;
};

// End-to-end arm scored once: decode units from the manifest, transcribe
// through the gold phoneme table, compare to the gold answer string.
template <typename S>
EvalReport run_e2e_arm(const Seq2SeqModel<S>& unit_model, const std::vector<ManifestExample>& dataset,
                       const Vocabulary& vocab, const std::vector<int>& phoneme_of_unit,
                       const GoldMap& gold_map, const DecodeConfig& decode_config,
                       const std::string& dataset_name = "e2e") {
  if (unit_model.steps_trained == 0) throw InvalidStateError("end-to-end arm requires a trained unit model");
  if (dataset.empty()) throw InvalidInputError("end-to-end arm dataset is empty");
  std::vector<Prediction> preds, golds;
  for (const ManifestExample& ex : dataset) {
    if (!ex.has_units) throw InvalidInputError("example " + ex.id + " lacks units for the E2E arm");
    const std::vector<int> enc = encode_pair(unit_ids(ex.question_units, vocab),
                                             unit_ids(ex.passage_units, vocab),
                                             unit_model.config.max_len);
    const std::vector<int> out = beam_decode(unit_model, enc, decode_config);
    std::vector<int> units;
    for (const int id : out) {
      if (vocab.is_unit(id)) units.push_back(vocab.unit_of(id));
    }
    preds.push_back({ex.id, join_tokens(transcribe_units(units, phoneme_of_unit, gold_map))});
    golds.push_back({ex.id, join_tokens(ex.answer_text)});
  }
  return evaluate_dataset(preds, golds, EvalMode::kExtractive, dataset_name);
}

// The Fig.-3-shaped sweep: cascade per level, E2E computed once and
// replicated (the unit arm consumes no transcripts, so its column is
// constant by construction).
template <typename S>
SweepResult wer_sweep(const Seq2SeqModel<S>& text_model, const Seq2SeqModel<S>& unit_model,
                      const std::vector<ManifestExample>& dataset, const std::vector<double>& levels,
                      const Vocabulary& vocab, const std::vector<std::string>& token_pool,
                      const std::vector<int>& phoneme_of_unit, const GoldMap& gold_map,
                      const DecodeConfig& decode_config, std::uint64_t seed) {
  if (levels.empty()) throw InvalidInputError("sweep needs at least one WER level");
  if (!std::is_sorted(levels.begin(), levels.end())) {
    throw InvalidInputError("sweep levels must be sorted ascending");
  }

  const EvalReport e2e =
      run_e2e_arm(unit_model, dataset, vocab, phoneme_of_unit, gold_map, decode_config);
  const double e2e_f1 = e2e.f1.value_or(0.0);

  SweepResult result;
  std::vector<double> xs, ys;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    CorruptionSpec spec;
    spec.target_wer = levels[li];
    spec.seed = derive_seed(seed, "sweep.level", static_cast<std::uint64_t>(li));
    const CascadeRun cascade = run_cascade_arm(text_model, dataset, spec, vocab, token_pool,
                                               decode_config, "cascade@" + std::to_string(levels[li]));
    SweepRow row;
    row.wer_level_requested = levels[li];
    row.wer_level_measured = cascade.corpus_measured_wer;
    row.cascade_f1 = cascade.report.f1.value_or(0.0);
    row.e2e_f1 = e2e_f1;
    result.any_best_effort = result.any_best_effort || cascade.any_best_effort;
    xs.push_back(levels[li]);
    ys.push_back(row.cascade_f1);
    result.rows.push_back(row);
  }
  if (levels.size() >= 2) result.spearman_cascade = spearman(xs, ys);
  return result;
}

inline std::string sweep_to_csv(const SweepResult& r) {
  std::string csv = "level_requested,level_measured,cascade_f1,e2e_f1\n";
  char buf[160];
  for (const SweepRow& row : r.rows) {
    std::snprintf(buf, sizeof(buf), "%.4f,%.4f,%.6f,%.6f\n", row.wer_level_requested,
                  row.wer_level_measured, row.cascade_f1, row.e2e_f1);
    csv += buf;
  }
  return csv;
}

}  // namespace unitqa
