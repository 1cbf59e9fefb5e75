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

// Length-penalized beam search over the seq2seq model. Hypotheses are
// ranked during expansion by raw cumulative log-probability; finished
// hypotheses compete on cum_logprob / lp(n) with the GNMT penalty
// lp(n) = ((5 + n) / 6)^alpha, n counting generated tokens including EOS.
// Ties break by score descending, then token sequence ascending.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "unitqa/errors.hpp"
#include "unitqa/model.hpp"

namespace unitqa {

struct DecodeConfig {
  int beam_size = 5;
  double length_penalty_alpha = 2.0;
  int max_new_tokens = 64;
  int bos_id = 1;
  int eos_id = 2;

  void validate() const {
    if (beam_size < 1) throw InvalidInputError("beam_size must be >= 1");
    if (max_new_tokens < 1) throw InvalidInputError("max_new_tokens must be >= 1");
    if (length_penalty_alpha < 0.0) throw InvalidInputError("length_penalty_alpha must be >= 0");
  }
};

inline double length_penalty(int n, double alpha) {
  return std::pow((5.0 + static_cast<double>(n)) / 6.0, alpha);
}

namespace detail {

struct Hypothesis {
  std::vector<int> tokens;  // generated tokens, BOS excluded, EOS included if emitted
  double cum_logprob = 0.0;
};

struct Finished {
  std::vector<int> tokens;
  double score = 0.0;
};

inline bool better_finished(const Finished& a, const Finished& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

}  // namespace detail

// Decodes one sequence. Returns generated token IDs (no BOS; EOS kept when
// produced) so callers can strip specials as they see fit.
template <typename S>
std::vector<int> beam_decode(const Seq2SeqModel<S>& model, const std::vector<int>& encoder_ids,
                             const DecodeConfig& cfg) {
  cfg.validate();
  const auto enc = model.encode(encoder_ids);

  std::vector<detail::Hypothesis> alive{detail::Hypothesis{}};
  std::vector<detail::Finished> finished;

  const int vocab = model.vocab_size();
  const int max_steps =
      std::min(cfg.max_new_tokens, model.config.max_len - 1);  // room for the BOS prefix

  for (int step = 0; step < max_steps && !alive.empty(); ++step) {
    struct Cand {
      std::vector<int> tokens;
      double cum_logprob;
    };
    std::vector<Cand> cands;
    cands.reserve(alive.size() * static_cast<std::size_t>(vocab));
    for (const auto& hyp : alive) {
      std::vector<int> dec_ids;
      dec_ids.reserve(hyp.tokens.size() + 1);
      dec_ids.push_back(cfg.bos_id);
      dec_ids.insert(dec_ids.end(), hyp.tokens.begin(), hyp.tokens.end());
      const auto dec = model.decode(enc.h, enc.real, dec_ids);
      const Mat<S> lg = model.logits(dec.h);
      const auto lp = log_softmax_row(lg, lg.rows() - 1);
      for (int v = 0; v < vocab; ++v) {
        Cand c;
        c.tokens = hyp.tokens;
        c.tokens.push_back(v);
        c.cum_logprob = hyp.cum_logprob + lp[static_cast<std::size_t>(v)];
        cands.push_back(std::move(c));
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.cum_logprob != b.cum_logprob) return a.cum_logprob > b.cum_logprob;
      return a.tokens < b.tokens;
    });
    if (cands.size() > static_cast<std::size_t>(cfg.beam_size)) {
      cands.resize(static_cast<std::size_t>(cfg.beam_size));
    }

    alive.clear();
    for (auto& c : cands) {
      if (c.tokens.back() == cfg.eos_id) {
        const int n = static_cast<int>(c.tokens.size());
        finished.push_back({std::move(c.tokens),
                            c.cum_logprob / length_penalty(n, cfg.length_penalty_alpha)});
      } else {
        alive.push_back({std::move(c.tokens), c.cum_logprob});
      }
    }
  }
  // Hypotheses that hit the length cap finish as-is.
  for (auto& hyp : alive) {
    const int n = static_cast<int>(hyp.tokens.size());
    finished.push_back(
        {std::move(hyp.tokens), hyp.cum_logprob / length_penalty(n, cfg.length_penalty_alpha)});
  }
  if (finished.empty()) throw InvalidStateError("beam search produced no hypotheses");
  auto best = finished.begin();
  for (auto it = std::next(finished.begin()); it != finished.end(); ++it) {
    if (detail::better_finished(*it, *best)) best = it;
  }
  return best->tokens;
}

// Greedy decoding is beam search with a single beam.
template <typename S>
std::vector<int> greedy_decode(const Seq2SeqModel<S>& model, const std::vector<int>& encoder_ids,
                               int max_new_tokens, int bos_id = 1, int eos_id = 2) {
  DecodeConfig cfg;
  cfg.beam_size = 1;
  cfg.max_new_tokens = max_new_tokens;
  cfg.bos_id = bos_id;
  cfg.eos_id = eos_id;
  return beam_decode(model, encoder_ids, cfg);
}

}  // namespace unitqa
