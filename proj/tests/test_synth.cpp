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

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "unitqa/kmeans.hpp"
#include "unitqa/rng.hpp"
#include "unitqa/synth.hpp"

using namespace unitqa;

namespace {

GeneratorSpec small_spec() {
  GeneratorSpec s;
  s.phoneme_count = 12;
  s.feature_dim = 12;
  s.prototype_separation = 10.0;
  s.jitter_sigma = 0.3;
  s.vocab_words = 12;
  s.entity_words = 6;
  s.word_min_phonemes = 2;
  s.word_max_phonemes = 3;
  s.passage_min_tokens = 6;
  s.passage_max_tokens = 12;
  s.span_min_tokens = 2;
  s.span_max_tokens = 3;
  s.spans_per_passage = 2;
  s.duration_min = 2;
  s.duration_max = 3;
  s.n_train = 24;
  s.n_unit_train = 24;
  s.n_dev = 6;
  s.n_test = 6;
  s.abstractive_fraction = 1.0;
  s.seed = 7;
  return s;
}

// Codebook whose centroids are exactly the gold prototypes, so per-frame
// assignment recovers the true phoneme whenever jitter stays small.
Codebook gold_codebook(const GoldMap& gold) {
  Codebook cb;
  cb.centroids = gold.prototypes;
  cb.k = static_cast<int>(gold.prototypes.rows());
  cb.feature_dim = static_cast<int>(gold.prototypes.cols());
  return cb;
}

struct ParsedSpan {
  std::string selector;
  std::vector<std::string> words;   // entity words between the markers
  std::size_t first_tok, last_tok;  // entity token positions in the passage
};

// Parses every [marker_begin selector entities... marker_end] block and
// rejects malformed bracketing.
std::vector<ParsedSpan> parse_spans(const SynthExample& ex, const GoldMap& gold) {
  std::vector<ParsedSpan> spans;
  const auto& p = ex.passage_text;
  std::size_t i = 0;
  while (i < p.size()) {
    if (p[i] != gold.marker_begin) {
      REQUIRE(p[i] != gold.marker_end);
      ++i;
      continue;
    }
    ParsedSpan s;
    REQUIRE(i + 1 < p.size());
    s.selector = p[i + 1];
    s.first_tok = i + 2;
    i += 2;
    while (i < p.size() && p[i] != gold.marker_end) {
      REQUIRE(p[i] != gold.marker_begin);
      s.words.push_back(p[i]);
      ++i;
    }
    REQUIRE(i < p.size());
    s.last_tok = i - 1;
    ++i;
    spans.push_back(std::move(s));
  }
  return spans;
}

// The span whose selector the question names; requires the match be unique.
const ParsedSpan& selected_span(const std::vector<ParsedSpan>& spans, const SynthExample& ex) {
  REQUIRE(ex.question_text.size() == 3);
  const ParsedSpan* hit = nullptr;
  for (const auto& s : spans) {
    if (s.selector == ex.question_text[1]) {
      REQUIRE(hit == nullptr);
      hit = &s;
    }
  }
  REQUIRE(hit != nullptr);
  return *hit;
}

}  // namespace

TEST_CASE("corpus has the requested shape") {
  const GeneratorSpec spec = small_spec();
  const Corpus c = generate_corpus(spec);
  CHECK(c.text_train.size() == 24);
  CHECK(c.unit_train.size() == 24);
  CHECK(c.unit_dev.size() == 6);
  CHECK(c.unit_test.size() == 6);
  CHECK(c.unit_abs.size() == 6);  // abstractive_fraction 1.0 of n_test

  // Text pretraining split alternates tasks and carries no features.
  for (std::size_t i = 0; i < c.text_train.size(); ++i) {
    const auto& ex = c.text_train[i];
    CHECK(ex.id == "txtr-" + std::to_string(i));
    CHECK(ex.kind == (i % 2 == 1 ? "abstractive" : "extractive"));
    CHECK_FALSE(ex.has_features);
  }
  for (const auto& ex : c.unit_train) {
    CHECK(ex.kind == "extractive");
    CHECK(ex.has_features);
  }
  for (const auto& ex : c.unit_abs) {
    CHECK(ex.kind == "abstractive");
    CHECK(ex.has_features);
  }

  // 12 filler words, 6 entity words, 2 selector words, five control words.
  CHECK(c.gold.words.size() == 25);
  CHECK(c.gold.selectors == (std::vector<std::string>{"sl0", "sl1"}));
  for (const auto& [word, sp] : c.gold.spellings) {
    REQUIRE(sp.size() >= 3);  // delimiter + at least word_min_phonemes
    CHECK(sp[0] == 0);
    for (std::size_t i = 1; i < sp.size(); ++i) {
      CHECK(sp[i] >= 1);
      CHECK(sp[i] < spec.phoneme_count);
      if (i + 1 < sp.size()) CHECK(sp[i] != sp[i + 1]);
    }
  }
}

TEST_CASE("generation is deterministic") {
  const GeneratorSpec spec = small_spec();
  const Corpus a = generate_corpus(spec);
  const Corpus b = generate_corpus(spec);
  REQUIRE(a.gold.to_json().dump() == b.gold.to_json().dump());
  auto same_split = [](const std::vector<SynthExample>& x, const std::vector<SynthExample>& y) {
    REQUIRE(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(x[i].id == y[i].id);
      CHECK(x[i].question_text == y[i].question_text);
      CHECK(x[i].passage_text == y[i].passage_text);
      CHECK(x[i].answer_text == y[i].answer_text);
      CHECK(x[i].span_begin_frame == y[i].span_begin_frame);
      CHECK(x[i].span_end_frame == y[i].span_end_frame);
      if (x[i].has_features) {
        CHECK(x[i].question_features.frames == y[i].question_features.frames);
        CHECK(x[i].passage_features.frames == y[i].passage_features.frames);
      }
    }
  };
  same_split(a.text_train, b.text_train);
  same_split(a.unit_train, b.unit_train);
  same_split(a.unit_dev, b.unit_dev);
  same_split(a.unit_test, b.unit_test);
  same_split(a.unit_abs, b.unit_abs);

  GeneratorSpec other = spec;
  other.seed = 8;
  const Corpus d = generate_corpus(other);
  CHECK(a.gold.to_json().dump() != d.gold.to_json().dump());
}

TEST_CASE("extractive answers are the span the question selects") {
  const Corpus c = generate_corpus(small_spec());
  bool saw_non_first_target = false;
  for (const auto& ex : c.unit_train) {
    const auto spans = parse_spans(ex, c.gold);
    REQUIRE(spans.size() == 2);
    CHECK(spans[0].selector != spans[1].selector);
    for (const auto& s : spans) {
      CHECK(s.words.size() >= 2);
      CHECK(s.words.size() <= 3);
    }
    const ParsedSpan& sel = selected_span(spans, ex);
    CHECK(ex.answer_text == sel.words);
    CHECK(ex.question_text[0] == c.gold.question_extractive);
    if (&sel != &spans[0]) saw_non_first_target = true;
  }
  // The question genuinely discriminates: not every target is the first span.
  CHECK(saw_non_first_target);
}

TEST_CASE("entity words appear only inside marked spans") {
  const Corpus c = generate_corpus(small_spec());
  auto is_entity = [](const std::string& w) { return !w.empty() && w[0] == 'e'; };
  auto check_split = [&](const std::vector<SynthExample>& split) {
    for (const auto& ex : split) {
      for (const auto& w : ex.answer_text) {
        if (w != c.gold.connector) CHECK(is_entity(w));
      }
      std::vector<bool> in_span(ex.passage_text.size(), false);
      for (const auto& s : parse_spans(ex, c.gold)) {
        for (std::size_t i = s.first_tok; i <= s.last_tok; ++i) in_span[i] = true;
      }
      for (std::size_t i = 0; i < ex.passage_text.size(); ++i) {
        CHECK(is_entity(ex.passage_text[i]) == in_span[i]);
      }
      // The question names a selector plus a filler; answer words never leak.
      REQUIRE(ex.question_text.size() == 3);
      CHECK(ex.question_text[1].rfind("sl", 0) == 0);
      CHECK(ex.question_text[2].rfind("w", 0) == 0);
    }
  };
  check_split(c.text_train);
  check_split(c.unit_train);
  check_split(c.unit_dev);
  check_split(c.unit_abs);
}

TEST_CASE("abstractive answers are never a contiguous passage subsequence") {
  const Corpus c = generate_corpus(small_spec());
  for (const auto& ex : c.unit_abs) {
    REQUIRE(ex.answer_text.size() == 3);
    CHECK(ex.answer_text[1] == c.gold.connector);
    const auto spans = parse_spans(ex, c.gold);
    const ParsedSpan& sel = selected_span(spans, ex);
    CHECK(ex.answer_text[0] == sel.words.front());
    CHECK(ex.answer_text[2] == sel.words.back());
    CHECK(std::count(ex.passage_text.begin(), ex.passage_text.end(), c.gold.connector) == 0);
    CHECK(ex.question_text[0] == c.gold.question_abstractive);

    bool contiguous = false;
    for (std::size_t i = 0; i + ex.answer_text.size() <= ex.passage_text.size(); ++i) {
      contiguous = contiguous ||
                   std::equal(ex.answer_text.begin(), ex.answer_text.end(),
                              ex.passage_text.begin() + static_cast<long>(i));
    }
    CHECK_FALSE(contiguous);
  }
}

TEST_CASE("abstractive passages never collide with the fine-tune split") {
  const Corpus c = generate_corpus(small_spec());
  std::set<std::vector<std::string>> train_passages;
  for (const auto& ex : c.unit_train) train_passages.insert(ex.passage_text);
  for (const auto& ex : c.unit_abs) {
    CHECK(train_passages.count(ex.passage_text) == 0);
  }
}

TEST_CASE("token frame spans tile the feature stream") {
  const GeneratorSpec spec = small_spec();
  const Corpus c = generate_corpus(spec);
  Rng rng(99);
  const std::vector<std::string> toks = {"w0", "mkb", "w1", "w2", "mke", "w3"};
  const GeneratedFeatures gf = generate_features(toks, spec, c.gold, rng);
  REQUIRE(gf.token_spans.size() == toks.size());
  CHECK(gf.token_spans.front().first == 0);
  for (std::size_t i = 1; i < gf.token_spans.size(); ++i) {
    CHECK(gf.token_spans[i].first == gf.token_spans[i - 1].second);
  }
  CHECK(gf.token_spans.back().second == static_cast<int>(gf.features.num_frames()));
  CHECK(gf.features.dim() == spec.feature_dim);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const int n_ph = static_cast<int>(c.gold.spellings.at(toks[i]).size());
    const int len = gf.token_spans[i].second - gf.token_spans[i].first;
    CHECK(len >= n_ph * spec.duration_min);
    CHECK(len <= n_ph * spec.duration_max);
  }

  CHECK_THROWS_AS(generate_features({"no-such-word"}, spec, c.gold, rng), InvalidInputError);
  CHECK_THROWS_AS(generate_features({}, spec, c.gold, rng), InvalidInputError);
}

TEST_CASE("features transcribe back to the exact token sequences") {
  const Corpus c = generate_corpus(small_spec());
  const Codebook cb = gold_codebook(c.gold);
  const std::vector<int> map = unit_to_phoneme(cb, c.gold);
  REQUIRE(map.size() == static_cast<std::size_t>(cb.k));
  for (int u = 0; u < cb.k; ++u) CHECK(map[static_cast<std::size_t>(u)] == u);

  for (const auto& ex : c.unit_dev) {
    const std::vector<int> qu = assign_units(ex.question_features, cb);
    const std::vector<int> pu = assign_units(ex.passage_features, cb);
    CHECK(transcribe_units(qu, map, c.gold) == ex.question_text);
    CHECK(transcribe_units(pu, map, c.gold) == ex.passage_text);
  }
}

TEST_CASE("span frames carve out exactly the answer words") {
  const Corpus c = generate_corpus(small_spec());
  const Codebook cb = gold_codebook(c.gold);
  const std::vector<int> map = unit_to_phoneme(cb, c.gold);
  for (const auto& ex : c.unit_test) {
    REQUIRE(ex.span_begin_frame >= 0);
    REQUIRE(ex.span_end_frame > ex.span_begin_frame);
    REQUIRE(ex.span_end_frame <= static_cast<int>(ex.passage_features.num_frames()));
    FrameFeatures span;
    span.frames = ex.passage_features.frames.middleRows(
        ex.span_begin_frame, ex.span_end_frame - ex.span_begin_frame);
    const std::vector<int> su = assign_units(span, cb);
    CHECK(transcribe_units(su, map, c.gold) == ex.answer_text);
  }
}

TEST_CASE("trained codebook stays phoneme-pure") {
  const GeneratorSpec spec = small_spec();
  const Corpus c = generate_corpus(spec);
  std::vector<FrameFeatures> feats;
  for (const auto& ex : c.unit_train) {
    feats.push_back(ex.question_features);
    feats.push_back(ex.passage_features);
  }
  const Codebook trained = train_codebook(feats, spec.phoneme_count, 50, /*seed=*/5);
  const Codebook gold_cb = gold_codebook(c.gold);
  const std::vector<int> phoneme_of_unit = unit_to_phoneme(trained, c.gold);

  // Composing trained assignment with the centroid->prototype map must agree
  // with direct nearest-prototype labeling on almost every frame.
  long long agree = 0;
  long long total = 0;
  for (const auto& ex : c.unit_dev) {
    const std::vector<int> via_trained = assign_units(ex.passage_features, trained);
    const std::vector<int> direct = assign_units(ex.passage_features, gold_cb);
    for (std::size_t i = 0; i < direct.size(); ++i) {
      agree += phoneme_of_unit[static_cast<std::size_t>(via_trained[i])] == direct[i] ? 1 : 0;
      ++total;
    }
  }
  INFO("agreement " << agree << "/" << total);
  CHECK(static_cast<double>(agree) >= 0.99 * static_cast<double>(total));
}

TEST_CASE("unit_to_phoneme tolerates centroid offsets") {
  const Corpus c = generate_corpus(small_spec());
  Codebook cb = gold_codebook(c.gold);
  cb.centroids.array() += 0.11f;  // still far closer to the original prototype
  const std::vector<int> map = unit_to_phoneme(cb, c.gold);
  for (int u = 0; u < cb.k; ++u) CHECK(map[static_cast<std::size_t>(u)] == u);
}

TEST_CASE("transcription flags unparseable segments") {
  const Corpus c = generate_corpus(small_spec());
  const Codebook cb = gold_codebook(c.gold);
  const std::vector<int> map = unit_to_phoneme(cb, c.gold);
  const std::string w = c.gold.words[0];
  const std::vector<int>& spelling = c.gold.spellings.at(w);

  CHECK(transcribe_units(spelling, map, c.gold) == std::vector<std::string>{w});

  std::vector<int> two = spelling;
  two.insert(two.end(), c.gold.spellings.at(c.gold.words[1]).begin(),
             c.gold.spellings.at(c.gold.words[1]).end());
  CHECK(transcribe_units(two, map, c.gold) ==
        (std::vector<std::string>{w, c.gold.words[1]}));

  // Missing the word-initial delimiter: not a word.
  const std::vector<int> headless(spelling.begin() + 1, spelling.end());
  CHECK(transcribe_units(headless, map, c.gold) == std::vector<std::string>{"<?>"});

  // One lone content phoneme cannot spell any word (word_min_phonemes = 2).
  CHECK(transcribe_units({0, 3}, map, c.gold) == std::vector<std::string>{"<?>"});

  CHECK(transcribe_units({}, map, c.gold).empty());
  CHECK_THROWS_AS(transcribe_units({0, 999}, map, c.gold), InvalidInputError);
}

TEST_CASE("generator spec JSON round trips with partial overrides") {
  const GeneratorSpec defaults;
  CHECK(GeneratorSpec::from_json(nlohmann::json::object()).to_json().dump() ==
        defaults.to_json().dump());

  const GeneratorSpec patched = GeneratorSpec::from_json({{"n_train", 7}, {"seed", 3}});
  CHECK(patched.n_train == 7);
  CHECK(patched.seed == 3);
  CHECK(patched.phoneme_count == defaults.phoneme_count);
  CHECK(patched.passage_max_tokens == defaults.passage_max_tokens);

  const GeneratorSpec full = small_spec();
  CHECK(GeneratorSpec::from_json(full.to_json()).to_json().dump() == full.to_json().dump());

  CHECK_THROWS_AS(GeneratorSpec::from_json({{"duration_min", 1}}), InvalidInputError);
  CHECK_THROWS_AS(GeneratorSpec::from_json({{"phoneme_count", 2}}), InvalidInputError);
  CHECK_THROWS_AS(GeneratorSpec::from_json({{"entity_words", 1}}), InvalidInputError);
  CHECK_THROWS_AS(GeneratorSpec::from_json({{"spans_per_passage", 0}}), InvalidInputError);
  CHECK_THROWS_AS(GeneratorSpec::from_json({{"jitter_sigma", 3.0}}), InvalidInputError);
  CHECK_THROWS_AS(GeneratorSpec::from_json({{"span_min_tokens", 5}, {"span_max_tokens", 4}}),
                  InvalidInputError);
}

TEST_CASE("gold map survives a JSON round trip") {
  const Corpus c = generate_corpus(small_spec());
  const nlohmann::json j = nlohmann::json::parse(c.gold.to_json().dump());
  const GoldMap g = GoldMap::from_json(j);
  CHECK(g.words == c.gold.words);
  CHECK(g.spellings == c.gold.spellings);
  CHECK(g.prototypes == c.gold.prototypes);
  CHECK(g.marker_begin == c.gold.marker_begin);
  CHECK(g.marker_end == c.gold.marker_end);
  CHECK(g.question_extractive == c.gold.question_extractive);
  CHECK(g.question_abstractive == c.gold.question_abstractive);
  CHECK(g.connector == c.gold.connector);
  CHECK(g.selectors == c.gold.selectors);
}
