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

// Deterministic synthetic "spoken" QA corpus with a known unit<->token
// mapping. Words are spelled as phoneme sequences, every word starting with
// the delimiter phoneme 0; phonemes map to well-separated prototype vectors
// so a trained codebook recovers them.
//
// Each passage embeds spans_per_passage marked spans, every span tagged with
// a distinct selector word: [mkb sl_k <entities> mke]. The question names one
// selector and the answer is that span. Extractive answers are the selected
// span verbatim; abstractive answers join its first and last words with a
// connector word that never occurs in passages, so they are never a
// contiguous passage subsequence. Selection is what makes the task QA rather
// than trigger-copying: a model must route "which span" information from the
// question to the right passage location, the same question-passage matching
// a text QA model learns, so competence transfers across modalities.
//
// Answer spans draw from a dedicated entity vocabulary (e0, e1, ...) that
// never appears as filler, mirroring answers being named entities. This
// keeps the task solvable by reading rather than memorizing: with spans
// drawn from the filler pool, every occurrence of a span word elsewhere in
// the passage is an equally attractive copy target and models memorize the
// training set instead of learning the marker rule.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "unitqa/errors.hpp"
#include "unitqa/kmeans.hpp"
#include "unitqa/rng.hpp"
#include "unitqa/unit_codec.hpp"

namespace unitqa {

struct GeneratorSpec {
  int phoneme_count = 40;  // includes delimiter phoneme 0
  int feature_dim = 16;
  double prototype_separation = 10.0;
  double jitter_sigma = 0.3;
  int vocab_words = 50;   // filler words besides entities and control words
  int entity_words = 10;  // span-only answer words, disjoint from fillers
  int word_min_phonemes = 2;
  int word_max_phonemes = 3;  // content phonemes per word (delimiter excluded)
  int passage_min_tokens = 30;
  int passage_max_tokens = 80;
  int span_min_tokens = 2;
  int span_max_tokens = 4;
  int spans_per_passage = 2;  // marked spans per passage, one selector each
  int duration_min = 2;
  int duration_max = 3;  // frames per phoneme occurrence
  int n_train = 2000;      // text QA examples (abundant)
  int n_unit_train = 250;  // spoken QA examples (scarce, the low-resource side)
  int n_dev = 200;
  int n_test = 200;
  double abstractive_fraction = 1.0;  // of n_test, for the zero-shot split
  std::uint64_t seed = 0;

  void validate() const {
    if (phoneme_count < 3) throw InvalidInputError("phoneme_count must be >= 3");
    if (feature_dim < 4) throw InvalidInputError("feature_dim must be >= 4");
    if (prototype_separation <= 0.0) throw InvalidInputError("prototype_separation must be positive");
    if (jitter_sigma < 0.0 || jitter_sigma * 4.0 > prototype_separation) {
      throw InvalidInputError("jitter_sigma must be small relative to prototype_separation");
    }
    if (vocab_words < 4) throw InvalidInputError("vocab_words must be >= 4");
    if (entity_words < 2) throw InvalidInputError("entity_words must be >= 2");
    if (word_min_phonemes < 1 || word_max_phonemes < word_min_phonemes) {
      throw InvalidInputError("invalid word phoneme range");
    }
    if (passage_min_tokens < 1 || passage_max_tokens < passage_min_tokens) {
      throw InvalidInputError("invalid passage token range");
    }
    if (span_min_tokens < 1 || span_max_tokens < span_min_tokens) {
      throw InvalidInputError("invalid span token range");
    }
    if (spans_per_passage < 1) throw InvalidInputError("spans_per_passage must be >= 1");
    if (duration_min < 2 || duration_max < duration_min) {
      throw InvalidInputError("duration_min must be >= 2 and <= duration_max");
    }
    if (n_train < 1 || n_unit_train < 1 || n_dev < 1 || n_test < 1) {
      throw InvalidInputError("split sizes must be positive");
    }
    if (abstractive_fraction < 0.0 || abstractive_fraction > 1.0) {
      throw InvalidInputError("abstractive_fraction must be in [0,1]");
    }
  }

  nlohmann::ordered_json to_json() const {
    return {{"phoneme_count", phoneme_count},
            {"feature_dim", feature_dim},
            {"prototype_separation", prototype_separation},
            {"jitter_sigma", jitter_sigma},
            {"vocab_words", vocab_words},
            {"entity_words", entity_words},
            {"word_min_phonemes", word_min_phonemes},
            {"word_max_phonemes", word_max_phonemes},
            {"passage_min_tokens", passage_min_tokens},
            {"passage_max_tokens", passage_max_tokens},
            {"span_min_tokens", span_min_tokens},
            {"span_max_tokens", span_max_tokens},
            {"spans_per_passage", spans_per_passage},
            {"duration_min", duration_min},
            {"duration_max", duration_max},
            {"n_train", n_train},
            {"n_unit_train", n_unit_train},
            {"n_dev", n_dev},
            {"n_test", n_test},
            {"abstractive_fraction", abstractive_fraction},
            {"seed", seed}};
  }

  static GeneratorSpec from_json(const nlohmann::json& j) {
    GeneratorSpec s;
    auto get = [&j](const char* k, auto& field) {
      if (j.contains(k)) field = j.at(k).get<std::decay_t<decltype(field)>>();
    };
    get("phoneme_count", s.phoneme_count);
    get("feature_dim", s.feature_dim);
    get("prototype_separation", s.prototype_separation);
    get("jitter_sigma", s.jitter_sigma);
    get("vocab_words", s.vocab_words);
    get("entity_words", s.entity_words);
    get("word_min_phonemes", s.word_min_phonemes);
    get("word_max_phonemes", s.word_max_phonemes);
    get("passage_min_tokens", s.passage_min_tokens);
    get("passage_max_tokens", s.passage_max_tokens);
    get("span_min_tokens", s.span_min_tokens);
    get("span_max_tokens", s.span_max_tokens);
    get("spans_per_passage", s.spans_per_passage);
    get("duration_min", s.duration_min);
    get("duration_max", s.duration_max);
    get("n_train", s.n_train);
    get("n_unit_train", s.n_unit_train);
    get("n_dev", s.n_dev);
    get("n_test", s.n_test);
    get("abstractive_fraction", s.abstractive_fraction);
    get("seed", s.seed);
    s.validate();
    return s;
  }
};

// The generator's ground truth: word spellings (phoneme sequences, each
// starting with delimiter 0), phoneme prototype vectors, and the control
// words. Invertible: any uncorrupted phoneme stream maps back to words.
struct GoldMap {
  std::vector<std::string> words;                       // all words incl. controls
  std::map<std::string, std::vector<int>> spellings;    // word -> phonemes (leading 0)
  MatF prototypes;                                      // P x D
  std::string marker_begin, marker_end;                 // bracket each span
  std::string question_extractive, question_abstractive;
  std::string connector;                                // joins abstractive answers
  std::vector<std::string> selectors;                   // one per span slot

  std::map<std::vector<int>, std::string> content_index() const {
    std::map<std::vector<int>, std::string> idx;
    for (const auto& [word, sp] : spellings) {
      idx.emplace(std::vector<int>(sp.begin() + 1, sp.end()), word);
    }
    return idx;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["words"] = words;
    nlohmann::ordered_json sp = nlohmann::ordered_json::object();
    for (const std::string& w : words) sp[w] = spellings.at(w);
    j["spellings"] = sp;
    std::vector<std::vector<float>> proto(static_cast<std::size_t>(prototypes.rows()));
    for (Eigen::Index i = 0; i < prototypes.rows(); ++i) {
      proto[static_cast<std::size_t>(i)].assign(prototypes.row(i).begin(), prototypes.row(i).end());
    }
    j["prototypes"] = proto;
    j["marker_begin"] = marker_begin;
    j["marker_end"] = marker_end;
    j["question_extractive"] = question_extractive;
    j["question_abstractive"] = question_abstractive;
    j["connector"] = connector;
    j["selectors"] = selectors;
    return j;
  }

  static GoldMap from_json(const nlohmann::json& j) {
    GoldMap g;
    g.words = j.at("words").get<std::vector<std::string>>();
    for (const std::string& w : g.words) {
      g.spellings[w] = j.at("spellings").at(w).get<std::vector<int>>();
    }
    const auto proto = j.at("prototypes").get<std::vector<std::vector<float>>>();
    if (proto.empty()) throw InvalidInputError("goldmap has no prototypes");
    g.prototypes.resize(static_cast<Eigen::Index>(proto.size()),
                        static_cast<Eigen::Index>(proto[0].size()));
    for (std::size_t i = 0; i < proto.size(); ++i) {
      for (std::size_t k = 0; k < proto[i].size(); ++k) {
        g.prototypes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = proto[i][k];
      }
    }
    g.marker_begin = j.at("marker_begin").get<std::string>();
    g.marker_end = j.at("marker_end").get<std::string>();
    g.question_extractive = j.at("question_extractive").get<std::string>();
    g.question_abstractive = j.at("question_abstractive").get<std::string>();
    g.connector = j.at("connector").get<std::string>();
    g.selectors = j.at("selectors").get<std::vector<std::string>>();
    return g;
  }
};

struct GeneratedFeatures {
  FrameFeatures features;
  std::vector<std::pair<int, int>> token_spans;  // [begin, end) frame range per token
};

// One example carrying both the text view and (for unit splits) the frame
// features from which units are quantized downstream.
struct SynthExample {
  std::string id;
  std::string kind;  // "extractive" | "abstractive"
  std::vector<std::string> question_text, passage_text, answer_text;
  bool has_features = false;
  FrameFeatures question_features, passage_features;
  int span_begin_frame = -1, span_end_frame = -1;  // answer frames in the passage
};

struct Corpus {
  std::vector<SynthExample> text_train;  // extractive + abstractive, text only
  std::vector<SynthExample> unit_train;  // extractive, with features
  std::vector<SynthExample> unit_dev;    // extractive, with features
  std::vector<SynthExample> unit_test;   // extractive, with features
  std::vector<SynthExample> unit_abs;    // abstractive, with features, zero-shot
  GoldMap gold;
};

namespace synth_detail {

inline int hamming_sign(const MatF& a, Eigen::Index r1, Eigen::Index r2) {
  int h = 0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    if ((a(r1, c) > 0) != (a(r2, c) > 0)) ++h;
  }
  return h;
}

// Random sign prototypes, greedily kept only when at least 4 coordinates
// differ from every accepted prototype; scaled so the minimum pairwise
// Euclidean distance is >= prototype_separation.
inline MatF make_prototypes(const GeneratorSpec& spec, Rng& rng) {
  const float c = static_cast<float>(spec.prototype_separation / 4.0);
  MatF proto(spec.phoneme_count, spec.feature_dim);
  int accepted = 0;
  long long attempts = 0;
  while (accepted < spec.phoneme_count) {
    if (++attempts > 200000LL) {
      throw InvalidInputError("cannot place separated prototypes; lower phoneme_count or raise feature_dim");
    }
    for (int d = 0; d < spec.feature_dim; ++d) {
      proto(accepted, d) = rng.uniform() < 0.5 ? -c : c;
    }
    bool ok = true;
    for (int p = 0; p < accepted; ++p) {
      if (hamming_sign(proto, accepted, p) < 4) {
        ok = false;
        break;
      }
    }
    if (ok) ++accepted;
  }
  return proto;
}

// Content spelling: 1..min_max phonemes from {1..P-1}, no adjacent repeats,
// unique across the vocabulary.
inline std::vector<int> make_spelling(const GeneratorSpec& spec, Rng& rng,
                                      std::set<std::vector<int>>& used) {
  for (int tries = 0; tries < 100000; ++tries) {
    const int len = rng.uniform_range(spec.word_min_phonemes, spec.word_max_phonemes);
    std::vector<int> content;
    content.reserve(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) {
      int ph = rng.uniform_range(1, spec.phoneme_count - 1);
      while (!content.empty() && ph == content.back()) {
        ph = rng.uniform_range(1, spec.phoneme_count - 1);
      }
      content.push_back(ph);
    }
    if (used.insert(content).second) {
      std::vector<int> full;
      full.reserve(content.size() + 1);
      full.push_back(0);
      full.insert(full.end(), content.begin(), content.end());
      return full;
    }
  }
  throw InvalidInputError("phoneme inventory too small for requested vocabulary");
}

}  // namespace synth_detail

// Expands a token sequence to jittered prototype frames. Every token starts
// with the delimiter phoneme, each phoneme lasting d in [duration_min,
// duration_max] frames, so the frame stream is invertible back to tokens.
inline GeneratedFeatures generate_features(const std::vector<std::string>& tokens,
                                           const GeneratorSpec& spec, const GoldMap& gold,
                                           Rng& rng) {
  if (tokens.empty()) throw InvalidInputError("token sequence is empty");
  std::vector<int> phonemes;
  std::vector<int> token_of_phoneme;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto it = gold.spellings.find(tokens[t]);
    if (it == gold.spellings.end()) throw InvalidInputError("unknown token: " + tokens[t]);
    for (const int ph : it->second) {
      phonemes.push_back(ph);
      token_of_phoneme.push_back(static_cast<int>(t));
    }
  }

  std::vector<int> durations(phonemes.size());
  int total = 0;
  for (std::size_t i = 0; i < phonemes.size(); ++i) {
    durations[i] = rng.uniform_range(spec.duration_min, spec.duration_max);
    total += durations[i];
  }

  GeneratedFeatures out;
  out.features.frames.resize(total, spec.feature_dim);
  out.token_spans.assign(tokens.size(), {-1, -1});
  int frame = 0;
  for (std::size_t i = 0; i < phonemes.size(); ++i) {
    const int tok = token_of_phoneme[i];
    for (int d = 0; d < durations[i]; ++d, ++frame) {
      for (int c = 0; c < spec.feature_dim; ++c) {
        out.features.frames(frame, c) =
            gold.prototypes(phonemes[i], c) + static_cast<float>(rng.normal(0.0, spec.jitter_sigma));
      }
      if (out.token_spans[static_cast<std::size_t>(tok)].first < 0) {
        out.token_spans[static_cast<std::size_t>(tok)].first = frame;
      }
      out.token_spans[static_cast<std::size_t>(tok)].second = frame + 1;
    }
  }
  return out;
}

namespace synth_detail {

struct TaskWords {
  std::vector<std::string> fillers;   // ordinary content words
  std::vector<std::string> entities;  // answer-span words, never fillers
};

// Builds one QA example. The passage carries spans_per_passage marked spans,
// each [marker_begin] selector entities... [marker_end]; the question names
// one selector and the answer is that span. Abstractive: answer = first +
// connector + last word of the selected span.
inline SynthExample make_example(const std::string& id, bool abstractive,
                                 const GeneratorSpec& spec, const GoldMap& gold,
                                 const TaskWords& tw, bool with_features, Rng& rng) {
  SynthExample ex;
  ex.id = id;
  ex.kind = abstractive ? "abstractive" : "extractive";

  const int n_spans = spec.spans_per_passage;
  const int n_fill = rng.uniform_range(spec.passage_min_tokens, spec.passage_max_tokens);
  std::vector<std::string> fill(static_cast<std::size_t>(n_fill));
  for (auto& w : fill) w = tw.fillers[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(tw.fillers.size())))];

  std::vector<std::vector<std::string>> spans(static_cast<std::size_t>(n_spans));
  for (auto& span : spans) {
    span.resize(static_cast<std::size_t>(rng.uniform_range(spec.span_min_tokens, spec.span_max_tokens)));
    for (auto& w : span) w = tw.entities[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(tw.entities.size())))];
  }

  // Distinct selector per span, shuffled so surface position carries no signal.
  std::vector<int> sel(static_cast<std::size_t>(n_spans));
  std::iota(sel.begin(), sel.end(), 0);
  for (int i = n_spans - 1; i > 0; --i) {
    std::swap(sel[static_cast<std::size_t>(i)], sel[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
  }
  const int target = rng.uniform_int(n_spans);

  std::vector<int> cuts(static_cast<std::size_t>(n_spans));
  for (auto& c : cuts) c = rng.uniform_range(0, n_fill);
  std::sort(cuts.begin(), cuts.end());

  int marker_pos = -1;  // target span's marker_begin position in the passage
  int prev = 0;
  for (int s = 0; s < n_spans; ++s) {
    const std::size_t us = static_cast<std::size_t>(s);
    ex.passage_text.insert(ex.passage_text.end(), fill.begin() + prev, fill.begin() + cuts[us]);
    prev = cuts[us];
    if (s == target) marker_pos = static_cast<int>(ex.passage_text.size());
    ex.passage_text.push_back(gold.marker_begin);
    ex.passage_text.push_back(gold.selectors[static_cast<std::size_t>(sel[us])]);
    ex.passage_text.insert(ex.passage_text.end(), spans[us].begin(), spans[us].end());
    ex.passage_text.push_back(gold.marker_end);
  }
  ex.passage_text.insert(ex.passage_text.end(), fill.begin() + prev, fill.end());

  ex.question_text = {abstractive ? gold.question_abstractive : gold.question_extractive,
                      gold.selectors[static_cast<std::size_t>(sel[static_cast<std::size_t>(target)])],
                      tw.fillers[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(tw.fillers.size())))]};

  const std::vector<std::string>& span = spans[static_cast<std::size_t>(target)];
  if (abstractive) {
    ex.answer_text = {span.front(), gold.connector, span.back()};
  } else {
    ex.answer_text = span;
  }

  if (with_features) {
    ex.has_features = true;
    GeneratedFeatures q = generate_features(ex.question_text, spec, gold, rng);
    GeneratedFeatures p = generate_features(ex.passage_text, spec, gold, rng);
    ex.question_features = std::move(q.features);
    ex.passage_features = std::move(p.features);
    // Answer frames cover the selected span's words; marker and selector
    // tokens excluded.
    const std::size_t first_tok = static_cast<std::size_t>(marker_pos + 2);
    const std::size_t last_tok = first_tok + span.size() - 1;
    ex.span_begin_frame = p.token_spans[first_tok].first;
    ex.span_end_frame = p.token_spans[last_tok].second;
  }
  return ex;
}

}  // namespace synth_detail

inline Corpus generate_corpus(const GeneratorSpec& spec) {
  spec.validate();
  Corpus corpus;
  GoldMap& gold = corpus.gold;

  // Vocabulary: filler words w0..wN, entity words e0..eM, selector words
  // sl0..slK, five control words.
  gold.marker_begin = "mkb";
  gold.marker_end = "mke";
  gold.question_extractive = "qex";
  gold.question_abstractive = "qab";
  gold.connector = "cnj";
  for (int i = 0; i < spec.spans_per_passage; ++i) gold.selectors.push_back("sl" + std::to_string(i));
  for (int i = 0; i < spec.vocab_words; ++i) gold.words.push_back("w" + std::to_string(i));
  for (int i = 0; i < spec.entity_words; ++i) gold.words.push_back("e" + std::to_string(i));
  for (const std::string& s : gold.selectors) gold.words.push_back(s);
  gold.words.push_back(gold.marker_begin);
  gold.words.push_back(gold.marker_end);
  gold.words.push_back(gold.question_extractive);
  gold.words.push_back(gold.question_abstractive);
  gold.words.push_back(gold.connector);

  {
    Rng rng(derive_seed(spec.seed, "synth.vocab"));
    gold.prototypes = synth_detail::make_prototypes(spec, rng);
    std::set<std::vector<int>> used;
    for (const std::string& w : gold.words) {
      gold.spellings[w] = synth_detail::make_spelling(spec, rng, used);
    }
  }

  synth_detail::TaskWords tw;
  for (int i = 0; i < spec.vocab_words; ++i) tw.fillers.push_back(gold.words[static_cast<std::size_t>(i)]);
  for (int i = 0; i < spec.entity_words; ++i) {
    tw.entities.push_back(gold.words[static_cast<std::size_t>(spec.vocab_words + i)]);
  }

  auto fill_split = [&](std::vector<SynthExample>& out, const char* tag, const char* prefix,
                        int count, bool with_features, int kind_mode) {
    // kind_mode: 0 = extractive, 1 = abstractive, 2 = alternating
    const std::uint64_t split_seed = derive_seed(spec.seed, tag);
    for (int i = 0; i < count; ++i) {
      Rng rng(derive_seed(split_seed, "ex", static_cast<std::uint64_t>(i)));
      const bool abs = kind_mode == 1 || (kind_mode == 2 && i % 2 == 1);
      out.push_back(synth_detail::make_example(prefix + std::to_string(i), abs, spec, gold, tw,
                                               with_features, rng));
    }
  };

  fill_split(corpus.text_train, "synth.text_train", "txtr-", spec.n_train, false, 2);
  fill_split(corpus.unit_train, "synth.unit_train", "utr-", spec.n_unit_train, true, 0);
  fill_split(corpus.unit_dev, "synth.unit_dev", "udev-", spec.n_dev, true, 0);
  fill_split(corpus.unit_test, "synth.unit_test", "utst-", spec.n_test, true, 0);

  const int n_abs = static_cast<int>(std::floor(spec.abstractive_fraction * spec.n_test + 0.5));
  if (n_abs > 0) {
    // Zero passage overlap with the fine-tune split, by construction.
    std::set<std::vector<std::string>> train_passages;
    for (const auto& ex : corpus.unit_train) train_passages.insert(ex.passage_text);
    const std::uint64_t split_seed = derive_seed(spec.seed, "synth.unit_abs");
    int produced = 0;
    std::uint64_t attempt = 0;
    while (produced < n_abs) {
      Rng rng(derive_seed(split_seed, "ex", attempt++));
      SynthExample ex = synth_detail::make_example("uabs-" + std::to_string(produced), true, spec,
                                                   gold, tw, true, rng);
      if (train_passages.count(ex.passage_text)) continue;
      corpus.unit_abs.push_back(std::move(ex));
      ++produced;
    }
  }
  return corpus;
}

// --- Unit-to-text transcription via the gold phoneme table ---

// Nearest gold prototype for every codebook centroid.
inline std::vector<int> unit_to_phoneme(const Codebook& codebook, const GoldMap& gold) {
  std::vector<int> map(static_cast<std::size_t>(codebook.k));
  for (int u = 0; u < codebook.k; ++u) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index p = 0; p < gold.prototypes.rows(); ++p) {
      double d = 0.0;
      for (Eigen::Index c = 0; c < gold.prototypes.cols(); ++c) {
        const double diff = static_cast<double>(codebook.centroids(u, c)) - gold.prototypes(p, c);
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        arg = static_cast<int>(p);
      }
    }
    map[static_cast<std::size_t>(u)] = arg;
  }
  return map;
}

// Deduplicated units -> phonemes -> words. Segments open at each delimiter
// phoneme; unparseable segments become "<?>" so metrics penalize them.
inline std::vector<std::string> transcribe_units(const std::vector<int>& units,
                                                 const std::vector<int>& phoneme_of_unit,
                                                 const GoldMap& gold) {
  std::vector<int> phonemes;
  for (const int u : units) {
    if (u < 0 || u >= static_cast<int>(phoneme_of_unit.size())) {
      throw InvalidInputError("unit ID outside codebook");
    }
    const int ph = phoneme_of_unit[static_cast<std::size_t>(u)];
    if (phonemes.empty() || phonemes.back() != ph) phonemes.push_back(ph);
  }

  const auto index = gold.content_index();
  std::vector<std::string> words;
  std::vector<int> segment;
  bool open = false;
  auto flush = [&]() {
    if (!open) {
      if (!segment.empty()) words.push_back("<?>");
    } else {
      const auto it = index.find(segment);
      words.push_back(it == index.end() ? "<?>" : it->second);
    }
    segment.clear();
  };
  for (const int ph : phonemes) {
    if (ph == 0) {
      flush();
      open = true;
    } else {
      segment.push_back(ph);
    }
  }
  flush();
  return words;
}

}  // namespace unitqa
