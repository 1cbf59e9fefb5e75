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

// Acceptance gate. Seven numbered criteria, one verdict line each, exit 0
// only when every selected criterion passes. Each criterion checks the
// library against an independent oracle or a pre-registered margin; the
// margins are fixed here and are not tuned to the observed numbers.
//
//   1  unit codec and k-means against brute-force oracles        (< 10 s)
//   2  metric suite against brute-force oracles                  (< 5 s)
//   3  model verification: dense oracle, causality, gradients,
//      beam against exhaustive search
//   4  TQA pretraining transfers: >= +10 F1 absolute, 3 seeds    (< 30 min)
//   5  zero-shot abstractive BLEU1: > with >= 5% relative margin
//   6  WER sweep: cascade degrades (Spearman <= -0.8, >= 10-pt
//      drop), E2E exactly constant, measured WER within +/-0.02
//   7  repro command is byte-identical across two runs
//
// Usage: acceptance [N...]   run only the listed criteria (default: all).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "unitqa/pipeline.hpp"

using namespace unitqa;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

fs::path work_root() {
  static const fs::path p = fs::temp_directory_path() / "unitqa_acceptance";
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------
// Criterion 1: run-length codec and k-means quantizer.

Outcome c1_codec() {
  Rng rng(20260823);

  int roundtrips = 0;
  for (int t = 0; t < 1000; ++t) {
    const int len = rng.uniform_int(501);  // lengths 0..500
    std::vector<int> frames(static_cast<std::size_t>(len));
    for (int& u : frames) u = rng.uniform_int(100);  // K = 100
    const UnitSequence rle = rle_encode(frames);
    if (rle_decode(rle) != frames) {
      return {false, fmt("RLE roundtrip diverged on trial %d (len %d)", t, len)};
    }
    for (std::size_t i = 1; i < rle.units.size(); ++i) {
      if (rle.units[i] == rle.units[i - 1]) {
        return {false, fmt("RLE left adjacent duplicate units on trial %d", t)};
      }
    }
    ++roundtrips;
  }

  // K-means on a blob mixture; Lloyd iterations must not increase inertia.
  std::vector<FrameFeatures> blobs;
  for (int c = 0; c < 5; ++c) {
    FrameFeatures f;
    f.frames = MatF(60, 6);
    for (Eigen::Index i = 0; i < f.frames.rows(); ++i) {
      for (Eigen::Index j = 0; j < f.frames.cols(); ++j) {
        f.frames(i, j) = static_cast<float>(3.0 * c + rng.normal(0.0, 0.5));
      }
    }
    blobs.push_back(f);
  }
  const Codebook cb = train_codebook(blobs, 5, 50, 99);
  for (std::size_t i = 1; i < cb.inertia_history.size(); ++i) {
    if (cb.inertia_history[i] > cb.inertia_history[i - 1] + 1e-9) {
      return {false, fmt("inertia rose at Lloyd iteration %zu", i)};
    }
  }

  // Assignment against the loop-nest oracle on fresh frames.
  FrameFeatures probe;
  probe.frames = MatF(200, 6);
  for (Eigen::Index i = 0; i < probe.frames.rows(); ++i) {
    for (Eigen::Index j = 0; j < probe.frames.cols(); ++j) {
      probe.frames(i, j) = static_cast<float>(rng.normal(6.0, 4.0));
    }
  }
  const std::vector<int> got = assign_units(probe, cb);
  const std::vector<int> want = oracle::nearest_centroids(probe.frames, cb.centroids);
  if (got != want) return {false, "assignment disagrees with brute-force nearest centroid"};

  return {true, fmt("%d/1000 roundtrips exact; %zu Lloyd steps non-increasing; 200/200 assignments match",
                    roundtrips, cb.inertia_history.size())};
}

// ---------------------------------------------------------------------------
// Criterion 2: metric suite.

Outcome c2_metrics() {
  // Hand-worked pair from the extractive answer-style comparison: gold
  // sentence vs a truncated and a near-complete prediction.
  const std::string gold = "To live the life of a normal member of the British ruling class.";
  const double short_f1 = token_f1("live the life of any", gold);
  const double long_f1 =
      token_f1("live the life of any conventional member of the British ruling class", gold);
  if (std::abs(short_f1 - 3.0 / 7.0) > 1e-9) {
    return {false, fmt("hand-worked F1 (short) = %.12f, want %.12f", short_f1, 3.0 / 7.0)};
  }
  if (std::abs(long_f1 - 0.8) > 1e-9) {
    return {false, fmt("hand-worked F1 (long) = %.12f, want 0.8", long_f1)};
  }

  const std::vector<std::string> pool = {"red",  "blue", "sky",    "the", "a",   "dog",
                                         "runs", "fast", "Boston", "An",  "cat", "sat"};
  Rng rng(271828);
  auto random_sentence = [&](bool ensure_content) {
    std::string s = ensure_content ? "anchor" : "";  // keeps WER references non-empty
    const int n = rng.uniform_int(8);
    for (int i = 0; i < n; ++i) {
      if (!s.empty()) s += ' ';
      s += pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(pool.size())))];
      if (rng.uniform() < 0.2) s += ',';
    }
    return s;
  };

  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::string a = random_sentence(false);
    const std::string b = random_sentence(true);
    worst = std::max(worst, std::abs(token_f1(a, b) - oracle::f1(a, b)));
    worst = std::max(worst, std::abs(exact_match(a, b) - oracle::em(a, b)));
    worst = std::max(worst, std::abs(bleu1(a, b) - oracle::bleu1(a, b)));
    worst = std::max(worst, std::abs(rouge_l(a, b) - oracle::rouge_l(a, b)));
    worst = std::max(worst, std::abs(wer(b, a) - oracle::wer(b, a)));
    if (worst > 1e-9) {
      return {false, fmt("trial %d: oracle gap %.3e > 1e-9 (pred='%s' gold='%s')", t, worst,
                         a.c_str(), b.c_str())};
    }
  }
  return {true, fmt("hand-worked pair exact; 200 random pairs within 1e-9 (worst %.3e)", worst)};
}

// ---------------------------------------------------------------------------
// Criterion 3: model verification.

using MatX = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense-attention encoder in double precision with explicit loops. Valid
// reference when the local window covers the sequence and transient-global
// summaries are off.
MatX dense_reference_encoder(const Seq2SeqModel<float>& m, const std::vector<int>& ids) {
  const int n = static_cast<int>(ids.size());
  const int d = m.config.d_model;
  const int heads = m.config.n_heads;
  const int dh = d / heads;

  auto layer_norm = [d](const MatX& x, const nn::LayerNorm<float>& ln) {
    MatX out(x.rows(), d);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double mu = 0.0;
      for (int j = 0; j < d; ++j) mu += x(i, j);
      mu /= d;
      double var = 0.0;
      for (int j = 0; j < d; ++j) var += (x(i, j) - mu) * (x(i, j) - mu);
      var /= d;
      const double rs = 1.0 / std::sqrt(var + 1e-5);
      for (int j = 0; j < d; ++j) {
        out(i, j) = (x(i, j) - mu) * rs * ln.gamma.w(0, j) + ln.beta.w(0, j);
      }
    }
    return out;
  };
  auto linear = [](const MatX& x, const nn::Linear<float>& f) {
    return (x * f.w.w.cast<double>() + MatX::Ones(x.rows(), 1) * f.b.w.cast<double>()).eval();
  };

  MatX x(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      x(i, j) = static_cast<double>(m.embedding.w(ids[i], j)) * std::sqrt(static_cast<double>(d)) +
                static_cast<double>(m.positions()(i, j));
    }
  }
  for (const auto& layer : m.enc_layers) {
    const MatX a = layer_norm(x, layer.ln1);
    const MatX q = linear(a, layer.attn.wq);
    const MatX k = linear(a, layer.attn.wk);
    const MatX v = linear(a, layer.attn.wv);
    MatX concat(n, d);
    for (int h = 0; h < heads; ++h) {
      for (int i = 0; i < n; ++i) {
        std::vector<double> scores(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int c = 0; c < dh; ++c) s += q(i, h * dh + c) * k(j, h * dh + c);
          scores[static_cast<std::size_t>(j)] = s / std::sqrt(static_cast<double>(dh));
        }
        const std::vector<double> lp = oracle::log_softmax(scores);
        for (int c = 0; c < dh; ++c) {
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += std::exp(lp[static_cast<std::size_t>(j)]) * v(j, h * dh + c);
          concat(i, h * dh + c) = acc;
        }
      }
    }
    x += linear(concat, layer.attn.wo);
    const MatX f_in = layer_norm(x, layer.ln2);
    MatX hidden = linear(f_in, layer.ffn.fc1);
    hidden = hidden.cwiseMax(0.0);
    x += linear(hidden, layer.ffn.fc2);
  }
  return layer_norm(x, m.enc_final);
}

struct GradProblem {
  std::vector<int> enc_ids, dec_in, targets;
};

double grad_loss(const Seq2SeqModel<double>& m, const GradProblem& p) {
  const EncodeResult<double> enc = m.encode(p.enc_ids, Vocabulary::kPad);
  const DecodeResult<double> dec = m.decode(enc.h, enc.real, p.dec_in);
  return cross_entropy(m.logits(dec.h), p.targets, Vocabulary::kPad).value;
}

// Exhaustive length-penalized search for the beam check (small vocab only).
void enumerate_all(const Seq2SeqModel<float>& m, const EncodeResult<float>& enc,
                   const DecodeConfig& cfg, int vocab, std::vector<int>& prefix, double cum,
                   std::vector<int>& best, double& best_score) {
  std::vector<int> dec_ids;
  dec_ids.push_back(cfg.bos_id);
  dec_ids.insert(dec_ids.end(), prefix.begin(), prefix.end());
  const auto dec = m.decode(enc.h, enc.real, dec_ids);
  const Mat<float> lg = m.logits(dec.h);
  const auto lp = log_softmax_row(lg, lg.rows() - 1);
  for (int v = 0; v < vocab; ++v) {
    const double c = cum + lp[static_cast<std::size_t>(v)];
    prefix.push_back(v);
    const int n = static_cast<int>(prefix.size());
    if (v == cfg.eos_id || n == cfg.max_new_tokens) {
      const double score = c / length_penalty(n, cfg.length_penalty_alpha);
      if (score > best_score || (score == best_score && prefix < best)) {
        best_score = score;
        best = prefix;
      }
    } else {
      enumerate_all(m, enc, cfg, vocab, prefix, c, best, best_score);
    }
    prefix.pop_back();
  }
}

Outcome c3_model() {
  // (a) local+global attention against the dense oracle.
  {
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.n_enc_layers = 2;
    cfg.n_dec_layers = 2;
    cfg.ffn_dim = 24;
    cfg.local_window_radius = 64;  // covers every probe sequence
    cfg.global_block_size = 64;
    cfg.use_transient_global = false;
    cfg.max_len = 32;
    const Seq2SeqModel<float> m = Seq2SeqModel<float>::create(cfg, 23, 311);
    Rng rng(312);
    for (int trial = 0; trial < 4; ++trial) {
      std::vector<int> ids(static_cast<std::size_t>(6 + 4 * trial));
      for (int& id : ids) id = rng.uniform_int(23);
      const double err =
          (m.encode(ids).h.cast<double>() - dense_reference_encoder(m, ids)).cwiseAbs().maxCoeff();
      if (!(err < 1e-5)) return {false, fmt("dense oracle gap %.3e >= 1e-5 (trial %d)", err, trial)};
    }
  }

  // (b) decoder causality: perturbing token t leaves logits before t
  // bit-identical.
  {
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.n_enc_layers = 1;
    cfg.n_dec_layers = 2;
    cfg.ffn_dim = 24;
    cfg.local_window_radius = 4;
    cfg.global_block_size = 4;
    cfg.max_len = 32;
    const Seq2SeqModel<float> m = Seq2SeqModel<float>::create(cfg, 19, 313);
    Rng rng(314);
    std::vector<int> enc_ids(9), dec_ids(8);
    for (int& id : enc_ids) id = rng.uniform_int(19);
    for (int& id : dec_ids) id = rng.uniform_int(19);
    const Mat<float> base = forward(m, enc_ids, dec_ids);
    for (int t = 1; t < 8; ++t) {
      std::vector<int> perturbed = dec_ids;
      perturbed[static_cast<std::size_t>(t)] = (perturbed[static_cast<std::size_t>(t)] + 7) % 19;
      const Mat<float> out = forward(m, enc_ids, perturbed);
      for (int p = 0; p < t; ++p) {
        if (out.row(p) != base.row(p)) {
          return {false, fmt("perturbing decoder position %d changed logits at position %d", t, p)};
        }
      }
    }
  }

  // (c) analytic gradients vs central finite differences, double precision.
  {
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.n_enc_layers = 1;
    cfg.n_dec_layers = 1;
    cfg.ffn_dim = 12;
    cfg.local_window_radius = 2;  // masking genuinely on the path
    cfg.global_block_size = 3;
    cfg.use_transient_global = true;
    cfg.max_len = 16;
    Seq2SeqModel<double> m = Seq2SeqModel<double>::create(cfg, 11, 315);
    GradProblem p;
    p.enc_ids = {1, 5, 6, 7, 8, 9, Vocabulary::kPad, Vocabulary::kPad};
    p.dec_in = {1, 3, 4, 5, 6};
    p.targets = {3, 4, 5, Vocabulary::kPad, 2};

    m.zero_grad();
    EncodeResult<double> enc = m.encode(p.enc_ids, Vocabulary::kPad);
    DecodeResult<double> dec = m.decode(enc.h, enc.real, p.dec_in);
    Mat<double> dlogits;
    const LossResult loss = cross_entropy(m.logits(dec.h), p.targets, Vocabulary::kPad, &dlogits);
    dlogits *= 1.0 / static_cast<double>(loss.n_tokens);
    m.backward(enc, dec, dlogits);

    double worst = 0.0;
    Rng pick(316);
    for (Tensor<double>* t : m.parameters()) {
      const Eigen::Index total = t->w.size();
      const int samples = total <= 64 ? static_cast<int>(total) : 40;
      for (int s = 0; s < samples; ++s) {
        const Eigen::Index idx =
            total <= 64 ? s : static_cast<Eigen::Index>(pick.uniform_int(static_cast<int>(total)));
        const Eigen::Index r = idx / t->w.cols();
        const Eigen::Index c = idx % t->w.cols();
        const double a = t->g(r, c);
        const double h = 1e-5;
        const double saved = t->w(r, c);
        t->w(r, c) = saved + h;
        const double up = grad_loss(m, p);
        t->w(r, c) = saved - h;
        const double down = grad_loss(m, p);
        t->w(r, c) = saved;
        const double n = (up - down) / (2.0 * h);
        if (std::abs(a) < 1e-8 && std::abs(n) < 1e-8) continue;  // below FD noise
        worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}));
      }
    }
    if (!(worst < 1e-3)) return {false, fmt("gradient check worst relative error %.3e >= 1e-3", worst)};
  }

  // (d) beam search with nothing pruned equals exhaustive argmax.
  {
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.n_enc_layers = 1;
    cfg.n_dec_layers = 1;
    cfg.ffn_dim = 16;
    cfg.local_window_radius = 8;
    cfg.global_block_size = 8;
    cfg.max_len = 16;
    DecodeConfig dcfg;
    dcfg.max_new_tokens = 4;
    dcfg.beam_size = 6 * 6 * 6 * 6;
    dcfg.length_penalty_alpha = 2.0;
    for (std::uint64_t seed : {401ULL, 402ULL, 403ULL}) {
      Seq2SeqModel<float> m = Seq2SeqModel<float>::create(cfg, 6, seed);
      Trainer<float> tr(&m);
      TrainExample ex;
      ex.encoder_ids = {1, 3, 4, 2};
      ex.decoder_input_ids = {1, 5, 3};
      ex.target_ids = {5, 3, 2};
      for (int i = 0; i < 8; ++i) tr.train_step({ex}, 1e-2, 0.0, 0);

      const std::vector<int> enc_ids = {1, 4, 5, 2};
      const std::vector<int> got = beam_decode(m, enc_ids, dcfg);
      const auto enc = m.encode(enc_ids);
      std::vector<int> prefix, best;
      double best_score = -std::numeric_limits<double>::infinity();
      enumerate_all(m, enc, dcfg, 6, prefix, 0.0, best, best_score);
      if (got != best) return {false, fmt("beam != exhaustive argmax for seed %llu",
                                          static_cast<unsigned long long>(seed))};
    }
  }

  return {true, "dense oracle <1e-5; causality bit-exact; gradcheck <1e-3; beam == exhaustive x3"};
}

// ---------------------------------------------------------------------------
// Criteria 4-6 share three trained pipelines (one per seed).

RunConfig acceptance_cfg(const fs::path& out, std::uint64_t seed) {
  RunConfig cfg;
  cfg.out_dir = out.string();
  cfg.seed = seed;
  cfg.generator.phoneme_count = 40;
  cfg.generator.feature_dim = 16;
  cfg.generator.prototype_separation = 10.0;
  cfg.generator.jitter_sigma = 0.3;
  cfg.generator.vocab_words = 50;
  cfg.generator.word_min_phonemes = 2;
  cfg.generator.word_max_phonemes = 3;
  cfg.generator.passage_min_tokens = 20;  // keeps every sweep level reachable
  cfg.generator.passage_max_tokens = 28;
  cfg.generator.span_min_tokens = 2;
  cfg.generator.span_max_tokens = 4;
  cfg.generator.duration_min = 2;
  cfg.generator.duration_max = 3;
  cfg.generator.n_train = 1024;     // text QA is abundant
  cfg.generator.n_unit_train = 128; // spoken QA is scarce: transfer must carry
  cfg.generator.n_dev = 100;
  cfg.generator.n_test = 50;
  cfg.generator.abstractive_fraction = 1.0;
  cfg.codebook_k = 40;
  cfg.codebook_max_iters = 30;
  cfg.model.d_model = 64;
  cfg.model.n_heads = 4;
  cfg.model.n_enc_layers = 2;
  cfg.model.n_dec_layers = 2;
  cfg.model.ffn_dim = 256;
  cfg.model.local_window_radius = 16;
  cfg.model.global_block_size = 16;
  cfg.model.max_len = 256;
  cfg.pretrain.epochs = 20;  // text QA converges around epoch 18
  cfg.pretrain.lr = 1e-3;
  cfg.pretrain.batch_size = 8;
  cfg.finetune.epochs = 6;
  cfg.finetune.lr = 1e-3;
  cfg.finetune.batch_size = 8;
  cfg.decode.beam_size = 4;
  cfg.decode.max_new_tokens = 24;
  cfg.sweep_levels = {0.0, 0.1, 0.2, 0.3, 0.4};
  return cfg;
}

struct ArmScores {
  double dev_f1 = 0.0;
  double abs_bleu1 = 0.0;
};
struct SeedScores {
  ArmScores tqa, no_tqa;
};

const std::vector<std::uint64_t>& transfer_seeds() {
  static const std::vector<std::uint64_t> s = {1, 2, 3};
  return s;
}

fs::path seed_out(std::uint64_t seed) {
  return work_root() / ("seed_" + std::to_string(seed));
}

double report_metric(const fs::path& report, const char* key) {
  const nlohmann::json j = pipeline_detail::read_json_file(report);
  if (j.at(key).is_null()) throw InvalidStateError(std::string("metric is null: ") + key);
  return j.at(key).get<double>();
}

// Trains both arms for one seed through the real pipeline commands and
// reads the scores back from the evaluation reports.
SeedScores run_transfer_seed(std::uint64_t seed) {
  const fs::path out = seed_out(seed);
  fs::remove_all(out);
  RunConfig cfg = acceptance_cfg(out, seed);

  cmd_synth(cfg);
  cmd_codebook(cfg);
  cmd_pretrain(cfg);
  for (const char* arm : {"tqa", "no-tqa"}) {
    cfg.arm = arm;
    cmd_finetune(cfg);
    cmd_infer(cfg);
    cmd_eval(cfg);
  }

  SeedScores s;
  const fs::path ev = out / "eval";
  s.tqa.dev_f1 = report_metric(ev / "report_tqa_dev.json", "f1");
  s.tqa.abs_bleu1 = report_metric(ev / "report_tqa_abs.json", "bleu1");
  s.no_tqa.dev_f1 = report_metric(ev / "report_no-tqa_dev.json", "f1");
  s.no_tqa.abs_bleu1 = report_metric(ev / "report_no-tqa_abs.json", "bleu1");
  return s;
}

std::map<std::uint64_t, SeedScores>& seed_scores() {
  static std::map<std::uint64_t, SeedScores> cache;
  if (cache.empty()) {
    for (const std::uint64_t seed : transfer_seeds()) {
      std::fprintf(stderr, "  [setup] training both arms for seed %llu...\n",
                   static_cast<unsigned long long>(seed));
      cache[seed] = run_transfer_seed(seed);
    }
  }
  return cache;
}

Outcome c4_transfer() {
  const auto& scores = seed_scores();
  double mean_diff = 0.0;
  std::string per_seed;
  for (const std::uint64_t seed : transfer_seeds()) {
    const SeedScores& s = scores.at(seed);
    mean_diff += s.tqa.dev_f1 - s.no_tqa.dev_f1;
    per_seed += fmt(" s%llu: %.1f vs %.1f;", static_cast<unsigned long long>(seed), s.tqa.dev_f1,
                    s.no_tqa.dev_f1);
  }
  mean_diff /= static_cast<double>(transfer_seeds().size());
  const bool pass = mean_diff >= 10.0;
  return {pass, fmt("extractive dev F1 (tqa vs no-tqa):%s mean gap %+.1f (need >= +10)",
                    per_seed.c_str(), mean_diff)};
}

Outcome c5_zero_shot() {
  const auto& scores = seed_scores();
  double mean_tqa = 0.0, mean_no = 0.0;
  std::string per_seed;
  for (const std::uint64_t seed : transfer_seeds()) {
    const SeedScores& s = scores.at(seed);
    mean_tqa += s.tqa.abs_bleu1;
    mean_no += s.no_tqa.abs_bleu1;
    per_seed += fmt(" s%llu: %.1f vs %.1f;", static_cast<unsigned long long>(seed), s.tqa.abs_bleu1,
                    s.no_tqa.abs_bleu1);
  }
  mean_tqa /= static_cast<double>(transfer_seeds().size());
  mean_no /= static_cast<double>(transfer_seeds().size());
  const bool pass = mean_tqa > mean_no && mean_tqa >= 1.05 * mean_no;
  return {pass, fmt("zero-shot abstractive BLEU1 (tqa vs no-tqa):%s mean %.1f vs %.1f (need > and +5%% rel)",
                    per_seed.c_str(), mean_tqa, mean_no)};
}

Outcome c6_sweep() {
  seed_scores();  // makes sure the seed-1 artifacts exist
  const std::uint64_t seed = transfer_seeds().front();
  RunConfig cfg = acceptance_cfg(seed_out(seed), seed);
  const SweepResult r = cmd_sweep(cfg);

  if (r.rows.size() != cfg.sweep_levels.size()) return {false, "sweep row count mismatch"};
  for (const SweepRow& row : r.rows) {
    if (std::abs(row.wer_level_measured - row.wer_level_requested) > kWerTolerance) {
      return {false, fmt("measured WER %.4f strays from requested %.2f beyond +/-%.2f",
                         row.wer_level_measured, row.wer_level_requested, kWerTolerance)};
    }
  }
  if (r.any_best_effort) return {false, "corruption fell back to best-effort on some example"};
  for (const SweepRow& row : r.rows) {
    if (row.e2e_f1 != r.rows.front().e2e_f1) {
      return {false, "E2E F1 varies across WER levels; it must be exactly constant"};
    }
  }
  const double drop = r.rows.front().cascade_f1 - r.rows.back().cascade_f1;
  const bool pass = r.spearman_cascade <= -0.8 && drop >= 10.0;
  std::string levels;
  for (const SweepRow& row : r.rows) levels += fmt(" %.2f:%.1f", row.wer_level_requested, row.cascade_f1);
  return {pass, fmt("cascade F1 by level:%s | spearman %.3f (need <= -0.8), 0->0.4 drop %.1f "
                    "(need >= 10), e2e constant at %.1f",
                    levels.c_str(), r.spearman_cascade, drop, r.rows.front().e2e_f1)};
}

// ---------------------------------------------------------------------------
// Criterion 7: cmd_repro determinism, byte for byte.

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    files[fs::relative(entry.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return files;
}

Outcome c7_repro() {
  const fs::path out = work_root() / "repro";
  RunConfig cfg;
  cfg.out_dir = out.string();
  cfg.seed = 77;
  cfg.generator.phoneme_count = 12;
  cfg.generator.feature_dim = 12;
  cfg.generator.vocab_words = 12;
  cfg.generator.passage_min_tokens = 6;
  cfg.generator.passage_max_tokens = 10;
  cfg.generator.span_min_tokens = 2;
  cfg.generator.span_max_tokens = 3;
  cfg.generator.n_train = 16;
  cfg.generator.n_unit_train = 16;
  cfg.generator.n_dev = 4;
  cfg.generator.n_test = 4;
  cfg.codebook_k = 12;
  cfg.codebook_max_iters = 25;
  cfg.model.d_model = 16;
  cfg.model.n_heads = 2;
  cfg.model.n_enc_layers = 1;
  cfg.model.n_dec_layers = 1;
  cfg.model.ffn_dim = 24;
  cfg.model.local_window_radius = 8;
  cfg.model.global_block_size = 8;
  cfg.model.max_len = 128;
  cfg.pretrain.epochs = 2;
  cfg.pretrain.lr = 1e-3;
  cfg.pretrain.batch_size = 4;
  cfg.finetune.epochs = 1;
  cfg.finetune.lr = 1e-3;
  cfg.finetune.batch_size = 4;
  cfg.decode.beam_size = 2;
  cfg.decode.max_new_tokens = 16;
  cfg.sweep_levels = {0.0, 0.2};

  fs::remove_all(out);
  cmd_repro(cfg);
  const auto first = snapshot_tree(out);
  fs::remove_all(out);
  cmd_repro(cfg);
  const auto second = snapshot_tree(out);

  if (first.size() != second.size()) {
    return {false, fmt("file count differs between runs: %zu vs %zu", first.size(), second.size())};
  }
  for (const auto& [rel, bytes] : first) {
    const auto it = second.find(rel);
    if (it == second.end()) return {false, "second run is missing " + rel};
    if (it->second != bytes) return {false, "byte mismatch in " + rel};
  }
  return {true, fmt("%zu files identical across two full repro runs (checkpoints, predictions, reports)",
                    first.size())};
}

// ---------------------------------------------------------------------------

struct Criterion {
  int number;
  const char* title;
  Outcome (*run)();
  double budget_seconds;  // 0 = untimed
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> c = {
      {1, "unit codec and k-means vs brute-force oracles", c1_codec, 10.0},
      {2, "metric suite vs brute-force oracles", c2_metrics, 5.0},
      {3, "model verification (dense oracle, causality, gradcheck, beam)", c3_model, 0.0},
      {4, "TQA pretraining transfers to units (+10 F1, 3 seeds)", c4_transfer, 1800.0},
      {5, "zero-shot abstractive BLEU1 margin (>= 5% relative)", c5_zero_shot, 0.0},
      {6, "WER sweep: cascade degrades, E2E flat, levels hit", c6_sweep, 0.0},
      {7, "repro is byte-identical across two runs", c7_repro, 0.0},
  };
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : criteria()) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), c.number) == selected.end()) {
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (out.pass && c.budget_seconds > 0.0 && secs > c.budget_seconds) {
      out.pass = false;
      out.detail += fmt(" [EXCEEDED %.0fs BUDGET]", c.budget_seconds);
    }
    std::printf("[%s] criterion %d (%.1fs): %s\n        %s\n", out.pass ? "PASS" : "FAIL",
                c.number, secs, c.title, out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  if (failures == 0) {
    std::printf("acceptance: all selected criteria passed\n");
  } else {
    std::printf("acceptance: %d criterion(s) FAILED\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
