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

// Pipeline stages behind the CLI: synth -> codebook -> pretrain ->
// finetune -> infer -> eval -> sweep, plus the all-in-one repro command.
// Every stage writes a manifest carrying its config hash and the hashes of
// its upstream stages; downstream stages refuse stale upstream artifacts
// unless forced. All randomness derives from the single root seed through
// named per-stage sub-seeds, so model arms share data order.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unitqa/beam.hpp"
#include "unitqa/checkpoint.hpp"
#include "unitqa/dataset.hpp"
#include "unitqa/errors.hpp"
#include "unitqa/kmeans.hpp"
#include "unitqa/metrics.hpp"
#include "unitqa/model.hpp"
#include "unitqa/robustness.hpp"
#include "unitqa/synth.hpp"
#include "unitqa/training.hpp"
#include "unitqa/unit_codec.hpp"
#include "unitqa/vocabulary.hpp"

namespace unitqa {

namespace fs = std::filesystem;

struct RunConfig {
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  GeneratorSpec generator;
  int codebook_k = 40;
  int codebook_max_iters = 50;
  ModelConfig model;
  TrainSpec pretrain = TrainSpec::pretrain_defaults();
  TrainSpec finetune = TrainSpec::finetune_defaults();
  DecodeConfig decode;
  std::vector<double> sweep_levels = {0.0, 0.1, 0.2, 0.3, 0.4};
  std::string arm = "tqa";  // tqa | no-tqa | cascade
  bool force = false;

  void validate() const {
    generator.validate();
    model.validate();
    pretrain.validate();
    finetune.validate();
    decode.validate();
    if (codebook_k < 1) throw InvalidInputError("codebook_k must be positive");
    if (codebook_k < generator.phoneme_count) {
      throw InvalidInputError("codebook_k must be >= the generator's phoneme_count");
    }
    if (codebook_max_iters < 1) throw InvalidInputError("codebook_max_iters must be positive");
    if (arm != "tqa" && arm != "no-tqa" && arm != "cascade") {
      throw InvalidInputError("arm must be one of tqa | no-tqa | cascade");
    }
    if (sweep_levels.empty()) throw InvalidInputError("sweep_levels must be non-empty");
    for (const double l : sweep_levels) {
      if (l < 0.0 || l > 1.0) throw InvalidInputError("sweep levels must be in [0,1]");
    }
    if (!std::is_sorted(sweep_levels.begin(), sweep_levels.end())) {
      throw InvalidInputError("sweep levels must be sorted ascending");
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["out_dir"] = out_dir;
    j["seed"] = seed;
    j["generator"] = generator.to_json();
    j["codebook_k"] = codebook_k;
    j["codebook_max_iters"] = codebook_max_iters;
    j["model"] = model.to_json();
    j["pretrain"] = pretrain.to_json();
    j["finetune"] = finetune.to_json();
    j["decode"] = {{"beam_size", decode.beam_size},
                   {"length_penalty_alpha", decode.length_penalty_alpha},
                   {"max_new_tokens", decode.max_new_tokens}};
    j["sweep_levels"] = sweep_levels;
    return j;
  }

  // Defaults overridden by whatever keys the JSON provides; nested blocks
  // merge field-by-field.
  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("generator")) {
      nlohmann::json merged = c.generator.to_json();
      merged.update(j.at("generator"));
      c.generator = GeneratorSpec::from_json(merged);
    }
    if (j.contains("codebook_k")) c.codebook_k = j.at("codebook_k").get<int>();
    if (j.contains("codebook_max_iters")) c.codebook_max_iters = j.at("codebook_max_iters").get<int>();
    if (j.contains("model")) {
      nlohmann::json merged = c.model.to_json();
      merged.update(j.at("model"));
      c.model = ModelConfig::from_json(merged);
    }
    if (j.contains("pretrain")) {
      nlohmann::json merged = c.pretrain.to_json();
      merged.update(j.at("pretrain"));
      c.pretrain = TrainSpec::from_json(merged);
    }
    if (j.contains("finetune")) {
      nlohmann::json merged = c.finetune.to_json();
      merged.update(j.at("finetune"));
      c.finetune = TrainSpec::from_json(merged);
    }
    if (j.contains("decode")) {
      const auto& d = j.at("decode");
      if (d.contains("beam_size")) c.decode.beam_size = d.at("beam_size").get<int>();
      if (d.contains("length_penalty_alpha")) {
        c.decode.length_penalty_alpha = d.at("length_penalty_alpha").get<double>();
      }
      if (d.contains("max_new_tokens")) c.decode.max_new_tokens = d.at("max_new_tokens").get<int>();
    }
    if (j.contains("sweep_levels")) c.sweep_levels = j.at("sweep_levels").get<std::vector<double>>();
    c.validate();
    return c;
  }

  static RunConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open config file: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInputError(std::string("bad config JSON: ") + e.what());
    }
    return from_json(j);
  }
};

// --- Stage bookkeeping -----------------------------------------------------

namespace pipeline_detail {

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw Error("write failed: " + path.string());
}

inline nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open for reading: " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(path.string() + ": bad JSON: " + e.what());
  }
}

}  // namespace pipeline_detail

// Stage names: synth, codebook, pretrain, finetune-tqa, finetune-no-tqa,
// infer-<arm>, eval-<arm>, sweep.
inline fs::path stage_dir(const RunConfig& cfg, const std::string& stage) {
  std::string dir = stage;
  for (char& ch : dir) {
    if (ch == '-') ch = '_';
  }
  // infer/eval share a directory per family; the arm lives in filenames.
  if (dir.rfind("infer_", 0) == 0) dir = "infer";
  if (dir.rfind("eval_", 0) == 0) dir = "eval";
  return fs::path(cfg.out_dir) / dir;
}

inline fs::path stage_manifest_path(const RunConfig& cfg, const std::string& stage) {
  const fs::path dir = stage_dir(cfg, stage);
  if (stage.rfind("infer-", 0) == 0) return dir / ("manifest_" + stage.substr(6) + ".json");
  if (stage.rfind("eval-", 0) == 0) return dir / ("manifest_" + stage.substr(5) + ".json");
  if (stage.rfind("finetune-", 0) == 0) return dir / ("manifest_" + stage.substr(9) + ".json");
  return dir / "manifest.json";
}

// The per-stage configuration fingerprint, chained through upstream hashes
// so any upstream change invalidates the whole suffix of the pipeline.
inline std::uint64_t stage_hash(const RunConfig& cfg, const std::string& stage) {
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["seed"] = cfg.seed;
  if (stage == "synth") {
    j["generator"] = cfg.generator.to_json();
  } else if (stage == "codebook") {
    j["upstream"] = pipeline_detail::hash_hex(stage_hash(cfg, "synth"));
    j["codebook_k"] = cfg.codebook_k;
    j["codebook_max_iters"] = cfg.codebook_max_iters;
  } else if (stage == "pretrain") {
    j["upstream"] = pipeline_detail::hash_hex(stage_hash(cfg, "codebook"));
    j["model"] = cfg.model.to_json();
    j["spec"] = cfg.pretrain.to_json();
  } else if (stage == "finetune-tqa") {
    j["upstream"] = pipeline_detail::hash_hex(stage_hash(cfg, "pretrain"));
    j["spec"] = cfg.finetune.to_json();
  } else if (stage == "finetune-no-tqa") {
    j["upstream"] = pipeline_detail::hash_hex(stage_hash(cfg, "codebook"));
    j["model"] = cfg.model.to_json();
    j["spec"] = cfg.finetune.to_json();
  } else if (stage.rfind("infer-", 0) == 0) {
    const std::string arm = stage.substr(6);
    const std::string up = arm == "cascade" ? "pretrain" : "finetune-" + arm;
    j["upstream"] = pipeline_detail::hash_hex(stage_hash(cfg, up));
    j["decode"] = {{"beam_size", cfg.decode.beam_size},
                   {"length_penalty_alpha", cfg.decode.length_penalty_alpha},
                   {"max_new_tokens", cfg.decode.max_new_tokens}};
  } else if (stage.rfind("eval-", 0) == 0) {
    j["upstream"] = pipeline_detail::hash_hex(stage_hash(cfg, "infer-" + stage.substr(5)));
  } else if (stage == "sweep") {
    j["upstream_text"] = pipeline_detail::hash_hex(stage_hash(cfg, "pretrain"));
    j["upstream_unit"] = pipeline_detail::hash_hex(stage_hash(cfg, "finetune-tqa"));
    j["levels"] = cfg.sweep_levels;
    j["decode_beam"] = cfg.decode.beam_size;
  } else {
    throw InvalidInputError("unknown stage: " + stage);
  }
  return fnv1a64_bytes(j.dump());
}

inline void write_stage_manifest(const RunConfig& cfg, const std::string& stage,
                                 const std::vector<std::string>& outputs) {
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["config_hash"] = pipeline_detail::hash_hex(stage_hash(cfg, stage));
  j["seed"] = cfg.seed;
  j["outputs"] = outputs;  // paths relative to the output root
  pipeline_detail::write_text_file(stage_manifest_path(cfg, stage), j.dump(2) + "\n");
}

// Verifies an upstream stage exists and was produced by the current
// configuration; mismatches are refused unless cfg.force.
inline void require_stage(const RunConfig& cfg, const std::string& stage) {
  const fs::path mpath = stage_manifest_path(cfg, stage);
  if (!fs::exists(mpath)) {
    throw StageDependencyError("missing artifact for stage '" + stage + "': " + mpath.string() +
                               " (run the corresponding subcommand first)");
  }
  const nlohmann::json j = pipeline_detail::read_json_file(mpath);
  const std::string recorded = j.at("config_hash").get<std::string>();
  const std::string expected = pipeline_detail::hash_hex(stage_hash(cfg, stage));
  if (recorded != expected && !cfg.force) {
    throw StageDependencyError("stage '" + stage + "' was produced under a different configuration (" +
                               recorded + " != " + expected + "); rerun it or pass --force");
  }
}

// --- Shared artifact loading ----------------------------------------------

namespace pipeline_detail {

inline std::vector<TextQAExample> load_text_examples(const fs::path& manifest) {
  std::vector<TextQAExample> out;
  for (const ManifestExample& m : read_manifest(manifest.string())) out.push_back(m.text_view());
  return out;
}

inline std::vector<UnitQAExample> load_unit_examples(const fs::path& manifest, int k) {
  std::vector<UnitQAExample> out;
  for (const ManifestExample& m : read_manifest(manifest.string())) {
    UnitQAExample u = m.unit_view();
    u.validate(k);
    out.push_back(std::move(u));
  }
  return out;
}

inline ManifestExample synth_to_manifest(const SynthExample& ex) {
  ManifestExample m;
  m.id = ex.id;
  m.kind = ex.kind;
  m.question_text = ex.question_text;
  m.passage_text = ex.passage_text;
  m.answer_text = ex.answer_text;
  m.span_begin_frame = ex.span_begin_frame;
  m.span_end_frame = ex.span_end_frame;
  return m;
}

struct SplitFiles {
  const char* name;       // dev / test / abs
  const char* manifest;   // unit_<x>.jsonl
};

inline const std::vector<SplitFiles>& unit_eval_splits() {
  static const std::vector<SplitFiles> s = {
      {"dev", "unit_dev.jsonl"}, {"test", "unit_test.jsonl"}, {"abs", "unit_abs.jsonl"}};
  return s;
}

}  // namespace pipeline_detail

// --- Stages ----------------------------------------------------------------

inline void cmd_synth(const RunConfig& cfg) {
  cfg.validate();
  GeneratorSpec gen = cfg.generator;
  gen.seed = derive_seed(cfg.seed, "stage.synth");
  const Corpus corpus = generate_corpus(gen);

  const fs::path dir = stage_dir(cfg, "synth");
  fs::create_directories(dir / "features");
  std::vector<std::string> outputs;

  auto dump_split = [&](const std::vector<SynthExample>& split, const std::string& name,
                        bool with_features) {
    std::vector<ManifestExample> rows;
    for (const SynthExample& ex : split) {
      rows.push_back(pipeline_detail::synth_to_manifest(ex));
      if (with_features) {
        const std::string qf = "features/" + ex.id + ".q.uqft";
        const std::string pf = "features/" + ex.id + ".p.uqft";
        write_features((dir / qf).string(), ex.question_features);
        write_features((dir / pf).string(), ex.passage_features);
      }
    }
    write_manifest((dir / name).string(), rows);
    outputs.push_back("synth/" + name);
  };
  dump_split(corpus.text_train, "text_train.jsonl", false);
  dump_split(corpus.unit_train, "unit_train.jsonl", true);
  dump_split(corpus.unit_dev, "unit_dev.jsonl", true);
  dump_split(corpus.unit_test, "unit_test.jsonl", true);
  dump_split(corpus.unit_abs, "unit_abs.jsonl", true);

  pipeline_detail::write_text_file(dir / "goldmap.json", corpus.gold.to_json().dump(2) + "\n");
  outputs.push_back("synth/goldmap.json");
  write_stage_manifest(cfg, "synth", outputs);
}

inline void cmd_codebook(const RunConfig& cfg) {
  cfg.validate();
  require_stage(cfg, "synth");
  const fs::path synth = stage_dir(cfg, "synth");
  const fs::path dir = stage_dir(cfg, "codebook");
  fs::create_directories(dir);
  std::vector<std::string> outputs;

  // K-means over the fine-tune split's frames only.
  const auto train_rows = read_manifest((synth / "unit_train.jsonl").string());
  std::vector<FrameFeatures> train_feats;
  train_feats.reserve(train_rows.size() * 2);
  for (const auto& row : train_rows) {
    train_feats.push_back(read_features((synth / "features" / (row.id + ".q.uqft")).string()));
    train_feats.push_back(read_features((synth / "features" / (row.id + ".p.uqft")).string()));
  }
  const Codebook codebook = train_codebook(train_feats, cfg.codebook_k, cfg.codebook_max_iters,
                                           derive_seed(cfg.seed, "stage.codebook"));
  write_codebook((dir / "codebook.uqcb").string(), codebook);
  outputs.push_back("codebook/codebook.uqcb");

  // Quantize every unit split against the fresh codebook.
  std::vector<UnitSequence> duration_corpus;
  auto quantize_split = [&](const std::string& name, bool feed_duration_model) {
    auto rows = read_manifest((synth / name).string());
    for (auto& row : rows) {
      const FrameFeatures qf = read_features((synth / "features" / (row.id + ".q.uqft")).string());
      const FrameFeatures pf = read_features((synth / "features" / (row.id + ".p.uqft")).string());
      row.question_units = rle_encode(assign_units(qf, codebook));
      row.passage_units = rle_encode(assign_units(pf, codebook));
      row.has_units = true;
      if (feed_duration_model) {
        duration_corpus.push_back(row.question_units);
        duration_corpus.push_back(row.passage_units);
      }
    }
    write_manifest((dir / name).string(), rows);
    outputs.push_back("codebook/" + name);
  };
  quantize_split("unit_train.jsonl", true);
  quantize_split("unit_dev.jsonl", false);
  quantize_split("unit_test.jsonl", false);
  quantize_split("unit_abs.jsonl", false);

  const DurationModel durations = DurationModel::fit(duration_corpus);
  {
    nlohmann::ordered_json j;
    j["global_mean"] = durations.global_mean();
    nlohmann::ordered_json table = nlohmann::ordered_json::object();
    for (const auto& [unit, dur] : durations.table()) table[std::to_string(unit)] = dur;
    j["table"] = table;
    pipeline_detail::write_text_file(dir / "duration_model.json", j.dump(2) + "\n");
    outputs.push_back("codebook/duration_model.json");
  }

  // Joint vocabulary from all transcripts the model can see.
  std::vector<std::string> corpus_lines;
  auto add_lines = [&corpus_lines](const fs::path& manifest) {
    for (const ManifestExample& m : read_manifest(manifest.string())) {
      corpus_lines.push_back(join_tokens(m.question_text));
      corpus_lines.push_back(join_tokens(m.passage_text));
      corpus_lines.push_back(join_tokens(m.answer_text));
    }
  };
  add_lines(synth / "text_train.jsonl");
  add_lines(synth / "unit_train.jsonl");
  const Vocabulary vocab = Vocabulary::build(corpus_lines, cfg.codebook_k);
  vocab.save((dir / "vocab.json").string());
  outputs.push_back("codebook/vocab.json");

  write_stage_manifest(cfg, "codebook", outputs);
}

// Loads the artifacts most stages need.
struct PipelineContext {
  Codebook codebook;
  DurationModel durations;
  Vocabulary vocab;
  GoldMap gold;
  std::vector<int> phoneme_of_unit;
};

inline PipelineContext load_context(const RunConfig& cfg) {
  const fs::path cb = stage_dir(cfg, "codebook");
  const fs::path synth = stage_dir(cfg, "synth");
  PipelineContext ctx;
  ctx.codebook = read_codebook((cb / "codebook.uqcb").string());
  {
    const nlohmann::json j = pipeline_detail::read_json_file(cb / "duration_model.json");
    std::map<int, int> table;
    for (const auto& [key, val] : j.at("table").items()) table[std::stoi(key)] = val.get<int>();
    ctx.durations = DurationModel::from_table(std::move(table), j.at("global_mean").get<int>());
  }
  ctx.vocab = Vocabulary::load((cb / "vocab.json").string());
  ctx.gold = GoldMap::from_json(pipeline_detail::read_json_file(synth / "goldmap.json"));
  ctx.phoneme_of_unit = unit_to_phoneme(ctx.codebook, ctx.gold);
  return ctx;
}

inline void cmd_pretrain(const RunConfig& cfg) {
  cfg.validate();
  require_stage(cfg, "synth");
  require_stage(cfg, "codebook");
  const PipelineContext ctx = load_context(cfg);
  const fs::path dir = stage_dir(cfg, "pretrain");
  fs::create_directories(dir);

  const auto dataset =
      pipeline_detail::load_text_examples(stage_dir(cfg, "synth") / "text_train.jsonl");
  Seq2SeqModel<float> model = Seq2SeqModel<float>::create(cfg.model, ctx.vocab.text_end(),
                                                          derive_seed(cfg.seed, "model.init"));
  TrainSpec spec = cfg.pretrain;
  spec.seed = derive_seed(cfg.seed, "stage.pretrain");
  const std::vector<double> curve = pretrain_tqa(model, dataset, ctx.vocab, spec);

  save_checkpoint(model, (dir / "model_text.uqck").string(), ctx.vocab.hash());
  nlohmann::ordered_json cj;
  cj["epoch_mean_loss"] = curve;
  pipeline_detail::write_text_file(dir / "loss_curve.json", cj.dump(2) + "\n");
  write_stage_manifest(cfg, "pretrain", {"pretrain/model_text.uqck", "pretrain/loss_curve.json"});
}

inline void cmd_finetune(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.arm == "cascade") throw InvalidInputError("finetune arm must be tqa or no-tqa");
  require_stage(cfg, "codebook");
  const PipelineContext ctx = load_context(cfg);
  const fs::path dir = stage_dir(cfg, "finetune-" + cfg.arm);
  fs::create_directories(dir);

  Seq2SeqModel<float> model;
  if (cfg.arm == "tqa") {
    require_stage(cfg, "pretrain");
    LoadedCheckpoint loaded =
        load_checkpoint((stage_dir(cfg, "pretrain") / "model_text.uqck").string());
    if (loaded.vocab_hash != ctx.vocab.hash() && !cfg.force) {
      throw StageDependencyError("pretrained checkpoint was built against a different vocabulary");
    }
    model = std::move(loaded.model);
  } else {
    model = Seq2SeqModel<float>::create(cfg.model, ctx.vocab.text_end(),
                                        derive_seed(cfg.seed, "model.init"));
  }

  // Join the unit tokens: new rows are copies of sampled text rows.
  model.extend_vocab(ctx.vocab.total_size(), derive_seed(cfg.seed, "model.extend"));
  init_unit_embeddings(model.embedding.w, ctx.vocab, derive_seed(cfg.seed, "unit_embed"));

  const auto dataset = pipeline_detail::load_unit_examples(
      stage_dir(cfg, "codebook") / "unit_train.jsonl", cfg.codebook_k);
  TrainSpec spec = cfg.finetune;
  spec.seed = derive_seed(cfg.seed, "stage.finetune");  // both arms share data order
  const std::vector<double> curve = finetune_unit(model, dataset, ctx.vocab, spec);

  const std::string ckpt = "model_" + cfg.arm + ".uqck";
  save_checkpoint(model, (dir / ckpt).string(), ctx.vocab.hash());
  nlohmann::ordered_json cj;
  cj["epoch_mean_loss"] = curve;
  pipeline_detail::write_text_file(dir / "loss_curve.json", cj.dump(2) + "\n");
  write_stage_manifest(cfg, "finetune-" + cfg.arm,
                       {"finetune_" + cfg.arm + "/" + ckpt, "finetune_" + cfg.arm + "/loss_curve.json"});
}

inline void cmd_infer(const RunConfig& cfg) {
  cfg.validate();
  require_stage(cfg, "codebook");
  const PipelineContext ctx = load_context(cfg);
  const fs::path dir = stage_dir(cfg, "infer-" + cfg.arm);
  fs::create_directories(dir);
  const fs::path synth = stage_dir(cfg, "synth");
  const fs::path cb = stage_dir(cfg, "codebook");
  std::vector<std::string> outputs;

  Seq2SeqModel<float> model;
  if (cfg.arm == "cascade") {
    require_stage(cfg, "pretrain");
    model = load_checkpoint((stage_dir(cfg, "pretrain") / "model_text.uqck").string()).model;
  } else {
    require_stage(cfg, "finetune-" + cfg.arm);
    model = load_checkpoint(
                (stage_dir(cfg, "finetune-" + cfg.arm) / ("model_" + cfg.arm + ".uqck")).string())
                .model;
  }
  if (model.steps_trained == 0) throw InvalidStateError("checkpoint holds an untrained model");

  for (const auto& split : pipeline_detail::unit_eval_splits()) {
    const auto rows = read_manifest((cb / split.manifest).string());
    std::string jsonl;
    for (const ManifestExample& ex : rows) {
      nlohmann::ordered_json line;
      line["id"] = ex.id;
      if (cfg.arm == "cascade") {
        line["text"] =
            infer_text_answer(model, ex.question_text, ex.passage_text, ctx.vocab, cfg.decode);
      } else {
        const FrameFeatures qf = read_features((synth / "features" / (ex.id + ".q.uqft")).string());
        const FrameFeatures pf = read_features((synth / "features" / (ex.id + ".p.uqft")).string());
        const InferResult r =
            infer_answer(model, qf, pf, ctx.codebook, ctx.durations, ctx.vocab, cfg.decode);
        line["text"] = join_tokens(transcribe_units(r.answer.units, ctx.phoneme_of_unit, ctx.gold));
        line["units"] = r.raw_units;
        line["empty_answer"] = r.empty_answer;
      }
      jsonl += line.dump() + "\n";
    }
    const std::string fname = "pred_" + cfg.arm + "_" + split.name + ".jsonl";
    pipeline_detail::write_text_file(dir / fname, jsonl);
    outputs.push_back("infer/" + fname);
  }
  write_stage_manifest(cfg, "infer-" + cfg.arm, outputs);
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["dataset_name"] = r.dataset_name;
  j["n_examples"] = r.n_examples;
  auto put = [&j](const char* key, const std::optional<double>& v) {
    if (v) {
      j[key] = *v;
    } else {
      j[key] = nullptr;
    }
  };
  put("f1", r.f1);
  put("em", r.em);
  put("bleu1", r.bleu1);
  put("rouge_l", r.rouge_l);
  put("wer", r.wer);
  return j;
}

inline void cmd_eval(const RunConfig& cfg) {
  cfg.validate();
  require_stage(cfg, "codebook");
  require_stage(cfg, "infer-" + cfg.arm);
  const fs::path dir = stage_dir(cfg, "eval-" + cfg.arm);
  fs::create_directories(dir);
  const fs::path cb = stage_dir(cfg, "codebook");
  const fs::path infer_dir = stage_dir(cfg, "infer-" + cfg.arm);
  std::vector<std::string> outputs;

  std::string csv = "split,f1,em,bleu1,rouge_l,wer\n";
  for (const auto& split : pipeline_detail::unit_eval_splits()) {
    const auto rows = read_manifest((cb / split.manifest).string());
    std::vector<Prediction> golds;
    for (const auto& ex : rows) golds.push_back({ex.id, join_tokens(ex.answer_text)});

    std::vector<Prediction> preds;
    {
      const fs::path pf = infer_dir / ("pred_" + cfg.arm + "_" + split.name + ".jsonl");
      std::ifstream in(pf);
      if (!in) throw StageDependencyError("missing predictions file: " + pf.string());
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        preds.push_back({j.at("id").get<std::string>(), j.at("text").get<std::string>()});
      }
    }
    const EvalMode mode =
        std::string(split.name) == "abs" ? EvalMode::kAbstractive : EvalMode::kExtractive;
    const EvalReport report = evaluate_dataset(preds, golds, mode, split.name);

    const std::string rj = "report_" + cfg.arm + "_" + split.name + ".json";
    pipeline_detail::write_text_file(dir / rj, report_to_json(report).dump(2) + "\n");
    outputs.push_back("eval/" + rj);

    auto cell = [](const std::optional<double>& v) {
      if (!v) return std::string();
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4f", *v);
      return std::string(buf);
    };
    csv += std::string(split.name) + "," + cell(report.f1) + "," + cell(report.em) + "," +
           cell(report.bleu1) + "," + cell(report.rouge_l) + "," + cell(report.wer) + "\n";
  }
  const std::string cf = "report_" + cfg.arm + ".csv";
  pipeline_detail::write_text_file(dir / cf, csv);
  outputs.push_back("eval/" + cf);
  write_stage_manifest(cfg, "eval-" + cfg.arm, outputs);
}

inline SweepResult cmd_sweep(const RunConfig& cfg) {
  cfg.validate();
  require_stage(cfg, "codebook");
  require_stage(cfg, "pretrain");
  require_stage(cfg, "finetune-tqa");
  const PipelineContext ctx = load_context(cfg);
  const fs::path dir = stage_dir(cfg, "sweep");
  fs::create_directories(dir);

  const Seq2SeqModel<float> text_model =
      load_checkpoint((stage_dir(cfg, "pretrain") / "model_text.uqck").string()).model;
  const Seq2SeqModel<float> unit_model =
      load_checkpoint((stage_dir(cfg, "finetune-tqa") / "model_tqa.uqck").string()).model;
  const auto dev = read_manifest((stage_dir(cfg, "codebook") / "unit_dev.jsonl").string());

  const SweepResult result = wer_sweep(text_model, unit_model, dev, cfg.sweep_levels, ctx.vocab,
                                       ctx.gold.words, ctx.phoneme_of_unit, ctx.gold, cfg.decode,
                                       derive_seed(cfg.seed, "stage.sweep"));

  pipeline_detail::write_text_file(dir / "sweep.csv", sweep_to_csv(result));
  nlohmann::ordered_json j;
  j["levels"] = cfg.sweep_levels;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const SweepRow& row : result.rows) {
    rows.push_back({{"level_requested", row.wer_level_requested},
                    {"level_measured", row.wer_level_measured},
                    {"cascade_f1", row.cascade_f1},
                    {"e2e_f1", row.e2e_f1}});
  }
  j["rows"] = rows;
  j["spearman_cascade"] = result.spearman_cascade;
  j["any_best_effort"] = result.any_best_effort;
  pipeline_detail::write_text_file(dir / "summary.json", j.dump(2) + "\n");
  write_stage_manifest(cfg, "sweep", {"sweep/sweep.csv", "sweep/summary.json"});
  return result;
}

// Full pipeline: both model arms plus cascade, evaluation on all splits,
// and the WER sweep; writes a Table-1-shaped summary.
inline void cmd_repro(const RunConfig& cfg) {
  cfg.validate();
  cmd_synth(cfg);
  cmd_codebook(cfg);
  cmd_pretrain(cfg);
  RunConfig arm_cfg = cfg;
  for (const char* arm : {"tqa", "no-tqa"}) {
    arm_cfg.arm = arm;
    cmd_finetune(arm_cfg);
  }
  for (const char* arm : {"tqa", "no-tqa", "cascade"}) {
    arm_cfg.arm = arm;
    cmd_infer(arm_cfg);
    cmd_eval(arm_cfg);
  }
  cmd_sweep(cfg);

  // Collate the grid: three arms over {extractive dev, extractive test,
  // abstractive test}.
  static const std::map<std::string, std::string> arm_labels = {
      {"no-tqa", "Unit-Seq2Seq"}, {"tqa", "Unit-Seq2Seq-TQA"}, {"cascade", "Cascade-Text"}};
  static const std::map<std::string, std::string> split_labels = {
      {"dev", "extractive_dev"}, {"test", "extractive_test"}, {"abs", "abstractive_test"}};
  nlohmann::ordered_json summary;
  summary["config_hash"] = pipeline_detail::hash_hex(fnv1a64_bytes(cfg.to_json().dump()));
  summary["seed"] = cfg.seed;
  nlohmann::ordered_json arms = nlohmann::ordered_json::object();
  for (const char* arm : {"no-tqa", "tqa", "cascade"}) {
    nlohmann::ordered_json per_split = nlohmann::ordered_json::object();
    for (const auto& split : pipeline_detail::unit_eval_splits()) {
      const fs::path rp = fs::path(cfg.out_dir) / "eval" /
                          ("report_" + std::string(arm) + "_" + split.name + ".json");
      nlohmann::json r = pipeline_detail::read_json_file(rp);
      r.erase("dataset_name");
      per_split[split_labels.at(split.name)] = r;
    }
    arms[arm_labels.at(arm)] = per_split;
  }
  summary["arms"] = arms;
  summary["sweep"] = pipeline_detail::read_json_file(fs::path(cfg.out_dir) / "sweep" / "summary.json");
  pipeline_detail::write_text_file(fs::path(cfg.out_dir) / "summary.json", summary.dump(2) + "\n");
}

}  // namespace unitqa
