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

// unitqa — one binary for the whole pipeline.
//
//   unitqa synth     --config cfg.json --seed 7 --out runs/a
//   unitqa codebook  ...
//   unitqa pretrain  ...
//   unitqa finetune  --arm tqa|no-tqa
//   unitqa infer     --arm tqa|no-tqa|cascade
//   unitqa eval      --arm tqa|no-tqa|cascade
//   unitqa sweep     --levels 0,0.1,0.2,0.3,0.4
//   unitqa repro     (everything, then a collated summary)
//
// Precedence for every setting: command-line flag > config file > default.

#include <cstdio>
#include <exception>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "unitqa/unitqa.hpp"

namespace {

std::vector<double> parse_levels(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw unitqa::InvalidInputError("bad --levels entry: '" + item + "'");
    }
  }
  if (out.empty()) throw unitqa::InvalidInputError("--levels parsed to an empty list");
  return out;
}

struct CommonFlags {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> arm;
  std::optional<std::string> levels;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_arm, bool with_levels) {
  cmd->add_option("--config", f.config_path, "JSON run configuration");
  cmd->add_option("--seed", f.seed, "root seed (overrides config)");
  cmd->add_option("--out", f.out_dir, "output directory (overrides config)");
  if (with_arm) {
    cmd->add_option("--arm", f.arm, "model arm: tqa | no-tqa | cascade");
  }
  if (with_levels) {
    cmd->add_option("--levels", f.levels, "comma-separated corruption levels, e.g. 0,0.1,0.2");
  }
  cmd->add_flag("--force", f.force, "ignore upstream config-hash mismatches");
}

unitqa::RunConfig resolve(const CommonFlags& f) {
  unitqa::RunConfig cfg =
      f.config_path ? unitqa::RunConfig::from_file(*f.config_path) : unitqa::RunConfig{};
  if (f.seed) cfg.seed = *f.seed;
  if (f.out_dir) cfg.out_dir = *f.out_dir;
  if (f.arm) cfg.arm = *f.arm;
  if (f.levels) cfg.sweep_levels = parse_levels(*f.levels);
  cfg.force = f.force;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unitqa — textless spoken question answering pipeline"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    bool with_arm;
    bool with_levels;
    void (*run)(const unitqa::RunConfig&);
  };
  static const Sub subs[] = {
      {"synth", "generate the synthetic spoken-QA corpus", false, false, &unitqa::cmd_synth},
      {"codebook", "train the k-means codebook and quantize all splits", false, false,
       &unitqa::cmd_codebook},
      {"pretrain", "pretrain the seq2seq model on text QA", false, false, &unitqa::cmd_pretrain},
      {"finetune", "fine-tune on unit QA (arm tqa or no-tqa)", true, false, &unitqa::cmd_finetune},
      {"infer", "decode answers for dev/test/abs under one arm", true, false, &unitqa::cmd_infer},
      {"eval", "score predictions for one arm", true, false, &unitqa::cmd_eval},
      {"sweep", "WER robustness sweep: cascade vs end-to-end", false, true,
       [](const unitqa::RunConfig& c) { (void)unitqa::cmd_sweep(c); }},
      {"repro", "run every stage and collate the results grid", false, true, &unitqa::cmd_repro},
  };

  std::vector<CommonFlags> flags(std::size(subs));
  std::vector<const Sub*> chosen;
  for (size_t i = 0; i < std::size(subs); ++i) {
    CLI::App* cmd = app.add_subcommand(subs[i].name, subs[i].help);
    add_common(cmd, flags[i], subs[i].with_arm, subs[i].with_levels);
    const Sub* sub = &subs[i];
    CommonFlags* f = &flags[i];
    cmd->callback([sub, f, &chosen]() {
      chosen.push_back(sub);
      sub->run(resolve(*f));
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const unitqa::InvalidInputError& e) {
    std::fprintf(stderr, "error (invalid input): %s\n", e.what());
    return 2;
  } catch (const unitqa::InvalidStateError& e) {
    std::fprintf(stderr, "error (invalid state): %s\n", e.what());
    return 3;
  } catch (const unitqa::StageDependencyError& e) {
    std::fprintf(stderr, "error (stage dependency): %s\n", e.what());
    return 4;
  } catch (const unitqa::ChecksumError& e) {
    std::fprintf(stderr, "error (checksum): %s\n", e.what());
    return 5;
  } catch (const unitqa::TrainingDivergedError& e) {
    std::fprintf(stderr, "error (training diverged): %s\n", e.what());
    return 6;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  if (!chosen.empty()) {
    std::fprintf(stdout, "ok: %s\n", chosen.back()->name);
  }
  return 0;
}
