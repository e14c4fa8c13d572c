// tools/sotasr_main.cc

// Copyright 2026  The sotasr authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sot/experiment.h"

namespace {

struct CliArgs {
  std::string config;
  std::string out = "exp";
  std::string mode;
  std::string checkpoint;
  std::string split = "test";
  std::string hyp;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int beam = 0;
};

sot::ExperimentConfig load_config(const CliArgs& args) {
  sot::ExperimentConfig cfg = sot::ExperimentConfig::parse_file(args.config);
  if (args.seed_set) {
    cfg.seed = args.seed;
    cfg.train.seed = args.seed;
  }
  return cfg;
}

sot::TargetMode pick_mode(const CliArgs& args, const sot::ExperimentConfig& cfg) {
  return args.mode.empty() ? cfg.train.mode : sot::target_mode_from_name(args.mode);
}

void add_common(CLI::App* cmd, CliArgs& args, bool needs_config = true) {
  cmd->add_option("--config", args.config, "experiment config file")->required(needs_config);
  cmd->add_option("--out", args.out, "experiment output directory");
  auto* seed = cmd->add_option("--seed", args.seed, "seed override");
  cmd->callback([&args, seed]() { args.seed_set = seed->count() > 0; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serialized output training for overlapped speech, with speaker attributes"};
  app.require_subcommand(1);
  CliArgs args;

  auto* synth = app.add_subcommand("synth-data", "generate the synthetic overlapped corpus");
  add_common(synth, args);

  auto* train = app.add_subcommand("train", "train one serialization mode");
  add_common(train, args);
  train->add_option("--mode", args.mode, "conventional|gender|age|gender_age");

  auto* decode = app.add_subcommand("decode", "beam-decode a corpus split");
  add_common(decode, args);
  decode->add_option("--mode", args.mode, "conventional|gender|age|gender_age");
  decode->add_option("--beam", args.beam, "beam size override");
  decode->add_option("--checkpoint", args.checkpoint, "checkpoint path override");
  decode->add_option("--split", args.split, "corpus split to decode");

  auto* score = app.add_subcommand("score", "score decoded hypotheses");
  add_common(score, args);
  score->add_option("--mode", args.mode, "conventional|gender|age|gender_age");
  score->add_option("--split", args.split, "corpus split to score");
  score->add_option("--hyp", args.hyp, "hypothesis (n-best) file override");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gradcheck->add_option("--seed", args.seed, "seed override");

  auto* compare = app.add_subcommand("compare", "train+decode+score all modes, emit the table");
  add_common(compare, args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      sot::OutputLock lock(args.out);
      run_synth(load_config(args), args.out);
      std::cout << "corpus written under " << args.out << "/corpus\n";
    } else if (train->parsed()) {
      sot::OutputLock lock(args.out);
      auto cfg = load_config(args);
      auto summary = sot::run_train(cfg, args.out, pick_mode(args, cfg), cfg.seed);
      if (summary.reused) {
        std::cout << "reusing existing checkpoint " << summary.checkpoint_path << "\n";
      } else {
        std::cout << "trained " << summary.epochs_run << " epochs; best epoch "
                  << summary.best_epoch << " valid loss " << summary.best_valid_loss << "\n"
                  << "checkpoint: " << summary.checkpoint_path << "\n";
      }
    } else if (decode->parsed()) {
      sot::OutputLock lock(args.out);
      auto cfg = load_config(args);
      auto best = sot::run_decode(cfg, args.out, pick_mode(args, cfg), cfg.seed, args.split,
                                  args.beam, args.checkpoint);
      std::cout << "decoded " << best.size() << " samples from split " << args.split << "\n";
    } else if (score->parsed()) {
      sot::OutputLock lock(args.out);
      auto cfg = load_config(args);
      auto report =
          sot::run_score(cfg, args.out, pick_mode(args, cfg), cfg.seed, args.split, args.hyp);
      std::cout << report.to_text();
    } else if (gradcheck->parsed()) {
      auto report = sot::run_micro_gradcheck(args.seed_set ? args.seed : 7);
      std::cout << report.summary() << "\n";
      return report.pass ? 0 : 1;
    } else if (compare->parsed()) {
      sot::OutputLock lock(args.out);
      auto cfg = load_config(args);
      auto result = sot::run_compare(cfg, args.out);
      std::cout << result.table;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
