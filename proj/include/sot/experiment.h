// sot/experiment.h

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

#pragma once

#include <map>
#include <string>
#include <vector>

#include "sot/config.h"
#include "sot/decoding.h"
#include "sot/evaluation.h"
#include "sot/gradcheck.h"

namespace sot {

/// Exclusive lock file for an experiment output directory; throws when the
/// directory is already locked by another process.
class OutputLock {
 public:
  explicit OutputLock(const std::string& out_dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::string path_;
};

/// Artifact layout under one experiment output directory.
struct RunPaths {
  std::string out;

  std::string corpus_dir() const { return out + "/corpus"; }
  std::string split_dir(const std::string& split) const { return corpus_dir() + "/" + split; }
  std::string run_dir(TargetMode mode, std::uint64_t seed) const {
    return out + "/run-" + target_mode_name(mode) + "-seed" + std::to_string(seed);
  }
  std::string checkpoint(TargetMode mode, std::uint64_t seed) const {
    return run_dir(mode, seed) + "/checkpoint.bin";
  }
  std::string model_cfg(TargetMode mode, std::uint64_t seed) const {
    return run_dir(mode, seed) + "/model.cfg";
  }
  std::string curves(TargetMode mode, std::uint64_t seed) const {
    return run_dir(mode, seed) + "/curves.csv";
  }
  std::string nbest(TargetMode mode, std::uint64_t seed, const std::string& split) const {
    return run_dir(mode, seed) + "/nbest-" + split + ".txt";
  }
  std::string report(TargetMode mode, std::uint64_t seed, const std::string& split) const {
    return run_dir(mode, seed) + "/report-" + split + ".txt";
  }
  std::string compare_table() const { return out + "/compare.txt"; }
};

/// Builds the synthetic corpus under <out>/corpus.
void run_synth(const ExperimentConfig& cfg, const std::string& out_dir, int num_workers = 0);

struct TrainRunSummary {
  std::string checkpoint_path;
  int best_epoch = 0;
  double best_valid_loss = 0;
  int epochs_run = 0;
  int longest_target = 0;
  bool reused = false;  // run directory already held a checkpoint
};

/// Trains one mode and writes checkpoint.bin, model.cfg and curves.csv under
/// the run directory. An existing checkpoint for the same mode and seed is
/// reused instead of retrained.
TrainRunSummary run_train(const ExperimentConfig& cfg, const std::string& out_dir,
                          TargetMode mode, std::uint64_t seed);

/// Beam-decodes a split with a trained run; writes the n-best file and
/// returns the 1-best token ids per sample id.
std::map<std::string, std::vector<int>> run_decode(const ExperimentConfig& cfg,
                                                   const std::string& out_dir, TargetMode mode,
                                                   std::uint64_t seed,
                                                   const std::string& split = "test",
                                                   int beam_override = 0,
                                                   const std::string& checkpoint_override = "");

/// Scores a decoded split against its manifest; writes report-<split>.txt and
/// the per-sample table, returns the pooled report.
ScoreReport run_score(const ExperimentConfig& cfg, const std::string& out_dir, TargetMode mode,
                      std::uint64_t seed, const std::string& split = "test",
                      const std::string& hyp_override = "");

struct CompareResult {
  std::vector<TargetMode> modes;
  std::vector<std::uint64_t> seeds;
  // reports[m][s]: mode m decoded with seed s
  std::vector<std::vector<ScoreReport>> reports;
  std::string table;
};

/// Trains, decodes and scores every requested mode on the shared corpus and
/// emits the side-by-side metric table (medians across seeds when several
/// are given). The table is written to <out>/compare.txt.
CompareResult run_compare(const ExperimentConfig& cfg, const std::string& out_dir,
                          std::vector<TargetMode> modes = {TargetMode::kConventional,
                                                           TargetMode::kGender, TargetMode::kAge,
                                                           TargetMode::kGenderAge},
                          std::vector<std::uint64_t> seeds = {});

/// Finite-difference verification on a one-encoder-block, one-decoder-block,
/// dim-8 model in double precision.
GradCheckReport run_micro_gradcheck(std::uint64_t seed = 7, std::size_t coords = 200,
                                    double eps = 1e-4, double tol = 1e-3);

/// Decodes every sample of a split (deterministic for any worker count).
std::map<std::string, std::vector<int>> decode_split(const TransformerModel<float>& model,
                                                     ParamSet<float>& params,
                                                     const CorpusSplit& split, int beam,
                                                     int max_len, int num_workers = 0);

/// N-best file helpers: line format "<sample id> <rank> <score> <tokens...>".
void write_nbest_file(const std::string& path,
                      const std::vector<std::pair<std::string, DecodeResult>>& results,
                      const Vocabulary& vocab);
std::map<std::string, std::vector<int>> read_best_hypotheses(const std::string& path,
                                                             const Vocabulary& vocab);

}  // namespace sot
