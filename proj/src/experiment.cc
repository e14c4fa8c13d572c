// src/experiment.cc

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

#include "sot/experiment.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "sot/parallel.h"
#include "sot/training.h"

namespace fs = std::filesystem;

namespace sot {

OutputLock::OutputLock(const std::string& out_dir) {
  fs::create_directories(out_dir);
  path_ = out_dir + "/.lock";
  std::ifstream probe(path_);
  if (probe.good())
    throw std::runtime_error("experiment directory " + out_dir +
                             " is locked by another run (remove " + path_ + " if stale)");
  std::ofstream lock(path_);
  if (!lock) throw std::runtime_error("cannot create lock file " + path_);
  lock << "locked\n";
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

void run_synth(const ExperimentConfig& cfg, const std::string& out_dir, int num_workers) {
  RunPaths paths{out_dir};
  build_corpus(cfg.corpus, cfg.seed, paths.corpus_dir(), num_workers);
}

namespace {

void ensure_corpus(const ExperimentConfig& cfg, const RunPaths& paths) {
  if (!fs::exists(fs::path(paths.corpus_dir()) / "vocab.txt")) run_synth(cfg, paths.out);
}

int read_longest_target(const std::string& model_cfg_path) {
  std::ifstream is(model_cfg_path);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("longest_target=", 0) == 0) return std::stoi(line.substr(15));
  }
  return 0;
}

std::string format_metric(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string mode_row_label(TargetMode mode) {
  switch (mode) {
    case TargetMode::kConventional: return "conventional";
    case TargetMode::kGender: return "joint-gender";
    case TargetMode::kAge: return "joint-age";
    case TargetMode::kGenderAge: return "joint-gender+age";
  }
  return "?";
}

}  // namespace

TrainRunSummary run_train(const ExperimentConfig& cfg, const std::string& out_dir,
                          TargetMode mode, std::uint64_t seed) {
  RunPaths paths{out_dir};
  ensure_corpus(cfg, paths);
  const std::string run_dir = paths.run_dir(mode, seed);
  fs::create_directories(run_dir);

  TrainRunSummary summary;
  summary.checkpoint_path = paths.checkpoint(mode, seed);
  if (fs::exists(summary.checkpoint_path) && fs::exists(paths.model_cfg(mode, seed))) {
    summary.reused = true;
    summary.longest_target = read_longest_target(paths.model_cfg(mode, seed));
    return summary;
  }

  const Vocabulary vocab = Vocabulary::load(paths.corpus_dir() + "/vocab.txt");
  const CorpusSplit train_split = load_split(paths.split_dir("train"), vocab);
  const CorpusSplit valid_split = load_split(paths.split_dir("valid"), vocab);

  TrainConfig train_cfg = cfg.train;
  train_cfg.mode = mode;
  train_cfg.seed = seed;
  const ModelConfig model_cfg = cfg.resolved_model(vocab.size());

  TrainResult result = train_model(train_split, valid_split, vocab, model_cfg, train_cfg);

  result.params.save(summary.checkpoint_path);
  result.model_config.save(paths.model_cfg(mode, seed));
  {
    std::ofstream os(paths.model_cfg(mode, seed), std::ios::app);
    os << "longest_target=" << result.longest_target << "\n";
  }
  {
    std::ofstream os(paths.curves(mode, seed));
    os << "epoch,train_loss,valid_loss\n";
    for (const EpochStats& e : result.curves)
      os << e.epoch << ',' << e.train_loss << ',' << e.valid_loss << "\n";
  }
  summary.best_epoch = result.best_epoch;
  summary.best_valid_loss = result.best_valid_loss;
  summary.epochs_run = static_cast<int>(result.curves.size());
  summary.longest_target = result.longest_target;
  return summary;
}

std::map<std::string, std::vector<int>> decode_split(const TransformerModel<float>& model,
                                                     ParamSet<float>& params,
                                                     const CorpusSplit& split, int beam,
                                                     int max_len, int num_workers) {
  const int workers = resolve_workers(num_workers);
  std::vector<DecodeResult> results(split.samples.size());
  for_each_ordered(
      split.samples.size(), workers,
      [&](std::size_t i, std::size_t) {
        MatX<float> enc = model.encode(split.samples[i].features, params);
        TransformerScorer<float> scorer(model, params, std::move(enc));
        results[i] = beam_search(scorer, Vocabulary::kEosId, beam, max_len);
      },
      [](std::size_t, std::size_t) {});
  std::map<std::string, std::vector<int>> best;
  for (std::size_t i = 0; i < split.samples.size(); ++i)
    best[split.samples[i].id] = results[i].best.tokens;
  return best;
}

void write_nbest_file(const std::string& path,
                      const std::vector<std::pair<std::string, DecodeResult>>& results,
                      const Vocabulary& vocab) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << std::setprecision(8);
  for (const auto& [id, result] : results) {
    int rank = 0;
    for (const DecodeHypothesis& hyp : result.nbest) {
      os << id << ' ' << rank++ << ' ' << hyp.score;
      for (int tok : hyp.tokens) os << ' ' << vocab.token(tok);
      os << "\n";
    }
  }
}

std::map<std::string, std::vector<int>> read_best_hypotheses(const std::string& path,
                                                             const Vocabulary& vocab) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open hypothesis file " + path);
  std::map<std::string, std::vector<int>> best;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id, token;
    int rank;
    double score;
    if (!(ls >> id >> rank >> score))
      throw std::runtime_error("malformed hypothesis line: " + line);
    if (rank != 0) continue;
    std::vector<int> tokens;
    while (ls >> token) tokens.push_back(vocab.id_of(token));
    best[id] = std::move(tokens);
  }
  return best;
}

std::map<std::string, std::vector<int>> run_decode(const ExperimentConfig& cfg,
                                                   const std::string& out_dir, TargetMode mode,
                                                   std::uint64_t seed, const std::string& split,
                                                   int beam_override,
                                                   const std::string& checkpoint_override) {
  RunPaths paths{out_dir};
  const Vocabulary vocab = Vocabulary::load(paths.corpus_dir() + "/vocab.txt");
  const CorpusSplit refs = load_split(paths.split_dir(split), vocab);

  const std::string ckpt =
      checkpoint_override.empty() ? paths.checkpoint(mode, seed) : checkpoint_override;
  if (!fs::exists(ckpt)) throw std::runtime_error("decode: missing checkpoint " + ckpt);
  const ModelConfig model_cfg = ModelConfig::load(paths.model_cfg(mode, seed));
  const int longest = read_longest_target(paths.model_cfg(mode, seed));

  ParamSet<float> params = ParamSet<float>::load(ckpt);
  const TransformerModel<float> model(model_cfg);

  const int beam = beam_override > 0 ? beam_override : cfg.decode.beam;
  int max_len = cfg.decode.max_len;
  if (max_len <= 0) max_len = longest > 0 ? 2 * longest : model_cfg.max_target_len;
  max_len = std::min(max_len, model_cfg.max_target_len);

  const int workers = resolve_workers(0);
  std::vector<DecodeResult> results(refs.samples.size());
  for_each_ordered(
      refs.samples.size(), workers,
      [&](std::size_t i, std::size_t) {
        MatX<float> enc = model.encode(refs.samples[i].features, params);
        TransformerScorer<float> scorer(model, params, std::move(enc));
        results[i] = beam_search(scorer, Vocabulary::kEosId, beam, max_len);
      },
      [](std::size_t, std::size_t) {});

  std::vector<std::pair<std::string, DecodeResult>> named;
  named.reserve(results.size());
  for (std::size_t i = 0; i < results.size(); ++i)
    named.emplace_back(refs.samples[i].id, std::move(results[i]));
  write_nbest_file(paths.nbest(mode, seed, split), named, vocab);

  std::map<std::string, std::vector<int>> best;
  for (auto& [id, result] : named) best[id] = result.best.tokens;
  return best;
}

ScoreReport run_score(const ExperimentConfig& cfg, const std::string& out_dir, TargetMode mode,
                      std::uint64_t seed, const std::string& split,
                      const std::string& hyp_override) {
  (void)cfg;
  RunPaths paths{out_dir};
  const Vocabulary vocab = Vocabulary::load(paths.corpus_dir() + "/vocab.txt");
  const CorpusSplit refs = load_split(paths.split_dir(split), vocab);
  const std::string hyp_path =
      hyp_override.empty() ? paths.nbest(mode, seed, split) : hyp_override;
  const auto hyps = read_best_hypotheses(hyp_path, vocab);

  ScoreReport report = score_corpus(refs, hyps, vocab, mode);
  {
    std::ofstream os(paths.report(mode, seed, split));
    os << report.to_text();
  }
  {
    std::ofstream os(paths.run_dir(mode, seed) + "/per_sample-" + split + ".csv");
    os << report.per_sample_csv();
  }
  return report;
}

CompareResult run_compare(const ExperimentConfig& cfg, const std::string& out_dir,
                          std::vector<TargetMode> modes, std::vector<std::uint64_t> seeds) {
  if (seeds.empty()) seeds = {cfg.seed};
  RunPaths paths{out_dir};
  ensure_corpus(cfg, paths);

  CompareResult result;
  result.modes = modes;
  result.seeds = seeds;
  for (TargetMode mode : modes) {
    std::vector<ScoreReport> row;
    for (std::uint64_t seed : seeds) {
      run_train(cfg, out_dir, mode, seed);
      run_decode(cfg, out_dir, mode, seed);
      row.push_back(run_score(cfg, out_dir, mode, seed));
    }
    result.reports.push_back(std::move(row));
  }

  std::ostringstream os;
  os << std::left << std::setw(18) << "system" << std::right << std::setw(9) << "CER"
     << std::setw(9) << "SCA" << std::setw(9) << "SGA" << std::setw(9) << "SAA" << "\n";
  for (std::size_t m = 0; m < modes.size(); ++m) {
    std::vector<double> cer, sca, sga, saa;
    for (const ScoreReport& r : result.reports[m]) {
      cer.push_back(r.cer());
      sca.push_back(r.sca());
      if (r.has_sga()) sga.push_back(r.sga());
      if (r.has_saa()) saa.push_back(r.saa());
    }
    os << std::left << std::setw(18) << mode_row_label(modes[m]) << std::right << std::setw(9)
       << format_metric(median(cer)) << std::setw(9) << format_metric(median(sca)) << std::setw(9)
       << (sga.empty() ? std::string("-") : format_metric(median(sga))) << std::setw(9)
       << (saa.empty() ? std::string("-") : format_metric(median(saa))) << "\n";
  }
  if (seeds.size() > 1) {
    os << "\n# per-seed CER\n";
    for (std::size_t m = 0; m < modes.size(); ++m) {
      os << mode_row_label(modes[m]) << ":";
      for (std::size_t s = 0; s < seeds.size(); ++s)
        os << " seed" << seeds[s] << "=" << format_metric(result.reports[m][s].cer());
      os << "\n";
    }
  }
  result.table = os.str();
  std::ofstream table_file(paths.compare_table());
  table_file << result.table;
  return result;
}

GradCheckReport run_micro_gradcheck(std::uint64_t seed, std::size_t coords, double eps,
                                    double tol) {
  ModelConfig cfg;
  cfg.model_dim = 8;
  cfg.ffn_dim = 16;
  cfg.heads = 2;
  cfg.encoder_blocks = 1;
  cfg.decoder_blocks = 1;
  cfg.vocab_size = 30;
  cfg.feat_dim = 6;
  cfg.max_target_len = 16;
  cfg.dropout = 0.0;

  const TransformerModel<double> model(cfg);
  ParamSet<double> params;
  model.init_params(params, seed);

  auto rng = make_rng(derive_seed(seed, "gradcheck-data"));
  std::normal_distribution<double> unit(0.0, 1.0);
  MatX<double> feats(9, cfg.feat_dim);
  for (Eigen::Index i = 0; i < feats.rows(); ++i)
    for (Eigen::Index j = 0; j < feats.cols(); ++j) feats(i, j) = unit(rng);
  std::uniform_int_distribution<int> tok(Vocabulary::kTextBaseId, cfg.vocab_size - 1);
  std::vector<int> target;
  for (int i = 0; i < 6; ++i) target.push_back(tok(rng));
  target.push_back(Vocabulary::kEosId);

  auto loss_fn = [&](bool want_grad) {
    Graph<double> g(Mode::kEval);
    ParamBinder<double> bind(g, params);
    auto loss = model.loss_expr(g, bind, feats, target, 0.1, Vocabulary::kEosId);
    if (want_grad) g.backward(loss);
    return loss.value()(0, 0);
  };
  return grad_check(params, loss_fn, eps, tol, coords, seed);
}

}  // namespace sot
