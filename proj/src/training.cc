// src/training.cc

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

#include "sot/training.h"

#include <algorithm>
#include <iostream>
#include <numeric>

#include "sot/parallel.h"

namespace sot {

FeatureMatrix spec_augment(const FeatureMatrix& feats, const SpecAugmentConfig& cfg,
                           std::mt19937_64& rng) {
  FeatureMatrix out = feats;
  if (cfg.time_masks > 0 && cfg.time_mask_width > 0) {
    if (cfg.time_mask_width >= feats.rows())
      throw std::invalid_argument("spec_augment: time mask width " +
                                  std::to_string(cfg.time_mask_width) + " >= " +
                                  std::to_string(feats.rows()) + " frames");
    std::uniform_int_distribution<Eigen::Index> start(0, feats.rows() - cfg.time_mask_width);
    for (int k = 0; k < cfg.time_masks; ++k)
      out.middleRows(start(rng), cfg.time_mask_width).setZero();
  }
  if (cfg.freq_masks > 0 && cfg.freq_mask_width > 0) {
    if (cfg.freq_mask_width >= feats.cols())
      throw std::invalid_argument("spec_augment: freq mask width " +
                                  std::to_string(cfg.freq_mask_width) + " >= " +
                                  std::to_string(feats.cols()) + " bands");
    std::uniform_int_distribution<Eigen::Index> start(0, feats.cols() - cfg.freq_mask_width);
    for (int k = 0; k < cfg.freq_masks; ++k)
      out.middleCols(start(rng), cfg.freq_mask_width).setZero();
  }
  return out;
}

std::vector<std::vector<int>> make_targets(const CorpusSplit& split, const Vocabulary& vocab,
                                           TargetMode mode) {
  std::vector<std::vector<int>> targets;
  targets.reserve(split.samples.size());
  for (const MixedSample& s : split.samples)
    targets.push_back(serialize_target(s.utterances, vocab, mode).tokens);
  return targets;
}

namespace {

std::size_t token_count(const std::vector<std::vector<int>>& targets,
                        const std::vector<std::size_t>& indices, std::size_t begin,
                        std::size_t end) {
  std::size_t n = 0;
  for (std::size_t k = begin; k < end; ++k) n += targets[indices[k]].size();
  return n;
}

}  // namespace

double corpus_loss(const TransformerModel<float>& model, ParamSet<float>& params,
                   const CorpusSplit& split, const std::vector<std::vector<int>>& targets,
                   float label_smoothing, int num_workers) {
  if (split.samples.size() != targets.size())
    throw std::invalid_argument("corpus_loss: sample/target count mismatch");
  const int workers = resolve_workers(num_workers);
  std::vector<double> losses(ordered_slot_count(workers));
  double total_loss = 0;
  std::size_t total_tokens = 0;
  for_each_ordered(
      split.samples.size(), workers,
      [&](std::size_t i, std::size_t slot) {
        Graph<float> g(Mode::kEval);
        ParamBinder<float> bind(g, params);
        auto loss = model.loss_expr(g, bind, split.samples[i].features, targets[i],
                                    label_smoothing, Vocabulary::kEosId);
        losses[slot] = static_cast<double>(loss.value()(0, 0));
      },
      [&](std::size_t i, std::size_t slot) {
        total_loss += losses[slot];
        total_tokens += targets[i].size();
      });
  return total_loss / static_cast<double>(std::max<std::size_t>(1, total_tokens));
}

TrainResult train_model(const CorpusSplit& train_split, const CorpusSplit& valid_split,
                        const Vocabulary& vocab, ModelConfig model_cfg, const TrainConfig& cfg) {
  cfg.validate();
  if (train_split.samples.empty() || valid_split.samples.empty())
    throw std::invalid_argument("train: empty split");
  model_cfg.vocab_size = vocab.size();
  model_cfg.dropout = cfg.dropout;
  model_cfg.validate();

  const auto train_targets = make_targets(train_split, vocab, cfg.mode);
  const auto valid_targets = make_targets(valid_split, vocab, cfg.mode);
  std::size_t longest = 0;
  for (const auto& t : train_targets) longest = std::max(longest, t.size());
  for (const auto& t : valid_targets) longest = std::max(longest, t.size());
  if (static_cast<int>(longest) > model_cfg.max_target_len)
    throw std::invalid_argument("train: longest target " + std::to_string(longest) +
                                " exceeds max_target_len " +
                                std::to_string(model_cfg.max_target_len));

  const TransformerModel<float> model(model_cfg);
  ParamSet<float> params;
  model.init_params(params, cfg.seed);
  params.mode = Mode::kTrain;
  RAdam<float> optimizer(params, cfg.optimizer);

  const int workers = resolve_workers(cfg.num_workers);
  const std::size_t slots = ordered_slot_count(workers);
  std::vector<GradBuffer<float>> buffers(slots);
  for (auto& b : buffers) b.reset_like(params);
  std::vector<double> slot_loss(slots);

  TrainResult result;
  result.model_config = model_cfg;
  result.longest_target = static_cast<int>(longest);
  result.best_valid_loss = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_split.samples.size());
  std::iota(order.begin(), order.end(), 0);

  int epochs_since_best = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    auto shuffle_rng = make_rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0;
    std::size_t epoch_tokens = 0;
    const std::size_t n = order.size();
    for (std::size_t base = 0; base < n; base += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n, base + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t batch_tokens = token_count(train_targets, order, base, end);
      const float scale = 1.0f / static_cast<float>(batch_tokens);
      params.zero_grads();

      for_each_ordered(
          end - base, workers,
          [&](std::size_t k, std::size_t slot) {
            const std::size_t idx = order[base + k];
            const MixedSample& sample = train_split.samples[idx];
            buffers[slot].zero();

            FeatureMatrix feats = sample.features;
            if (cfg.specaugment.enabled()) {
              auto aug_rng = make_rng(derive_seed(cfg.seed, "augment",
                                                  static_cast<std::uint64_t>(epoch),
                                                  static_cast<std::uint64_t>(idx)));
              feats = spec_augment(feats, cfg.specaugment, aug_rng);
            }
            Graph<float> g(Mode::kTrain,
                           derive_seed(cfg.seed, "dropout", static_cast<std::uint64_t>(epoch),
                                       static_cast<std::uint64_t>(idx)));
            ParamBinder<float> bind(g, params, &buffers[slot]);
            auto loss = model.loss_expr(g, bind, feats, train_targets[idx],
                                        cfg.label_smoothing, Vocabulary::kEosId);
            g.backward(scale * loss);
            slot_loss[slot] = static_cast<double>(loss.value()(0, 0));
          },
          [&](std::size_t k, std::size_t slot) {
            const std::size_t idx = order[base + k];
            if (!std::isfinite(slot_loss[slot]))
              throw std::runtime_error("train: loss diverged (non-finite) at epoch " +
                                       std::to_string(epoch) + ", sample " +
                                       train_split.samples[idx].id);
            buffers[slot].reduce_into(params);
            epoch_loss += slot_loss[slot];
            epoch_tokens += train_targets[idx].size();
          });

      auto info = optimizer.step();
      if (!info.applied) {
        ++result.skipped_steps;
        std::cerr << "train: skipped optimizer step " << info.step + 1 << ": "
                  << info.skip_reason << "\n";
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(std::max<std::size_t>(1, epoch_tokens));
    stats.valid_loss =
        corpus_loss(model, params, valid_split, valid_targets, cfg.label_smoothing, workers);
    result.curves.push_back(stats);

    if (stats.valid_loss < result.best_valid_loss) {
      result.best_valid_loss = stats.valid_loss;
      result.best_epoch = epoch;
      result.params = params;  // snapshot, optimizer state included
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= cfg.patience) break;
    }
  }

  if (result.best_epoch == 0) throw std::runtime_error("train: no epoch completed");
  result.params.mode = Mode::kEval;
  return result;
}

}  // namespace sot
