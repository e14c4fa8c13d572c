// sot/training.h

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

#include <cmath>
#include <string>
#include <vector>

#include "sot/model.h"
#include "sot/params.h"
#include "sot/synth.h"
#include "sot/vocab.h"

namespace sot {

/// Cross entropy against the label-smoothed target distribution
/// q = (1-alpha) * onehot(target) + alpha / V over a normalized prediction.
template <typename Scalar>
Scalar smoothed_ce(const VecX<Scalar>& pred, int target, Scalar alpha) {
  if (alpha < Scalar(0) || alpha >= Scalar(1))
    throw std::invalid_argument("smoothed_ce: alpha must be in [0,1)");
  const Eigen::Index v = pred.size();
  if (target < 0 || target >= v)
    throw std::out_of_range("smoothed_ce: target " + std::to_string(target) +
                            " outside vocabulary of " + std::to_string(v));
  Scalar loss = 0;
  const Scalar uniform = alpha / static_cast<Scalar>(v);
  for (Eigen::Index i = 0; i < v; ++i) {
    Scalar q = uniform + (i == target ? Scalar(1) - alpha : Scalar(0));
    if (q > Scalar(0)) loss -= q * std::log(pred[i]);
  }
  return loss;
}

struct SpecAugmentConfig {
  int freq_masks = 0;
  int freq_mask_width = 0;
  int time_masks = 0;
  int time_mask_width = 0;

  bool enabled() const {
    return (freq_masks > 0 && freq_mask_width > 0) || (time_masks > 0 && time_mask_width > 0);
  }
};

/// Zeroes `time_masks` contiguous frame spans and `freq_masks` contiguous
/// feature bands, each of the exact configured width at a uniformly drawn
/// position. Identity when no masks are configured.
FeatureMatrix spec_augment(const FeatureMatrix& feats, const SpecAugmentConfig& cfg,
                           std::mt19937_64& rng);

struct RAdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Rectified Adam. Maintains first/second moment estimates per trainable
/// tensor and the shared step counter inside the ParamSet under the opt/
/// prefix, so optimizer state rides along in checkpoints. While the variance
/// rectification term rho_t stays at or below 4 the update falls back to the
/// un-adapted momentum step.
template <typename Scalar>
class RAdam {
 public:
  struct StepInfo {
    bool applied = false;
    bool rectified = false;
    long step = 0;
    std::string skip_reason;
  };

  RAdam(ParamSet<Scalar>& params, RAdamConfig cfg) : params_(&params), cfg_(cfg) {
    if (cfg_.lr <= 0 || cfg_.beta1 < 0 || cfg_.beta1 >= 1 || cfg_.beta2 <= 0 ||
        cfg_.beta2 >= 1 || cfg_.eps <= 0)
      throw std::invalid_argument("RAdam: bad hyperparameters");
    trainable_ = params.trainable_indices();
    if (!params.has("opt/t")) params.create("opt/t", 1, 1);
    for (std::size_t i : trainable_) {
      const auto& e = params.entry(i);
      if (!params.has("opt/m/" + e.name))
        params.create("opt/m/" + e.name, e.value.rows(), e.value.cols());
      if (!params.has("opt/v/" + e.name))
        params.create("opt/v/" + e.name, e.value.rows(), e.value.cols());
    }
  }

  /// One update from the gradients currently held in the ParamSet. Non-finite
  /// gradients skip the step (state untouched) and report why.
  StepInfo step() {
    StepInfo info;
    for (std::size_t i : trainable_) {
      const auto& g = params_->entry(i).grad;
      if (!g.allFinite()) {
        info.skip_reason = "non-finite gradient in " + params_->entry(i).name;
        info.step = current_step();
        return info;
      }
    }
    const long t = current_step() + 1;
    set_step(t);
    const double beta1_t = std::pow(cfg_.beta1, static_cast<double>(t));
    const double beta2_t = std::pow(cfg_.beta2, static_cast<double>(t));
    const double rho_inf = 2.0 / (1.0 - cfg_.beta2) - 1.0;
    const double rho_t = rho_inf - 2.0 * static_cast<double>(t) * beta2_t / (1.0 - beta2_t);
    info.rectified = rho_t > 4.0;
    double rect = 0.0;
    if (info.rectified)
      rect = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                       ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));

    for (std::size_t i : trainable_) {
      auto& e = params_->entry(i);
      auto& m = params_->value("opt/m/" + e.name);
      auto& v = params_->value("opt/v/" + e.name);
      m = static_cast<Scalar>(cfg_.beta1) * m + static_cast<Scalar>(1.0 - cfg_.beta1) * e.grad;
      v = static_cast<Scalar>(cfg_.beta2) * v +
          static_cast<Scalar>(1.0 - cfg_.beta2) * MatX<Scalar>(e.grad.cwiseProduct(e.grad));
      const Scalar m_corr = static_cast<Scalar>(1.0 / (1.0 - beta1_t));
      if (info.rectified) {
        const Scalar v_corr = static_cast<Scalar>(1.0 / (1.0 - beta2_t));
        e.value.array() -= static_cast<Scalar>(cfg_.lr * rect) * m_corr * m.array() /
                           ((v.array() * v_corr).sqrt() + static_cast<Scalar>(cfg_.eps));
      } else {
        e.value.array() -= static_cast<Scalar>(cfg_.lr) * m_corr * m.array();
      }
    }
    info.applied = true;
    info.step = t;
    return info;
  }

  long current_step() const {
    return static_cast<long>(params_->value("opt/t")(0, 0));
  }

 private:
  void set_step(long t) {
    params_->value("opt/t")(0, 0) = static_cast<Scalar>(t);
  }

  ParamSet<Scalar>* params_;
  RAdamConfig cfg_;
  std::vector<std::size_t> trainable_;
};

struct TrainConfig {
  TargetMode mode = TargetMode::kGenderAge;
  int batch_size = 64;
  float label_smoothing = 0.1f;
  float dropout = 0.1f;
  SpecAugmentConfig specaugment{1, 2, 1, 8};
  RAdamConfig optimizer;
  int max_epochs = 40;
  int patience = 5;
  std::uint64_t seed = 1;
  int num_workers = 0;  // 0: SOT_NUM_WORKERS env or hardware concurrency

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (label_smoothing < 0.0f || label_smoothing >= 1.0f)
      throw std::invalid_argument("train: label_smoothing must be in [0,1)");
    if (dropout < 0.0f || dropout >= 1.0f)
      throw std::invalid_argument("train: dropout must be in [0,1)");
    if (max_epochs < 1 || patience < 1)
      throw std::invalid_argument("train: max_epochs and patience must be >= 1");
  }
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;
  double valid_loss = 0;
};

struct TrainResult {
  ParamSet<float> params;  // checkpoint with the minimum validation loss
  ModelConfig model_config;
  std::vector<EpochStats> curves;
  int best_epoch = 0;
  double best_valid_loss = 0;
  int longest_target = 0;
  int skipped_steps = 0;
};

/// Targets for every sample of a split under the given mode, manifest order.
std::vector<std::vector<int>> make_targets(const CorpusSplit& split, const Vocabulary& vocab,
                                           TargetMode mode);

/// Per-token mean label-smoothed loss over a split (no dropout, no
/// augmentation); deterministic for any worker count.
double corpus_loss(const TransformerModel<float>& model, ParamSet<float>& params,
                   const CorpusSplit& split, const std::vector<std::vector<int>>& targets,
                   float label_smoothing, int num_workers = 0);

/// Minimizes the per-token mean smoothed cross entropy of the serialized
/// targets with RAdam, early-stopping on validation loss. Retains the best
/// validation checkpoint. Fully reproducible from config and seed; the
/// gradient reduction order is fixed, so results do not depend on the worker
/// count.
TrainResult train_model(const CorpusSplit& train_split, const CorpusSplit& valid_split,
                        const Vocabulary& vocab, ModelConfig model_cfg, const TrainConfig& cfg);

}  // namespace sot
