// sot/decoding.h

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

#include <vector>

#include "sot/model.h"

namespace sot {

/// Next-token log-probability source for the search routines. Implementations
/// must return normalized log-probabilities over the vocabulary.
class TokenScorer {
 public:
  virtual ~TokenScorer() = default;
  virtual int vocab_size() const = 0;
  virtual Eigen::VectorXd log_probs(const std::vector<int>& prefix) = 0;
};

struct DecodeHypothesis {
  std::vector<int> tokens;
  double score = 0.0;  // cumulative log-probability
  bool finished = false;
};

struct DecodeResult {
  DecodeHypothesis best;
  std::vector<DecodeHypothesis> nbest;  // finished hypotheses, best first
};

/// Length-capped beam search. Each step expands every live hypothesis with
/// all tokens and keeps the top beam_size candidates by cumulative
/// log-probability; candidates ending in eos are set aside as finished.
/// Terminates once beam_size hypotheses are finished or max_len is reached.
/// Score ties break toward the lower token id, then the shorter hypothesis.
/// Returns the best finished hypothesis, or the best unfinished one when
/// nothing finished. No length normalization is applied.
DecodeResult beam_search(TokenScorer& scorer, int eos_id, int beam_size, int max_len);

/// Argmax decoding until eos or max_len; equivalent to beam_size 1.
DecodeHypothesis greedy_decode(TokenScorer& scorer, int eos_id, int max_len);

/// Scorer over a trained transformer and precomputed encoder states.
template <typename Scalar>
class TransformerScorer : public TokenScorer {
 public:
  TransformerScorer(const TransformerModel<Scalar>& model, ParamSet<Scalar>& params,
                    MatX<Scalar> encoder_states)
      : model_(&model), params_(&params), enc_(std::move(encoder_states)) {}

  int vocab_size() const override { return model_->config().vocab_size; }

  Eigen::VectorXd log_probs(const std::vector<int>& prefix) override {
    return model_->decode_step_logprobs(prefix, enc_, *params_).template cast<double>();
  }

 private:
  const TransformerModel<Scalar>* model_;
  ParamSet<Scalar>* params_;
  MatX<Scalar> enc_;
};

}  // namespace sot
