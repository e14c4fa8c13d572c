// sot/config.h

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

#include <string>

#include "sot/model.h"
#include "sot/synth.h"
#include "sot/training.h"

namespace sot {

struct DecodeConfig {
  int beam = 4;
  int max_len = 0;  // 0: twice the longest training target
};

/// Whole-experiment configuration parsed from sectioned key=value text
/// ([corpus], [model], [train], [decode] plus a top-level seed). Unknown
/// sections or keys are errors. The model's feature dimension, vocabulary
/// size and dropout are derived from the corpus and training sections, so
/// they are not part of the [model] section.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  CorpusConfig corpus;
  ModelConfig model;
  TrainConfig train;
  DecodeConfig decode;

  static ExperimentConfig parse_string(const std::string& text);
  static ExperimentConfig parse_file(const std::string& path);

  /// Normalized form: fixed section and key order. parse(serialize(x))
  /// reproduces x.
  std::string serialize() const;

  /// Model config with corpus- and train-derived fields resolved.
  ModelConfig resolved_model(int vocab_size) const {
    ModelConfig m = model;
    m.feat_dim = corpus.synth.feat_dim;
    m.vocab_size = vocab_size;
    m.dropout = train.dropout;
    return m;
  }
};

}  // namespace sot
