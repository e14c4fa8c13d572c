// sot/synth.h

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

#include <cstdint>
#include <string>
#include <vector>

#include "sot/common.h"
#include "sot/vocab.h"

namespace sot {

/// Minimum start-time gap between any two utterances in a mixture: 0.5 s of
/// 10 ms frames.
constexpr int kMinStartGapFrames = 50;

/// Columns [0,2) carry the gender offset (+1 male / -1 female), columns
/// [2,4) carry 0.1 * age-class. Token templates span all columns, so
/// attribute information is linearly decodable from features by
/// construction.
constexpr int kGenderFeatureBegin = 0;
constexpr int kGenderFeatureEnd = 2;
constexpr int kAgeFeatureBegin = 2;
constexpr int kAgeFeatureEnd = 4;
constexpr int kMinFeatureDim = 4;

struct SynthConfig {
  int feat_dim = 12;
  int frames_per_token = 8;
  float noise_sigma = 0.1f;
  float speaker_jitter_sigma = 0.02f;
};

/// Synthetic stand-in for a real speaker. The per-feature offset vector is a
/// deterministic function of gender, age class and seeded per-speaker
/// jitter, so a profile is reproducible from (corpus seed, speaker id,
/// gender, age).
struct SpeakerProfile {
  std::string speaker_id;
  Gender gender = Gender::kMale;
  int age_years = 0;
  Eigen::VectorXf offset;  // feat_dim entries

  static SpeakerProfile make(std::uint64_t corpus_seed, const std::string& speaker_id,
                             Gender gender, int age_years, const SynthConfig& cfg);
};

/// Per-token feature template, reproducible from (corpus seed, token id).
Eigen::VectorXf token_template(std::uint64_t corpus_seed, int token_id, int feat_dim);

/// Emits frames_per_token frames per textual token: token template plus the
/// profile offset plus seeded N(0, noise_sigma) noise.
FeatureMatrix synth_utterance(std::uint64_t corpus_seed, const SpeakerProfile& profile,
                              const std::vector<int>& text, std::uint64_t seed,
                              const SynthConfig& cfg);

/// A single-speaker corpus item before mixing; start_frame is 0.
struct PoolItem {
  Utterance utterance;
  FeatureMatrix features;
};

struct MixedSample {
  std::string id;
  int num_speakers = 0;
  int frames_per_token = 0;  // construction metadata; gives each utterance's frame span
  FeatureMatrix features;
  std::vector<Utterance> utterances;  // FIFO-sorted
  SerializedTarget target_conventional;
  SerializedTarget target_joint;
};

/// Draws T distinct-speaker items from the pool and rejection-samples start
/// offsets until the mixture constraints hold: pairwise start gaps of at
/// least kMinStartGapFrames and, for T >= 2, every utterance overlapped by
/// at least one other. Features are summed with unchanged scale over the
/// overlapped region (0 dB signal-to-interference mixing) and zero elsewhere.
MixedSample sample_mixture(const std::vector<PoolItem>& pool, int num_speakers,
                           std::uint64_t seed, const Vocabulary& vocab,
                           int max_rejections = 1000);

/// Empty iff the start-gap, overlap and distinct-speaker rules all hold.
std::vector<std::string> validate_mixture(const MixedSample& sample);

struct CorpusConfig {
  SynthConfig synth;
  int num_textual_tokens = 30;
  int text_len_min = 7;
  int text_len_max = 12;
  int speakers_train = 20;
  int speakers_valid = 10;
  int speakers_test = 10;
  int singles_train = 1000;
  int singles_valid = 100;
  int singles_test = 100;
  std::vector<int> mixture_speaker_counts = {1, 2};
  int max_rejections = 1000;

  void validate() const;
};

/// Writes vocab.txt plus per-split manifest.tsv and feats/ directories under
/// out_dir. Speakers are disjoint across splits; for each requested T the
/// number of mixtures equals the split's single-speaker size. Byte-identical
/// for identical (config, seed) regardless of worker count.
void build_corpus(const CorpusConfig& config, std::uint64_t seed, const std::string& out_dir,
                  int num_workers = 0);

/// In-memory split: samples in manifest order with features loaded and both
/// serialized targets recomputed from the manifest fields.
struct CorpusSplit {
  std::vector<MixedSample> samples;
};

CorpusSplit load_split(const std::string& split_dir, const Vocabulary& vocab);

/// Manifest serialization for one sample (tab-separated; used by
/// build_corpus and tests).
std::string manifest_line(const MixedSample& sample, const Vocabulary& vocab,
                          const std::string& feature_path);
MixedSample parse_manifest_line(const std::string& line, const Vocabulary& vocab,
                                std::string* feature_path);

}  // namespace sot
