// sot/evaluation.h

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

#include "sot/synth.h"
#include "sot/vocab.h"

namespace sot {

struct EditCounts {
  long sub = 0;
  long del = 0;
  long ins = 0;
  long total() const { return sub + del + ins; }
};

/// Minimal unit-cost edit counts turning `ref` into `hyp`. Among all
/// minimal-edit alignments the one with the most substitutions is reported,
/// which makes the (S, D, I) split unique and symmetric: swapping the
/// arguments swaps D and I.
EditCounts edit_distance(const std::vector<int>& ref, const std::vector<int>& hyp);

struct SampleScore {
  EditCounts edits;
  long ref_textual_len = 0;
  int ref_speakers = 0;
  int hyp_segments = 0;
  bool sca_hit = false;
  int gender_hits = 0;
  int age_hits = 0;
  std::size_t hyp_violations = 0;
};

/// Order-aware scoring of one hypothesis against a reference mixture.
/// Segments align positionally in FIFO order; edit counts cover the aligned
/// pairs, unmatched reference segments count fully as deletions and unmatched
/// hypothesis segments fully as insertions. Attribute tokens never enter the
/// textual comparison. Attribute hits are counted at aligned positions only;
/// the reference speaker count is the accuracy denominator.
SampleScore score_sample(const MixedSample& ref, const std::vector<int>& hyp_tokens,
                         const Vocabulary& vocab, TargetMode mode);

struct ScoreReport {
  TargetMode mode = TargetMode::kConventional;
  int num_samples = 0;
  long subs = 0;
  long dels = 0;
  long ins = 0;
  long ref_len = 0;
  int ref_speakers = 0;
  int sca_hits = 0;
  int gender_hits = 0;
  int age_hits = 0;
  std::vector<std::pair<std::string, SampleScore>> per_sample;

  double cer() const { return static_cast<double>(subs + dels + ins) / static_cast<double>(ref_len); }
  double sca() const { return static_cast<double>(sca_hits) / num_samples; }
  double sga() const { return static_cast<double>(gender_hits) / ref_speakers; }
  double saa() const { return static_cast<double>(age_hits) / ref_speakers; }
  bool has_sga() const { return mode_has_gender(mode); }
  bool has_saa() const { return mode_has_age(mode); }

  /// Machine-parseable key=value lines, one metric per line.
  std::string to_text() const;
  /// Optional per-sample breakdown, one comma-separated row per sample.
  std::string per_sample_csv() const;
};

/// Pooled corpus metrics: CER = total (S+D+I) / total reference textual
/// tokens; SCA/SGA/SAA as fractions. Every manifest sample needs exactly one
/// hypothesis; missing ones raise an error naming the sample ids.
ScoreReport score_corpus(const CorpusSplit& refs,
                         const std::map<std::string, std::vector<int>>& hypotheses,
                         const Vocabulary& vocab, TargetMode mode);

}  // namespace sot
