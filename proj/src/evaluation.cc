// src/evaluation.cc

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

#include "sot/evaluation.h"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace sot {

namespace {

// Minimal total edits first, then the most substitutions. Given the total,
// the substitution count pins down deletions and insertions as well, so the
// per-cell choice is a linear additive cost and dynamic programming applies.
bool counts_before(const EditCounts& a, const EditCounts& b) {
  if (a.total() != b.total()) return a.total() < b.total();
  return a.sub > b.sub;
}

}  // namespace

EditCounts edit_distance(const std::vector<int>& ref, const std::vector<int>& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<EditCounts> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = EditCounts{0, 0, static_cast<long>(j)};
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = EditCounts{0, static_cast<long>(i), 0};
    for (std::size_t j = 1; j <= m; ++j) {
      EditCounts best = prev[j - 1];
      if (ref[i - 1] != hyp[j - 1]) ++best.sub;  // diagonal: match or substitute
      EditCounts del = prev[j];
      ++del.del;
      if (counts_before(del, best)) best = del;
      EditCounts insert = cur[j - 1];
      ++insert.ins;
      if (counts_before(insert, best)) best = insert;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

SampleScore score_sample(const MixedSample& ref, const std::vector<int>& hyp_tokens,
                         const Vocabulary& vocab, TargetMode mode) {
  SampleScore score;
  SerializedTarget hyp_target;
  hyp_target.tokens = hyp_tokens;
  hyp_target.mode = mode;
  const Deserialized hyp = deserialize(hyp_target, vocab);

  score.ref_speakers = static_cast<int>(ref.utterances.size());
  score.hyp_segments = static_cast<int>(hyp.segments.size());
  score.sca_hit = score.hyp_segments == score.ref_speakers;
  score.hyp_violations = hyp.violations.size();

  const std::size_t aligned =
      std::min(ref.utterances.size(), hyp.segments.size());
  for (std::size_t k = 0; k < aligned; ++k) {
    const Utterance& u = ref.utterances[k];
    const Segment& seg = hyp.segments[k];
    const EditCounts ec = edit_distance(u.text, seg.text);
    score.edits.sub += ec.sub;
    score.edits.del += ec.del;
    score.edits.ins += ec.ins;
    if (mode_has_gender(mode) && seg.gender.has_value() && *seg.gender == u.gender)
      ++score.gender_hits;
    if (mode_has_age(mode) && seg.age_class.has_value() &&
        *seg.age_class == age_to_class(u.age_years))
      ++score.age_hits;
  }
  for (std::size_t k = aligned; k < ref.utterances.size(); ++k)
    score.edits.del += static_cast<long>(ref.utterances[k].text.size());
  for (std::size_t k = aligned; k < hyp.segments.size(); ++k)
    score.edits.ins += static_cast<long>(hyp.segments[k].text.size());
  for (const Utterance& u : ref.utterances)
    score.ref_textual_len += static_cast<long>(u.text.size());
  return score;
}

ScoreReport score_corpus(const CorpusSplit& refs,
                         const std::map<std::string, std::vector<int>>& hypotheses,
                         const Vocabulary& vocab, TargetMode mode) {
  std::vector<std::string> missing;
  for (const MixedSample& s : refs.samples)
    if (!hypotheses.count(s.id)) missing.push_back(s.id);
  if (!missing.empty()) {
    std::string what = "score_corpus: missing hypotheses for";
    for (const auto& id : missing) what += " " + id;
    throw std::runtime_error(what);
  }

  ScoreReport report;
  report.mode = mode;
  for (const MixedSample& s : refs.samples) {
    SampleScore score = score_sample(s, hypotheses.at(s.id), vocab, mode);
    ++report.num_samples;
    report.subs += score.edits.sub;
    report.dels += score.edits.del;
    report.ins += score.edits.ins;
    report.ref_len += score.ref_textual_len;
    report.ref_speakers += score.ref_speakers;
    report.sca_hits += score.sca_hit ? 1 : 0;
    report.gender_hits += score.gender_hits;
    report.age_hits += score.age_hits;
    report.per_sample.emplace_back(s.id, score);
  }
  if (report.num_samples == 0) throw std::invalid_argument("score_corpus: empty reference set");
  return report;
}

std::string ScoreReport::to_text() const {
  std::ostringstream os;
  os << "mode=" << target_mode_name(mode) << "\n";
  os << "samples=" << num_samples << "\n";
  os << "cer=" << cer() << "\n";
  os << "sca=" << sca() << "\n";
  if (has_sga()) os << "sga=" << sga() << "\n";
  if (has_saa()) os << "saa=" << saa() << "\n";
  os << "subs=" << subs << "\n";
  os << "dels=" << dels << "\n";
  os << "ins=" << ins << "\n";
  os << "ref_len=" << ref_len << "\n";
  os << "ref_speakers=" << ref_speakers << "\n";
  os << "sca_hits=" << sca_hits << "\n";
  if (has_sga()) os << "gender_hits=" << gender_hits << "\n";
  if (has_saa()) os << "age_hits=" << age_hits << "\n";
  return os.str();
}

std::string ScoreReport::per_sample_csv() const {
  std::ostringstream os;
  os << "id,ref_speakers,hyp_segments,sub,del,ins,ref_len,sca_hit,gender_hits,age_hits,"
        "violations\n";
  for (const auto& [id, s] : per_sample) {
    os << id << ',' << s.ref_speakers << ',' << s.hyp_segments << ',' << s.edits.sub << ','
       << s.edits.del << ',' << s.edits.ins << ',' << s.ref_textual_len << ','
       << (s.sca_hit ? 1 : 0) << ',' << s.gender_hits << ',' << s.age_hits << ','
       << s.hyp_violations << "\n";
  }
  return os.str();
}

}  // namespace sot
