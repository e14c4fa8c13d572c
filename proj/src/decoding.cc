// src/decoding.cc

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

#include "sot/decoding.h"

#include <algorithm>
#include <stdexcept>

namespace sot {

namespace {

struct Candidate {
  double score;
  std::size_t parent;
  int token;
  std::size_t length;  // tokens including the new one
};

// Score descending; ties: lower token id, then shorter hypothesis, then
// parent order for a total order.
bool candidate_before(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.token != b.token) return a.token < b.token;
  if (a.length != b.length) return a.length < b.length;
  return a.parent < b.parent;
}

bool hypothesis_before(const DecodeHypothesis& a, const DecodeHypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  const int at = a.tokens.empty() ? -1 : a.tokens.back();
  const int bt = b.tokens.empty() ? -1 : b.tokens.back();
  if (at != bt) return at < bt;
  return a.tokens.size() < b.tokens.size();
}

}  // namespace

DecodeResult beam_search(TokenScorer& scorer, int eos_id, int beam_size, int max_len) {
  if (beam_size < 1) throw std::invalid_argument("beam_search: beam_size must be >= 1");
  if (max_len < 1) throw std::invalid_argument("beam_search: max_len must be >= 1");
  const int vocab = scorer.vocab_size();
  if (eos_id < 0 || eos_id >= vocab) throw std::invalid_argument("beam_search: bad eos id");

  std::vector<DecodeHypothesis> live{DecodeHypothesis{}};
  std::vector<DecodeHypothesis> finished;

  for (int step = 0; step < max_len; ++step) {
    std::vector<Candidate> candidates;
    candidates.reserve(live.size() * static_cast<std::size_t>(vocab));
    for (std::size_t h = 0; h < live.size(); ++h) {
      const Eigen::VectorXd lp = scorer.log_probs(live[h].tokens);
      if (lp.size() != vocab)
        throw std::runtime_error("beam_search: scorer returned wrong vocabulary size");
      for (int v = 0; v < vocab; ++v)
        candidates.push_back({live[h].score + lp[v], h, v, live[h].tokens.size() + 1});
    }
    const std::size_t keep = std::min<std::size_t>(candidates.size(),
                                                   static_cast<std::size_t>(beam_size));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), candidate_before);
    candidates.resize(keep);

    std::vector<DecodeHypothesis> next_live;
    for (const Candidate& c : candidates) {
      DecodeHypothesis hyp = live[c.parent];
      hyp.tokens.push_back(c.token);
      hyp.score = c.score;
      if (c.token == eos_id) {
        hyp.finished = true;
        finished.push_back(std::move(hyp));
      } else {
        next_live.push_back(std::move(hyp));
      }
    }
    live = std::move(next_live);
    if (static_cast<int>(finished.size()) >= beam_size || live.empty()) break;
  }

  std::sort(finished.begin(), finished.end(), hypothesis_before);
  DecodeResult result;
  result.nbest = finished;
  if (!finished.empty()) {
    result.best = finished.front();
  } else {
    std::sort(live.begin(), live.end(), hypothesis_before);
    if (live.empty()) throw std::logic_error("beam_search: no hypotheses");
    result.best = live.front();
    result.nbest.push_back(result.best);
  }
  return result;
}

DecodeHypothesis greedy_decode(TokenScorer& scorer, int eos_id, int max_len) {
  if (max_len < 1) throw std::invalid_argument("greedy_decode: max_len must be >= 1");
  const int vocab = scorer.vocab_size();
  if (eos_id < 0 || eos_id >= vocab) throw std::invalid_argument("greedy_decode: bad eos id");
  DecodeHypothesis hyp;
  for (int step = 0; step < max_len; ++step) {
    const Eigen::VectorXd lp = scorer.log_probs(hyp.tokens);
    Eigen::Index best = 0;
    lp.maxCoeff(&best);  // first maximum: lowest token id on ties
    hyp.tokens.push_back(static_cast<int>(best));
    hyp.score += lp[best];
    if (static_cast<int>(best) == eos_id) {
      hyp.finished = true;
      break;
    }
  }
  return hyp;
}

}  // namespace sot
