// src/vocab.cc

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

#include "sot/vocab.h"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sot {

std::string target_mode_name(TargetMode mode) {
  switch (mode) {
    case TargetMode::kConventional: return "conventional";
    case TargetMode::kGender: return "gender";
    case TargetMode::kAge: return "age";
    case TargetMode::kGenderAge: return "gender_age";
  }
  throw std::logic_error("unknown TargetMode");
}

TargetMode target_mode_from_name(const std::string& name) {
  if (name == "conventional") return TargetMode::kConventional;
  if (name == "gender") return TargetMode::kGender;
  if (name == "age") return TargetMode::kAge;
  if (name == "gender_age") return TargetMode::kGenderAge;
  throw std::invalid_argument("unknown target mode '" + name +
                              "' (expected conventional|gender|age|gender_age)");
}

bool mode_has_gender(TargetMode mode) {
  return mode == TargetMode::kGender || mode == TargetMode::kGenderAge;
}

bool mode_has_age(TargetMode mode) {
  return mode == TargetMode::kAge || mode == TargetMode::kGenderAge;
}

namespace {

std::string age_token(int age_class) {
  std::ostringstream os;
  os << "[age" << (age_class < 10 ? "0" : "") << age_class << "]";
  return os.str();
}

std::string textual_token(int k) {
  static const std::string kChars = "abcdefghijklmnopqrstuvwxyz0123456789";
  if (k < static_cast<int>(kChars.size())) return std::string(1, kChars[static_cast<size_t>(k)]);
  return "t" + std::to_string(k);
}

}  // namespace

void Vocabulary::add(const std::string& token) {
  if (ids_.count(token))
    throw std::invalid_argument("vocabulary: duplicate token '" + token + "'");
  ids_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

void Vocabulary::check_layout() const {
  if (size() < kTextBaseId)
    throw std::invalid_argument("vocabulary: too few tokens for the fixed id layout");
  if (tokens_[kSepId] != "[sep]" || tokens_[kEosId] != "[eos]" ||
      tokens_[kMaleId] != "[male]" || tokens_[kFemaleId] != "[female]")
    throw std::invalid_argument("vocabulary: special/gender tokens out of order");
  for (int c = 0; c < kNumAgeClasses; ++c)
    if (tokens_[static_cast<size_t>(kAgeBaseId + c)] != age_token(c))
      throw std::invalid_argument("vocabulary: age token " + std::to_string(c) + " out of order");
  if (num_textual() < 1) throw std::invalid_argument("vocabulary: no textual tokens");
}

Vocabulary Vocabulary::synthetic(int num_textual) {
  if (num_textual < 1) throw std::invalid_argument("vocabulary: num_textual must be >= 1");
  Vocabulary v;
  v.add("[sep]");
  v.add("[eos]");
  v.add("[male]");
  v.add("[female]");
  for (int c = 0; c < kNumAgeClasses; ++c) v.add(age_token(c));
  for (int k = 0; k < num_textual; ++k) v.add(textual_token(k));
  v.check_layout();
  return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("vocabulary: cannot open " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    v.add(line);
  }
  v.check_layout();
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("vocabulary: cannot write " + path);
  os << "# one token per line, line order defines token ids\n";
  for (const auto& t : tokens_) os << t << "\n";
  if (!os) throw std::runtime_error("vocabulary: write failed for " + path);
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size())
    throw std::out_of_range("vocabulary: token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<size_t>(id)];
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) throw std::out_of_range("vocabulary: unknown token '" + token + "'");
  return it->second;
}

bool Vocabulary::has_token(const std::string& token) const { return ids_.count(token) != 0; }

int Vocabulary::age_class_id(int age_class) const {
  if (age_class < 0 || age_class >= kNumAgeClasses)
    throw std::out_of_range("vocabulary: age class " + std::to_string(age_class) +
                            " out of [0,20)");
  return kAgeBaseId + age_class;
}

int Vocabulary::textual_id(int k) const {
  if (k < 0 || k >= num_textual())
    throw std::out_of_range("vocabulary: textual index " + std::to_string(k) + " out of range");
  return kTextBaseId + k;
}

Gender Vocabulary::gender_of(int id) const {
  if (id == kMaleId) return Gender::kMale;
  if (id == kFemaleId) return Gender::kFemale;
  throw std::invalid_argument("vocabulary: id " + std::to_string(id) + " is not a gender token");
}

int Vocabulary::age_class_of(int id) const {
  if (!is_age(id))
    throw std::invalid_argument("vocabulary: id " + std::to_string(id) + " is not an age token");
  return id - kAgeBaseId;
}

std::vector<Utterance> fifo_sort(std::vector<Utterance> utterances) {
  std::stable_sort(utterances.begin(), utterances.end(),
                   [](const Utterance& a, const Utterance& b) {
                     return a.start_frame < b.start_frame;
                   });
  for (std::size_t i = 1; i < utterances.size(); ++i) {
    if (utterances[i].start_frame == utterances[i - 1].start_frame)
      throw std::invalid_argument("fifo_sort: duplicate start frame " +
                                  std::to_string(utterances[i].start_frame));
  }
  return utterances;
}

int age_to_class(int age_years) {
  if (age_years < 0 || age_years >= 100)
    throw std::out_of_range("age_to_class: age " + std::to_string(age_years) +
                            " outside [0,100)");
  return age_years / 5;
}

namespace {

void check_serialize_input(const std::vector<Utterance>& sorted) {
  if (sorted.empty()) throw std::invalid_argument("serialize: empty utterance list");
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i].text.empty())
      throw std::invalid_argument("serialize: utterance " + std::to_string(i) + " has no text");
    if (i > 0 && sorted[i].start_frame <= sorted[i - 1].start_frame)
      throw std::invalid_argument("serialize: utterances not FIFO-sorted");
  }
}

}  // namespace

SerializedTarget serialize_target(const std::vector<Utterance>& sorted, const Vocabulary& vocab,
                                  TargetMode mode) {
  check_serialize_input(sorted);
  SerializedTarget out;
  out.mode = mode;
  for (std::size_t t = 0; t < sorted.size(); ++t) {
    if (t > 0) out.tokens.push_back(Vocabulary::kSepId);
    const Utterance& u = sorted[t];
    if (mode_has_gender(mode)) out.tokens.push_back(vocab.gender_id(u.gender));
    if (mode_has_age(mode)) out.tokens.push_back(vocab.age_class_id(age_to_class(u.age_years)));
    for (int id : u.text) {
      if (!vocab.is_textual(id))
        throw std::invalid_argument("serialize: non-textual token id " + std::to_string(id) +
                                    " in utterance text");
      out.tokens.push_back(id);
    }
  }
  out.tokens.push_back(Vocabulary::kEosId);
  return out;
}

SerializedTarget serialize_conventional(const std::vector<Utterance>& sorted,
                                        const Vocabulary& vocab) {
  return serialize_target(sorted, vocab, TargetMode::kConventional);
}

SerializedTarget serialize_joint(const std::vector<Utterance>& sorted, const Vocabulary& vocab) {
  return serialize_target(sorted, vocab, TargetMode::kGenderAge);
}

Deserialized deserialize(const SerializedTarget& target, const Vocabulary& vocab) {
  Deserialized out;
  std::vector<int> body;
  bool saw_eos = false;
  for (std::size_t i = 0; i < target.tokens.size(); ++i) {
    if (target.tokens[i] == Vocabulary::kEosId) {
      saw_eos = true;
      if (i + 1 < target.tokens.size()) out.violations.push_back("tokens after [eos]");
      break;
    }
    body.push_back(target.tokens[i]);
  }
  if (!saw_eos && !target.tokens.empty()) out.violations.push_back("missing [eos]");
  if (body.empty()) return out;  // degenerate: no segments

  std::vector<std::vector<int>> raw(1);
  for (int id : body) {
    if (id == Vocabulary::kSepId) {
      raw.emplace_back();
    } else {
      raw.back().push_back(id);
    }
  }

  const bool want_gender = mode_has_gender(target.mode);
  const bool want_age = mode_has_age(target.mode);
  for (std::size_t s = 0; s < raw.size(); ++s) {
    Segment seg;
    const std::vector<int>& toks = raw[s];
    std::size_t pos = 0;
    if (want_gender && pos < toks.size() && vocab.is_gender(toks[pos])) {
      seg.gender = vocab.gender_of(toks[pos]);
      ++pos;
    }
    if (want_age && pos < toks.size() && vocab.is_age(toks[pos])) {
      seg.age_class = vocab.age_class_of(toks[pos]);
      ++pos;
    }
    if ((want_gender && !seg.gender.has_value()) || (want_age && !seg.age_class.has_value()))
      out.violations.push_back("segment " + std::to_string(s) + ": missing attribute tokens");
    for (; pos < toks.size(); ++pos) {
      int id = toks[pos];
      if (vocab.is_attribute(id)) {
        out.violations.push_back("segment " + std::to_string(s) + ": misplaced attribute token " +
                                 vocab.token(id) + " dropped");
        continue;
      }
      seg.text.push_back(id);
    }
    if (toks.empty()) out.violations.push_back("segment " + std::to_string(s) + ": empty");
    out.segments.push_back(std::move(seg));
  }
  return out;
}

std::size_t serialized_length(const std::vector<std::size_t>& text_lengths, TargetMode mode) {
  const std::size_t num_speakers = text_lengths.size();
  std::size_t attrs_per_speaker = 0;
  if (mode_has_gender(mode)) ++attrs_per_speaker;
  if (mode_has_age(mode)) ++attrs_per_speaker;
  std::size_t total = 0;
  for (std::size_t n : text_lengths) total += n;
  return total + attrs_per_speaker * num_speakers + (num_speakers - 1) + 1;
}

}  // namespace sot
