// sot/vocab.h

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

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace sot {

enum class Gender { kMale, kFemale };

/// Serialized-target flavors. kConventional carries textual tokens and
/// separators only; the joint flavors prefix each speaker segment with the
/// named attribute tokens (gender before age when both are present).
enum class TargetMode { kConventional, kGender, kAge, kGenderAge };

std::string target_mode_name(TargetMode mode);
TargetMode target_mode_from_name(const std::string& name);
bool mode_has_gender(TargetMode mode);
bool mode_has_age(TargetMode mode);

/// Token universe: special tokens, gender tokens, age-class tokens and the
/// textual alphabet, with stable contiguous ids. Id layout is fixed so that
/// checkpoints and manifests are portable:
///   [sep]=0, [eos]=1, [male]=2, [female]=3, age classes 4..23, text from 24.
class Vocabulary {
 public:
  static constexpr int kSepId = 0;
  static constexpr int kEosId = 1;
  static constexpr int kMaleId = 2;
  static constexpr int kFemaleId = 3;
  static constexpr int kNumAgeClasses = 20;
  static constexpr int kAgeBaseId = 4;
  static constexpr int kTextBaseId = kAgeBaseId + kNumAgeClasses;

  /// Builds a vocabulary with `num_textual` synthetic textual tokens
  /// (single characters a..z,0..9, then t<i> beyond 36).
  static Vocabulary synthetic(int num_textual);

  /// Line-oriented vocabulary file, one token per line in id order;
  /// '#'-prefixed lines are comments.
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  int num_textual() const { return size() - kTextBaseId; }

  const std::string& token(int id) const;
  int id_of(const std::string& token) const;
  bool has_token(const std::string& token) const;

  int gender_id(Gender g) const { return g == Gender::kMale ? kMaleId : kFemaleId; }
  int age_class_id(int age_class) const;
  int textual_id(int k) const;  // k-th textual token

  bool is_special(int id) const { return id == kSepId || id == kEosId; }
  bool is_gender(int id) const { return id == kMaleId || id == kFemaleId; }
  bool is_age(int id) const { return id >= kAgeBaseId && id < kTextBaseId; }
  bool is_textual(int id) const { return id >= kTextBaseId && id < size(); }
  bool is_attribute(int id) const { return is_gender(id) || is_age(id); }

  Gender gender_of(int id) const;
  int age_class_of(int id) const;

 private:
  Vocabulary() = default;
  void add(const std::string& token);
  void check_layout() const;

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// One speaker's contribution to a mixture: token sequence, attributes and
/// start offset (frames of 10 ms).
struct Utterance {
  std::string speaker_id;
  Gender gender = Gender::kMale;
  int age_years = 0;
  std::vector<int> text;  // textual token ids, non-empty
  int start_frame = 0;
};

struct SerializedTarget {
  std::vector<int> tokens;
  TargetMode mode = TargetMode::kConventional;
};

/// Sorts utterances ascending by start time (first-in, first-out order).
/// Duplicate start frames are a hard error; valid mixtures cannot produce
/// them.
std::vector<Utterance> fifo_sort(std::vector<Utterance> utterances);

/// Maps an age in years to one of 20 uniform 5-year classes over [0, 100).
int age_to_class(int age_years);

/// text^1 [sep] text^2 ... [sep] text^T [eos]. Input must be FIFO-sorted.
SerializedTarget serialize_conventional(const std::vector<Utterance>& sorted,
                                        const Vocabulary& vocab);

/// g^1 a^1 text^1 [sep] g^2 a^2 text^2 ... [eos]: attribute tokens precede
/// the textual tokens of each speaker.
SerializedTarget serialize_joint(const std::vector<Utterance>& sorted, const Vocabulary& vocab);

/// Generalization over the four target flavors used by the CLI modes.
SerializedTarget serialize_target(const std::vector<Utterance>& sorted, const Vocabulary& vocab,
                                  TargetMode mode);

/// One parsed speaker segment of a (possibly malformed) serialized sequence.
struct Segment {
  std::optional<Gender> gender;
  std::optional<int> age_class;
  std::vector<int> text;
};

struct Deserialized {
  std::vector<Segment> segments;
  std::vector<std::string> violations;  // empty iff the sequence is well formed
};

/// Lenient inverse of serialization, usable on raw model hypotheses: splits
/// on [sep], stops at the first [eos], reads the leading attribute tokens a
/// segment should carry under target.mode when present, drops and flags
/// misplaced attribute tokens inside text. Never throws.
Deserialized deserialize(const SerializedTarget& target, const Vocabulary& vocab);

/// Token-count law for serialize_target: sum of text lengths, plus attribute
/// tokens, plus T-1 separators, plus the final [eos].
std::size_t serialized_length(const std::vector<std::size_t>& text_lengths, TargetMode mode);

}  // namespace sot
