// src/synth.cc

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

#include "sot/synth.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "sot/feature_io.h"
#include "sot/parallel.h"

namespace fs = std::filesystem;

namespace sot {

SpeakerProfile SpeakerProfile::make(std::uint64_t corpus_seed, const std::string& speaker_id,
                                    Gender gender, int age_years, const SynthConfig& cfg) {
  if (cfg.feat_dim < kMinFeatureDim)
    throw std::invalid_argument("SpeakerProfile: feat_dim must be >= " +
                                std::to_string(kMinFeatureDim));
  SpeakerProfile p;
  p.speaker_id = speaker_id;
  p.gender = gender;
  p.age_years = age_years;
  p.offset = Eigen::VectorXf::Zero(cfg.feat_dim);

  auto rng = make_rng(derive_seed(corpus_seed, "speaker-jitter", speaker_id));
  std::normal_distribution<float> jitter(0.0f, cfg.speaker_jitter_sigma);
  for (int f = 0; f < cfg.feat_dim; ++f) p.offset[f] = jitter(rng);

  const float gender_shift = gender == Gender::kMale ? 1.0f : -1.0f;
  for (int f = kGenderFeatureBegin; f < kGenderFeatureEnd; ++f) p.offset[f] += gender_shift;
  const float age_shift = 0.1f * static_cast<float>(age_to_class(age_years));
  for (int f = kAgeFeatureBegin; f < kAgeFeatureEnd; ++f) p.offset[f] += age_shift;
  return p;
}

Eigen::VectorXf token_template(std::uint64_t corpus_seed, int token_id, int feat_dim) {
  auto rng = make_rng(derive_seed(corpus_seed, "token-template", static_cast<std::uint64_t>(token_id)));
  std::normal_distribution<float> unit(0.0f, 1.0f);
  Eigen::VectorXf t(feat_dim);
  for (int f = 0; f < feat_dim; ++f) t[f] = unit(rng);
  return t;
}

FeatureMatrix synth_utterance(std::uint64_t corpus_seed, const SpeakerProfile& profile,
                              const std::vector<int>& text, std::uint64_t seed,
                              const SynthConfig& cfg) {
  if (text.empty()) throw std::invalid_argument("synth_utterance: empty text");
  if (profile.offset.size() != cfg.feat_dim)
    throw std::invalid_argument("synth_utterance: profile dim " +
                                std::to_string(profile.offset.size()) + " != feat_dim " +
                                std::to_string(cfg.feat_dim));
  const int rows = static_cast<int>(text.size()) * cfg.frames_per_token;
  FeatureMatrix feats(rows, cfg.feat_dim);
  auto rng = make_rng(derive_seed(seed, "frame-noise"));
  std::normal_distribution<float> noise(0.0f, cfg.noise_sigma);
  int m = 0;
  for (int token : text) {
    const Eigen::VectorXf base = token_template(corpus_seed, token, cfg.feat_dim) + profile.offset;
    for (int k = 0; k < cfg.frames_per_token; ++k, ++m) {
      for (int f = 0; f < cfg.feat_dim; ++f) feats(m, f) = base[f] + noise(rng);
    }
  }
  return feats;
}

namespace {

struct Span {
  long begin = 0;
  long end = 0;  // exclusive
};

bool spans_overlap(const Span& a, const Span& b) {
  return std::max(a.begin, b.begin) < std::min(a.end, b.end);
}

bool offsets_feasible(const std::vector<long>& starts, const std::vector<long>& lengths) {
  const std::size_t n = starts.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::labs(starts[i] - starts[j]) < kMinStartGapFrames) return false;
  if (n >= 2) {
    for (std::size_t i = 0; i < n; ++i) {
      Span si{starts[i], starts[i] + lengths[i]};
      bool overlapped = false;
      for (std::size_t j = 0; j < n && !overlapped; ++j) {
        if (j == i) continue;
        overlapped = spans_overlap(si, Span{starts[j], starts[j] + lengths[j]});
      }
      if (!overlapped) return false;
    }
  }
  return true;
}

MixedSample assemble_mixture(const std::vector<PoolItem>& pool,
                             const std::vector<std::size_t>& chosen,
                             const std::vector<long>& starts, const Vocabulary& vocab) {
  MixedSample s;
  s.num_speakers = static_cast<int>(chosen.size());
  long total = 0;
  const Eigen::Index feat_dim = pool[chosen[0]].features.cols();
  for (std::size_t t = 0; t < chosen.size(); ++t)
    total = std::max(total, starts[t] + pool[chosen[t]].features.rows());
  s.features = FeatureMatrix::Zero(total, feat_dim);
  for (std::size_t t = 0; t < chosen.size(); ++t) {
    const PoolItem& item = pool[chosen[t]];
    s.features.middleRows(starts[t], item.features.rows()) += item.features;
    Utterance u = item.utterance;
    u.start_frame = static_cast<int>(starts[t]);
    s.utterances.push_back(std::move(u));
  }
  s.utterances = fifo_sort(std::move(s.utterances));
  s.target_conventional = serialize_conventional(s.utterances, vocab);
  s.target_joint = serialize_joint(s.utterances, vocab);
  return s;
}

}  // namespace

MixedSample sample_mixture(const std::vector<PoolItem>& pool, int num_speakers,
                           std::uint64_t seed, const Vocabulary& vocab, int max_rejections) {
  if (num_speakers < 1) throw std::invalid_argument("sample_mixture: T must be >= 1");
  if (pool.empty()) throw std::invalid_argument("sample_mixture: empty pool");
  std::set<std::string> distinct;
  for (const auto& item : pool) distinct.insert(item.utterance.speaker_id);
  if (static_cast<int>(distinct.size()) < num_speakers)
    throw std::invalid_argument("sample_mixture: pool has only " +
                                std::to_string(distinct.size()) + " distinct speakers, need " +
                                std::to_string(num_speakers));

  auto rng = make_rng(derive_seed(seed, "mixture"));
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);

  std::vector<std::size_t> chosen;
  std::set<std::string> used;
  while (static_cast<int>(chosen.size()) < num_speakers) {
    std::size_t i = pick(rng);
    const std::string& spk = pool[i].utterance.speaker_id;
    if (used.count(spk)) continue;
    used.insert(spk);
    chosen.push_back(i);
  }

  std::vector<long> lengths;
  long span_sum = 0;
  for (std::size_t i : chosen) {
    lengths.push_back(pool[i].features.rows());
    span_sum += pool[i].features.rows();
  }

  std::vector<long> starts(chosen.size(), 0);
  if (num_speakers == 1) return assemble_mixture(pool, chosen, starts, vocab);

  std::uniform_int_distribution<long> offset(1, std::max<long>(1, span_sum));
  for (int attempt = 0; attempt < max_rejections; ++attempt) {
    for (std::size_t t = 1; t < starts.size(); ++t) starts[t] = offset(rng);
    if (offsets_feasible(starts, lengths)) return assemble_mixture(pool, chosen, starts, vocab);
  }
  throw std::runtime_error("sample_mixture: no feasible start offsets after " +
                           std::to_string(max_rejections) + " rejections");
}

std::vector<std::string> validate_mixture(const MixedSample& sample) {
  std::vector<std::string> violations;
  const auto& utts = sample.utterances;
  if (sample.frames_per_token <= 0) {
    violations.push_back("unknown frames_per_token; cannot derive utterance spans");
    return violations;
  }
  for (std::size_t i = 0; i < utts.size(); ++i)
    for (std::size_t j = i + 1; j < utts.size(); ++j)
      if (utts[i].speaker_id == utts[j].speaker_id)
        violations.push_back("duplicate speaker " + utts[i].speaker_id);
  for (std::size_t i = 0; i < utts.size(); ++i) {
    for (std::size_t j = i + 1; j < utts.size(); ++j) {
      long gap = std::labs(static_cast<long>(utts[i].start_frame) - utts[j].start_frame);
      if (gap < kMinStartGapFrames)
        violations.push_back("start-gap " + std::to_string(gap) + " < " +
                             std::to_string(kMinStartGapFrames) + " frames (utterances " +
                             std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }
  if (utts.size() >= 2) {
    for (std::size_t i = 0; i < utts.size(); ++i) {
      Span si{utts[i].start_frame,
              utts[i].start_frame +
                  static_cast<long>(utts[i].text.size()) * sample.frames_per_token};
      bool overlapped = false;
      for (std::size_t j = 0; j < utts.size() && !overlapped; ++j) {
        if (j == i) continue;
        Span sj{utts[j].start_frame,
                utts[j].start_frame +
                    static_cast<long>(utts[j].text.size()) * sample.frames_per_token};
        overlapped = spans_overlap(si, sj);
      }
      if (!overlapped)
        violations.push_back("utterance " + std::to_string(i) + " has no overlap");
    }
  }
  return violations;
}

void CorpusConfig::validate() const {
  if (synth.feat_dim < kMinFeatureDim)
    throw std::invalid_argument("corpus: feat_dim must be >= " + std::to_string(kMinFeatureDim));
  if (synth.frames_per_token < 1)
    throw std::invalid_argument("corpus: frames_per_token must be >= 1");
  if (num_textual_tokens < 1) throw std::invalid_argument("corpus: need textual tokens");
  if (text_len_min < 1 || text_len_max < text_len_min)
    throw std::invalid_argument("corpus: bad text length range");
  if (speakers_train < 1 || speakers_valid < 1 || speakers_test < 1)
    throw std::invalid_argument("corpus: each split needs at least one speaker");
  if (singles_train < 1 || singles_valid < 1 || singles_test < 1)
    throw std::invalid_argument("corpus: each split needs at least one utterance");
  if (mixture_speaker_counts.empty())
    throw std::invalid_argument("corpus: no mixture speaker counts requested");
  for (int t : mixture_speaker_counts) {
    if (t < 1 || t > 3)
      throw std::invalid_argument("corpus: mixture speaker count " + std::to_string(t) +
                                  " outside {1,2,3}");
    if (t >= 2) {
      if (std::min({speakers_train, speakers_valid, speakers_test}) < t)
        throw std::invalid_argument("corpus: not enough speakers for T=" + std::to_string(t));
      if (static_cast<long>(text_len_max) * synth.frames_per_token <= kMinStartGapFrames)
        throw std::invalid_argument(
            "corpus: utterances too short to overlap with a start gap of " +
            std::to_string(kMinStartGapFrames) + " frames (infeasible config)");
    }
  }
}

namespace {

constexpr const char* kSplitNames[3] = {"train", "valid", "test"};

std::string pad3(int v) {
  std::ostringstream os;
  os << (v < 100 ? "0" : "") << (v < 10 ? "0" : "") << v;
  return os.str();
}

std::string pad5(int v) {
  std::string s = std::to_string(v);
  return std::string(s.size() < 5 ? 5 - s.size() : 0, '0') + s;
}

std::vector<SpeakerProfile> make_split_speakers(const CorpusConfig& cfg, std::uint64_t seed,
                                                const std::string& split, int count) {
  std::vector<SpeakerProfile> speakers;
  for (int j = 0; j < count; ++j) {
    const std::string id = split + "_spk" + pad3(j);
    const Gender gender = j % 2 == 0 ? Gender::kMale : Gender::kFemale;
    // Age classes are spread over the full [0,20) range so every class is
    // represented as evenly as the speaker count allows.
    const int age_class = static_cast<int>((static_cast<long>(j) * Vocabulary::kNumAgeClasses) /
                                           std::max(count, 1)) %
                          Vocabulary::kNumAgeClasses;
    auto rng = make_rng(derive_seed(seed, "speaker-age", id));
    std::uniform_int_distribution<int> within(0, 4);
    const int age_years = age_class * 5 + within(rng);
    speakers.push_back(SpeakerProfile::make(seed, id, gender, age_years, cfg.synth));
  }
  return speakers;
}

std::vector<PoolItem> make_split_pool(const CorpusConfig& cfg, std::uint64_t seed,
                                      const std::string& split,
                                      const std::vector<SpeakerProfile>& speakers, int count,
                                      const Vocabulary& vocab, int workers) {
  std::vector<PoolItem> pool(static_cast<std::size_t>(count));
  for_each_ordered(
      static_cast<std::size_t>(count), workers,
      [&](std::size_t i, std::size_t) {
        const SpeakerProfile& prof = speakers[i % speakers.size()];
        auto rng = make_rng(derive_seed(seed, split, "text", static_cast<std::uint64_t>(i)));
        std::uniform_int_distribution<int> len_dist(cfg.text_len_min, cfg.text_len_max);
        std::uniform_int_distribution<int> tok_dist(0, vocab.num_textual() - 1);
        const int len = len_dist(rng);
        Utterance u;
        u.speaker_id = prof.speaker_id;
        u.gender = prof.gender;
        u.age_years = prof.age_years;
        u.start_frame = 0;
        for (int k = 0; k < len; ++k) u.text.push_back(vocab.textual_id(tok_dist(rng)));
        PoolItem item;
        item.features = synth_utterance(
            seed, prof, u.text, derive_seed(seed, split, "feat", static_cast<std::uint64_t>(i)),
            cfg.synth);
        item.utterance = std::move(u);
        pool[i] = std::move(item);
      },
      [](std::size_t, std::size_t) {});
  return pool;
}

void write_corpus_meta(const std::string& path, const CorpusConfig& cfg, std::uint64_t seed) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("build_corpus: cannot write " + path);
  os << "feat_dim=" << cfg.synth.feat_dim << "\n";
  os << "frames_per_token=" << cfg.synth.frames_per_token << "\n";
  os << "noise_sigma=" << cfg.synth.noise_sigma << "\n";
  os << "speaker_jitter_sigma=" << cfg.synth.speaker_jitter_sigma << "\n";
  os << "num_textual_tokens=" << cfg.num_textual_tokens << "\n";
  os << "text_len_min=" << cfg.text_len_min << "\n";
  os << "text_len_max=" << cfg.text_len_max << "\n";
  os << "seed=" << seed << "\n";
}

std::map<std::string, std::string> read_key_value_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace

std::string manifest_line(const MixedSample& sample, const Vocabulary& vocab,
                          const std::string& feature_path) {
  std::ostringstream os;
  os << sample.id << '\t' << sample.utterances.size();
  for (const Utterance& u : sample.utterances) {
    os << '\t' << u.speaker_id << ' ' << vocab.token(vocab.gender_id(u.gender)) << ' '
       << age_to_class(u.age_years) << ' ' << u.start_frame << ' ';
    for (std::size_t k = 0; k < u.text.size(); ++k) {
      if (k > 0) os << ',';
      os << vocab.token(u.text[k]);
    }
  }
  os << '\t' << feature_path;
  return os.str();
}

MixedSample parse_manifest_line(const std::string& line, const Vocabulary& vocab,
                                std::string* feature_path) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, '\t')) fields.push_back(field);
  if (fields.size() < 3)
    throw std::runtime_error("manifest: malformed line '" + line + "'");
  MixedSample s;
  s.id = fields[0];
  s.num_speakers = std::stoi(fields[1]);
  if (static_cast<int>(fields.size()) != 2 + s.num_speakers + 1)
    throw std::runtime_error("manifest: field count mismatch for sample " + s.id);
  for (int t = 0; t < s.num_speakers; ++t) {
    std::istringstream us(fields[static_cast<std::size_t>(2 + t)]);
    Utterance u;
    std::string gender_tok, text_csv;
    int age_class = 0;
    if (!(us >> u.speaker_id >> gender_tok >> age_class >> u.start_frame >> text_csv))
      throw std::runtime_error("manifest: malformed utterance in sample " + s.id);
    u.gender = vocab.gender_of(vocab.id_of(gender_tok));
    if (age_class < 0 || age_class >= Vocabulary::kNumAgeClasses)
      throw std::runtime_error("manifest: bad age class in sample " + s.id);
    u.age_years = age_class * 5 + 2;  // class midpoint; round-trips through age_to_class
    std::istringstream ts(text_csv);
    std::string tok;
    while (std::getline(ts, tok, ',')) u.text.push_back(vocab.id_of(tok));
    if (u.text.empty()) throw std::runtime_error("manifest: empty text in sample " + s.id);
    s.utterances.push_back(std::move(u));
  }
  if (feature_path) *feature_path = fields.back();
  return s;
}

void build_corpus(const CorpusConfig& config, std::uint64_t seed, const std::string& out_dir,
                  int num_workers) {
  config.validate();
  const int workers = resolve_workers(num_workers);
  fs::create_directories(out_dir);
  const Vocabulary vocab = Vocabulary::synthetic(config.num_textual_tokens);
  vocab.save((fs::path(out_dir) / "vocab.txt").string());
  write_corpus_meta((fs::path(out_dir) / "corpus.meta").string(), config, seed);

  const int speaker_counts[3] = {config.speakers_train, config.speakers_valid,
                                 config.speakers_test};
  const int single_counts[3] = {config.singles_train, config.singles_valid, config.singles_test};

  std::vector<int> ts = config.mixture_speaker_counts;
  std::sort(ts.begin(), ts.end());

  for (int s = 0; s < 3; ++s) {
    const std::string split = kSplitNames[s];
    const fs::path split_dir = fs::path(out_dir) / split;
    fs::create_directories(split_dir / "feats");

    const auto speakers = make_split_speakers(config, seed, split, speaker_counts[s]);
    const auto pool = make_split_pool(config, seed, split, speakers, single_counts[s], vocab,
                                      workers);

    std::ofstream manifest(split_dir / "manifest.tsv");
    if (!manifest) throw std::runtime_error("build_corpus: cannot write manifest for " + split);

    for (int t_count : ts) {
      const std::size_t n = static_cast<std::size_t>(single_counts[s]);
      std::vector<MixedSample> samples(n);
      for_each_ordered(
          n, workers,
          [&](std::size_t k, std::size_t) {
            MixedSample sample;
            if (t_count == 1) {
              // The T=1 "mixtures" are the single-speaker items themselves,
              // matching split sizes exactly.
              sample = sample_mixture(std::vector<PoolItem>{pool[k]}, 1,
                                      derive_seed(seed, split, "mix", 1ull, k), vocab,
                                      config.max_rejections);
            } else {
              sample = sample_mixture(pool, t_count,
                                      derive_seed(seed, split, "mix",
                                                  static_cast<std::uint64_t>(t_count), k),
                                      vocab, config.max_rejections);
            }
            sample.id = "t" + std::to_string(t_count) + "_" + pad5(static_cast<int>(k));
            sample.frames_per_token = config.synth.frames_per_token;
            samples[k] = std::move(sample);
          },
          [](std::size_t, std::size_t) {});

      for (const MixedSample& sample : samples) {
        const std::string rel = "feats/" + sample.id + ".feat";
        write_features((split_dir / rel).string(), sample.features);
        manifest << manifest_line(sample, vocab, rel) << "\n";
      }
    }
    if (!manifest) throw std::runtime_error("build_corpus: manifest write failed for " + split);
  }
}

CorpusSplit load_split(const std::string& split_dir, const Vocabulary& vocab) {
  const fs::path dir(split_dir);
  const auto meta = read_key_value_file((dir.parent_path() / "corpus.meta").string());
  auto it = meta.find("frames_per_token");
  if (it == meta.end())
    throw std::runtime_error("load_split: corpus.meta lacks frames_per_token");
  const int fpt = std::stoi(it->second);

  std::ifstream manifest(dir / "manifest.tsv");
  if (!manifest)
    throw std::runtime_error("load_split: cannot open manifest in " + split_dir);
  CorpusSplit split;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::string rel;
    MixedSample s = parse_manifest_line(line, vocab, &rel);
    s.features = read_features((dir / rel).string());
    s.frames_per_token = fpt;
    s.utterances = fifo_sort(std::move(s.utterances));
    s.target_conventional = serialize_conventional(s.utterances, vocab);
    s.target_joint = serialize_joint(s.utterances, vocab);
    split.samples.push_back(std::move(s));
  }
  return split;
}

}  // namespace sot
