// src/config.cc

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

#include "sot/config.h"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sot {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class Section {
 public:
  Section(std::string name, std::map<std::string, std::string> kv)
      : name_(std::move(name)), kv_(std::move(kv)) {}

  void get(const char* key, int& out) {
    if (auto v = take(key)) out = std::stoi(*v);
  }
  void get(const char* key, float& out) {
    if (auto v = take(key)) out = std::stof(*v);
  }
  void get(const char* key, double& out) {
    if (auto v = take(key)) out = std::stod(*v);
  }
  void get(const char* key, std::uint64_t& out) {
    if (auto v = take(key)) out = std::stoull(*v);
  }
  void get(const char* key, std::string& out) {
    if (auto v = take(key)) out = *v;
  }

  void finish() const {
    if (!kv_.empty())
      throw std::runtime_error("config: unknown key '" + kv_.begin()->first + "' in section [" +
                               name_ + "]");
  }

 private:
  std::optional<std::string> take(const char* key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return std::nullopt;
    std::string v = it->second;
    kv_.erase(it);
    return v;
  }

  std::string name_;
  std::map<std::string, std::string> kv_;
};

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::istringstream is(csv);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

std::string int_list_to_csv(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << v[i];
  }
  return os.str();
}

}  // namespace

ExperimentConfig ExperimentConfig::parse_string(const std::string& text) {
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::string current;  // top level
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("config: malformed section header at line " +
                                 std::to_string(lineno));
      current = trim(line.substr(1, line.size() - 2));
      sections[current];
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: expected key=value at line " + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::runtime_error("config: empty key at line " + std::to_string(lineno));
    if (!sections[current].emplace(key, value).second)
      throw std::runtime_error("config: duplicate key '" + key + "' in section [" + current +
                               "]");
  }

  static const char* kKnown[] = {"", "corpus", "model", "train", "decode"};
  for (const auto& [name, _] : sections) {
    bool known = false;
    for (const char* k : kKnown) known = known || name == k;
    if (!known) throw std::runtime_error("config: unknown section [" + name + "]");
  }

  ExperimentConfig cfg;
  {
    Section top("", sections[""]);
    top.get("seed", cfg.seed);
    top.finish();
  }
  {
    Section s("corpus", sections["corpus"]);
    s.get("num_textual_tokens", cfg.corpus.num_textual_tokens);
    s.get("feat_dim", cfg.corpus.synth.feat_dim);
    s.get("frames_per_token", cfg.corpus.synth.frames_per_token);
    s.get("noise_sigma", cfg.corpus.synth.noise_sigma);
    s.get("speaker_jitter_sigma", cfg.corpus.synth.speaker_jitter_sigma);
    s.get("text_len_min", cfg.corpus.text_len_min);
    s.get("text_len_max", cfg.corpus.text_len_max);
    s.get("speakers_train", cfg.corpus.speakers_train);
    s.get("speakers_valid", cfg.corpus.speakers_valid);
    s.get("speakers_test", cfg.corpus.speakers_test);
    s.get("singles_train", cfg.corpus.singles_train);
    s.get("singles_valid", cfg.corpus.singles_valid);
    s.get("singles_test", cfg.corpus.singles_test);
    std::string counts;
    s.get("mixture_speaker_counts", counts);
    if (!counts.empty()) cfg.corpus.mixture_speaker_counts = parse_int_list(counts);
    s.get("max_rejections", cfg.corpus.max_rejections);
    s.finish();
  }
  {
    Section s("model", sections["model"]);
    s.get("model_dim", cfg.model.model_dim);
    s.get("ffn_dim", cfg.model.ffn_dim);
    s.get("heads", cfg.model.heads);
    s.get("encoder_blocks", cfg.model.encoder_blocks);
    s.get("decoder_blocks", cfg.model.decoder_blocks);
    s.get("max_target_len", cfg.model.max_target_len);
    s.get("max_positions", cfg.model.max_positions);
    std::string positional;
    s.get("positional", positional);
    if (!positional.empty()) {
      if (positional != "sinusoidal" && positional != "learned")
        throw std::runtime_error("config: positional must be sinusoidal or learned");
      cfg.model.sinusoidal_pos = positional != "learned";
    }
    s.finish();
  }
  {
    Section s("train", sections["train"]);
    std::string mode;
    s.get("mode", mode);
    if (!mode.empty()) cfg.train.mode = target_mode_from_name(mode);
    s.get("batch_size", cfg.train.batch_size);
    s.get("label_smoothing", cfg.train.label_smoothing);
    s.get("dropout", cfg.train.dropout);
    s.get("freq_masks", cfg.train.specaugment.freq_masks);
    s.get("freq_mask_width", cfg.train.specaugment.freq_mask_width);
    s.get("time_masks", cfg.train.specaugment.time_masks);
    s.get("time_mask_width", cfg.train.specaugment.time_mask_width);
    s.get("lr", cfg.train.optimizer.lr);
    s.get("beta1", cfg.train.optimizer.beta1);
    s.get("beta2", cfg.train.optimizer.beta2);
    s.get("eps", cfg.train.optimizer.eps);
    s.get("max_epochs", cfg.train.max_epochs);
    s.get("patience", cfg.train.patience);
    s.finish();
  }
  {
    Section s("decode", sections["decode"]);
    s.get("beam", cfg.decode.beam);
    s.get("max_len", cfg.decode.max_len);
    s.finish();
  }
  cfg.train.seed = cfg.seed;
  return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_string(buf.str());
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  os.precision(15);
  os << "seed=" << seed << "\n";
  os << "\n[corpus]\n";
  os << "num_textual_tokens=" << corpus.num_textual_tokens << "\n";
  os << "feat_dim=" << corpus.synth.feat_dim << "\n";
  os << "frames_per_token=" << corpus.synth.frames_per_token << "\n";
  os << "noise_sigma=" << corpus.synth.noise_sigma << "\n";
  os << "speaker_jitter_sigma=" << corpus.synth.speaker_jitter_sigma << "\n";
  os << "text_len_min=" << corpus.text_len_min << "\n";
  os << "text_len_max=" << corpus.text_len_max << "\n";
  os << "speakers_train=" << corpus.speakers_train << "\n";
  os << "speakers_valid=" << corpus.speakers_valid << "\n";
  os << "speakers_test=" << corpus.speakers_test << "\n";
  os << "singles_train=" << corpus.singles_train << "\n";
  os << "singles_valid=" << corpus.singles_valid << "\n";
  os << "singles_test=" << corpus.singles_test << "\n";
  os << "mixture_speaker_counts=" << int_list_to_csv(corpus.mixture_speaker_counts) << "\n";
  os << "max_rejections=" << corpus.max_rejections << "\n";
  os << "\n[model]\n";
  os << "model_dim=" << model.model_dim << "\n";
  os << "ffn_dim=" << model.ffn_dim << "\n";
  os << "heads=" << model.heads << "\n";
  os << "encoder_blocks=" << model.encoder_blocks << "\n";
  os << "decoder_blocks=" << model.decoder_blocks << "\n";
  os << "max_target_len=" << model.max_target_len << "\n";
  os << "max_positions=" << model.max_positions << "\n";
  os << "positional=" << (model.sinusoidal_pos ? "sinusoidal" : "learned") << "\n";
  os << "\n[train]\n";
  os << "mode=" << target_mode_name(train.mode) << "\n";
  os << "batch_size=" << train.batch_size << "\n";
  os << "label_smoothing=" << train.label_smoothing << "\n";
  os << "dropout=" << train.dropout << "\n";
  os << "freq_masks=" << train.specaugment.freq_masks << "\n";
  os << "freq_mask_width=" << train.specaugment.freq_mask_width << "\n";
  os << "time_masks=" << train.specaugment.time_masks << "\n";
  os << "time_mask_width=" << train.specaugment.time_mask_width << "\n";
  os << "lr=" << train.optimizer.lr << "\n";
  os << "beta1=" << train.optimizer.beta1 << "\n";
  os << "beta2=" << train.optimizer.beta2 << "\n";
  os << "eps=" << train.optimizer.eps << "\n";
  os << "max_epochs=" << train.max_epochs << "\n";
  os << "patience=" << train.patience << "\n";
  os << "\n[decode]\n";
  os << "beam=" << decode.beam << "\n";
  os << "max_len=" << decode.max_len << "\n";
  return os.str();
}

}  // namespace sot
