// sot/model.h

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

#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sot/autodiff.h"
#include "sot/params.h"

namespace sot {

/// Transformer encoder-decoder hyperparameters. The speech encoder applies
/// two stride-2 convolution+pooling stages, so input frames are subsampled
/// by a fixed factor of 4 along the time axis.
struct ModelConfig {
  int model_dim = 64;
  int ffn_dim = 128;
  int heads = 2;
  int encoder_blocks = 2;
  int decoder_blocks = 2;
  int vocab_size = 0;
  int feat_dim = 12;
  int max_target_len = 128;
  double dropout = 0.1;
  bool sinusoidal_pos = true;  // learned positional tables otherwise
  int max_positions = 2048;

  static constexpr int kFramesSubsample = 4;

  void validate() const {
    if (model_dim < 1 || ffn_dim < 1) throw std::invalid_argument("model: dims must be positive");
    if (heads < 1 || model_dim % heads != 0)
      throw std::invalid_argument("model: model_dim " + std::to_string(model_dim) +
                                  " not divisible by heads " + std::to_string(heads));
    if (encoder_blocks < 1 || decoder_blocks < 1)
      throw std::invalid_argument("model: need at least one block per stack");
    if (vocab_size < 2) throw std::invalid_argument("model: vocab_size must be >= 2");
    if (feat_dim < 1) throw std::invalid_argument("model: feat_dim must be >= 1");
    if (max_target_len < 2) throw std::invalid_argument("model: max_target_len must be >= 2");
    if (dropout < 0.0 || dropout >= 1.0)
      throw std::invalid_argument("model: dropout must be in [0,1)");
    if (!sinusoidal_pos && max_positions < max_target_len)
      throw std::invalid_argument("model: learned positional table shorter than max_target_len");
  }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("ModelConfig: cannot write " + path);
    os << "model_dim=" << model_dim << "\n"
       << "ffn_dim=" << ffn_dim << "\n"
       << "heads=" << heads << "\n"
       << "encoder_blocks=" << encoder_blocks << "\n"
       << "decoder_blocks=" << decoder_blocks << "\n"
       << "vocab_size=" << vocab_size << "\n"
       << "feat_dim=" << feat_dim << "\n"
       << "max_target_len=" << max_target_len << "\n"
       << "dropout=" << dropout << "\n"
       << "positional=" << (sinusoidal_pos ? "sinusoidal" : "learned") << "\n"
       << "max_positions=" << max_positions << "\n";
  }

  static ModelConfig load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("ModelConfig: cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty() || line[0] == '#') continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    ModelConfig cfg;
    auto geti = [&](const char* k, int& out) {
      if (kv.count(k)) out = std::stoi(kv[k]);
    };
    geti("model_dim", cfg.model_dim);
    geti("ffn_dim", cfg.ffn_dim);
    geti("heads", cfg.heads);
    geti("encoder_blocks", cfg.encoder_blocks);
    geti("decoder_blocks", cfg.decoder_blocks);
    geti("vocab_size", cfg.vocab_size);
    geti("feat_dim", cfg.feat_dim);
    geti("max_target_len", cfg.max_target_len);
    geti("max_positions", cfg.max_positions);
    if (kv.count("dropout")) cfg.dropout = std::stod(kv["dropout"]);
    if (kv.count("positional")) cfg.sinusoidal_pos = kv["positional"] != "learned";
    cfg.validate();
    return cfg;
  }
};

/// Standard sinusoidal position table: sin on even columns, cos on odd.
template <typename Scalar>
MatX<Scalar> sinusoidal_positions(Eigen::Index len, Eigen::Index dim) {
  MatX<Scalar> pe(len, dim);
  for (Eigen::Index pos = 0; pos < len; ++pos) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double k = static_cast<double>(j / 2);
      const double w = std::pow(10000.0, -2.0 * k / static_cast<double>(dim));
      const double angle = static_cast<double>(pos) * w;
      pe(pos, j) = static_cast<Scalar>(j % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

/// Speech encoder and token decoder computing P(z_l | z_{1:l-1}, X) over the
/// serialized token space. The decoder conditions its first prediction on a
/// dedicated begin token (id vocab_size) that never appears in targets or
/// scores.
template <typename Scalar>
class TransformerModel {
 public:
  using Mat = MatX<Scalar>;
  using Vec = VecX<Scalar>;

  explicit TransformerModel(ModelConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const ModelConfig& config() const { return cfg_; }
  int bos_id() const { return cfg_.vocab_size; }

  /// Creates and fills all parameter tensors; uniform(-r, r) with
  /// r = 1/sqrt(fan-in), biases zero, layer-norm gains one. Creation order is
  /// fixed, so identical seeds give identical parameters.
  void init_params(ParamSet<Scalar>& ps, std::uint64_t seed) const {
    auto rng = make_rng(derive_seed(seed, "init"));
    ps.seed = seed;
    const int d = cfg_.model_dim;

    auto fill = [&rng](Mat& m, Eigen::Index fan_in) {
      const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-r, r);
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<Scalar>(dist(rng));
    };
    auto weight = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols,
                      Eigen::Index fan_in) { fill(ps.create(name, rows, cols), fan_in); };
    auto bias = [&](const std::string& name, Eigen::Index cols) { ps.create(name, 1, cols); };
    auto norm = [&](const std::string& name) {
      ps.create(name + "/g", 1, d).setOnes();
      ps.create(name + "/b", 1, d);
    };
    auto attention = [&](const std::string& prefix) {
      for (const char* w : {"wq", "wk", "wv", "wo"}) weight(prefix + "/" + w, d, d, d);
      for (const char* b : {"bq", "bk", "bv", "bo"}) bias(prefix + "/" + b, d);
    };
    auto ffn = [&](const std::string& prefix) {
      weight(prefix + "/w1", d, cfg_.ffn_dim, d);
      bias(prefix + "/b1", cfg_.ffn_dim);
      weight(prefix + "/w2", cfg_.ffn_dim, d, cfg_.ffn_dim);
      bias(prefix + "/b2", d);
    };
    auto conv = [&](const std::string& prefix, Eigen::Index in_dim) {
      for (const char* w : {"wp", "wc", "wn"}) weight(prefix + "/" + w, in_dim, d, 3 * in_dim);
      bias(prefix + "/b", d);
    };

    weight("embed/tok", cfg_.vocab_size + 1, d, d);
    if (!cfg_.sinusoidal_pos) {
      weight("enc/pos", cfg_.max_positions, d, d);
      weight("dec/pos", cfg_.max_positions, d, d);
    }
    conv("enc/conv1", cfg_.feat_dim);
    conv("enc/conv2", d);
    for (int i = 0; i < cfg_.encoder_blocks; ++i) {
      const std::string p = "enc/b" + std::to_string(i);
      attention(p + "/attn");
      norm(p + "/ln1");
      ffn(p + "/ffn");
      norm(p + "/ln2");
    }
    for (int i = 0; i < cfg_.decoder_blocks; ++i) {
      const std::string p = "dec/b" + std::to_string(i);
      attention(p + "/self");
      norm(p + "/ln1");
      attention(p + "/cross");
      norm(p + "/ln2");
      ffn(p + "/ffn");
      norm(p + "/ln3");
    }
    weight("out/w", d, cfg_.vocab_size, d);
    bias("out/b", cfg_.vocab_size);
  }

  /// Encoder graph: conv subsampling, positional information, then the
  /// transformer blocks (post-norm residual layout).
  Expr<Scalar> encode_expr(Graph<Scalar>& g, ParamBinder<Scalar>& P, const Mat& feats) const {
    if (feats.cols() != cfg_.feat_dim)
      throw std::invalid_argument("encode: features have dim " + std::to_string(feats.cols()) +
                                  ", model expects " + std::to_string(cfg_.feat_dim));
    if (feats.rows() < 1) throw std::invalid_argument("encode: empty feature matrix");
    const Scalar p = static_cast<Scalar>(cfg_.dropout);
    auto x = g.constant(feats);
    x = maxpool_time2(swish(conv1d_k3(x, P("enc/conv1/wp"), P("enc/conv1/wc"),
                                      P("enc/conv1/wn"), P("enc/conv1/b"))));
    x = maxpool_time2(swish(conv1d_k3(x, P("enc/conv2/wp"), P("enc/conv2/wc"),
                                      P("enc/conv2/wn"), P("enc/conv2/b"))));
    x = x + positional(g, P, "enc/pos", x.rows());
    x = dropout(x, p);
    for (int i = 0; i < cfg_.encoder_blocks; ++i) {
      const std::string pre = "enc/b" + std::to_string(i);
      auto a = attention_expr(P, pre + "/attn", x, x, false);
      x = layer_norm(x + dropout(a, p), P(pre + "/ln1/g"), P(pre + "/ln1/b"));
      auto f = ffn_expr(P, pre + "/ffn", x);
      x = layer_norm(x + dropout(f, p), P(pre + "/ln2/g"), P(pre + "/ln2/b"));
    }
    return x;
  }

  /// Decoder graph over bos-prefixed input tokens; row l of the result holds
  /// the logits for the token following inputs[0..l].
  Expr<Scalar> decoder_logits_expr(Graph<Scalar>& g, ParamBinder<Scalar>& P, Expr<Scalar> enc,
                                   const std::vector<int>& inputs) const {
    if (inputs.empty()) throw std::invalid_argument("decode: empty input token sequence");
    if (static_cast<int>(inputs.size()) > cfg_.max_target_len)
      throw std::invalid_argument("decode: input length " + std::to_string(inputs.size()) +
                                  " exceeds max_target_len " +
                                  std::to_string(cfg_.max_target_len));
    const Scalar p = static_cast<Scalar>(cfg_.dropout);
    auto x = embedding_lookup(P("embed/tok"), inputs);
    x = static_cast<Scalar>(std::sqrt(static_cast<double>(cfg_.model_dim))) * x;
    x = x + positional(g, P, "dec/pos", x.rows());
    x = dropout(x, p);
    for (int i = 0; i < cfg_.decoder_blocks; ++i) {
      const std::string pre = "dec/b" + std::to_string(i);
      auto a = attention_expr(P, pre + "/self", x, x, true);
      x = layer_norm(x + dropout(a, p), P(pre + "/ln1/g"), P(pre + "/ln1/b"));
      auto c = attention_expr(P, pre + "/cross", x, enc, false);
      x = layer_norm(x + dropout(c, p), P(pre + "/ln2/g"), P(pre + "/ln2/b"));
      auto f = ffn_expr(P, pre + "/ffn", x);
      x = layer_norm(x + dropout(f, p), P(pre + "/ln3/g"), P(pre + "/ln3/b"));
    }
    return add_bias(matmul(x, P("out/w")), P("out/b"));
  }

  /// Label-smoothed negative log-likelihood of `target` (which must end with
  /// eos), summed over tokens.
  Expr<Scalar> loss_expr(Graph<Scalar>& g, ParamBinder<Scalar>& P, const Mat& feats,
                         const std::vector<int>& target, Scalar label_smoothing,
                         int eos_id) const {
    check_target(target, eos_id);
    std::vector<int> inputs;
    inputs.reserve(target.size());
    inputs.push_back(bos_id());
    inputs.insert(inputs.end(), target.begin(), target.end() - 1);
    auto enc = encode_expr(g, P, feats);
    auto logits = decoder_logits_expr(g, P, enc, inputs);
    return smoothed_nll_sum(log_softmax_rows(logits), target, label_smoothing);
  }

  // -- eval-mode conveniences -------------------------------------------------

  /// Subsampled encoder states (H x model_dim) for decoding.
  Mat encode(const Mat& feats, ParamSet<Scalar>& ps, Mode mode = Mode::kEval,
             std::uint64_t dropout_seed = 0) const {
    Graph<Scalar> g(mode, dropout_seed);
    ParamBinder<Scalar> P(g, ps);
    return encode_expr(g, P, feats).value();
  }

  /// Next-token distribution given a target prefix; non-negative and sums to
  /// one.
  Vec decode_step(const std::vector<int>& prefix, const Mat& enc, ParamSet<Scalar>& ps) const {
    Vec lp = decode_step_logprobs(prefix, enc, ps);
    return lp.array().exp();
  }

  Vec decode_step_logprobs(const std::vector<int>& prefix, const Mat& enc,
                           ParamSet<Scalar>& ps) const {
    if (static_cast<int>(prefix.size()) >= cfg_.max_target_len)
      throw std::invalid_argument("decode_step: prefix length " +
                                  std::to_string(prefix.size()) + " not below max_target_len " +
                                  std::to_string(cfg_.max_target_len));
    Graph<Scalar> g(Mode::kEval);
    ParamBinder<Scalar> P(g, ps);
    std::vector<int> inputs;
    inputs.reserve(prefix.size() + 1);
    inputs.push_back(bos_id());
    inputs.insert(inputs.end(), prefix.begin(), prefix.end());
    auto enc_e = g.constant_ref(&enc);
    auto logp = log_softmax_rows(decoder_logits_expr(g, P, enc_e, inputs));
    return logp.value().row(logp.rows() - 1).transpose();
  }

  /// -log P(target | feats), teacher-forced; equals the sum over positions of
  /// the per-step negative log-probabilities.
  double sequence_nll(const Mat& feats, const std::vector<int>& target, ParamSet<Scalar>& ps,
                      int eos_id) const {
    check_target(target, eos_id);
    Graph<Scalar> g(Mode::kEval);
    ParamBinder<Scalar> P(g, ps);
    auto loss = loss_expr(g, P, feats, target, Scalar(0), eos_id);
    return static_cast<double>(loss.value()(0, 0));
  }

 private:
  void check_target(const std::vector<int>& target, int eos_id) const {
    if (target.empty()) throw std::invalid_argument("model: empty target");
    if (target.back() != eos_id)
      throw std::invalid_argument("model: target must end with eos");
    if (static_cast<int>(target.size()) > cfg_.max_target_len)
      throw std::invalid_argument("model: target length " + std::to_string(target.size()) +
                                  " exceeds max_target_len " +
                                  std::to_string(cfg_.max_target_len));
  }

  Expr<Scalar> positional(Graph<Scalar>& g, ParamBinder<Scalar>& P, const std::string& table,
                          Eigen::Index len) const {
    if (cfg_.sinusoidal_pos)
      return g.constant(sinusoidal_positions<Scalar>(len, cfg_.model_dim));
    if (len > cfg_.max_positions)
      throw std::invalid_argument("model: sequence length " + std::to_string(len) +
                                  " exceeds learned positional table " +
                                  std::to_string(cfg_.max_positions));
    std::vector<int> ids(static_cast<std::size_t>(len));
    for (Eigen::Index i = 0; i < len; ++i) ids[static_cast<std::size_t>(i)] = static_cast<int>(i);
    return embedding_lookup(P(table), ids);
  }

  Expr<Scalar> ffn_expr(ParamBinder<Scalar>& P, const std::string& prefix,
                        Expr<Scalar> x) const {
    auto h = swish(add_bias(matmul(x, P(prefix + "/w1")), P(prefix + "/b1")));
    return add_bias(matmul(h, P(prefix + "/w2")), P(prefix + "/b2"));
  }

  Expr<Scalar> attention_expr(ParamBinder<Scalar>& P,
                              const std::string& prefix, Expr<Scalar> q_in, Expr<Scalar> kv_in,
                              bool causal) const {
    const int dh = cfg_.model_dim / cfg_.heads;
    const Scalar scale = Scalar(1) / static_cast<Scalar>(std::sqrt(static_cast<double>(dh)));
    auto q = add_bias(matmul(q_in, P(prefix + "/wq")), P(prefix + "/bq"));
    auto k = add_bias(matmul(kv_in, P(prefix + "/wk")), P(prefix + "/bk"));
    auto v = add_bias(matmul(kv_in, P(prefix + "/wv")), P(prefix + "/bv"));
    std::vector<Expr<Scalar>> heads;
    heads.reserve(static_cast<std::size_t>(cfg_.heads));
    for (int h = 0; h < cfg_.heads; ++h) {
      auto qh = slice_cols(q, h * dh, dh);
      auto kh = slice_cols(k, h * dh, dh);
      auto vh = slice_cols(v, h * dh, dh);
      auto scores = scale * matmul_nt(qh, kh);
      if (causal) scores = causal_mask(scores);
      heads.push_back(matmul(softmax_rows(scores), vh));
    }
    auto ctx = heads.size() == 1 ? heads[0] : concat_cols(heads);
    return add_bias(matmul(ctx, P(prefix + "/wo")), P(prefix + "/bo"));
  }

  ModelConfig cfg_;
};

}  // namespace sot
