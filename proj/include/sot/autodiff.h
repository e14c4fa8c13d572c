// sot/autodiff.h

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
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sot/common.h"

namespace sot {

// Dynamic tape with exact reverse-mode differentiation over dense Eigen
// matrices. The forward pass is built in topological order, so the backward
// pass is a single reverse sweep over the tape. Values are computed eagerly
// at node creation; gradient buffers are allocated lazily so nodes that do
// not influence the loss cost nothing in the sweep. Parameter leaves read
// external value storage and accumulate into an external gradient sink,
// which lets several graphs run concurrently over one read-only parameter
// set with per-graph gradient buffers.

template <typename Scalar>
class Graph;

template <typename Scalar>
struct Expr {
  Graph<Scalar>* graph = nullptr;
  int id = -1;

  const MatX<Scalar>& value() const { return graph->value(id); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

template <typename Scalar>
class Graph {
 public:
  using Mat = MatX<Scalar>;

  explicit Graph(Mode mode = Mode::kEval, std::uint64_t dropout_seed = 0)
      : mode_(mode), rng_(make_rng(dropout_seed)) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Mode mode() const { return mode_; }
  std::mt19937_64& rng() { return rng_; }
  std::size_t size() const { return nodes_.size(); }

  /// Leaf owning a copy of `v`.
  Expr<Scalar> constant(Mat v) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.value_store = std::move(v);
    n.value = &n.value_store;
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  /// Leaf referencing external storage; `value` must outlive the graph.
  Expr<Scalar> constant_ref(const Mat* value) {
    nodes_.emplace_back();
    nodes_.back().value = value;
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  /// Parameter leaf: reads `value`, accumulates into `grad_sink`. Both must
  /// outlive the graph; `grad_sink` must already have the value's shape and
  /// is never zeroed here, so gradients sum across graphs and samples.
  Expr<Scalar> param(const Mat* value, Mat* grad_sink) {
    if (grad_sink->rows() != value->rows() || grad_sink->cols() != value->cols())
      throw std::invalid_argument("Graph::param: grad sink shape " + shape_str(*grad_sink) +
                                  " != value shape " + shape_str(*value));
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.value = value;
    n.external_grad = grad_sink;
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  const Mat& value(int id) const { return *nodes_[static_cast<std::size_t>(id)].value; }

  /// Gradient from the last backward() pass; zero if the node did not
  /// influence the loss.
  Mat gradient(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.external_grad) return *n.external_grad;
    if (!n.grad_live) return Mat::Zero(n.value->rows(), n.value->cols());
    return n.grad_store;
  }

  /// Reverse sweep from a scalar (1x1) loss node.
  void backward(Expr<Scalar> loss) {
    const Mat& lv = value(loss.id);
    if (lv.rows() != 1 || lv.cols() != 1)
      throw std::invalid_argument("Graph::backward: loss must be 1x1, got " + shape_str(lv));
    accumulate(loss.id, Mat::Ones(1, 1));
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad_live && n.backprop) n.backprop();
    }
  }

  // -- plumbing used by the op free functions --------------------------------

  int reserve(Mat value) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.value_store = std::move(value);
    n.value = &n.value_store;
    return static_cast<int>(nodes_.size()) - 1;
  }

  void set_backprop(int id, std::function<void()> fn) {
    nodes_[static_cast<std::size_t>(id)].backprop = std::move(fn);
  }

  /// Upstream gradient of an interior node; valid inside its backprop.
  const Mat& upstream(int id) const { return nodes_[static_cast<std::size_t>(id)].grad_store; }

  template <typename Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
    grad_ref(id) += g;
  }

  /// Gradient buffer, allocated (zeroed) on first use; supports block-wise
  /// accumulation.
  Mat& grad_ref(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.external_grad) {
      n.grad_live = true;
      return *n.external_grad;
    }
    if (!n.grad_live) {
      n.grad_store = Mat::Zero(n.value->rows(), n.value->cols());
      n.grad_live = true;
    }
    return n.grad_store;
  }

 private:
  struct Node {
    Mat value_store;
    const Mat* value = nullptr;
    Mat grad_store;
    Mat* external_grad = nullptr;
    bool grad_live = false;
    std::function<void()> backprop;
  };

  Mode mode_;
  std::mt19937_64 rng_;
  std::deque<Node> nodes_;  // deque keeps value_store addresses stable
};

namespace detail {

template <typename Scalar>
[[noreturn]] void shape_error(const char* op, const MatX<Scalar>& a, const MatX<Scalar>& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) +
                              " and " + shape_str(b));
}

template <typename Scalar>
void check_same_graph(Expr<Scalar> a, Expr<Scalar> b, const char* op) {
  if (a.graph != b.graph) throw std::invalid_argument(std::string(op) + ": mixed graphs");
}

template <typename Scalar>
Scalar stable_sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ops. Each computes its value eagerly and installs a closure that routes the
// upstream gradient to its inputs.

template <typename Scalar>
Expr<Scalar> matmul(Expr<Scalar> a, Expr<Scalar> b) {
  detail::check_same_graph(a, b, "matmul");
  Graph<Scalar>* g = a.graph;
  if (a.cols() != b.rows()) detail::shape_error<Scalar>("matmul", a.value(), b.value());
  int id = g->reserve(a.value() * b.value());
  g->set_backprop(id, [g, id, a, b]() {
    const auto& G = g->upstream(id);
    g->accumulate(a.id, G * b.value().transpose());
    g->accumulate(b.id, a.value().transpose() * G);
  });
  return {g, id};
}

/// a * b^T without materializing the transpose.
template <typename Scalar>
Expr<Scalar> matmul_nt(Expr<Scalar> a, Expr<Scalar> b) {
  detail::check_same_graph(a, b, "matmul_nt");
  Graph<Scalar>* g = a.graph;
  if (a.cols() != b.cols()) detail::shape_error<Scalar>("matmul_nt", a.value(), b.value());
  int id = g->reserve(a.value() * b.value().transpose());
  g->set_backprop(id, [g, id, a, b]() {
    const auto& G = g->upstream(id);
    g->accumulate(a.id, G * b.value());
    g->accumulate(b.id, G.transpose() * a.value());
  });
  return {g, id};
}

template <typename Scalar>
Expr<Scalar> operator+(Expr<Scalar> a, Expr<Scalar> b) {
  detail::check_same_graph(a, b, "add");
  Graph<Scalar>* g = a.graph;
  if (a.rows() != b.rows() || a.cols() != b.cols())
    detail::shape_error<Scalar>("add", a.value(), b.value());
  int id = g->reserve(a.value() + b.value());
  g->set_backprop(id, [g, id, a, b]() {
    const auto& G = g->upstream(id);
    g->accumulate(a.id, G);
    g->accumulate(b.id, G);
  });
  return {g, id};
}

template <typename Scalar>
Expr<Scalar> operator-(Expr<Scalar> a, Expr<Scalar> b) {
  detail::check_same_graph(a, b, "sub");
  Graph<Scalar>* g = a.graph;
  if (a.rows() != b.rows() || a.cols() != b.cols())
    detail::shape_error<Scalar>("sub", a.value(), b.value());
  int id = g->reserve(a.value() - b.value());
  g->set_backprop(id, [g, id, a, b]() {
    const auto& G = g->upstream(id);
    g->accumulate(a.id, G);
    g->accumulate(b.id, -G);
  });
  return {g, id};
}

template <typename Scalar>
Expr<Scalar> operator*(Scalar s, Expr<Scalar> x) {
  Graph<Scalar>* g = x.graph;
  int id = g->reserve(s * x.value());
  g->set_backprop(id, [g, id, x, s]() { g->accumulate(x.id, s * g->upstream(id)); });
  return {g, id};
}

template <typename Scalar>
Expr<Scalar> hadamard(Expr<Scalar> a, Expr<Scalar> b) {
  detail::check_same_graph(a, b, "hadamard");
  Graph<Scalar>* g = a.graph;
  if (a.rows() != b.rows() || a.cols() != b.cols())
    detail::shape_error<Scalar>("hadamard", a.value(), b.value());
  int id = g->reserve(a.value().cwiseProduct(b.value()));
  g->set_backprop(id, [g, id, a, b]() {
    const auto& G = g->upstream(id);
    g->accumulate(a.id, G.cwiseProduct(b.value()));
    g->accumulate(b.id, G.cwiseProduct(a.value()));
  });
  return {g, id};
}

/// Adds a 1xC bias row to every row of x.
template <typename Scalar>
Expr<Scalar> add_bias(Expr<Scalar> x, Expr<Scalar> bias) {
  detail::check_same_graph(x, bias, "add_bias");
  Graph<Scalar>* g = x.graph;
  if (bias.rows() != 1 || bias.cols() != x.cols())
    detail::shape_error<Scalar>("add_bias", x.value(), bias.value());
  MatX<Scalar> v = x.value();
  v.rowwise() += bias.value().row(0);
  int id = g->reserve(std::move(v));
  g->set_backprop(id, [g, id, x, bias]() {
    const auto& G = g->upstream(id);
    g->accumulate(x.id, G);
    g->accumulate(bias.id, G.colwise().sum());
  });
  return {g, id};
}

template <typename Scalar>
Expr<Scalar> swish(Expr<Scalar> x) {
  Graph<Scalar>* g = x.graph;
  int id = g->reserve(x.value().unaryExpr(
      [](Scalar v) { return v * detail::stable_sigmoid(v); }));
  g->set_backprop(id, [g, id, x]() {
    const auto& G = g->upstream(id);
    g->accumulate(x.id, G.cwiseProduct(x.value().unaryExpr([](Scalar v) {
      const Scalar s = detail::stable_sigmoid(v);
      return s * (Scalar(1) + v * (Scalar(1) - s));
    })));
  });
  return {g, id};
}

template <typename Scalar>
Expr<Scalar> softmax_rows(Expr<Scalar> x) {
  Graph<Scalar>* g = x.graph;
  MatX<Scalar> y = x.value();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    auto row = y.row(i).array();
    row -= row.maxCoeff();
    row = row.exp();
    row /= row.sum();
  }
  int id = g->reserve(std::move(y));
  g->set_backprop(id, [g, id, x]() {
    const auto& G = g->upstream(id);
    const auto& Y = g->value(id);
    VecX<Scalar> s = G.cwiseProduct(Y).rowwise().sum();
    g->accumulate(x.id, Y.cwiseProduct((G.colwise() - s)));
  });
  return {g, id};
}

template <typename Scalar>
Expr<Scalar> log_softmax_rows(Expr<Scalar> x) {
  Graph<Scalar>* g = x.graph;
  MatX<Scalar> y = x.value();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    auto row = y.row(i).array();
    row -= row.maxCoeff();
    row -= std::log(row.exp().sum());
  }
  int id = g->reserve(std::move(y));
  g->set_backprop(id, [g, id, x]() {
    const auto& G = g->upstream(id);
    const auto& L = g->value(id);
    VecX<Scalar> rs = G.rowwise().sum();
    MatX<Scalar> soft = L.array().exp().matrix();
    g->accumulate(x.id, G - MatX<Scalar>(soft.array().colwise() * rs.array()));
  });
  return {g, id};
}

/// Row-wise layer normalization with affine parameters gamma, beta (1xC).
template <typename Scalar>
Expr<Scalar> layer_norm(Expr<Scalar> x, Expr<Scalar> gamma, Expr<Scalar> beta,
                        Scalar eps = Scalar(1e-6)) {
  detail::check_same_graph(x, gamma, "layer_norm");
  detail::check_same_graph(x, beta, "layer_norm");
  Graph<Scalar>* g = x.graph;
  if (gamma.rows() != 1 || gamma.cols() != x.cols())
    detail::shape_error<Scalar>("layer_norm", x.value(), gamma.value());
  if (beta.rows() != 1 || beta.cols() != x.cols())
    detail::shape_error<Scalar>("layer_norm", x.value(), beta.value());

  const auto& X = x.value();
  VecX<Scalar> mu = X.rowwise().mean();
  MatX<Scalar> centered = X.colwise() - mu;
  VecX<Scalar> istd =
      (centered.array().square().rowwise().mean() + eps).rsqrt().matrix();
  MatX<Scalar> xhat = centered.array().colwise() * istd.array();
  MatX<Scalar> y = xhat.array().rowwise() * gamma.value().row(0).array();
  y.rowwise() += beta.value().row(0);

  int id = g->reserve(std::move(y));
  g->set_backprop(id, [g, id, x, gamma, beta, xhat, istd]() {
    const auto& G = g->upstream(id);
    g->accumulate(gamma.id, G.cwiseProduct(xhat).colwise().sum());
    g->accumulate(beta.id, G.colwise().sum());
    MatX<Scalar> dxhat = G.array().rowwise() * gamma.value().row(0).array();
    VecX<Scalar> m1 = dxhat.rowwise().mean();
    VecX<Scalar> m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
    MatX<Scalar> dx = dxhat.colwise() - m1;
    dx -= MatX<Scalar>(xhat.array().colwise() * m2.array());
    g->accumulate(x.id, MatX<Scalar>(dx.array().colwise() * istd.array()));
  });
  return {g, id};
}

/// Width-3 convolution over time (rows) with same-padding:
/// out[m] = x[m-1] w_prev + x[m] w_cur + x[m+1] w_next + bias.
template <typename Scalar>
Expr<Scalar> conv1d_k3(Expr<Scalar> x, Expr<Scalar> w_prev, Expr<Scalar> w_cur,
                       Expr<Scalar> w_next, Expr<Scalar> bias) {
  Graph<Scalar>* g = x.graph;
  const auto& X = x.value();
  if (w_cur.rows() != X.cols()) detail::shape_error<Scalar>("conv1d_k3", X, w_cur.value());
  if (w_prev.rows() != X.cols() || w_prev.cols() != w_cur.cols() ||
      w_next.rows() != X.cols() || w_next.cols() != w_cur.cols())
    detail::shape_error<Scalar>("conv1d_k3", w_prev.value(), w_next.value());
  if (bias.rows() != 1 || bias.cols() != w_cur.cols())
    detail::shape_error<Scalar>("conv1d_k3", X, bias.value());

  const Eigen::Index m = X.rows();
  MatX<Scalar> y = X * w_cur.value();
  if (m > 1) {
    y.bottomRows(m - 1) += X.topRows(m - 1) * w_prev.value();
    y.topRows(m - 1) += X.bottomRows(m - 1) * w_next.value();
  }
  y.rowwise() += bias.value().row(0);

  int id = g->reserve(std::move(y));
  g->set_backprop(id, [g, id, x, w_prev, w_cur, w_next, bias]() {
    const auto& G = g->upstream(id);
    const auto& X = x.value();
    const Eigen::Index m = X.rows();
    g->accumulate(w_cur.id, X.transpose() * G);
    g->accumulate(x.id, G * w_cur.value().transpose());
    if (m > 1) {
      g->accumulate(w_prev.id, X.topRows(m - 1).transpose() * G.bottomRows(m - 1));
      g->grad_ref(x.id).topRows(m - 1) += G.bottomRows(m - 1) * w_prev.value().transpose();
      g->accumulate(w_next.id, X.bottomRows(m - 1).transpose() * G.topRows(m - 1));
      g->grad_ref(x.id).bottomRows(m - 1) += G.topRows(m - 1) * w_next.value().transpose();
    }
    g->accumulate(bias.id, G.colwise().sum());
  });
  return {g, id};
}

/// Max pooling over time with width 2 and stride 2; an odd trailing row pools
/// alone, so M rows map to ceil(M/2).
template <typename Scalar>
Expr<Scalar> maxpool_time2(Expr<Scalar> x) {
  Graph<Scalar>* g = x.graph;
  const auto& X = x.value();
  const Eigen::Index m = X.rows(), c = X.cols();
  const Eigen::Index p = (m + 1) / 2;
  MatX<Scalar> y(p, c);
  Eigen::MatrixXi winner(p, c);
  for (Eigen::Index i = 0; i < p; ++i) {
    const Eigen::Index r0 = 2 * i, r1 = std::min(2 * i + 1, m - 1);
    for (Eigen::Index j = 0; j < c; ++j) {
      // ties keep the earlier frame
      if (X(r0, j) >= X(r1, j)) {
        y(i, j) = X(r0, j);
        winner(i, j) = static_cast<int>(r0);
      } else {
        y(i, j) = X(r1, j);
        winner(i, j) = static_cast<int>(r1);
      }
    }
  }
  int id = g->reserve(std::move(y));
  g->set_backprop(id, [g, id, x, winner]() {
    const auto& G = g->upstream(id);
    auto& dx = g->grad_ref(x.id);
    for (Eigen::Index i = 0; i < G.rows(); ++i)
      for (Eigen::Index j = 0; j < G.cols(); ++j) dx(winner(i, j), j) += G(i, j);
  });
  return {g, id};
}

/// Rows of `table` gathered by token id.
template <typename Scalar>
Expr<Scalar> embedding_lookup(Expr<Scalar> table, std::vector<int> ids) {
  Graph<Scalar>* g = table.graph;
  const auto& T = table.value();
  MatX<Scalar> y(static_cast<Eigen::Index>(ids.size()), T.cols());
  for (std::size_t l = 0; l < ids.size(); ++l) {
    if (ids[l] < 0 || ids[l] >= T.rows())
      throw std::out_of_range("embedding_lookup: token id " + std::to_string(ids[l]) +
                              " outside table with " + std::to_string(T.rows()) + " rows");
    y.row(static_cast<Eigen::Index>(l)) = T.row(ids[l]);
  }
  int id = g->reserve(std::move(y));
  g->set_backprop(id, [g, id, table, ids = std::move(ids)]() {
    const auto& G = g->upstream(id);
    auto& dt = g->grad_ref(table.id);
    for (std::size_t l = 0; l < ids.size(); ++l)
      dt.row(ids[l]) += G.row(static_cast<Eigen::Index>(l));
  });
  return {g, id};
}

/// Inverted dropout: identity in eval mode or at rate 0; in train mode kept
/// entries are scaled by 1/(1-rate) so eval needs no rescaling.
template <typename Scalar>
Expr<Scalar> dropout(Expr<Scalar> x, Scalar rate) {
  Graph<Scalar>* g = x.graph;
  if (rate < Scalar(0) || rate >= Scalar(1))
    throw std::invalid_argument("dropout: rate must be in [0,1)");
  if (g->mode() == Mode::kEval || rate == Scalar(0)) return x;
  const Scalar keep = Scalar(1) - rate;
  std::bernoulli_distribution coin(static_cast<double>(keep));
  MatX<Scalar> mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    for (Eigen::Index j = 0; j < mask.cols(); ++j)
      mask(i, j) = coin(g->rng()) ? Scalar(1) / keep : Scalar(0);
  int id = g->reserve(x.value().cwiseProduct(mask));
  g->set_backprop(id, [g, id, x, mask]() {
    g->accumulate(x.id, g->upstream(id).cwiseProduct(mask));
  });
  return {g, id};
}

/// Adds a large negative constant above the diagonal of square attention
/// scores so position i attends only to positions <= i.
template <typename Scalar>
Expr<Scalar> causal_mask(Expr<Scalar> scores) {
  Graph<Scalar>* g = scores.graph;
  const auto& S = scores.value();
  if (S.rows() != S.cols())
    throw std::invalid_argument("causal_mask: scores must be square, got " + shape_str(S));
  MatX<Scalar> y = S;
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index j = i + 1; j < y.cols(); ++j) y(i, j) -= Scalar(1e9);
  int id = g->reserve(std::move(y));
  g->set_backprop(id, [g, id, scores]() { g->accumulate(scores.id, g->upstream(id)); });
  return {g, id};
}

template <typename Scalar>
Expr<Scalar> slice_cols(Expr<Scalar> x, Eigen::Index c0, Eigen::Index width) {
  Graph<Scalar>* g = x.graph;
  if (c0 < 0 || width < 1 || c0 + width > x.cols())
    throw std::invalid_argument("slice_cols: range [" + std::to_string(c0) + "," +
                                std::to_string(c0 + width) + ") outside " +
                                shape_str(x.value()));
  int id = g->reserve(x.value().middleCols(c0, width));
  g->set_backprop(id, [g, id, x, c0, width]() {
    g->grad_ref(x.id).middleCols(c0, width) += g->upstream(id);
  });
  return {g, id};
}

template <typename Scalar>
Expr<Scalar> concat_cols(const std::vector<Expr<Scalar>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Graph<Scalar>* g = parts[0].graph;
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    detail::check_same_graph(parts[0], p, "concat_cols");
    if (p.rows() != parts[0].rows())
      detail::shape_error<Scalar>("concat_cols", parts[0].value(), p.value());
    total += p.cols();
  }
  MatX<Scalar> y(parts[0].rows(), total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    y.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  int id = g->reserve(std::move(y));
  g->set_backprop(id, [g, id, parts]() {
    const auto& G = g->upstream(id);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      g->accumulate(p.id, G.middleCols(at, p.cols()));
      at += p.cols();
    }
  });
  return {g, id};
}

/// Label-smoothed negative log-likelihood summed over positions. `logp` holds
/// row-wise log-probabilities; the smoothed target distribution is
/// (1-alpha) * onehot(target) + alpha / V.
template <typename Scalar>
Expr<Scalar> smoothed_nll_sum(Expr<Scalar> logp, std::vector<int> targets, Scalar alpha) {
  Graph<Scalar>* g = logp.graph;
  if (alpha < Scalar(0) || alpha >= Scalar(1))
    throw std::invalid_argument("smoothed_nll_sum: alpha must be in [0,1)");
  const auto& L = logp.value();
  if (static_cast<Eigen::Index>(targets.size()) != L.rows())
    throw std::invalid_argument("smoothed_nll_sum: " + std::to_string(targets.size()) +
                                " targets vs " + std::to_string(L.rows()) + " rows");
  const Eigen::Index v = L.cols();
  Scalar loss = 0;
  for (Eigen::Index l = 0; l < L.rows(); ++l) {
    const int y = targets[static_cast<std::size_t>(l)];
    if (y < 0 || y >= v)
      throw std::out_of_range("smoothed_nll_sum: target id " + std::to_string(y) +
                              " outside vocabulary of " + std::to_string(v));
    loss -= (Scalar(1) - alpha) * L(l, y) + alpha / Scalar(v) * L.row(l).sum();
  }
  MatX<Scalar> out(1, 1);
  out(0, 0) = loss;
  int id = g->reserve(std::move(out));
  g->set_backprop(id, [g, id, logp, targets = std::move(targets), alpha, v]() {
    const Scalar gs = g->upstream(id)(0, 0);
    MatX<Scalar> d = MatX<Scalar>::Constant(static_cast<Eigen::Index>(targets.size()), v,
                                            -gs * alpha / Scalar(v));
    for (Eigen::Index l = 0; l < d.rows(); ++l)
      d(l, targets[static_cast<std::size_t>(l)]) -= gs * (Scalar(1) - alpha);
    g->accumulate(logp.id, d);
  });
  return {g, id};
}

template <typename Scalar>
Expr<Scalar> sum_all(Expr<Scalar> x) {
  Graph<Scalar>* g = x.graph;
  MatX<Scalar> out(1, 1);
  out(0, 0) = x.value().sum();
  int id = g->reserve(std::move(out));
  g->set_backprop(id, [g, id, x]() {
    g->accumulate(
        x.id, MatX<Scalar>::Constant(x.rows(), x.cols(), g->upstream(id)(0, 0)));
  });
  return {g, id};
}

/// Custom elementwise op with user-supplied function and derivative.
template <typename Scalar>
Expr<Scalar> elemwise(Expr<Scalar> x, std::function<Scalar(Scalar)> fn,
                      std::function<Scalar(Scalar)> dfn) {
  Graph<Scalar>* g = x.graph;
  int id = g->reserve(x.value().unaryExpr(fn));
  g->set_backprop(id, [g, id, x, dfn = std::move(dfn)]() {
    g->accumulate(x.id, g->upstream(id).cwiseProduct(x.value().unaryExpr(dfn)));
  });
  return {g, id};
}

/// Subsampled length after two stride-2 poolings: ceil(ceil(m/2)/2).
inline Eigen::Index subsampled_length(Eigen::Index m) { return ((m + 1) / 2 + 1) / 2; }

}  // namespace sot
