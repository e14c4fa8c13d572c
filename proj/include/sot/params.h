// sot/params.h

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

#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sot/autodiff.h"
#include "sot/binary_io.h"
#include "sot/common.h"

namespace sot {

/// Reserved name prefix for optimizer state kept alongside model parameters.
inline constexpr const char* kOptimizerPrefix = "opt/";

inline bool is_optimizer_name(const std::string& name) {
  return name.rfind(kOptimizerPrefix, 0) == 0;
}

/// Ordered map of named tensors with paired gradient buffers. Iteration
/// follows creation order, which fixes initialization and update order and
/// keeps runs reproducible.
template <typename Scalar>
class ParamSet {
 public:
  using Mat = MatX<Scalar>;

  struct Entry {
    std::string name;
    Mat value;
    Mat grad;
  };

  std::uint64_t seed = 0;
  Mode mode = Mode::kEval;

  Mat& create(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (index_.count(name)) throw std::invalid_argument("ParamSet: duplicate tensor " + name);
    index_.emplace(name, entries_.size());
    entries_.push_back({name, Mat::Zero(rows, cols), Mat::Zero(rows, cols)});
    return entries_.back().value;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t size() const { return entries_.size(); }

  Entry& entry(std::size_t i) { return entries_[i]; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }

  Mat& value(const std::string& name) { return entries_[find(name)].value; }
  const Mat& value(const std::string& name) const { return entries_[find(name)].value; }
  Mat& grad(const std::string& name) { return entries_[find(name)].grad; }

  /// Indices of model parameters (everything outside the opt/ namespace).
  std::vector<std::size_t> trainable_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (!is_optimizer_name(entries_[i].name)) out.push_back(i);
    return out;
  }

  std::size_t trainable_scalar_count() const {
    std::size_t n = 0;
    for (std::size_t i : trainable_indices()) n += entries_[i].value.size();
    return n;
  }

  void zero_grads() {
    for (auto& e : entries_) e.grad.setZero();
  }

  /// Checkpoint: magic "SOTM", version, tensor count, then per tensor name
  /// length + UTF-8 name, rank, extents (all LE u32) and the payload as LE
  /// 32-bit floats, row-major. Optimizer state travels under opt/.
  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("ParamSet: cannot open " + path);
    save(os);
    if (!os) throw std::runtime_error("ParamSet: write failed for " + path);
  }

  void save(std::ostream& os) const {
    write_magic(os, kMagic);
    write_u32le(os, kVersion);
    write_u32le(os, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& e : entries_) {
      write_u32le(os, static_cast<std::uint32_t>(e.name.size()));
      os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      write_u32le(os, 2);  // rank
      write_u32le(os, static_cast<std::uint32_t>(e.value.rows()));
      write_u32le(os, static_cast<std::uint32_t>(e.value.cols()));
      for (Eigen::Index r = 0; r < e.value.rows(); ++r)
        for (Eigen::Index c = 0; c < e.value.cols(); ++c)
          write_f32le(os, static_cast<float>(e.value(r, c)));
    }
  }

  static ParamSet load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("ParamSet: cannot open " + path);
    return load(is);
  }

  static ParamSet load(std::istream& is) {
    expect_magic(is, kMagic, "ParamSet");
    const std::uint32_t version = read_u32le(is);
    if (version != kVersion)
      throw std::runtime_error("ParamSet: unsupported checkpoint version " +
                               std::to_string(version));
    const std::uint32_t count = read_u32le(is);
    ParamSet ps;
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint32_t name_len = read_u32le(is);
      std::string name(name_len, '\0');
      is.read(name.data(), name_len);
      if (!is) throw std::runtime_error("ParamSet: truncated checkpoint");
      const std::uint32_t rank = read_u32le(is);
      if (rank != 2)
        throw std::runtime_error("ParamSet: unsupported tensor rank " + std::to_string(rank));
      const std::uint32_t rows = read_u32le(is);
      const std::uint32_t cols = read_u32le(is);
      Mat& m = ps.create(name, rows, cols);
      for (std::uint32_t r = 0; r < rows; ++r)
        for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = static_cast<Scalar>(read_f32le(is));
    }
    return ps;
  }

 private:
  static constexpr char kMagic[4] = {'S', 'O', 'T', 'M'};
  static constexpr std::uint32_t kVersion = 1;

  std::size_t find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamSet: no tensor named " + name);
    return it->second;
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Per-graph gradient sink mirroring the trainable tensors of a ParamSet.
/// Lets several samples compute gradients concurrently against one read-only
/// parameter set; buffers are then reduced in a deterministic order.
template <typename Scalar>
class GradBuffer {
 public:
  using Mat = MatX<Scalar>;

  GradBuffer() = default;

  explicit GradBuffer(const ParamSet<Scalar>& ps) { reset_like(ps); }

  void reset_like(const ParamSet<Scalar>& ps) {
    indices_ = ps.trainable_indices();
    grads_.clear();
    names_.clear();
    for (std::size_t i : indices_) {
      const auto& e = ps.entry(i);
      names_.emplace(e.name, grads_.size());
      grads_.push_back(Mat::Zero(e.value.rows(), e.value.cols()));
    }
  }

  void zero() {
    for (auto& g : grads_) g.setZero();
  }

  Mat* grad_for(const std::string& name) {
    auto it = names_.find(name);
    if (it == names_.end()) throw std::out_of_range("GradBuffer: no tensor named " + name);
    return &grads_[it->second];
  }

  /// Adds this buffer into the ParamSet's own gradient buffers.
  void reduce_into(ParamSet<Scalar>& ps) const {
    for (std::size_t k = 0; k < indices_.size(); ++k)
      ps.entry(indices_[k]).grad += grads_[k];
  }

 private:
  std::vector<std::size_t> indices_;
  std::vector<Mat> grads_;
  std::unordered_map<std::string, std::size_t> names_;
};

/// Binds named parameters into a graph, caching one leaf per name. When a
/// GradBuffer is supplied, gradients flow there instead of into the ParamSet.
template <typename Scalar>
class ParamBinder {
 public:
  ParamBinder(Graph<Scalar>& graph, ParamSet<Scalar>& params,
              GradBuffer<Scalar>* sink = nullptr)
      : graph_(&graph), params_(&params), sink_(sink) {}

  Expr<Scalar> operator()(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return {graph_, it->second};
    MatX<Scalar>* grad =
        sink_ ? sink_->grad_for(name) : &params_->grad(name);
    Expr<Scalar> e = graph_->param(&params_->value(name), grad);
    cache_.emplace(name, e.id);
    return e;
  }

 private:
  Graph<Scalar>* graph_;
  ParamSet<Scalar>* params_;
  GradBuffer<Scalar>* sink_;
  std::unordered_map<std::string, int> cache_;
};

}  // namespace sot
