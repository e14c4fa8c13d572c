// src/feature_io.cc

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

#include "sot/feature_io.h"

#include <fstream>
#include <stdexcept>

#include "sot/binary_io.h"

namespace sot {

namespace {
constexpr char kMagic[4] = {'F', 'E', 'A', 'T'};
constexpr std::uint8_t kVersion = 1;
}  // namespace

void write_features(std::ostream& os, const FeatureMatrix& feats) {
  if (feats.rows() < 1 || feats.cols() < 1)
    throw std::invalid_argument("write_features: empty feature matrix");
  write_magic(os, kMagic);
  write_u8(os, kVersion);
  write_u32le(os, static_cast<std::uint32_t>(feats.rows()));
  write_u32le(os, static_cast<std::uint32_t>(feats.cols()));
  for (Eigen::Index m = 0; m < feats.rows(); ++m)
    for (Eigen::Index f = 0; f < feats.cols(); ++f) write_f32le(os, feats(m, f));
}

void write_features(const std::string& path, const FeatureMatrix& feats) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_features: cannot open " + path);
  write_features(os, feats);
  if (!os) throw std::runtime_error("write_features: write failed for " + path);
}

FeatureMatrix read_features(std::istream& is) {
  expect_magic(is, kMagic, "read_features");
  const std::uint8_t version = read_u8(is);
  if (version != kVersion)
    throw std::runtime_error("read_features: unsupported version " + std::to_string(version));
  const std::uint32_t rows = read_u32le(is);
  const std::uint32_t cols = read_u32le(is);
  if (rows == 0 || cols == 0) throw std::runtime_error("read_features: empty matrix");
  FeatureMatrix feats(rows, cols);
  for (std::uint32_t m = 0; m < rows; ++m)
    for (std::uint32_t f = 0; f < cols; ++f) feats(m, f) = read_f32le(is);
  return feats;
}

FeatureMatrix read_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_features: cannot open " + path);
  return read_features(is);
}

}  // namespace sot
