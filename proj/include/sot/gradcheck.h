// sot/gradcheck.h

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

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "sot/params.h"

namespace sot {

struct GradCheckEntry {
  std::string param;
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_err = 0;
};

struct GradCheckReport {
  bool pass = false;
  double eps = 0;
  double tol = 0;
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst_rel_err = 0;
  std::vector<GradCheckEntry> worst;  // sorted by rel_err, largest first

  std::string summary() const {
    std::ostringstream os;
    os << (pass ? "PASS" : "FAIL") << ": " << checked << " coordinates, " << failed
       << " over tolerance " << tol << " (eps " << eps << ", worst rel err " << worst_rel_err
       << ")";
    for (std::size_t i = 0; i < worst.size() && i < 5; ++i) {
      const auto& e = worst[i];
      os << "\n  " << e.param << "(" << e.row << "," << e.col << "): analytic " << e.analytic
         << " numeric " << e.numeric << " rel " << e.rel_err;
    }
    return os.str();
  }
};

/// Central-difference verification of analytic gradients. `loss_fn(want_grad)`
/// must rebuild and evaluate the same deterministic scalar computation over
/// the ParamSet (dropout disabled); when want_grad is true it must leave
/// analytic gradients in the ParamSet's grad buffers. Coordinates are sampled
/// without replacement across all trainable tensors; the relative error is
/// |analytic - numeric| / max(1, |numeric|).
template <typename Scalar>
GradCheckReport grad_check(ParamSet<Scalar>& params,
                           const std::function<double(bool)>& loss_fn, double eps, double tol,
                           std::size_t num_samples, std::uint64_t seed) {
  params.zero_grads();
  loss_fn(true);

  const auto trainable = params.trainable_indices();
  std::vector<std::pair<std::size_t, Eigen::Index>> coords;  // (entry, flat offset)
  for (std::size_t i : trainable) {
    const auto& e = params.entry(i);
    for (Eigen::Index k = 0; k < e.value.size(); ++k) coords.emplace_back(i, k);
  }
  auto rng = make_rng(derive_seed(seed, "grad-check"));
  std::shuffle(coords.begin(), coords.end(), rng);
  if (num_samples < coords.size()) coords.resize(num_samples);

  GradCheckReport report;
  report.eps = eps;
  report.tol = tol;
  report.checked = coords.size();

  for (auto [i, k] : coords) {
    auto& e = params.entry(i);
    const Eigen::Index r = k % e.value.rows();
    const Eigen::Index c = k / e.value.rows();
    const Scalar original = e.value(r, c);

    e.value(r, c) = original + static_cast<Scalar>(eps);
    const double up = loss_fn(false);
    e.value(r, c) = original - static_cast<Scalar>(eps);
    const double down = loss_fn(false);
    e.value(r, c) = original;

    GradCheckEntry entry;
    entry.param = e.name;
    entry.row = r;
    entry.col = c;
    entry.analytic = static_cast<double>(e.grad(r, c));
    entry.numeric = (up - down) / (2.0 * eps);
    entry.rel_err =
        std::abs(entry.analytic - entry.numeric) / std::max(1.0, std::abs(entry.numeric));
    if (entry.rel_err > report.tol) ++report.failed;
    report.worst_rel_err = std::max(report.worst_rel_err, entry.rel_err);
    report.worst.push_back(entry);
  }
  std::sort(report.worst.begin(), report.worst.end(),
            [](const GradCheckEntry& a, const GradCheckEntry& b) { return a.rel_err > b.rel_err; });
  if (report.worst.size() > 10) report.worst.resize(10);
  report.pass = report.failed == 0;
  return report;
}

}  // namespace sot
