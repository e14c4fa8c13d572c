// sot/parallel.h

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
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace sot {

/// Worker count: explicit request > SOT_NUM_WORKERS env > hardware concurrency.
inline int resolve_workers(int requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SOT_NUM_WORKERS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs compute(i, slot) for i in [0, n) on `workers` threads, then calls
/// consume(i, slot) for each i strictly in ascending order on the calling
/// thread. Work proceeds in chunks; within a chunk each index owns a distinct
/// slot in [0, chunk_size), so compute results can be staged in slot-indexed
/// scratch buffers and reduced deterministically. The consume order (and thus
/// any floating-point accumulation order) is identical for every worker count.
template <typename ComputeFn, typename ConsumeFn>
void for_each_ordered(std::size_t n, int workers, ComputeFn&& compute, ConsumeFn&& consume,
                      std::size_t chunk_factor = 8) {
  workers = std::max(1, workers);
  const std::size_t chunk = std::max<std::size_t>(1, static_cast<std::size_t>(workers) * chunk_factor);
  for (std::size_t base = 0; base < n; base += chunk) {
    const std::size_t end = std::min(n, base + chunk);
    if (workers == 1 || end - base == 1) {
      for (std::size_t i = base; i < end; ++i) compute(i, i - base);
    } else {
      std::vector<std::thread> threads;
      threads.reserve(static_cast<std::size_t>(workers));
      for (int w = 0; w < workers; ++w) {
        threads.emplace_back([&, w]() {
          for (std::size_t i = base + static_cast<std::size_t>(w); i < end;
               i += static_cast<std::size_t>(workers)) {
            compute(i, i - base);
          }
        });
      }
      for (auto& t : threads) t.join();
    }
    for (std::size_t i = base; i < end; ++i) consume(i, i - base);
  }
}

/// Required slot count for for_each_ordered with the given parameters.
inline std::size_t ordered_slot_count(int workers, std::size_t chunk_factor = 8) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::max(1, workers)) * chunk_factor);
}

}  // namespace sot
