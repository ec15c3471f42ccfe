// Copyright 2026 The AdSent Harness Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <algorithm>
#include <atomic>
#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <optional>
#include <span>
#include <thread>
#include <type_traits>
#include <vector>

#include "adsent/error.hpp"
#include "adsent/outcome.hpp"

namespace adsent {

enum class BatchMode { kCollectErrors, kFailFast };

/// Applies fn to every item with at most max_parallel calls in flight.
/// Results come back in input order. In kFailFast mode the first failure
/// stops new work; items never started carry a kCancelled error.
template <class In, class Fn>
auto parallel_map(std::span<const In> items, std::size_t max_parallel, Fn&& fn,
                  BatchMode mode = BatchMode::kCollectErrors)
    -> std::vector<Outcome<std::invoke_result_t<Fn&, const In&>>> {
  using R = std::invoke_result_t<Fn&, const In&>;
  if (max_parallel == 0) fail(ErrorCode::kInvalidArgument, "max_parallel must be >= 1");

  std::vector<std::optional<Outcome<R>>> slots(items.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};

  auto worker = [&] {
    for (;;) {
      if (stop.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      try {
        slots[i].emplace(fn(items[i]));
      } catch (const Error& e) {
        slots[i].emplace(e);
      } catch (const std::exception& e) {
        slots[i].emplace(Error(ErrorCode::kInternal, e.what()));
      }
      if (mode == BatchMode::kFailFast && !slots[i]->ok()) stop.store(true);
    }
  };

  const std::size_t n_workers = std::min(max_parallel, items.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }

  std::vector<Outcome<R>> out;
  out.reserve(items.size());
  for (auto& s : slots) {
    if (s) {
      out.push_back(std::move(*s));
    } else {
      out.push_back(Error(ErrorCode::kCancelled, "cancelled after an earlier failure"));
    }
  }
  return out;
}

}  // namespace adsent
