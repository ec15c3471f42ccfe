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

#include <utility>
#include <variant>

#include "adsent/error.hpp"

namespace adsent {

/// A value or the Error that prevented it. Batch operations report per-item
/// failures in place with this type instead of aborting the whole batch.
template <class T>
class Outcome {
 public:
  Outcome(T value) : v_(std::move(value)) {}  // NOLINT: implicit by intent
  Outcome(Error error) : v_(std::move(error)) {}  // NOLINT

  bool ok() const noexcept { return std::holds_alternative<T>(v_); }
  explicit operator bool() const noexcept { return ok(); }

  const T& value() const& {
    if (!ok()) throw std::get<Error>(v_);
    return std::get<T>(v_);
  }
  T&& value() && {
    if (!ok()) throw std::get<Error>(v_);
    return std::get<T>(std::move(v_));
  }
  const Error& error() const { return std::get<Error>(v_); }

 private:
  std::variant<T, Error> v_;
};

}  // namespace adsent
