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

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "adsent/error.hpp"

namespace adsent {

/// Veracity label. Real encodes y=0, Fake encodes y=1.
enum class Label : int { kReal = 0, kFake = 1 };

inline constexpr std::array<Label, 2> kLabels = {Label::kReal, Label::kFake};

inline std::string_view to_string(Label label) {
  return label == Label::kReal ? "real" : "fake";
}

inline std::optional<Label> try_parse_label(std::string_view s) {
  if (s == "real") return Label::kReal;
  if (s == "fake") return Label::kFake;
  return std::nullopt;
}

inline Label parse_label(std::string_view s) {
  if (auto l = try_parse_label(s)) return *l;
  fail(ErrorCode::kUnknownLabel, "unknown label '" + std::string(s) + "'");
}

inline Label other(Label label) {
  return label == Label::kReal ? Label::kFake : Label::kReal;
}

inline char initial(Label label) { return label == Label::kReal ? 'R' : 'F'; }

enum class SentimentTarget { kPositive, kNegative, kNeutral };

inline constexpr std::array<SentimentTarget, 3> kSentimentTargets = {
    SentimentTarget::kPositive, SentimentTarget::kNegative,
    SentimentTarget::kNeutral};

inline std::string_view to_string(SentimentTarget t) {
  switch (t) {
    case SentimentTarget::kPositive: return "positive";
    case SentimentTarget::kNegative: return "negative";
    case SentimentTarget::kNeutral: return "neutral";
  }
  return "neutral";
}

inline SentimentTarget parse_sentiment(std::string_view s) {
  if (s == "positive") return SentimentTarget::kPositive;
  if (s == "negative") return SentimentTarget::kNegative;
  if (s == "neutral") return SentimentTarget::kNeutral;
  fail(ErrorCode::kInvalidArgument,
       "unknown sentiment target '" + std::string(s) + "'");
}

}  // namespace adsent
