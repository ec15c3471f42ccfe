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

#include <string>

#include "adsent/corpus.hpp"

namespace adsent::testing {

/// Synthetic news corpus. Fake articles mention "fabricated" so the mock
/// detector gets them right on the original text. Timestamps interleave the
/// classes and are deliberately not in id order.
inline Corpus synthetic_corpus(std::size_t n_real, std::size_t n_fake, std::string name = "synthetic") {
  Corpus c;
  c.name = std::move(name);
  const std::size_t n = n_real + n_fake;
  for (std::size_t i = 0; i < n; ++i) {
    Document d;
    const bool fake = i % 2 == 1 ? (i / 2) < n_fake : (i / 2) >= n_real;
    d.label = fake ? Label::kFake : Label::kReal;
    d.id = (fake ? "f" : "r") + std::to_string(1000 + i);
    d.text = fake ? "Officials denied the fabricated claim number " + std::to_string(i) +
                        " that circulated on social media this week."
                  : "The city council approved budget item " + std::to_string(i) +
                        " after a public hearing on Tuesday.";
    d.timestamp = 1'500'000'000 + static_cast<std::int64_t>((i * 7919) % (n * 13 + 1)) * 3600;
    d.source = "synthetic";
    c.documents.push_back(std::move(d));
  }
  return c;
}

}  // namespace adsent::testing
