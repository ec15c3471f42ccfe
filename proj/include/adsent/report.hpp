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

#include <fmt/format.h>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "adsent/metrics.hpp"
#include "adsent/text.hpp"

namespace adsent::report_text {

using Row = std::vector<std::string>;

/// Plain aligned table: first column left-aligned, the rest right-aligned,
/// columns separated by two spaces.
inline std::string render_table(const Row& header, const std::vector<Row>& rows,
                                std::size_t left_aligned = 1) {
  std::vector<std::size_t> width(header.size(), 0);
  auto widen = [&](const Row& r) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) {
      width[i] = std::max(width[i], text::utf8_length(r[i]));
    }
  };
  widen(header);
  for (const auto& r : rows) widen(r);
  auto line = [&](const Row& r) {
    std::string out;
    for (std::size_t i = 0; i < width.size(); ++i) {
      const std::string cell = i < r.size() ? r[i] : "";
      const std::string pad(width[i] - text::utf8_length(cell), ' ');
      if (i > 0) out += "  ";
      out += i < left_aligned ? cell + pad : pad + cell;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::size_t total = 0;
  for (auto w : width) total += w;
  total += 2 * (width.empty() ? 0 : width.size() - 1);
  std::string out = line(header);
  out += std::string(total, '-') + "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

inline std::string pct(double v) { return fmt::format("{:.2f}", round2(v)); }

/// Model / Set / F1 / drop, two rows per model.
struct DropRow {
  std::string model;
  double f1_org = 0;
  double f1_adv = 0;
};

inline std::string drop_table(const std::string& dataset, const std::vector<DropRow>& rows) {
  std::vector<Row> body;
  for (const auto& r : rows) {
    body.push_back({r.model, "Org", pct(r.f1_org), pct(performance_drop(r.f1_org, r.f1_adv)) + " ↓"});
    body.push_back({"", "Adv", pct(r.f1_adv), ""});
  }
  return dataset + "\n" + render_table({"Model", "Set", "F1", "drop"}, body, 2);
}

struct FlipRow {
  std::string set;
  double macro_f1 = 0;
  std::optional<FlipMatrix> flips;  // absent for the Original row
};

inline std::string flip_table(const std::string& dataset, const std::vector<FlipRow>& rows) {
  Row header{"Dataset", "Set", "Avg F1"};
  for (const auto& s : kFlipScenarios) header.push_back(s.display_name());
  std::vector<Row> body;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Row r{i == 0 ? dataset : "", rows[i].set, pct(rows[i].macro_f1)};
    for (const auto& s : kFlipScenarios) {
      r.push_back(rows[i].flips ? std::to_string(rows[i].flips->count(s)) : "--");
    }
    body.push_back(std::move(r));
  }
  return render_table(header, body, 2);
}

struct MetricsRow {
  std::string model;
  std::string data;
  MetricsReport metrics;
};

/// Acc / Real Pre Rec / Fake Pre Rec / F1.
inline std::string metrics_table(const std::vector<MetricsRow>& rows) {
  std::vector<Row> body;
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    body.push_back({r.model, r.data, pct(m.accuracy), pct(m.real_precision), pct(m.real_recall),
                    pct(m.fake_precision), pct(m.fake_recall), pct(m.macro_f1)});
  }
  return render_table({"Model", "Data", "Acc", "Real Pre", "Real Rec", "Fake Pre", "Fake Rec", "F1"},
                      body, 2);
}

}  // namespace adsent::report_text
