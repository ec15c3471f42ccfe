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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adsent/error.hpp"
#include "adsent/io.hpp"
#include "adsent/types.hpp"

namespace adsent {

/// Binary confusion counts; the first letter is the ground truth, the second
/// the prediction.
struct ConfusionCounts {
  std::size_t rr = 0;
  std::size_t rf = 0;
  std::size_t fr = 0;
  std::size_t ff = 0;

  std::size_t total() const { return rr + rf + fr + ff; }

  void add(Label gt, Label pred) {
    if (gt == Label::kReal) {
      ++(pred == Label::kReal ? rr : rf);
    } else {
      ++(pred == Label::kReal ? fr : ff);
    }
  }

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// All values are percentages at full precision. Rounding to two decimals
/// happens only when a report is serialized.
struct MetricsReport {
  double accuracy = 0;
  double real_precision = 0;
  double real_recall = 0;
  double real_f1 = 0;
  double fake_precision = 0;
  double fake_recall = 0;
  double fake_f1 = 0;
  double macro_f1 = 0;
  std::size_t n = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

inline ConfusionCounts confusion(std::span<const Label> gts, std::span<const Label> preds) {
  if (gts.size() != preds.size()) {
    fail(ErrorCode::kInvalidArgument, "confusion: length mismatch (" +
                                          std::to_string(gts.size()) + " vs " +
                                          std::to_string(preds.size()) + ")");
  }
  if (gts.empty()) fail(ErrorCode::kInvalidArgument, "confusion: empty input");
  ConfusionCounts c;
  for (std::size_t i = 0; i < gts.size(); ++i) c.add(gts[i], preds[i]);
  return c;
}

namespace detail {

// 0/0 is defined as 0.
inline double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

inline double f1(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace detail

inline MetricsReport report(const ConfusionCounts& c) {
  if (c.total() == 0) fail(ErrorCode::kInvalidArgument, "report: no items");
  const double real_p = detail::ratio(c.rr, c.rr + c.fr);
  const double real_r = detail::ratio(c.rr, c.rr + c.rf);
  const double fake_p = detail::ratio(c.ff, c.ff + c.rf);
  const double fake_r = detail::ratio(c.ff, c.ff + c.fr);
  const double real_f1 = detail::f1(real_p, real_r);
  const double fake_f1 = detail::f1(fake_p, fake_r);
  MetricsReport m;
  m.accuracy = 100.0 * detail::ratio(c.rr + c.ff, c.total());
  m.real_precision = 100.0 * real_p;
  m.real_recall = 100.0 * real_r;
  m.real_f1 = 100.0 * real_f1;
  m.fake_precision = 100.0 * fake_p;
  m.fake_recall = 100.0 * fake_r;
  m.fake_f1 = 100.0 * fake_f1;
  m.macro_f1 = 100.0 * (real_f1 + fake_f1) / 2.0;
  m.n = c.total();
  return m;
}

/// Original-set macro-F1 minus adversarial-set macro-F1; positive is a loss.
inline double performance_drop(double f1_org, double f1_adv) { return f1_org - f1_adv; }

// ---- flip analysis ---------------------------------------------------------

/// One of the eight outcomes written "gt orig -> adv", e.g. FF->R.
struct FlipScenario {
  Label gt;
  Label orig;
  Label adv;

  constexpr std::size_t index() const {
    return static_cast<std::size_t>(gt) * 4 + static_cast<std::size_t>(orig) * 2 +
           static_cast<std::size_t>(adv);
  }

  static constexpr FlipScenario from_index(std::size_t i) {
    return FlipScenario{static_cast<Label>((i >> 2) & 1), static_cast<Label>((i >> 1) & 1),
                        static_cast<Label>(i & 1)};
  }

  std::string name() const {
    return std::string{initial(gt), initial(orig)} + "->" + initial(adv);
  }

  /// Name with a real arrow, for text tables.
  std::string display_name() const {
    return std::string{initial(gt), initial(orig)} + "→" + initial(adv);
  }

  friend bool operator==(const FlipScenario&, const FlipScenario&) = default;
};

inline constexpr std::size_t kFlipScenarioCount = 8;

/// Scenarios in table order: RR->R, RR->F, RF->R, RF->F, FR->R, FR->F, FF->R, FF->F.
inline constexpr std::array<FlipScenario, kFlipScenarioCount> kFlipScenarios = [] {
  std::array<FlipScenario, kFlipScenarioCount> a{};
  for (std::size_t i = 0; i < kFlipScenarioCount; ++i) a[i] = FlipScenario::from_index(i);
  return a;
}();

struct FlipMatrix {
  std::array<std::size_t, kFlipScenarioCount> counts{};
  std::size_t n = 0;

  std::size_t count(FlipScenario s) const { return counts[s.index()]; }
  std::size_t& count(FlipScenario s) { return counts[s.index()]; }

  /// Grouping by (gt, orig) recovers the original run's confusion.
  ConfusionCounts original_confusion() const {
    ConfusionCounts c;
    c.rr = counts[0] + counts[1];
    c.rf = counts[2] + counts[3];
    c.fr = counts[4] + counts[5];
    c.ff = counts[6] + counts[7];
    return c;
  }

  /// Grouping by (gt, adv) gives the adversarial run's confusion.
  ConfusionCounts adversarial_confusion() const {
    ConfusionCounts c;
    c.rr = counts[0] + counts[2];
    c.rf = counts[1] + counts[3];
    c.fr = counts[4] + counts[6];
    c.ff = counts[5] + counts[7];
    return c;
  }

  static FlipMatrix from_counts(const std::array<std::size_t, kFlipScenarioCount>& counts) {
    FlipMatrix m;
    m.counts = counts;
    for (auto c : counts) m.n += c;
    return m;
  }

  friend bool operator==(const FlipMatrix&, const FlipMatrix&) = default;
};

inline FlipMatrix flip_matrix(std::span<const Label> gts, std::span<const Label> orig,
                              std::span<const Label> adv) {
  if (gts.size() != orig.size() || gts.size() != adv.size()) {
    fail(ErrorCode::kInvalidArgument, "flip_matrix: length mismatch");
  }
  if (gts.empty()) fail(ErrorCode::kInvalidArgument, "flip_matrix: empty input");
  FlipMatrix m;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    ++m.count(FlipScenario{gts[i], orig[i], adv[i]});
  }
  m.n = gts.size();
  return m;
}

struct FlipReports {
  MetricsReport original;
  MetricsReport adversarial;
};

inline FlipReports report_from_flip_matrix(const FlipMatrix& fm) {
  if (fm.n == 0) fail(ErrorCode::kInvalidArgument, "report_from_flip_matrix: empty matrix");
  return FlipReports{report(fm.original_confusion()), report(fm.adversarial_confusion())};
}

/// Percentage of items in each scenario, indexed like kFlipScenarios.
inline std::array<double, kFlipScenarioCount> flip_rates(const FlipMatrix& fm) {
  if (fm.n == 0) fail(ErrorCode::kInvalidArgument, "flip_rates: empty matrix");
  std::array<double, kFlipScenarioCount> r{};
  for (std::size_t i = 0; i < kFlipScenarioCount; ++i) {
    r[i] = 100.0 * static_cast<double>(fm.counts[i]) / static_cast<double>(fm.n);
  }
  return r;
}

// ---- agreement -------------------------------------------------------------

/// Cohen's kappa over paired categorical ratings.
///
/// Evaluated as (n*agree - S) / (n^2 - S) with S the sum of marginal products,
/// which equals (p_o - p_e) / (1 - p_e) but stays exact in integers until the
/// final division. When chance agreement is total (p_e = 1) the result is 1 if
/// the raters agree everywhere and 0 otherwise.
template <class T>
double cohen_kappa(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) fail(ErrorCode::kInvalidArgument, "cohen_kappa: length mismatch");
  if (a.empty()) fail(ErrorCode::kInvalidArgument, "cohen_kappa: empty table");
  std::map<T, std::pair<std::uint64_t, std::uint64_t>> marginals;
  std::uint64_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++marginals[a[i]].first;
    ++marginals[b[i]].second;
    if (a[i] == b[i]) ++agree;
  }
  const auto n = static_cast<std::uint64_t>(a.size());
  std::uint64_t chance = 0;
  for (const auto& [category, m] : marginals) chance += m.first * m.second;
  const std::uint64_t n2 = n * n;
  if (chance == n2) return agree == n ? 1.0 : 0.0;
  const double num = static_cast<double>(n * agree) - static_cast<double>(chance);
  return num / static_cast<double>(n2 - chance);
}

template <class T>
double cohen_kappa(const std::vector<T>& a, const std::vector<T>& b) {
  return cohen_kappa(std::span<const T>(a), std::span<const T>(b));
}

/// Kappa from a k x k contingency table (rows: rater A, columns: rater B).
inline double cohen_kappa(const std::vector<std::vector<std::uint64_t>>& table) {
  const std::size_t k = table.size();
  if (k < 2) fail(ErrorCode::kInvalidArgument, "cohen_kappa: need at least two categories");
  std::vector<std::uint64_t> rows(k, 0), cols(k, 0);
  std::uint64_t n = 0, agree = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (table[i].size() != k) fail(ErrorCode::kInvalidArgument, "cohen_kappa: table not square");
    for (std::size_t j = 0; j < k; ++j) {
      rows[i] += table[i][j];
      cols[j] += table[i][j];
      n += table[i][j];
    }
    agree += table[i][i];
  }
  if (n == 0) fail(ErrorCode::kInvalidArgument, "cohen_kappa: empty table");
  std::uint64_t chance = 0;
  for (std::size_t i = 0; i < k; ++i) chance += rows[i] * cols[i];
  if (chance == n * n) return agree == n ? 1.0 : 0.0;
  return (static_cast<double>(n * agree) - static_cast<double>(chance)) /
         static_cast<double>(n * n - chance);
}

// ---- serialization ---------------------------------------------------------

inline double round2(double v) {
  const double r = std::round(v * 100.0) / 100.0;
  return r == 0.0 ? 0.0 : r;  // no "-0.0" in reports
}

inline Json to_json(const ConfusionCounts& c) {
  return Json{{"rr", c.rr}, {"rf", c.rf}, {"fr", c.fr}, {"ff", c.ff}};
}

inline Json to_json(const MetricsReport& m) {
  Json j;
  j["n"] = m.n;
  j["accuracy"] = round2(m.accuracy);
  j["real_precision"] = round2(m.real_precision);
  j["real_recall"] = round2(m.real_recall);
  j["fake_precision"] = round2(m.fake_precision);
  j["fake_recall"] = round2(m.fake_recall);
  j["macro_f1"] = round2(m.macro_f1);
  return j;
}

/// Reads a serialized report back (values are the rounded ones).
inline MetricsReport metrics_from_json(const Json& j) {
  MetricsReport m;
  m.n = j.at("n").get<std::size_t>();
  m.accuracy = j.at("accuracy").get<double>();
  m.real_precision = j.at("real_precision").get<double>();
  m.real_recall = j.at("real_recall").get<double>();
  m.fake_precision = j.at("fake_precision").get<double>();
  m.fake_recall = j.at("fake_recall").get<double>();
  m.macro_f1 = j.at("macro_f1").get<double>();
  return m;
}

inline Json to_json(const FlipMatrix& fm) {
  Json counts;
  for (const auto& s : kFlipScenarios) counts[s.name()] = fm.count(s);
  return Json{{"n", fm.n}, {"counts", counts}};
}

inline FlipMatrix flip_matrix_from_json(const Json& j) {
  std::array<std::size_t, kFlipScenarioCount> counts{};
  for (const auto& s : kFlipScenarios) counts[s.index()] = j.at("counts").at(s.name()).get<std::size_t>();
  auto fm = FlipMatrix::from_counts(counts);
  if (fm.n != j.at("n").get<std::size_t>()) {
    fail(ErrorCode::kParse, "flip matrix: counts do not sum to n");
  }
  return fm;
}

}  // namespace adsent
