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

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "adsent/corpus.hpp"
#include "adsent/detector.hpp"
#include "adsent/error.hpp"
#include "adsent/metrics.hpp"

namespace adsent {

/// Ground truth and resolved predictions for one evaluation run.
struct ScoredRun {
  std::vector<std::string> doc_ids;
  std::vector<Label> gts;
  std::vector<Label> preds;
  std::size_t unparseable = 0;
  std::size_t errors = 0;
  std::size_t excluded = 0;
};

namespace detail {

inline std::unordered_map<std::string_view, Label> label_index(const Corpus& corpus) {
  std::unordered_map<std::string_view, Label> idx;
  for (const auto& d : corpus.documents) idx.emplace(d.id, d.label);
  return idx;
}

inline Label ground_truth(const std::unordered_map<std::string_view, Label>& idx,
                          const std::string& doc_id) {
  auto it = idx.find(doc_id);
  if (it == idx.end()) {
    fail(ErrorCode::kNotFound, "prediction refers to unknown document '" + doc_id + "'");
  }
  return it->second;
}

}  // namespace detail

inline ScoredRun score_predictions(const Corpus& corpus, std::span<const Prediction> predictions,
                                   ParseFailurePolicy policy) {
  const auto idx = detail::label_index(corpus);
  ScoredRun run;
  for (const auto& p : predictions) {
    const Label gt = detail::ground_truth(idx, p.doc_id);
    if (p.status == PredictionStatus::kUnparseable) ++run.unparseable;
    if (p.status == PredictionStatus::kError) ++run.errors;
    auto pred = effective_label(p, gt, policy);
    if (!pred) {
      ++run.excluded;
      continue;
    }
    run.doc_ids.push_back(p.doc_id);
    run.gts.push_back(gt);
    run.preds.push_back(*pred);
  }
  return run;
}

inline MetricsReport evaluate_predictions(const Corpus& corpus,
                                          std::span<const Prediction> predictions,
                                          ParseFailurePolicy policy) {
  const ScoredRun run = score_predictions(corpus, predictions, policy);
  return report(confusion(run.gts, run.preds));
}

/// Original and adversarial predictions joined on doc_id, in the order of the
/// adversarial run. Documents missing from either side are skipped.
struct PairedRun {
  std::vector<std::string> doc_ids;
  std::vector<Label> gts;
  std::vector<Label> orig;
  std::vector<Label> adv;
  std::size_t unmatched = 0;
  std::size_t excluded = 0;
};

inline PairedRun pair_predictions(const Corpus& corpus, std::span<const Prediction> original,
                                  std::span<const Prediction> adversarial,
                                  ParseFailurePolicy policy) {
  const auto idx = detail::label_index(corpus);
  std::unordered_map<std::string_view, const Prediction*> by_doc;
  for (const auto& p : original) {
    if (!by_doc.emplace(p.doc_id, &p).second) {
      fail(ErrorCode::kDuplicateId, "original run has two predictions for '" + p.doc_id + "'");
    }
  }
  PairedRun out;
  for (const auto& a : adversarial) {
    auto it = by_doc.find(a.doc_id);
    if (it == by_doc.end()) {
      ++out.unmatched;
      continue;
    }
    const Label gt = detail::ground_truth(idx, a.doc_id);
    auto o = effective_label(*it->second, gt, policy);
    auto v = effective_label(a, gt, policy);
    if (!o || !v) {
      ++out.excluded;
      continue;
    }
    out.doc_ids.push_back(a.doc_id);
    out.gts.push_back(gt);
    out.orig.push_back(*o);
    out.adv.push_back(*v);
  }
  return out;
}

inline FlipMatrix flip_matrix(const PairedRun& run) {
  return flip_matrix(run.gts, run.orig, run.adv);
}

}  // namespace adsent
