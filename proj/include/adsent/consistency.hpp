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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "adsent/corpus.hpp"
#include "adsent/counterfeiter.hpp"
#include "adsent/detector.hpp"
#include "adsent/evaluation.hpp"
#include "adsent/llm_client.hpp"
#include "adsent/metrics.hpp"
#include "adsent/parallel.hpp"

namespace adsent {

/// Identifier shared by judge verdicts and human annotation tasks.
inline std::string make_pair_id(std::string_view doc_id, std::string_view variant_id) {
  return std::string(doc_id) + "::" + std::string(variant_id);
}

inline std::string render_judge_prompt(std::string_view original, std::string_view manipulated) {
  require(!text::trim(original).empty(), "judge prompt needs a non-empty original");
  require(!text::trim(manipulated).empty(), "judge prompt needs a non-empty manipulated text");
  std::string out =
      "Do the two documents present the same factual information regardless of sentiment? "
      "Answer with only one word: yes or no. Document A: ";
  out += original;
  out += " Document B: ";
  out += manipulated;
  out += " Answer:";
  return out;
}

/// First alphabetic token, case-folded: "yes" -> true, "no" -> false.
inline std::optional<bool> parse_yes_no(std::string_view raw) {
  const std::string token = text::first_alpha_token(raw);
  if (token == "yes") return true;
  if (token == "no") return false;
  return std::nullopt;
}

struct JudgeVerdict {
  std::string pair_id;
  std::optional<bool> same_facts;  // absent when the output did not parse
  std::string raw_output;
  std::string judge_model;

  /// Annotation convention: facts preserved is flip 0.
  std::optional<int> flip() const {
    if (!same_facts) return std::nullopt;
    return *same_facts ? 0 : 1;
  }
};

/// LLM-as-judge for fact preservation. Document A is always the original.
class FactJudge {
 public:
  FactJudge(LlmClient& client, Endpoint endpoint, GenParams params)
      : client_(&client), endpoint_(std::move(endpoint)), params_(std::move(params)) {}

  JudgeVerdict judge(const Document& doc, const Variant& variant) const {
    if (variant.doc_id != doc.id) {
      fail(ErrorCode::kPrecondition, "judge pair mismatch: variant " + variant.variant_id +
                                         " belongs to " + variant.doc_id + ", not " + doc.id);
    }
    ChatRequest request{std::nullopt, render_judge_prompt(doc.text, variant.text), params_};
    const ChatResponse r = client_->cached_complete(endpoint_, request);
    return JudgeVerdict{make_pair_id(doc.id, variant.variant_id), parse_yes_no(r.text), r.text,
                        params_.model};
  }

  /// Judges every variant against its document. Transport failures are
  /// returned in place.
  std::vector<Outcome<JudgeVerdict>> judge_all(const Corpus& corpus,
                                               std::span<const Variant> variants,
                                               std::size_t max_parallel) const {
    return parallel_map(variants, max_parallel, [&](const Variant& v) {
      const Document* d = corpus.find(v.doc_id);
      if (!d) fail(ErrorCode::kNotFound, "variant " + v.variant_id + ": unknown document");
      return judge(*d, v);
    });
  }

 private:
  LlmClient* client_;
  Endpoint endpoint_;
  GenParams params_;
};

inline Json to_json(const JudgeVerdict& v) {
  Json j;
  j["pair_id"] = v.pair_id;
  j["same_facts"] = v.same_facts ? Json(*v.same_facts) : Json(nullptr);
  j["raw_output"] = v.raw_output;
  j["judge_model"] = v.judge_model;
  return j;
}

inline JudgeVerdict judge_verdict_from_json(const Json& j) {
  JudgeVerdict v;
  v.pair_id = j.at("pair_id").get<std::string>();
  if (const auto& s = j.at("same_facts"); !s.is_null()) v.same_facts = s.get<bool>();
  v.raw_output = j.at("raw_output").get<std::string>();
  v.judge_model = j.at("judge_model").get<std::string>();
  return v;
}

struct HumanFlip {
  std::string pair_id;
  int flip = 0;  // 1 if any factual information changed
};

enum class JudgeFailurePolicy { kExclude, kCountAsDisagreement };

struct AgreementResult {
  double kappa = 0;
  std::size_t pairs = 0;
  std::size_t unparseable_excluded = 0;
};

/// Cohen's kappa between human flip labels and judge verdicts mapped to flips
/// (same_facts=true is flip 0). Pairs are aligned by pair_id.
inline AgreementResult judge_agreement(std::span<const HumanFlip> human,
                                       std::span<const JudgeVerdict> llm,
                                       JudgeFailurePolicy policy = JudgeFailurePolicy::kExclude) {
  std::unordered_map<std::string_view, const JudgeVerdict*> by_pair;
  for (const auto& v : llm) by_pair.emplace(v.pair_id, &v);
  std::vector<int> a, b;
  AgreementResult out;
  for (const auto& h : human) {
    if (h.flip != 0 && h.flip != 1) {
      fail(ErrorCode::kInvalidArgument, "human flip label must be 0 or 1 (" + h.pair_id + ")");
    }
    auto it = by_pair.find(h.pair_id);
    if (it == by_pair.end()) continue;
    auto flip = it->second->flip();
    if (!flip) {
      if (policy == JudgeFailurePolicy::kExclude) {
        ++out.unparseable_excluded;
        continue;
      }
      flip = 1 - h.flip;
    }
    a.push_back(h.flip);
    b.push_back(*flip);
  }
  if (a.empty()) fail(ErrorCode::kInvalidArgument, "judge_agreement: no overlapping pairs");
  out.kappa = cohen_kappa(a, b);
  out.pairs = a.size();
  return out;
}

/// Percentage of flip=0 labels per sentiment target.
inline std::map<SentimentTarget, double> fact_preservation_accuracy(
    std::span<const std::pair<SentimentTarget, int>> labels) {
  if (labels.empty()) fail(ErrorCode::kInvalidArgument, "fact_preservation_accuracy: no labels");
  std::map<SentimentTarget, std::pair<std::size_t, std::size_t>> groups;  // preserved, total
  for (const auto& [target, flip] : labels) {
    if (flip != 0 && flip != 1) fail(ErrorCode::kInvalidArgument, "flip label must be 0 or 1");
    auto& g = groups[target];
    if (flip == 0) ++g.first;
    ++g.second;
  }
  std::map<SentimentTarget, double> out;
  for (const auto& [target, g] : groups) {
    out[target] = 100.0 * static_cast<double>(g.first) / static_cast<double>(g.second);
  }
  return out;
}

// ---- second-level neutralization -------------------------------------------

struct NeutralFamilyResult {
  std::string name;  // Neutral, Pos2Neu, Neg2Neu, Neu2Neu
  FlipMatrix flips;
  MetricsReport adversarial;
  double rr_to_f_percent = 0;
  double ff_to_r_percent = 0;
  double f1_deviation = 0;  // signed, relative to the level-1 Neutral set
  double rr_to_f_deviation = 0;
  double ff_to_r_deviation = 0;
  std::size_t generation_failures = 0;
};

struct ConsistencyRunReport {
  MetricsReport original;
  std::vector<NeutralFamilyResult> sets;
};

inline constexpr FlipScenario kRealKeptThenFlipped{Label::kReal, Label::kReal, Label::kFake};
inline constexpr FlipScenario kFakeCaughtThenMissed{Label::kFake, Label::kFake, Label::kReal};

struct SecondLevelInputs {
  const Corpus* corpus = nullptr;
  const Detector* detector = nullptr;
  const Counterfeiter* counterfeiter = nullptr;
  std::size_t max_parallel = 1;
  ParseFailurePolicy policy = ParseFailurePolicy::kCountAsWrong;
  std::optional<std::vector<Prediction>> original_predictions;
};

/// Generated artifacts kept alongside the report so callers can persist them.
struct SecondLevelArtifacts {
  std::map<SentimentTarget, ReframeRun> level1;
  std::map<SentimentTarget, ReframeRun> level2;
  std::vector<Prediction> original_predictions;
  std::map<std::string, std::vector<EvalItem>> set_items;
  std::map<std::string, std::vector<Prediction>> set_predictions;
};

inline ConsistencyRunReport second_level_experiment(const SecondLevelInputs& in,
                                                    SecondLevelArtifacts* artifacts = nullptr) {
  require(in.corpus && in.detector && in.counterfeiter, "second_level_experiment: missing input");
  const Corpus& corpus = *in.corpus;
  SecondLevelArtifacts local;
  SecondLevelArtifacts& art = artifacts ? *artifacts : local;

  if (in.original_predictions) {
    art.original_predictions = *in.original_predictions;
  } else {
    const auto items = eval_items(corpus.documents);
    art.original_predictions = in.detector->evaluate_set(items, in.max_parallel);
  }
  for (SentimentTarget t : kSentimentTargets) {
    art.level1[t] = in.counterfeiter->reframe_corpus(corpus, t, in.max_parallel);
    art.level2[t] = in.counterfeiter->second_level_set(art.level1[t].variants, in.max_parallel);
  }

  const std::vector<std::pair<std::string, const ReframeRun*>> families = {
      {"Neutral", &art.level1[SentimentTarget::kNeutral]},
      {"Pos2Neu", &art.level2[SentimentTarget::kPositive]},
      {"Neg2Neu", &art.level2[SentimentTarget::kNegative]},
      {"Neu2Neu", &art.level2[SentimentTarget::kNeutral]},
  };

  ConsistencyRunReport report_out;
  report_out.original =
      evaluate_predictions(corpus, art.original_predictions, in.policy);
  for (const auto& [name, run] : families) {
    const auto items = eval_items(run->variants);
    auto preds = in.detector->evaluate_set(items, in.max_parallel);
    const PairedRun paired = pair_predictions(corpus, art.original_predictions, preds, in.policy);
    NeutralFamilyResult r;
    r.name = name;
    r.flips = flip_matrix(paired);
    r.adversarial = report(r.flips.adversarial_confusion());
    const auto rates = flip_rates(r.flips);
    r.rr_to_f_percent = rates[kRealKeptThenFlipped.index()];
    r.ff_to_r_percent = rates[kFakeCaughtThenMissed.index()];
    r.generation_failures = run->failures.size();
    art.set_items[name] = items;
    art.set_predictions[name] = std::move(preds);
    report_out.sets.push_back(std::move(r));
  }
  const NeutralFamilyResult& base = report_out.sets.front();
  const double base_f1 = base.adversarial.macro_f1;
  const double base_rrf = base.rr_to_f_percent;
  const double base_ffr = base.ff_to_r_percent;
  for (auto& r : report_out.sets) {
    r.f1_deviation = r.adversarial.macro_f1 - base_f1;
    r.rr_to_f_deviation = r.rr_to_f_percent - base_rrf;
    r.ff_to_r_deviation = r.ff_to_r_percent - base_ffr;
  }
  return report_out;
}

inline Json to_json(const ConsistencyRunReport& r) {
  Json j;
  j["original"] = to_json(r.original);
  Json sets = Json::array();
  for (const auto& s : r.sets) {
    Json e;
    e["set"] = s.name;
    e["macro_f1"] = round2(s.adversarial.macro_f1);
    e["rr_to_f_percent"] = round2(s.rr_to_f_percent);
    e["ff_to_r_percent"] = round2(s.ff_to_r_percent);
    e["f1_deviation"] = round2(s.f1_deviation);
    e["rr_to_f_deviation"] = round2(s.rr_to_f_deviation);
    e["ff_to_r_deviation"] = round2(s.ff_to_r_deviation);
    e["generation_failures"] = s.generation_failures;
    e["metrics"] = to_json(s.adversarial);
    e["flips"] = to_json(s.flips);
    sets.push_back(std::move(e));
  }
  j["sets"] = std::move(sets);
  return j;
}

}  // namespace adsent
