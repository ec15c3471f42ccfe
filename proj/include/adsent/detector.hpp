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

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adsent/corpus.hpp"
#include "adsent/counterfeiter.hpp"
#include "adsent/digest.hpp"
#include "adsent/error.hpp"
#include "adsent/io.hpp"
#include "adsent/llm_client.hpp"
#include "adsent/parallel.hpp"
#include "adsent/text.hpp"
#include "adsent/types.hpp"

namespace adsent {

enum class DetectorKind { kZeroShotLlm, kRemoteClassifier, kAdSent };

inline std::string_view to_string(DetectorKind k) {
  switch (k) {
    case DetectorKind::kZeroShotLlm: return "zero_shot_llm";
    case DetectorKind::kRemoteClassifier: return "remote_classifier";
    case DetectorKind::kAdSent: return "adsent";
  }
  return "zero_shot_llm";
}

inline DetectorKind parse_detector_kind(std::string_view s) {
  if (s == "zero_shot_llm") return DetectorKind::kZeroShotLlm;
  if (s == "remote_classifier") return DetectorKind::kRemoteClassifier;
  if (s == "adsent") return DetectorKind::kAdSent;
  fail(ErrorCode::kInvalidArgument, "unknown detector kind '" + std::string(s) + "'");
}

inline constexpr std::size_t kDefaultCharBudget = 12000;

struct DetectorSpec {
  std::string id;
  DetectorKind kind = DetectorKind::kZeroShotLlm;
  Endpoint endpoint;
  GenParams params;  // ZeroShotLlm, and the classifier stage of AdSent
  // AdSent only: the neutralizing counterfeiter and the kind of classifier
  // (zero-shot LLM or remote classifier) that reads the neutralized text.
  std::optional<Endpoint> counterfeiter_endpoint;
  GenParams counterfeiter_params = rewrite_params("");
  DetectorKind adsent_classifier = DetectorKind::kRemoteClassifier;
  std::size_t char_budget = kDefaultCharBudget;

  void validate() const {
    if (id.empty()) fail(ErrorCode::kInvalidArgument, "detector spec needs an id");
    if (kind == DetectorKind::kAdSent) {
      if (!counterfeiter_endpoint) {
        fail(ErrorCode::kInvalidArgument, "AdSent detector '" + id +
                                              "' needs a counterfeiter endpoint");
      }
      if (adsent_classifier == DetectorKind::kAdSent) {
        fail(ErrorCode::kInvalidArgument, "AdSent classifier stage cannot itself be AdSent");
      }
    }
  }
};

/// Digest over everything that can change a detector's verdicts. Secrets and
/// base URLs are excluded so that moving a server does not invalidate runs.
inline std::string detector_spec_digest(const DetectorSpec& s) {
  Json j;
  j["id"] = s.id;
  j["kind"] = to_string(s.kind);
  j["model"] = s.params.model;
  j["temperature"] = s.params.temperature;
  j["max_new_tokens"] = s.params.max_new_tokens;
  j["stop"] = s.params.stop;
  j["char_budget"] = s.char_budget;
  if (s.kind == DetectorKind::kAdSent) {
    j["adsent_classifier"] = to_string(s.adsent_classifier);
    j["counterfeiter_model"] = s.counterfeiter_params.model;
    j["counterfeiter_temperature"] = s.counterfeiter_params.temperature;
    j["counterfeiter_max_new_tokens"] = s.counterfeiter_params.max_new_tokens;
  }
  return sha256_hex(j.dump());
}

inline std::string render_detection_prompt(std::string_view text) {
  require(!text::trim(text).empty(), "detection prompt needs a non-empty article");
  std::string out = "Is this news article fake or real? Answer only with one word, fake or real : ";
  out += text;
  out += " Answer:";
  return out;
}

struct VerdictParse {
  Label verdict;
  std::string matched_token;
};

/// Succeeds iff the first alphabetic token, case-folded, is "fake" or "real".
inline std::optional<VerdictParse> parse_verdict(std::string_view raw) {
  const std::string token = text::first_alpha_token(raw);
  if (auto label = try_parse_label(token)) return VerdictParse{*label, token};
  return std::nullopt;
}

enum class PredictionStatus { kOk, kUnparseable, kError };

inline std::string_view to_string(PredictionStatus s) {
  switch (s) {
    case PredictionStatus::kOk: return "ok";
    case PredictionStatus::kUnparseable: return "unparseable";
    case PredictionStatus::kError: return "error";
  }
  return "error";
}

inline PredictionStatus parse_prediction_status(std::string_view s) {
  if (s == "ok") return PredictionStatus::kOk;
  if (s == "unparseable") return PredictionStatus::kUnparseable;
  if (s == "error") return PredictionStatus::kError;
  fail(ErrorCode::kParse, "unknown prediction status '" + std::string(s) + "'");
}

struct Prediction {
  std::string doc_id;
  std::optional<std::string> variant_id;  // absent: the original text
  std::string detector_id;
  std::optional<Label> label;  // absent unless status is kOk
  std::string raw_output;
  std::optional<double> confidence;
  PredictionStatus status = PredictionStatus::kOk;
  std::optional<std::string> error;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Text to classify plus the identifiers its prediction is filed under.
struct EvalItem {
  std::string doc_id;
  std::optional<std::string> variant_id;
  std::string text;
};

inline EvalItem eval_item(const Document& d) { return EvalItem{d.id, std::nullopt, d.text}; }
inline EvalItem eval_item(const Variant& v) { return EvalItem{v.doc_id, v.variant_id, v.text}; }

template <class Range>
std::vector<EvalItem> eval_items(const Range& r) {
  std::vector<EvalItem> out;
  for (const auto& x : r) out.push_back(eval_item(x));
  return out;
}

/// Result of one classifier call before it is attached to an item.
struct Verdict {
  std::optional<Label> label;
  std::string raw_output;
  std::optional<double> confidence;
};

/// POST <base_url>/classify {"text"} -> {"label", "confidence"}.
inline Verdict classify_remote(LlmClient& client, const Endpoint& endpoint, std::string_view text) {
  const Json body{{"text", text}};
  const HttpReply reply = client.post_json(endpoint, "/classify", body.dump());
  Json j = Json::parse(reply.body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("label") || !j["label"].is_string()) {
    fail(ErrorCode::kMalformedResponse, "malformed response from classifier: " +
                                            reply.body.substr(0, 200));
  }
  Verdict v;
  v.raw_output = reply.body;
  v.label = try_parse_label(j["label"].get<std::string>());
  if (!v.label) {
    fail(ErrorCode::kMalformedResponse, "classifier returned unknown label '" +
                                            j["label"].get<std::string>() + "'");
  }
  if (auto c = j.find("confidence"); c != j.end() && c->is_number()) {
    const double conf = c->get<double>();
    if (conf < 0.0 || conf > 1.0) {
      fail(ErrorCode::kMalformedResponse, "classifier confidence outside [0, 1]");
    }
    v.confidence = conf;
  }
  return v;
}

class Detector {
 public:
  Detector(LlmClient& client, DetectorSpec spec) : client_(&client), spec_(std::move(spec)) {
    spec_.validate();
  }

  const DetectorSpec& spec() const { return spec_; }

  /// Classifies one text. Transport failures throw; an unparseable verdict
  /// yields a Prediction with status kUnparseable.
  Prediction detect(const EvalItem& item) const {
    Prediction p;
    p.doc_id = item.doc_id;
    p.variant_id = item.variant_id;
    p.detector_id = spec_.id;
    Verdict v = classify(spec_.kind, item.text);
    p.label = v.label;
    p.raw_output = std::move(v.raw_output);
    p.confidence = v.confidence;
    p.status = p.label ? PredictionStatus::kOk : PredictionStatus::kUnparseable;
    return p;
  }

  Prediction detect(std::string_view text) const {
    return detect(EvalItem{"", std::nullopt, std::string(text)});
  }

  /// One Prediction per item, in input order. Per-item failures are recorded
  /// in place with status kError.
  std::vector<Prediction> evaluate_set(std::span<const EvalItem> items,
                                       std::size_t max_parallel) const {
    auto outcomes = parallel_map(items, max_parallel,
                                 [this](const EvalItem& it) { return detect(it); });
    std::vector<Prediction> out;
    out.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (outcomes[i].ok()) {
        out.push_back(std::move(outcomes[i]).value());
        continue;
      }
      Prediction p;
      p.doc_id = items[i].doc_id;
      p.variant_id = items[i].variant_id;
      p.detector_id = spec_.id;
      p.status = PredictionStatus::kError;
      p.error = std::string(to_string(outcomes[i].error().code())) + ": " +
                outcomes[i].error().what();
      out.push_back(std::move(p));
    }
    return out;
  }

 private:
  std::string budgeted(std::string_view text) const {
    return std::string(text::utf8_truncate(text, spec_.char_budget));
  }

  Verdict classify(DetectorKind kind, std::string_view text) const {
    switch (kind) {
      case DetectorKind::kZeroShotLlm: {
        ChatRequest request{std::nullopt, render_detection_prompt(budgeted(text)), spec_.params};
        const ChatResponse r = client_->cached_complete(spec_.endpoint, request);
        Verdict v;
        v.raw_output = r.text;
        if (auto parsed = parse_verdict(r.text)) v.label = parsed->verdict;
        return v;
      }
      case DetectorKind::kRemoteClassifier:
        return classify_remote(*client_, spec_.endpoint, budgeted(text));
      case DetectorKind::kAdSent: {
        const Counterfeiter neutralizer(*client_, *spec_.counterfeiter_endpoint,
                                        spec_.counterfeiter_params);
        const ChatResponse neutral =
            neutralizer.rewrite(budgeted(text), SentimentTarget::kNeutral);
        return classify(spec_.adsent_classifier, neutral.text);
      }
    }
    fail(ErrorCode::kInternal, "unreachable detector kind");
  }

  LlmClient* client_;
  DetectorSpec spec_;
};

// ---- scoring ---------------------------------------------------------------

enum class ParseFailurePolicy { kCountAsWrong, kExclude };

inline ParseFailurePolicy parse_failure_policy(std::string_view s) {
  if (s == "count_as_wrong" || s == "wrong") return ParseFailurePolicy::kCountAsWrong;
  if (s == "exclude") return ParseFailurePolicy::kExclude;
  fail(ErrorCode::kInvalidArgument, "unknown parse-failure policy '" + std::string(s) + "'");
}

/// Resolves a predicted label against the ground truth. Under kCountAsWrong
/// an unusable prediction becomes the wrong class; under kExclude it is
/// dropped (nullopt).
inline std::optional<Label> effective_label(const Prediction& p, Label gt,
                                            ParseFailurePolicy policy) {
  if (p.status == PredictionStatus::kOk && p.label) return *p.label;
  if (policy == ParseFailurePolicy::kCountAsWrong) return other(gt);
  return std::nullopt;
}

// ---- prediction store ------------------------------------------------------

inline Json to_json(const Prediction& p) {
  Json j;
  j["doc_id"] = p.doc_id;
  j["variant_id"] = p.variant_id ? Json(*p.variant_id) : Json(nullptr);
  j["detector_id"] = p.detector_id;
  j["label"] = p.label ? Json(to_string(*p.label)) : Json(nullptr);
  j["raw_output"] = p.raw_output;
  j["confidence"] = p.confidence ? Json(*p.confidence) : Json(nullptr);
  j["status"] = to_string(p.status);
  j["error"] = p.error ? Json(*p.error) : Json(nullptr);
  return j;
}

inline Prediction prediction_from_json(const Json& j) {
  Prediction p;
  p.doc_id = j.at("doc_id").get<std::string>();
  if (const auto& v = j.at("variant_id"); !v.is_null()) p.variant_id = v.get<std::string>();
  p.detector_id = j.at("detector_id").get<std::string>();
  if (const auto& l = j.at("label"); !l.is_null()) p.label = parse_label(l.get<std::string>());
  p.raw_output = j.at("raw_output").get<std::string>();
  if (const auto& c = j.at("confidence"); !c.is_null()) p.confidence = c.get<double>();
  p.status = parse_prediction_status(j.at("status").get<std::string>());
  if (const auto& e = j.at("error"); !e.is_null()) p.error = e.get<std::string>();
  return p;
}

struct RunManifest {
  std::string detector_id;
  std::string detector_kind;
  std::string model;
  std::string params_digest;
  std::string items_digest;
  std::size_t item_count = 0;
  std::string code_version;
};

inline std::string items_digest(std::span<const EvalItem> items) {
  Json j = Json::array();
  for (const auto& it : items) {
    j.push_back({it.doc_id, it.variant_id ? Json(*it.variant_id) : Json(nullptr), it.text});
  }
  return sha256_hex(j.dump());
}

inline RunManifest make_run_manifest(const DetectorSpec& spec, std::span<const EvalItem> items,
                                     std::string code_version) {
  return RunManifest{spec.id,          std::string(to_string(spec.kind)),
                     spec.params.model, detector_spec_digest(spec),
                     items_digest(items), items.size(),
                     std::move(code_version)};
}

inline Json to_json(const RunManifest& m) {
  Json j;
  j["detector_id"] = m.detector_id;
  j["detector_kind"] = m.detector_kind;
  j["model"] = m.model;
  j["params_digest"] = m.params_digest;
  j["corpus_digest"] = m.items_digest;
  j["item_count"] = m.item_count;
  j["code_version"] = m.code_version;
  return j;
}

inline std::filesystem::path manifest_path(const std::filesystem::path& store) {
  auto p = store;
  p += ".manifest.json";
  return p;
}

inline void write_prediction_store(const std::filesystem::path& path,
                                   std::span<const Prediction> predictions,
                                   const RunManifest& manifest) {
  std::vector<Json> records;
  for (const auto& p : predictions) records.push_back(to_json(p));
  io::write_file_atomic(manifest_path(path), to_json(manifest).dump(2) + "\n");
  io::write_file_atomic(path, io::to_jsonl(records));
}

inline std::vector<Prediction> read_prediction_store(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  for (const auto& line : io::read_lines(path)) {
    try {
      out.push_back(prediction_from_json(io::parse_json_line(line, path)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParse, path.string() + ":" + std::to_string(line.number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace adsent
