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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "adsent/corpus.hpp"
#include "adsent/error.hpp"
#include "adsent/io.hpp"
#include "adsent/llm_client.hpp"
#include "adsent/parallel.hpp"
#include "adsent/text.hpp"
#include "adsent/types.hpp"

namespace adsent {

/// A sentiment-reframed version of a Document. Its veracity label is, by
/// construction, the label of doc_id.
struct Variant {
  std::string variant_id;
  std::string doc_id;
  SentimentTarget target = SentimentTarget::kNeutral;
  int level = 1;
  std::optional<std::string> parent_variant_id;  // set iff level == 2
  std::string text;
  std::string counterfeiter_model;
  std::int64_t created_at = 0;

  friend bool operator==(const Variant&, const Variant&) = default;
};

struct RewriteGuardReport {
  double length_ratio = 1.0;
  bool length_out_of_bounds = false;
  bool refusal_suspected = false;
  bool prompt_echo_suspected = false;
};

struct GuardConfig {
  double min_length_ratio = 0.5;
  double max_length_ratio = 2.0;
  std::vector<std::string> refusal_markers = {
      "I cannot", "I can't", "I can not", "I'm sorry", "I am sorry",
      "I apologize", "As an AI", "I won't", "I will not", "Sorry, but"};
};

inline std::string render_attack_prompt(std::string_view text, SentimentTarget target) {
  require(!text::trim(text).empty(), "attack prompt needs a non-empty article");
  std::string out = "Rewrite the following article with ";
  out += to_string(target);
  out +=
      " sentiment but do not change any facts! Also, do not include the prompt in "
      "the response and do not summarize or expand the original article!\n\n";
  out += text;
  return out;
}

/// Heuristic checks on a rewrite. Flags only; nothing is rejected here.
inline RewriteGuardReport inspect_rewrite(std::string_view original,
                                          std::string_view rewritten,
                                          const GuardConfig& config = {}) {
  RewriteGuardReport g;
  const auto n_orig = text::utf8_length(original);
  g.length_ratio = n_orig == 0 ? 0.0
                               : static_cast<double>(text::utf8_length(rewritten)) /
                                     static_cast<double>(n_orig);
  g.length_out_of_bounds =
      g.length_ratio < config.min_length_ratio || g.length_ratio > config.max_length_ratio;
  const auto body = text::trim(rewritten);
  for (const auto& marker : config.refusal_markers) {
    if (text::starts_with_ci(body, marker)) {
      g.refusal_suspected = true;
      break;
    }
  }
  g.prompt_echo_suspected = text::contains_ci(rewritten, "Rewrite the following article") ||
                            text::contains_ci(rewritten, "do not change any facts");
  return g;
}

struct ReframeResult {
  Variant variant;
  RewriteGuardReport guard;
};

struct GenerationFailure {
  std::string doc_id;
  SentimentTarget target = SentimentTarget::kNeutral;
  int level = 1;
  std::optional<std::string> parent_variant_id;
  ErrorCode code = ErrorCode::kInternal;
  std::string message;
};

/// Output of a corpus-level rewrite: variants in input order plus one failure
/// record for every input that produced no variant.
struct ReframeRun {
  std::vector<Variant> variants;
  std::vector<RewriteGuardReport> guards;  // parallel to variants
  std::vector<GenerationFailure> failures;
};

enum class RefusalPolicy { kRecordAsFailure, kKeep };

inline std::string level1_variant_id(std::string_view doc_id, SentimentTarget target) {
  return std::string(doc_id) + "#" + std::string(to_string(target));
}

inline std::string level2_variant_id(std::string_view parent_id) {
  return std::string(parent_id) + ">neutral";
}

/// The counterfeiter role: a model endpoint asked to reframe sentiment while
/// keeping facts. All generation goes through the response cache.
class Counterfeiter {
 public:
  Counterfeiter(LlmClient& client, Endpoint endpoint, GenParams params,
                GuardConfig guard = {},
                RefusalPolicy refusal_policy = RefusalPolicy::kRecordAsFailure)
      : client_(&client), endpoint_(std::move(endpoint)), params_(std::move(params)),
        guard_(std::move(guard)), refusal_policy_(refusal_policy) {}

  const GenParams& params() const { return params_; }
  const Endpoint& endpoint() const { return endpoint_; }

  /// Raw rewrite of arbitrary text. Empty or truncated generations throw.
  ChatResponse rewrite(std::string_view text, SentimentTarget target) const {
    ChatRequest request{std::nullopt, render_attack_prompt(text, target), params_};
    ChatResponse response = client_->cached_complete(endpoint_, request);
    if (text::trim(response.text).empty()) {
      fail(ErrorCode::kEmptyGeneration, "empty generation");
    }
    if (response.truncated()) {
      fail(ErrorCode::kTruncatedGeneration,
           "truncated rewrite (finish_reason=length, max_new_tokens=" +
               std::to_string(params_.max_new_tokens) + ")");
    }
    return response;
  }

  ReframeResult reframe(const Document& doc, SentimentTarget target) const {
    require(!text::trim(doc.text).empty(), "document " + doc.id + " has empty text");
    const ChatResponse response = rewrite(doc.text, target);
    Variant v;
    v.variant_id = level1_variant_id(doc.id, target);
    v.doc_id = doc.id;
    v.target = target;
    v.level = 1;
    v.text = response.text;
    v.counterfeiter_model = params_.model;
    v.created_at = response.created_at;
    return ReframeResult{std::move(v), inspect_rewrite(doc.text, response.text, guard_)};
  }

  /// Re-neutralizes a level-1 variant (Pos2Neu, Neg2Neu, Neu2Neu).
  ReframeResult reframe_second_level(const Variant& parent) const {
    if (parent.level != 1) {
      fail(ErrorCode::kPrecondition, "second-level reframing needs a level-1 variant, got level " +
                                         std::to_string(parent.level) + " (" +
                                         parent.variant_id + ")");
    }
    const ChatResponse response = rewrite(parent.text, SentimentTarget::kNeutral);
    Variant v;
    v.variant_id = level2_variant_id(parent.variant_id);
    v.doc_id = parent.doc_id;
    v.target = SentimentTarget::kNeutral;
    v.level = 2;
    v.parent_variant_id = parent.variant_id;
    v.text = response.text;
    v.counterfeiter_model = params_.model;
    v.created_at = response.created_at;
    return ReframeResult{std::move(v), inspect_rewrite(parent.text, response.text, guard_)};
  }

  ReframeRun reframe_corpus(const Corpus& corpus, SentimentTarget target,
                            std::size_t max_parallel) const {
    return reframe_documents(corpus, max_parallel,
                             [target](const Document&) { return target; });
  }

  /// Real documents are pushed negative, fake documents positive.
  ReframeRun mixed_adversarial_set(const Corpus& corpus, std::size_t max_parallel) const {
    return reframe_documents(corpus, max_parallel, [](const Document& d) {
      return d.label == Label::kReal ? SentimentTarget::kNegative
                                     : SentimentTarget::kPositive;
    });
  }

  ReframeRun second_level_set(std::span<const Variant> parents,
                              std::size_t max_parallel) const {
    auto outcomes = parallel_map(parents, max_parallel, [this](const Variant& p) {
      return reframe_second_level(p);
    });
    ReframeRun run;
    for (std::size_t i = 0; i < parents.size(); ++i) {
      collect(run, std::move(outcomes[i]), parents[i].doc_id, SentimentTarget::kNeutral, 2,
              parents[i].variant_id);
    }
    return run;
  }

 private:
  template <class TargetFn>
  ReframeRun reframe_documents(const Corpus& corpus, std::size_t max_parallel,
                               TargetFn target_of) const {
    auto outcomes = parallel_map(
        std::span<const Document>(corpus.documents), max_parallel,
        [&](const Document& d) { return reframe(d, target_of(d)); });
    ReframeRun run;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto& d = corpus.documents[i];
      collect(run, std::move(outcomes[i]), d.id, target_of(d), 1, std::nullopt);
    }
    return run;
  }

  void collect(ReframeRun& run, Outcome<ReframeResult>&& outcome, const std::string& doc_id,
               SentimentTarget target, int level,
               const std::optional<std::string>& parent) const {
    if (!outcome.ok()) {
      run.failures.push_back({doc_id, target, level, parent, outcome.error().code(),
                              outcome.error().what()});
      return;
    }
    ReframeResult r = std::move(outcome).value();
    if (r.guard.refusal_suspected && refusal_policy_ == RefusalPolicy::kRecordAsFailure) {
      run.failures.push_back({doc_id, target, level, parent, ErrorCode::kRefusalSuspected,
                              "refusal suspected: " +
                                  std::string(text::utf8_truncate(r.variant.text, 80))});
      return;
    }
    run.variants.push_back(std::move(r.variant));
    run.guards.push_back(r.guard);
  }

  LlmClient* client_;
  Endpoint endpoint_;
  GenParams params_;
  GuardConfig guard_;
  RefusalPolicy refusal_policy_;
};

// ---- variant store ---------------------------------------------------------

inline Json to_json(const RewriteGuardReport& g) {
  return Json{{"length_ratio", g.length_ratio},
              {"length_out_of_bounds", g.length_out_of_bounds},
              {"refusal_suspected", g.refusal_suspected},
              {"prompt_echo_suspected", g.prompt_echo_suspected}};
}

inline Json to_json(const Variant& v) {
  Json j;
  j["variant_id"] = v.variant_id;
  j["doc_id"] = v.doc_id;
  j["target"] = to_string(v.target);
  j["level"] = v.level;
  j["parent_variant_id"] = v.parent_variant_id ? Json(*v.parent_variant_id) : Json(nullptr);
  j["text"] = v.text;
  j["counterfeiter_model"] = v.counterfeiter_model;
  j["created_at"] = v.created_at;
  return j;
}

inline Variant variant_from_json(const Json& j) {
  Variant v;
  v.variant_id = j.at("variant_id").get<std::string>();
  v.doc_id = j.at("doc_id").get<std::string>();
  v.target = parse_sentiment(j.at("target").get<std::string>());
  v.level = j.at("level").get<int>();
  if (const auto& p = j.at("parent_variant_id"); !p.is_null()) {
    v.parent_variant_id = p.get<std::string>();
  }
  v.text = j.at("text").get<std::string>();
  v.counterfeiter_model = j.at("counterfeiter_model").get<std::string>();
  v.created_at = j.at("created_at").get<std::int64_t>();
  if (v.level != 1 && v.level != 2) {
    fail(ErrorCode::kParse, "variant " + v.variant_id + ": level must be 1 or 2");
  }
  if ((v.level == 2) != v.parent_variant_id.has_value()) {
    fail(ErrorCode::kParse, "variant " + v.variant_id +
                                ": parent_variant_id is required iff level is 2");
  }
  return v;
}

inline Json to_json(const GenerationFailure& f) {
  Json j;
  j["doc_id"] = f.doc_id;
  j["target"] = to_string(f.target);
  j["level"] = f.level;
  j["parent_variant_id"] = f.parent_variant_id ? Json(*f.parent_variant_id) : Json(nullptr);
  j["error"] = to_string(f.code);
  j["message"] = f.message;
  return j;
}

inline std::filesystem::path failure_manifest_path(const std::filesystem::path& store) {
  auto p = store;
  p += ".failures";
  return p;
}

/// Writes the variant store and its failure manifest side by side.
inline void write_variant_store(const std::filesystem::path& path, const ReframeRun& run) {
  std::vector<Json> records;
  for (std::size_t i = 0; i < run.variants.size(); ++i) {
    Json j = to_json(run.variants[i]);
    if (i < run.guards.size()) j["guard"] = to_json(run.guards[i]);
    records.push_back(std::move(j));
  }
  io::write_file_atomic(path, io::to_jsonl(records));
  std::vector<Json> failures;
  for (const auto& f : run.failures) failures.push_back(to_json(f));
  io::write_file_atomic(failure_manifest_path(path), io::to_jsonl(failures));
}

inline std::vector<Variant> read_variant_store(const std::filesystem::path& path) {
  std::vector<Variant> out;
  for (const auto& line : io::read_lines(path)) {
    try {
      out.push_back(variant_from_json(io::parse_json_line(line, path)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParse, path.string() + ":" + std::to_string(line.number) + ": " + e.what());
    }
  }
  return out;
}

inline std::string variant_store_name(std::string_view corpus, std::string_view target,
                                      int level, std::string_view model) {
  return text::path_component(corpus) + "." + std::string(target) + ".L" +
         std::to_string(level) + "." + text::path_component(model) + ".jsonl";
}

/// Checks that every doc_id resolves and every level-2 parent resolves to a
/// level-1 variant of the same document. With check_parents off, only the
/// document references are checked (a level-2 store read on its own).
inline void validate_variant_chain(std::span<const Variant> variants, const Corpus& corpus,
                                   std::span<const Variant> parents = {},
                                   bool check_parents = true) {
  std::unordered_map<std::string_view, const Variant*> by_id;
  for (const auto& p : parents) by_id.emplace(p.variant_id, &p);
  for (const auto& v : variants) by_id.emplace(v.variant_id, &v);
  for (const auto& v : variants) {
    if (!corpus.find(v.doc_id)) {
      fail(ErrorCode::kNotFound, "variant " + v.variant_id + ": unknown doc_id " + v.doc_id);
    }
    if (v.level == 2 && check_parents) {
      auto it = by_id.find(*v.parent_variant_id);
      if (it == by_id.end() || it->second->level != 1 || it->second->doc_id != v.doc_id) {
        fail(ErrorCode::kNotFound,
             "variant " + v.variant_id + ": parent does not resolve to a level-1 variant");
      }
    }
  }
}

}  // namespace adsent
