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
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "adsent/consistency.hpp"
#include "adsent/corpus.hpp"
#include "adsent/counterfeiter.hpp"
#include "adsent/error.hpp"
#include "adsent/io.hpp"

namespace adsent {

struct AnnotationTask {
  std::string task_id;  // equals the pair id of (doc_id, variant_id)
  std::string doc_id;
  std::string variant_id;
  SentimentTarget target = SentimentTarget::kNeutral;
  std::string original_text;
  std::string manipulated_text;

  friend bool operator==(const AnnotationTask&, const AnnotationTask&) = default;
};

struct AnnotationLabel {
  std::string task_id;
  std::string annotator_id;
  int flip = 0;
  std::optional<std::string> noted_reason;
  std::int64_t created_at = 0;

  friend bool operator==(const AnnotationLabel&, const AnnotationLabel&) = default;
};

/// Draws per_target variants from each sentiment set (seeded, without
/// replacement, set order kept) and pairs them with their originals.
inline std::vector<AnnotationTask> sample_tasks(
    const Corpus& corpus, const std::map<SentimentTarget, std::vector<Variant>>& sets,
    std::size_t per_target, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<AnnotationTask> tasks;
  for (SentimentTarget target : kSentimentTargets) {
    auto it = sets.find(target);
    if (it == sets.end()) continue;
    const auto& pool = it->second;
    if (pool.size() < per_target) {
      fail(ErrorCode::kInvalidArgument,
           "insufficient variants for target " + std::string(to_string(target)) + ": need " +
               std::to_string(per_target) + ", have " + std::to_string(pool.size()));
    }
    std::vector<const Variant*> chosen;
    std::vector<const Variant*> all;
    for (const auto& v : pool) all.push_back(&v);
    std::sample(all.begin(), all.end(), std::back_inserter(chosen), per_target, rng);
    for (const Variant* v : chosen) {
      const Document* d = corpus.find(v->doc_id);
      if (!d) fail(ErrorCode::kNotFound, "variant " + v->variant_id + ": unknown document");
      tasks.push_back(AnnotationTask{make_pair_id(d->id, v->variant_id), d->id, v->variant_id,
                                     v->target, d->text, v->text});
    }
  }
  return tasks;
}

inline Json to_json(const AnnotationTask& t, bool include_target = true) {
  Json j;
  j["task_id"] = t.task_id;
  j["doc_id"] = t.doc_id;
  j["variant_id"] = t.variant_id;
  if (include_target) j["target"] = to_string(t.target);
  j["original_text"] = t.original_text;
  j["manipulated_text"] = t.manipulated_text;
  return j;
}

inline AnnotationTask task_from_json(const Json& j) {
  return AnnotationTask{j.at("task_id").get<std::string>(),
                        j.at("doc_id").get<std::string>(),
                        j.at("variant_id").get<std::string>(),
                        parse_sentiment(j.at("target").get<std::string>()),
                        j.at("original_text").get<std::string>(),
                        j.at("manipulated_text").get<std::string>()};
}

inline void write_tasks(const std::filesystem::path& path, const std::vector<AnnotationTask>& tasks) {
  std::vector<Json> records;
  for (const auto& t : tasks) records.push_back(to_json(t));
  io::write_file_atomic(path, io::to_jsonl(records));
}

inline std::vector<AnnotationTask> read_tasks(const std::filesystem::path& path) {
  std::vector<AnnotationTask> out;
  for (const auto& line : io::read_lines(path)) {
    try {
      out.push_back(task_from_json(io::parse_json_line(line, path)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParse, path.string() + ":" + std::to_string(line.number) + ": " + e.what());
    }
  }
  return out;
}

inline Json to_json(const AnnotationLabel& l) {
  Json j;
  j["task_id"] = l.task_id;
  j["annotator_id"] = l.annotator_id;
  j["flip"] = l.flip;
  j["noted_reason"] = l.noted_reason ? Json(*l.noted_reason) : Json(nullptr);
  j["created_at"] = l.created_at;
  return j;
}

/// Strict parse used for both the store and request bodies.
inline AnnotationLabel label_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorCode::kParse, "label must be an object");
  AnnotationLabel l;
  auto str = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
      fail(ErrorCode::kParse, std::string("label field '") + key + "' must be a non-empty string");
    }
    return it->get<std::string>();
  };
  l.task_id = str("task_id");
  l.annotator_id = str("annotator_id");
  auto flip = j.find("flip");
  if (flip == j.end() || !flip->is_number_integer() ||
      (flip->get<int>() != 0 && flip->get<int>() != 1)) {
    fail(ErrorCode::kParse, "label field 'flip' must be 0 or 1");
  }
  l.flip = flip->get<int>();
  if (auto r = j.find("noted_reason"); r != j.end() && !r->is_null()) {
    if (!r->is_string()) fail(ErrorCode::kParse, "label field 'noted_reason' must be a string");
    l.noted_reason = r->get<std::string>();
  }
  if (auto c = j.find("created_at"); c != j.end() && c->is_number_integer()) {
    l.created_at = c->get<std::int64_t>();
  }
  return l;
}

struct StoredLabel {
  AnnotationLabel label;
  std::size_t sequence = 0;  // 0-based line order in the store
  bool effective = false;    // latest label for its (task, annotator)
};

/// Append-only label file. Appends are serialized and flushed per record;
/// existing lines are never rewritten.
class LabelStore {
 public:
  explicit LabelStore(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream touch(path_, std::ios::app);
    if (!touch) fail(ErrorCode::kIo, "label store not writable: " + path_.string());
  }

  const std::filesystem::path& path() const { return path_; }

  void append(const AnnotationLabel& label) {
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) fail(ErrorCode::kIo, "cannot append to " + path_.string());
    out << to_json(label).dump() << '\n';
    out.flush();
    if (!out) fail(ErrorCode::kIo, "append failed: " + path_.string());
  }

  std::vector<StoredLabel> load() const {
    std::lock_guard lock(mutex_);
    return load_labels(path_);
  }

  static std::vector<StoredLabel> load_labels(const std::filesystem::path& path) {
    std::vector<StoredLabel> out;
    for (const auto& line : io::read_lines(path)) {
      try {
        out.push_back(StoredLabel{label_from_json(io::parse_json_line(line, path)), out.size(), false});
      } catch (const Error& e) {
        fail(ErrorCode::kParse, path.string() + ":" + std::to_string(line.number) + ": " + e.what());
      }
    }
    std::map<std::pair<std::string, std::string>, std::size_t> latest;
    for (const auto& s : out) latest[{s.label.task_id, s.label.annotator_id}] = s.sequence;
    for (const auto& [key, seq] : latest) out[seq].effective = true;
    return out;
  }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
};

inline std::int64_t now_epoch_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

/// Effective human labels per annotator, in first-labeled order, ready for
/// judge_agreement.
inline std::map<std::string, std::vector<HumanFlip>> export_agreement_input(
    const std::filesystem::path& store_path) {
  const auto labels = LabelStore::load_labels(store_path);
  if (labels.empty()) fail(ErrorCode::kEmptyCorpus, "empty label store: " + store_path.string());
  std::map<std::string, std::vector<HumanFlip>> out;
  std::map<std::pair<std::string, std::string>, int> effective;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& s : labels) {
    const std::pair<std::string, std::string> key{s.label.annotator_id, s.label.task_id};
    if (!effective.contains(key)) order.push_back(key);
    if (s.effective) effective[key] = s.label.flip;
    else effective.try_emplace(key, s.label.flip);
  }
  for (const auto& key : order) out[key.first].push_back(HumanFlip{key.second, effective[key]});
  return out;
}

}  // namespace adsent
