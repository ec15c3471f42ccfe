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
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "adsent/csv.hpp"
#include "adsent/digest.hpp"
#include "adsent/error.hpp"
#include "adsent/io.hpp"
#include "adsent/text.hpp"
#include "adsent/types.hpp"

namespace adsent {

struct Document {
  std::string id;
  std::string text;
  Label label = Label::kReal;
  std::optional<std::int64_t> timestamp;
  std::string source;
  std::optional<std::string> orig_label;

  friend bool operator==(const Document&, const Document&) = default;
};

struct Corpus {
  std::string name;
  std::vector<Document> documents;

  std::size_t size() const { return documents.size(); }
  bool empty() const { return documents.empty(); }

  std::size_t count(Label label) const {
    return static_cast<std::size_t>(
        std::count_if(documents.begin(), documents.end(),
                      [label](const Document& d) { return d.label == label; }));
  }

  const Document* find(std::string_view id) const {
    auto it = std::find_if(documents.begin(), documents.end(),
                           [id](const Document& d) { return d.id == id; });
    return it == documents.end() ? nullptr : &*it;
  }

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

enum class SplitStrategy { kTemporal, kRandom };

struct SplitSpec {
  SplitStrategy strategy = SplitStrategy::kTemporal;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;  // kRandom only
};

struct SplitResult {
  Corpus train;
  Corpus test;
};

enum class CorpusFormat { kLinesOfRecords, kDelimitedTable };

/// Column names for delimited-table import. Empty optional columns are absent.
struct DelimitedColumns {
  std::string id = "id";
  std::string text = "text";
  std::string label = "label";
  std::string timestamp;
  std::string title;
  std::string source;
  std::string orig_label;
};

struct IngestOptions {
  std::string name;    // defaults to the file stem
  std::string source;  // used when a record carries none; defaults to name
  bool lun_relabel = false;
  DelimitedColumns columns;
  char delimiter = ',';
};

namespace detail {

inline bool is_fine_grained_unreliable(std::string_view s) {
  return s == "satire" || s == "hoax" || s == "propaganda";
}

inline std::string at_line(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

/// Applies the accepted-label rule shared by both import formats.
inline void assign_label(Document& doc, const std::string& raw, bool lun_relabel,
                         const std::string& where) {
  if (auto l = try_parse_label(raw)) {
    doc.label = *l;
    return;
  }
  if (is_fine_grained_unreliable(raw)) {
    if (!lun_relabel) {
      fail(ErrorCode::kUnknownLabel,
           where + "label '" + raw + "' is only accepted with LUN relabeling");
    }
    doc.orig_label = raw;
    doc.label = Label::kFake;
    return;
  }
  fail(ErrorCode::kUnknownLabel, where + "unknown label '" + raw + "'");
}

inline void finish_document(Document& doc, const std::string& where) {
  const auto trimmed = text::trim(doc.text);
  if (trimmed.empty()) fail(ErrorCode::kEmptyText, where + "empty text");
  doc.text = std::string(trimmed);
  if (doc.id.empty()) fail(ErrorCode::kParse, where + "empty id");
}

inline std::string json_string_field(const Json& rec, const char* key,
                                     const std::string& where) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_string()) {
    fail(ErrorCode::kParse, where + "missing string field '" + key + "'");
  }
  return it->get<std::string>();
}

inline Document document_from_record(const Json& rec, const IngestOptions& opt,
                                     const std::string& where) {
  if (!rec.is_object()) fail(ErrorCode::kParse, where + "record is not an object");
  Document doc;
  doc.id = json_string_field(rec, "id", where);
  doc.text = json_string_field(rec, "text", where);
  if (auto it = rec.find("orig_label"); it != rec.end() && !it->is_null()) {
    if (!it->is_string()) fail(ErrorCode::kParse, where + "orig_label must be a string");
    doc.orig_label = it->get<std::string>();
  }
  assign_label(doc, json_string_field(rec, "label", where), opt.lun_relabel, where);
  if (auto it = rec.find("timestamp"); it != rec.end() && !it->is_null()) {
    if (!it->is_number_integer()) {
      fail(ErrorCode::kParse, where + "timestamp must be an integer or null");
    }
    doc.timestamp = it->get<std::int64_t>();
  }
  if (auto it = rec.find("source"); it != rec.end() && it->is_string()) {
    doc.source = it->get<std::string>();
  } else {
    doc.source = opt.source;
  }
  finish_document(doc, where);
  return doc;
}

inline std::int64_t parse_timestamp(std::string_view s, const std::string& where) {
  std::size_t pos = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(std::string(s), &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) {
    fail(ErrorCode::kParse, where + "bad timestamp '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

/// Maps LUN fine-grained labels onto the binary scheme: satire, hoax and
/// propaganda become Fake, the reliable class becomes Real. orig_label is kept.
inline Corpus relabel_lun(Corpus corpus) {
  for (auto& doc : corpus.documents) {
    if (!doc.orig_label) continue;
    const auto& o = *doc.orig_label;
    if (detail::is_fine_grained_unreliable(o) || o == "fake") {
      doc.label = Label::kFake;
    } else if (o == "reliable" || o == "real" || o == "trusted") {
      doc.label = Label::kReal;
    } else {
      fail(ErrorCode::kUnknownLabel,
           "document " + doc.id + ": unknown fine-grained label '" + o + "'");
    }
  }
  return corpus;
}

inline void validate_unique_ids(const Corpus& corpus) {
  std::unordered_set<std::string_view> seen;
  for (const auto& d : corpus.documents) {
    if (!seen.insert(d.id).second) {
      fail(ErrorCode::kDuplicateId, "duplicate id '" + d.id + "'");
    }
  }
}

inline Corpus ingest(const std::filesystem::path& path, CorpusFormat format,
                     IngestOptions opt = {}) {
  if (opt.name.empty()) opt.name = path.stem().string();
  if (opt.source.empty()) opt.source = opt.name;
  Corpus corpus{opt.name, {}};
  std::unordered_set<std::string> ids;
  auto add = [&](Document doc, std::size_t line) {
    if (!ids.insert(doc.id).second) {
      fail(ErrorCode::kDuplicateId,
           detail::at_line(path, line) + "duplicate id '" + doc.id + "'");
    }
    corpus.documents.push_back(std::move(doc));
  };

  if (format == CorpusFormat::kLinesOfRecords) {
    for (const auto& line : io::read_lines(path)) {
      const auto where = detail::at_line(path, line.number);
      add(detail::document_from_record(io::parse_json_line(line, path), opt, where),
          line.number);
    }
  } else {
    const auto rows = csv::parse(io::read_file(path), opt.delimiter);
    if (!rows.empty()) {
      const auto& header = rows.front().fields;
      auto column = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
        if (name.empty()) return std::nullopt;
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
          if (required) {
            fail(ErrorCode::kParse,
                 detail::at_line(path, 1) + "missing column '" + name + "'");
          }
          return std::nullopt;
        }
        return static_cast<std::size_t>(it - header.begin());
      };
      const auto& c = opt.columns;
      const auto id_col = *column(c.id, true);
      const auto text_col = *column(c.text, true);
      const auto label_col = *column(c.label, true);
      const auto ts_col = column(c.timestamp, true);
      const auto title_col = column(c.title, true);
      const auto source_col = column(c.source, true);
      const auto orig_col = column(c.orig_label, true);
      for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const auto where = detail::at_line(path, row.line);
        if (row.fields.size() != header.size()) {
          fail(ErrorCode::kParse, where + "expected " + std::to_string(header.size()) +
                                      " fields, got " + std::to_string(row.fields.size()));
        }
        Document doc;
        doc.id = std::string(text::trim(row.fields[id_col]));
        doc.text = row.fields[text_col];
        if (title_col) {
          const auto title = text::trim(row.fields[*title_col]);
          if (!title.empty()) doc.text = std::string(title) + ". " + doc.text;
        }
        if (orig_col && !text::trim(row.fields[*orig_col]).empty()) {
          doc.orig_label = std::string(text::trim(row.fields[*orig_col]));
        }
        detail::assign_label(doc, text::to_lower(text::trim(row.fields[label_col])),
                             opt.lun_relabel, where);
        if (ts_col) {
          const auto ts = text::trim(row.fields[*ts_col]);
          if (!ts.empty()) doc.timestamp = detail::parse_timestamp(ts, where);
        }
        doc.source = source_col ? std::string(text::trim(row.fields[*source_col]))
                                : opt.source;
        if (doc.source.empty()) doc.source = opt.source;
        detail::finish_document(doc, where);
        add(std::move(doc), row.line);
      }
    }
  }
  if (corpus.empty()) fail(ErrorCode::kEmptyCorpus, "empty corpus: " + path.string());
  if (opt.lun_relabel) corpus = relabel_lun(std::move(corpus));
  return corpus;
}

inline Json to_json(const Document& d) {
  Json j;
  j["id"] = d.id;
  j["text"] = d.text;
  j["label"] = to_string(d.label);
  j["timestamp"] = d.timestamp ? Json(*d.timestamp) : Json(nullptr);
  j["source"] = d.source;
  j["orig_label"] = d.orig_label ? Json(*d.orig_label) : Json(nullptr);
  return j;
}

/// Canonical lines-of-records serialization, one document per line.
inline std::string serialize(const Corpus& corpus) {
  std::vector<Json> records;
  records.reserve(corpus.size());
  for (const auto& d : corpus.documents) records.push_back(to_json(d));
  return io::to_jsonl(records);
}

inline void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  io::write_file_atomic(path, serialize(corpus));
}

inline std::string corpus_digest(const Corpus& corpus) {
  return sha256_hex(serialize(corpus));
}

/// Downsamples every class to the minority-class count. Selection is seeded
/// and without replacement; the output keeps the input order.
inline Corpus balance(const Corpus& corpus, std::uint64_t seed) {
  const std::size_t n_real = corpus.count(Label::kReal);
  const std::size_t n_fake = corpus.count(Label::kFake);
  if (n_real == 0 || n_fake == 0) {
    fail(ErrorCode::kEmptyClass, "cannot balance corpus '" + corpus.name +
                                     "': a class has zero members");
  }
  const std::size_t keep = std::min(n_real, n_fake);
  std::mt19937_64 rng(seed);
  std::vector<bool> selected(corpus.size(), false);
  for (Label label : kLabels) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (corpus.documents[i].label == label) members.push_back(i);
    }
    std::vector<std::size_t> chosen;
    std::sample(members.begin(), members.end(), std::back_inserter(chosen), keep, rng);
    for (auto i : chosen) selected[i] = true;
  }
  Corpus out{corpus.name, {}};
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (selected[i]) out.documents.push_back(corpus.documents[i]);
  }
  return out;
}

/// Per-class test size: ceil(fraction * n). The epsilon absorbs binary
/// representation error so that 0.2 * 225 yields 45, not 46.
inline std::size_t test_count(std::size_t n, double test_fraction) {
  return static_cast<std::size_t>(
      std::ceil(test_fraction * static_cast<double>(n) - 1e-9));
}

inline SplitResult split(const Corpus& corpus, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "test_fraction must lie strictly in (0, 1)");
  }
  std::vector<bool> in_test(corpus.size(), false);
  std::mt19937_64 rng(spec.seed);
  for (Label label : kLabels) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (corpus.documents[i].label == label) members.push_back(i);
    }
    if (spec.strategy == SplitStrategy::kTemporal) {
      for (auto i : members) {
        if (!corpus.documents[i].timestamp) {
          fail(ErrorCode::kMissingTimestamp, "temporal split: document '" +
                                                 corpus.documents[i].id +
                                                 "' has no timestamp");
        }
      }
      std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
        const auto& da = corpus.documents[a];
        const auto& db = corpus.documents[b];
        return std::tie(*da.timestamp, da.id) < std::tie(*db.timestamp, db.id);
      });
    } else {
      std::shuffle(members.begin(), members.end(), rng);
    }
    const std::size_t k = test_count(members.size(), spec.test_fraction);
    for (std::size_t j = members.size() - k; j < members.size(); ++j) {
      in_test[members[j]] = true;
    }
  }
  SplitResult out{{corpus.name + ".train", {}}, {corpus.name + ".test", {}}};
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    (in_test[i] ? out.test : out.train).documents.push_back(corpus.documents[i]);
  }
  return out;
}

}  // namespace adsent
