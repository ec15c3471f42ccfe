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
#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "adsent/corpus.hpp"
#include "support/fixtures.hpp"
#include "support/mock_llm.hpp"

using namespace adsent;
using adsent::testing::synthetic_corpus;
using adsent::testing::TempDir;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an adsent::Error";
  return ErrorCode::kInternal;
}

std::string error_text(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

std::set<std::string> ids(const Corpus& c) {
  std::set<std::string> s;
  for (const auto& d : c.documents) s.insert(d.id);
  return s;
}

}  // namespace

TEST(Ingest, CanonicalRecordsPreserveOrder) {
  TempDir dir;
  io::write_file_atomic(dir / "politifact.jsonl",
                        R"({"id":"b","text":"  second  ","label":"fake","timestamp":20})" "\n"
                        R"({"id":"a","text":"first","label":"real","timestamp":null})" "\n");
  const Corpus c = ingest(dir / "politifact.jsonl", CorpusFormat::kLinesOfRecords);
  EXPECT_EQ(c.name, "politifact");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.documents[0].id, "b");
  EXPECT_EQ(c.documents[0].text, "second");
  EXPECT_EQ(c.documents[0].label, Label::kFake);
  EXPECT_EQ(c.documents[0].timestamp, 20);
  EXPECT_EQ(c.documents[0].source, "politifact");
  EXPECT_FALSE(c.documents[1].timestamp.has_value());
}

TEST(Ingest, BalancedFixtureHas450Documents) {
  TempDir dir;
  write_corpus(dir / "pf.jsonl", synthetic_corpus(225, 225));
  const Corpus c = ingest(dir / "pf.jsonl", CorpusFormat::kLinesOfRecords);
  EXPECT_EQ(c.size(), 450u);
  EXPECT_EQ(c.count(Label::kReal), 225u);
}

TEST(Ingest, EmptyFileIsAnError) {
  TempDir dir;
  io::write_file_atomic(dir / "empty.jsonl", "");
  EXPECT_EQ(code_of([&] { ingest(dir / "empty.jsonl", CorpusFormat::kLinesOfRecords); }),
            ErrorCode::kEmptyCorpus);
  EXPECT_NE(error_text([&] { ingest(dir / "empty.jsonl", CorpusFormat::kLinesOfRecords); })
                .find("empty corpus"),
            std::string::npos);
}

TEST(Ingest, ParseErrorsReportTheLine) {
  TempDir dir;
  io::write_file_atomic(dir / "bad.jsonl",
                        R"({"id":"a","text":"x","label":"real"})" "\n{not json\n");
  const auto msg = error_text([&] { ingest(dir / "bad.jsonl", CorpusFormat::kLinesOfRecords); });
  EXPECT_NE(msg.find("bad.jsonl:2"), std::string::npos) << msg;
}

TEST(Ingest, DuplicateIdAndEmptyTextRejected) {
  TempDir dir;
  io::write_file_atomic(dir / "dup.jsonl", R"({"id":"a","text":"x","label":"real"})" "\n"
                                           R"({"id":"a","text":"y","label":"fake"})" "\n");
  EXPECT_EQ(code_of([&] { ingest(dir / "dup.jsonl", CorpusFormat::kLinesOfRecords); }),
            ErrorCode::kDuplicateId);
  io::write_file_atomic(dir / "blank.jsonl", R"({"id":"a","text":" \t ","label":"real"})" "\n");
  EXPECT_EQ(code_of([&] { ingest(dir / "blank.jsonl", CorpusFormat::kLinesOfRecords); }),
            ErrorCode::kEmptyText);
}

TEST(Ingest, FineGrainedLabelsNeedRelabeling) {
  TempDir dir;
  io::write_file_atomic(dir / "lun.jsonl", R"({"id":"1","text":"a","label":"real"})" "\n"
                                           R"({"id":"2","text":"b","label":"hoax"})" "\n"
                                           R"({"id":"3","text":"c","label":"fake"})" "\n");
  EXPECT_EQ(code_of([&] { ingest(dir / "lun.jsonl", CorpusFormat::kLinesOfRecords); }),
            ErrorCode::kUnknownLabel);
  IngestOptions opt;
  opt.lun_relabel = true;
  const Corpus c = ingest(dir / "lun.jsonl", CorpusFormat::kLinesOfRecords, opt);
  EXPECT_EQ(c.documents[1].label, Label::kFake);
  EXPECT_EQ(c.documents[1].orig_label, "hoax");
  EXPECT_EQ(c.documents[0].label, Label::kReal);
}

TEST(Ingest, UnknownLabelRejectedEvenWithRelabel) {
  TempDir dir;
  io::write_file_atomic(dir / "x.jsonl", R"({"id":"1","text":"a","label":"opinion"})" "\n");
  IngestOptions opt;
  opt.lun_relabel = true;
  EXPECT_EQ(code_of([&] { ingest(dir / "x.jsonl", CorpusFormat::kLinesOfRecords, opt); }),
            ErrorCode::kUnknownLabel);
}

TEST(Ingest, DelimitedTableWithTitleAndQuotes) {
  TempDir dir;
  io::write_file_atomic(dir / "gc.csv",
                        "news_id,title,body,verdict,date\r\n"
                        "g1,Headline,\"Body, with comma\nand newline\",Real,100\r\n"
                        "g2,,\"He said \"\"hi\"\"\",FAKE,\r\n");
  IngestOptions opt;
  opt.columns.id = "news_id";
  opt.columns.text = "body";
  opt.columns.label = "verdict";
  opt.columns.title = "title";
  opt.columns.timestamp = "date";
  const Corpus c = ingest(dir / "gc.csv", CorpusFormat::kDelimitedTable, opt);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.documents[0].text, "Headline. Body, with comma\nand newline");
  EXPECT_EQ(c.documents[0].timestamp, 100);
  EXPECT_EQ(c.documents[1].text, "He said \"hi\"");
  EXPECT_EQ(c.documents[1].label, Label::kFake);
  EXPECT_FALSE(c.documents[1].timestamp.has_value());
}

TEST(Ingest, DelimitedTableMissingColumn) {
  TempDir dir;
  io::write_file_atomic(dir / "t.csv", "id,text\n1,a\n");
  EXPECT_EQ(code_of([&] { ingest(dir / "t.csv", CorpusFormat::kDelimitedTable); }),
            ErrorCode::kParse);
}

TEST(Ingest, CanonicalRoundTripIsByteStable) {
  TempDir dir;
  Corpus c = synthetic_corpus(7, 5);
  c.documents[2].orig_label = "satire";
  c.documents[3].timestamp.reset();
  c.documents[4].text = "Ünïcödé text \xe2\x80\x94 with \"quotes\"\nand lines";
  write_corpus(dir / "c.jsonl", c);
  const std::string first = io::read_file(dir / "c.jsonl");
  IngestOptions opt;
  opt.name = c.name;
  const Corpus back = ingest(dir / "c.jsonl", CorpusFormat::kLinesOfRecords, opt);
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize(back), first);
}

TEST(RelabelLun, MapsFineGrainedClasses) {
  Corpus c{"lun", {}};
  const char* orig[] = {"satire", "hoax", "propaganda", "reliable", "reliable", "reliable"};
  for (int i = 0; i < 6; ++i) {
    c.documents.push_back({std::to_string(i), "t", Label::kReal, std::nullopt, "lun", orig[i]});
  }
  c.documents.push_back({"plain", "t", Label::kReal, std::nullopt, "lun", std::nullopt});
  const Corpus r = relabel_lun(c);
  EXPECT_EQ(r.count(Label::kFake), 3u);
  EXPECT_EQ(r.count(Label::kReal), 4u);
  EXPECT_EQ(r.documents[0].orig_label, "satire");
  EXPECT_EQ(r.documents[6], c.documents[6]);
  c.documents[0].orig_label = "parody";
  EXPECT_EQ(code_of([&] { relabel_lun(c); }), ErrorCode::kUnknownLabel);
}

TEST(Balance, DownsamplesToMinority) {
  const Corpus c = synthetic_corpus(3750, 4100);
  const Corpus b = balance(c, 3);
  EXPECT_EQ(b.count(Label::kReal), 3750u);
  EXPECT_EQ(b.count(Label::kFake), 3750u);
  EXPECT_EQ(balance(c, 3), b);
  // Order preserved: output is a subsequence of the input.
  std::size_t j = 0;
  for (const auto& d : c.documents) {
    if (j < b.size() && b.documents[j].id == d.id) ++j;
  }
  EXPECT_EQ(j, b.size());
}

TEST(Balance, FixedPointAndErrors) {
  const Corpus c = synthetic_corpus(10, 10);
  EXPECT_EQ(balance(c, 99), c);
  EXPECT_EQ(code_of([&] { balance(synthetic_corpus(4, 0), 1); }), ErrorCode::kEmptyClass);
}

TEST(Split, TemporalPolitiFactCounts) {
  const auto r = split(synthetic_corpus(225, 225), SplitSpec{SplitStrategy::kTemporal, 0.2, 0});
  EXPECT_EQ(r.train.count(Label::kReal), 180u);
  EXPECT_EQ(r.train.count(Label::kFake), 180u);
  EXPECT_EQ(r.test.count(Label::kReal), 45u);
  EXPECT_EQ(r.test.count(Label::kFake), 45u);
}

TEST(Split, SmallestSplit) {
  const auto r = split(synthetic_corpus(2, 2), SplitSpec{SplitStrategy::kRandom, 0.5, 4});
  EXPECT_EQ(r.train.count(Label::kReal), 1u);
  EXPECT_EQ(r.test.count(Label::kReal), 1u);
  EXPECT_EQ(r.train.count(Label::kFake), 1u);
  EXPECT_EQ(r.test.count(Label::kFake), 1u);
}

TEST(Split, RandomLunScaleIsReplayStable) {
  const Corpus c = synthetic_corpus(3750, 3750);
  const SplitSpec spec{SplitStrategy::kRandom, 0.2, 7};
  const auto a = split(c, spec);
  EXPECT_EQ(a.train.count(Label::kReal), 3000u);
  EXPECT_EQ(a.test.count(Label::kFake), 750u);
  EXPECT_EQ(split(c, spec).test, a.test);
  EXPECT_NE(split(c, SplitSpec{SplitStrategy::kRandom, 0.2, 8}).test, a.test);
}

TEST(Split, TemporalRequiresTimestamps) {
  Corpus c = synthetic_corpus(4, 4);
  c.documents[5].timestamp.reset();
  EXPECT_EQ(code_of([&] { split(c, {}); }), ErrorCode::kMissingTimestamp);
  EXPECT_EQ(code_of([&] { split(c, SplitSpec{SplitStrategy::kRandom, 1.0, 0}); }),
            ErrorCode::kInvalidArgument);
}

TEST(Split, TimestampTiesBrokenById) {
  Corpus c{"ties", {}};
  for (const char* id : {"d", "b", "c", "a"}) {
    c.documents.push_back({id, "t", Label::kReal, 5, "s", std::nullopt});
  }
  const auto r = split(c, SplitSpec{SplitStrategy::kTemporal, 0.5, 0});
  EXPECT_EQ(ids(r.test), (std::set<std::string>{"c", "d"}));
}

TEST(SplitProperties, PartitionTemporalOrderAndBalance) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    Corpus c{"p", {}};
    const std::size_t n = 2 + rng() % 120;
    for (std::size_t i = 0; i < n; ++i) {
      c.documents.push_back({"d" + std::to_string(i), "t", rng() % 2 ? Label::kFake : Label::kReal,
                             static_cast<std::int64_t>(rng() % 20), "s", std::nullopt});
    }
    const double frac = 0.05 + 0.9 * static_cast<double>(rng() % 1000) / 1000.0;
    const auto strategy = trial % 2 ? SplitStrategy::kRandom : SplitStrategy::kTemporal;
    const auto r = split(c, SplitSpec{strategy, frac, rng()});
    EXPECT_EQ(r.train.size() + r.test.size(), c.size());
    std::set<std::string> all = ids(r.train);
    for (const auto& id : ids(r.test)) EXPECT_TRUE(all.insert(id).second) << id;
    EXPECT_EQ(all, ids(c));
    if (strategy == SplitStrategy::kTemporal) {
      for (Label l : kLabels) {
        for (const auto& tr : r.train.documents) {
          if (tr.label != l) continue;
          for (const auto& te : r.test.documents) {
            if (te.label != l) continue;
            EXPECT_TRUE(std::tie(*tr.timestamp, tr.id) < std::tie(*te.timestamp, te.id));
          }
        }
      }
    }
    const Corpus b = balance(c.count(Label::kReal) && c.count(Label::kFake) ? c : synthetic_corpus(3, 3), 1);
    const auto rb = split(b, SplitSpec{SplitStrategy::kRandom, frac, 5});
    EXPECT_EQ(rb.train.count(Label::kReal), rb.train.count(Label::kFake));
    EXPECT_EQ(rb.test.count(Label::kReal), rb.test.count(Label::kFake));
  }
}

TEST(Digest, ChangesWithContent) {
  Corpus c = synthetic_corpus(3, 3);
  const auto d1 = corpus_digest(c);
  EXPECT_EQ(d1.size(), 64u);
  c.documents[0].text += "!";
  EXPECT_NE(corpus_digest(c), d1);
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
