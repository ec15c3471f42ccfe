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

#include "adsent/counterfeiter.hpp"
#include "support/fixtures.hpp"
#include "support/mock_llm.hpp"

using namespace adsent;
using namespace adsent::testing;

namespace {

std::string golden(const std::string& name) {
  return io::read_file(std::filesystem::path(ADSENT_GOLDEN_DIR) / name);
}

struct World {
  std::shared_ptr<ScriptedTransport> transport = std::make_shared<ScriptedTransport>();
  TempDir cache;
  LlmClient client;
  Counterfeiter cf;

  World() : client(transport, options()), cf(client, Endpoint{}, rewrite_params("cf-model")) {}

  ClientOptions options() const {
    ClientOptions o;
    o.cache_root = cache.path();
    o.retry.sleep = [](auto) {};
    return o;
  }
  MockWorld& mock() { return transport->world(); }
};

Document doc(std::string id, std::string text, Label label = Label::kReal) {
  return Document{std::move(id), std::move(text), label, std::nullopt, "s", std::nullopt};
}

}  // namespace

TEST(AttackPrompt, MatchesGoldenFilesForAllTargets) {
  const std::string article = golden("article.txt");
  EXPECT_EQ(render_attack_prompt(article, SentimentTarget::kPositive), golden("attack_positive.txt"));
  EXPECT_EQ(render_attack_prompt(article, SentimentTarget::kNegative), golden("attack_negative.txt"));
  EXPECT_EQ(render_attack_prompt(article, SentimentTarget::kNeutral), golden("attack_neutral.txt"));
}

TEST(AttackPrompt, TargetsDifferOnlyInTheSentimentWord) {
  const auto pos = render_attack_prompt("X happened.", SentimentTarget::kPositive);
  const auto neg = render_attack_prompt("X happened.", SentimentTarget::kNegative);
  const auto neu = render_attack_prompt("X happened.", SentimentTarget::kNeutral);
  EXPECT_EQ(pos.substr(0, 35), neg.substr(0, 35));
  EXPECT_EQ(pos.substr(35 + 8), neg.substr(35 + 8));
  EXPECT_EQ(neu.substr(35, 7), "neutral");
  EXPECT_TRUE(neu.ends_with("!\n\nX happened."));
}

TEST(AttackPrompt, EmptyArticleRejected) {
  EXPECT_THROW(render_attack_prompt("  ", SentimentTarget::kNeutral), Error);
}

TEST(Guard, LengthRatioArithmetic) {
  const auto g = inspect_rewrite("abcde", "abcdeabcdeabcdeabcdeabcde");
  EXPECT_DOUBLE_EQ(g.length_ratio, 5.0);
  EXPECT_TRUE(g.length_out_of_bounds);
  EXPECT_FALSE(inspect_rewrite("abcd", "ab").length_out_of_bounds);
  EXPECT_TRUE(inspect_rewrite("abcd", "a").length_out_of_bounds);
  EXPECT_DOUBLE_EQ(inspect_rewrite("\xc3\xa9\xc3\xa9", "ee").length_ratio, 1.0);
}

TEST(Guard, RefusalAndEcho) {
  EXPECT_TRUE(inspect_rewrite("text", "  I'm sorry, I can't do that").refusal_suspected);
  EXPECT_FALSE(inspect_rewrite("text", "The mayor said sorry").refusal_suspected);
  EXPECT_TRUE(inspect_rewrite("t", "Rewrite the following article with ... t").prompt_echo_suspected);
  GuardConfig custom;
  custom.refusal_markers = {"Nope"};
  EXPECT_TRUE(inspect_rewrite("t", "nope.", custom).refusal_suspected);
}

TEST(Reframe, ProducesLevelOneVariant) {
  World w;
  const auto r = w.cf.reframe(doc("d1", "The vote passed."), SentimentTarget::kPositive);
  EXPECT_EQ(r.variant.text, "[positive] The vote passed.");
  EXPECT_EQ(r.variant.level, 1);
  EXPECT_EQ(r.variant.variant_id, "d1#positive");
  EXPECT_EQ(r.variant.doc_id, "d1");
  EXPECT_EQ(r.variant.counterfeiter_model, "cf-model");
  EXPECT_FALSE(r.variant.parent_variant_id);
  const auto req = w.mock().log().at(0).body;
  EXPECT_EQ(req["messages"].size(), 1u);
  EXPECT_EQ(req["messages"][0]["role"], "user");
  EXPECT_EQ(req["max_tokens"], 2048);
}

TEST(Reframe, EmptyAndTruncatedGenerations) {
  World w;
  w.mock().script_rewrite("a", "");
  w.mock().script_rewrite("b", "partial", "length");
  try {
    w.cf.reframe(doc("1", "a"), SentimentTarget::kNeutral);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyGeneration);
    EXPECT_STREQ(e.what(), "empty generation");
  }
  try {
    w.cf.reframe(doc("2", "b"), SentimentTarget::kNeutral);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTruncatedGeneration);
  }
}

TEST(Reframe, LongRewriteIsFlaggedNotRejected) {
  World w;
  w.mock().script_rewrite("short", "shortshortshortshortshort");
  const auto r = w.cf.reframe(doc("1", "short"), SentimentTarget::kNegative);
  EXPECT_DOUBLE_EQ(r.guard.length_ratio, 5.0);
  EXPECT_TRUE(r.guard.length_out_of_bounds);
}

TEST(ReframeCorpus, OneVariantPerDocumentAndFailuresRecorded) {
  World w;
  Corpus c = synthetic_corpus(3, 3);
  w.mock().script_rewrite(c.documents[2].text, "I cannot rewrite this article.");
  w.mock().script_rewrite(c.documents[4].text, "");
  const auto run = w.cf.reframe_corpus(c, SentimentTarget::kNeutral, 3);
  EXPECT_EQ(run.variants.size() + run.failures.size(), c.size());
  ASSERT_EQ(run.failures.size(), 2u);
  EXPECT_EQ(run.failures[0].doc_id, c.documents[2].id);
  EXPECT_EQ(run.failures[0].code, ErrorCode::kRefusalSuspected);
  EXPECT_EQ(run.failures[1].code, ErrorCode::kEmptyGeneration);
  for (std::size_t i = 0, j = 0; i < c.size(); ++i) {
    if (i == 2 || i == 4) continue;
    EXPECT_EQ(run.variants[j++].doc_id, c.documents[i].id);
  }
}

TEST(ReframeCorpus, KeepPolicyRetainsRefusals) {
  World w;
  Counterfeiter keep(w.client, {}, rewrite_params("cf-model"), {}, RefusalPolicy::kKeep);
  Corpus c = synthetic_corpus(1, 0);
  w.mock().script_rewrite(c.documents[0].text, "I'm sorry, no.");
  const auto run = keep.reframe_corpus(c, SentimentTarget::kNeutral, 1);
  ASSERT_EQ(run.variants.size(), 1u);
  EXPECT_TRUE(run.guards[0].refusal_suspected);
}

TEST(ReframeCorpus, EmptyCorpusAndWarmRerun) {
  World w;
  EXPECT_TRUE(w.cf.reframe_corpus(Corpus{}, SentimentTarget::kNeutral, 2).variants.empty());
  const Corpus c = synthetic_corpus(5, 5);
  const auto first = w.cf.reframe_corpus(c, SentimentTarget::kPositive, 4);
  const auto calls = w.client.network_calls();
  const auto second = w.cf.reframe_corpus(c, SentimentTarget::kPositive, 4);
  EXPECT_EQ(w.client.network_calls(), calls);
  EXPECT_EQ(first.variants, second.variants);
}

TEST(MixedSet, RealNegativeFakePositive) {
  World w;
  const auto run = w.cf.mixed_adversarial_set(synthetic_corpus(45, 45), 4);
  std::size_t neg = 0, pos = 0;
  for (const auto& v : run.variants) {
    const bool fake = v.doc_id[0] == 'f';
    EXPECT_EQ(v.target, fake ? SentimentTarget::kPositive : SentimentTarget::kNegative);
    (v.target == SentimentTarget::kNegative ? neg : pos)++;
  }
  EXPECT_EQ(neg, 45u);
  EXPECT_EQ(pos, 45u);
  const auto all_real = w.cf.mixed_adversarial_set(synthetic_corpus(3, 0), 1);
  for (const auto& v : all_real.variants) EXPECT_EQ(v.target, SentimentTarget::kNegative);
}

TEST(SecondLevel, NeutralizesLevelOneVariants) {
  World w;
  const auto pos = w.cf.reframe(doc("d", "Facts."), SentimentTarget::kPositive).variant;
  const auto l2 = w.cf.reframe_second_level(pos).variant;
  EXPECT_EQ(l2.level, 2);
  EXPECT_EQ(l2.target, SentimentTarget::kNeutral);
  EXPECT_EQ(l2.parent_variant_id, pos.variant_id);
  EXPECT_EQ(l2.doc_id, "d");
  EXPECT_EQ(l2.text, "[neutral] [positive] Facts.");
  const auto neu = w.cf.reframe(doc("d", "Facts."), SentimentTarget::kNeutral).variant;
  EXPECT_EQ(w.cf.reframe_second_level(neu).variant.variant_id, "d#neutral>neutral");
  try {
    w.cf.reframe_second_level(l2);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPrecondition);
  }
}

TEST(VariantStore, RoundTripWithFailureManifest) {
  World w;
  TempDir dir;
  Corpus c = synthetic_corpus(2, 2);
  w.mock().script_rewrite(c.documents[1].text, "");
  const auto run = w.cf.reframe_corpus(c, SentimentTarget::kNegative, 2);
  const auto path = dir / variant_store_name(c.name, "negative", 1, "cf-model");
  write_variant_store(path, run);
  EXPECT_EQ(read_variant_store(path), run.variants);
  const auto failures = io::read_lines(failure_manifest_path(path));
  ASSERT_EQ(failures.size(), 1u);
  EXPECT_NE(failures[0].text.find("empty_generation"), std::string::npos) << failures[0].text;
  EXPECT_EQ(path.filename(), "synthetic.negative.L1.cf-model.jsonl");
}

TEST(VariantStore, RejectsInconsistentLevel) {
  Variant v{"x", "d", SentimentTarget::kNeutral, 2, std::nullopt, "t", "m", 0};
  EXPECT_THROW(variant_from_json(to_json(v)), Error);
  v.level = 3;
  v.parent_variant_id = "p";
  EXPECT_THROW(variant_from_json(to_json(v)), Error);
}

TEST(VariantChain, ResolvesDocumentsAndParents) {
  World w;
  const Corpus c = synthetic_corpus(2, 1);
  const auto l1 = w.cf.reframe_corpus(c, SentimentTarget::kPositive, 2).variants;
  const auto l2 = w.cf.second_level_set(l1, 2).variants;
  EXPECT_NO_THROW(validate_variant_chain(l1, c));
  EXPECT_NO_THROW(validate_variant_chain(l2, c, l1));
  EXPECT_THROW(validate_variant_chain(l2, c), Error);
  EXPECT_NO_THROW(validate_variant_chain(l2, c, {}, false));
  auto orphan = l1;
  orphan[0].doc_id = "missing";
  EXPECT_THROW(validate_variant_chain(orphan, c), Error);
}
