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

#include <random>

#include "adsent/consistency.hpp"
#include "support/fixtures.hpp"
#include "support/mock_llm.hpp"

using namespace adsent;
using namespace adsent::testing;

namespace {

std::string golden(const std::string& name) {
  return io::read_file(std::filesystem::path(ADSENT_GOLDEN_DIR) / name);
}

ClientOptions quiet() {
  ClientOptions o;
  o.retry.sleep = [](auto) {};
  return o;
}

/// Rewrites return the article unchanged; the detector reads only the text.
class IdentityWorld : public Transport {
 public:
  HttpReply post(const Endpoint&, std::string_view, const std::string& body) override {
    const std::string user = Json::parse(body)["messages"][0]["content"];
    if (user.rfind("Rewrite", 0) == 0) return {200, chat_reply(user.substr(user.find("\n\n") + 2)).dump(), ""};
    return {200, chat_reply(MockWorld::verdict_for(user)).dump(), ""};
  }
};

std::vector<JudgeVerdict> verdicts_from_flips(const std::vector<int>& flips) {
  std::vector<JudgeVerdict> v;
  for (std::size_t i = 0; i < flips.size(); ++i) {
    v.push_back({"p" + std::to_string(i), flips[i] == 0, flips[i] == 0 ? "yes" : "no", "judge"});
  }
  return v;
}

std::vector<HumanFlip> humans(const std::vector<int>& flips) {
  std::vector<HumanFlip> h;
  for (std::size_t i = 0; i < flips.size(); ++i) h.push_back({"p" + std::to_string(i), flips[i]});
  return h;
}

}  // namespace

TEST(JudgePrompt, GoldenAndShape) {
  EXPECT_EQ(render_judge_prompt(golden("article.txt"), golden("manipulated.txt")), golden("judge.txt"));
  const auto p = render_judge_prompt("A", "B");
  EXPECT_NE(p.find("Document A: A Document B: B Answer:"), std::string::npos);
  EXPECT_TRUE(p.ends_with("Answer:"));
  EXPECT_THROW(render_judge_prompt("A", " "), Error);
}

TEST(ParseYesNo, FirstTokenRule) {
  EXPECT_EQ(parse_yes_no("yes"), true);
  EXPECT_EQ(parse_yes_no("No."), false);
  EXPECT_EQ(parse_yes_no(" YES, they do"), true);
  EXPECT_FALSE(parse_yes_no("Both documents agree"));
  EXPECT_FALSE(parse_yes_no(""));
}

TEST(FactJudge, VerdictsAndPreconditions) {
  auto t = std::make_shared<ScriptedTransport>();
  t->world().inject("/chat/completions", {{200, chat_reply("yes").dump(), ""},
                                          {200, chat_reply("No.").dump(), ""},
                                          {200, chat_reply("Unclear").dump(), ""}});
  LlmClient client(t, quiet());
  FactJudge judge(client, {}, verdict_params("judge-model"));
  const Document d{"d1", "Original.", Label::kReal, std::nullopt, "s", std::nullopt};
  const Variant v{"d1#positive", "d1", SentimentTarget::kPositive, 1, std::nullopt, "Great original.", "cf", 0};
  const auto a = judge.judge(d, v);
  EXPECT_EQ(a.same_facts, true);
  EXPECT_EQ(a.flip(), 0);
  EXPECT_EQ(a.pair_id, "d1::d1#positive");
  EXPECT_EQ(a.judge_model, "judge-model");
  EXPECT_EQ(judge.judge(d, v).flip(), 1);
  EXPECT_FALSE(judge.judge(d, v).same_facts);
  EXPECT_EQ(t->world().log()[0].body["messages"][0]["content"],
            render_judge_prompt("Original.", "Great original."));
  Variant other = v;
  other.doc_id = "d2";
  EXPECT_THROW(judge.judge(d, other), Error);
  const auto j = to_json(a);
  EXPECT_EQ(judge_verdict_from_json(j).pair_id, a.pair_id);
}

TEST(JudgeAgreement, IdenticalMappingsGiveOne) {
  std::vector<int> flips;
  for (int i = 0; i < 30; ++i) flips.push_back(i % 3 == 0);
  EXPECT_DOUBLE_EQ(judge_agreement(humans(flips), verdicts_from_flips(flips)).kappa, 1.0);
}

TEST(JudgeAgreement, ContingencyFixture) {
  // both preserved 20, human-only flip 5, llm-only flip 10, both flip 15
  std::vector<int> h, l;
  auto add = [&](int n, int hf, int lf) {
    for (int i = 0; i < n; ++i) {
      h.push_back(hf);
      l.push_back(lf);
    }
  };
  add(20, 0, 0);
  add(5, 1, 0);
  add(10, 0, 1);
  add(15, 1, 1);
  const auto r = judge_agreement(humans(h), verdicts_from_flips(l));
  EXPECT_EQ(r.kappa, 0.4);
  EXPECT_EQ(r.pairs, 50u);
}

TEST(JudgeAgreement, AlignmentAndUnparseablePolicies) {
  auto llm = verdicts_from_flips({0, 1, 0, 1});
  llm[2].same_facts.reset();
  std::vector<HumanFlip> h{{"p3", 1}, {"p0", 0}, {"p1", 1}, {"p2", 0}, {"unknown", 1}};
  const auto ex = judge_agreement(h, llm);
  EXPECT_EQ(ex.pairs, 3u);
  EXPECT_EQ(ex.unparseable_excluded, 1u);
  EXPECT_DOUBLE_EQ(ex.kappa, 1.0);
  const auto dis = judge_agreement(h, llm, JudgeFailurePolicy::kCountAsDisagreement);
  EXPECT_EQ(dis.pairs, 4u);
  EXPECT_LT(dis.kappa, 1.0);
  EXPECT_THROW(judge_agreement(std::vector<HumanFlip>{{"zz", 0}}, llm), Error);
  EXPECT_THROW(judge_agreement(std::vector<HumanFlip>{{"p0", 2}}, llm), Error);
}

TEST(JudgeAgreement, SelfAgreementOnRandomVectors) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> flips(2 + rng() % 40);
    for (auto& f : flips) f = static_cast<int>(rng() % 2);
    flips[0] = 0;
    flips[1] = 1;
    EXPECT_DOUBLE_EQ(judge_agreement(humans(flips), verdicts_from_flips(flips)).kappa, 1.0);
  }
}

TEST(FactPreservation, PerTargetPercentages) {
  std::vector<std::pair<SentimentTarget, int>> labels;
  for (int i = 0; i < 10; ++i) labels.push_back({SentimentTarget::kNeutral, 0});
  for (int i = 0; i < 10; ++i) labels.push_back({SentimentTarget::kPositive, i < 7 ? 0 : 1});
  for (int i = 0; i < 10; ++i) labels.push_back({SentimentTarget::kNegative, 1});
  const auto acc = fact_preservation_accuracy(labels);
  EXPECT_DOUBLE_EQ(acc.at(SentimentTarget::kNeutral), 100.0);
  EXPECT_DOUBLE_EQ(acc.at(SentimentTarget::kPositive), 70.0);
  EXPECT_DOUBLE_EQ(acc.at(SentimentTarget::kNegative), 0.0);
  EXPECT_THROW(fact_preservation_accuracy({}), Error);
}

TEST(Evaluation, ScoringCountsStatuses) {
  const Corpus c = synthetic_corpus(2, 2);
  std::vector<Prediction> preds;
  for (const auto& d : c.documents) preds.push_back({d.id, std::nullopt, "x", d.label, "", std::nullopt, PredictionStatus::kOk, std::nullopt});
  preds[0] = {c.documents[0].id, std::nullopt, "x", std::nullopt, "hmm", std::nullopt, PredictionStatus::kUnparseable, std::nullopt};
  preds[1] = {c.documents[1].id, std::nullopt, "x", std::nullopt, "", std::nullopt, PredictionStatus::kError, "boom"};
  const auto wrong = score_predictions(c, preds, ParseFailurePolicy::kCountAsWrong);
  EXPECT_EQ(wrong.unparseable, 1u);
  EXPECT_EQ(wrong.errors, 1u);
  EXPECT_EQ(wrong.preds.size(), 4u);
  EXPECT_DOUBLE_EQ(report(confusion(wrong.gts, wrong.preds)).accuracy, 50.0);
  const auto ex = score_predictions(c, preds, ParseFailurePolicy::kExclude);
  EXPECT_EQ(ex.excluded, 2u);
  EXPECT_DOUBLE_EQ(evaluate_predictions(c, preds, ParseFailurePolicy::kExclude).accuracy, 100.0);
  preds[2].doc_id = "ghost";
  EXPECT_THROW(score_predictions(c, preds, ParseFailurePolicy::kExclude), Error);
}

TEST(Evaluation, PairingJoinsOnDocument) {
  const Corpus c = synthetic_corpus(2, 2);
  auto pred = [](const Document& d, Label l, std::optional<std::string> v = std::nullopt) {
    return Prediction{d.id, v, "x", l, "", std::nullopt, PredictionStatus::kOk, std::nullopt};
  };
  std::vector<Prediction> orig{pred(c.documents[0], Label::kReal), pred(c.documents[1], Label::kFake),
                               pred(c.documents[2], Label::kReal)};
  std::vector<Prediction> adv{pred(c.documents[1], Label::kReal, "v1"), pred(c.documents[0], Label::kFake, "v0"),
                              pred(c.documents[3], Label::kFake, "v3")};
  const auto p = pair_predictions(c, orig, adv, ParseFailurePolicy::kExclude);
  EXPECT_EQ(p.doc_ids, (std::vector<std::string>{c.documents[1].id, c.documents[0].id}));
  EXPECT_EQ(p.unmatched, 1u);
  const auto fm = flip_matrix(p);
  EXPECT_EQ(fm.count({Label::kFake, Label::kFake, Label::kReal}), 1u);
  EXPECT_EQ(fm.count({Label::kReal, Label::kReal, Label::kFake}), 1u);
  orig.push_back(orig[0]);
  EXPECT_THROW(pair_predictions(c, orig, adv, ParseFailurePolicy::kExclude), Error);
}

TEST(SecondLevel, IdentityWorldHasNoDeviationsOrFlips) {
  auto t = std::make_shared<IdentityWorld>();
  LlmClient client(t, quiet());
  DetectorSpec spec;
  spec.id = "llm";
  spec.params = verdict_params("det");
  const Detector det(client, spec);
  const Counterfeiter cf(client, {}, rewrite_params("cf"));
  const Corpus c = synthetic_corpus(6, 6);
  SecondLevelInputs in{&c, &det, &cf, 3, ParseFailurePolicy::kCountAsWrong, std::nullopt};
  SecondLevelArtifacts art;
  const auto r = second_level_experiment(in, &art);
  ASSERT_EQ(r.sets.size(), 4u);
  const char* names[] = {"Neutral", "Pos2Neu", "Neg2Neu", "Neu2Neu"};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(r.sets[i].name, names[i]);
    EXPECT_EQ(r.sets[i].f1_deviation, 0.0);
    EXPECT_EQ(r.sets[i].rr_to_f_percent, 0.0);
    EXPECT_EQ(r.sets[i].ff_to_r_percent, 0.0);
    EXPECT_EQ(r.sets[i].flips.n, 12u);
    for (const auto& s : kFlipScenarios) {
      if (s.orig != s.adv) EXPECT_EQ(r.sets[i].flips.count(s), 0u);
    }
  }
  EXPECT_EQ(art.level2.at(SentimentTarget::kPositive).variants.size(), 12u);
  EXPECT_EQ(art.set_items.at("Neu2Neu").size(), 12u);
  EXPECT_EQ(art.level2.at(SentimentTarget::kNegative).variants[0].parent_variant_id,
            art.level1.at(SentimentTarget::kNegative).variants[0].variant_id);
}

TEST(SecondLevel, ReportSchema) {
  auto t = std::make_shared<ScriptedTransport>();
  LlmClient client(t, quiet());
  DetectorSpec spec;
  spec.id = "llm";
  spec.params = verdict_params("det");
  const Detector det(client, spec);
  const Counterfeiter cf(client, {}, rewrite_params("cf"));
  const Corpus c = synthetic_corpus(20, 20);
  SecondLevelInputs in{&c, &det, &cf, 2, ParseFailurePolicy::kCountAsWrong, std::nullopt};
  const auto r = second_level_experiment(in);
  const Json j = to_json(r);
  ASSERT_EQ(j["sets"].size(), 4u);
  EXPECT_EQ(j["sets"][0]["f1_deviation"], 0.0);
  for (const char* key : {"set", "macro_f1", "rr_to_f_percent", "ff_to_r_percent", "f1_deviation",
                          "rr_to_f_deviation", "ff_to_r_deviation", "generation_failures", "metrics",
                          "flips"}) {
    EXPECT_TRUE(j["sets"][1].contains(key)) << key;
  }
  EXPECT_NEAR(r.sets[2].f1_deviation, r.sets[2].adversarial.macro_f1 - r.sets[0].adversarial.macro_f1, 1e-12);
}
