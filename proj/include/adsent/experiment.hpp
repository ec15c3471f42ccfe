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

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adsent/config.hpp"
#include "adsent/consistency.hpp"
#include "adsent/corpus.hpp"
#include "adsent/counterfeiter.hpp"
#include "adsent/detector.hpp"
#include "adsent/evaluation.hpp"
#include "adsent/llm_client.hpp"
#include "adsent/metrics.hpp"
#include "adsent/report.hpp"
#include "adsent/version.hpp"

namespace adsent {

/// Exclusive advisory lock on <dir>/.adsent.lock, released on destruction
/// (or when the process dies).
class OutputDirLock {
 public:
  explicit OutputDirLock(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto path = dir / ".adsent.lock";
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) fail(ErrorCode::kIo, "cannot open lock file " + path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      fd_ = -1;
      fail(ErrorCode::kIo, "another experiment is running in " + dir.string());
    }
  }
  OutputDirLock(const OutputDirLock&) = delete;
  OutputDirLock& operator=(const OutputDirLock&) = delete;
  ~OutputDirLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }

 private:
  int fd_ = -1;
};

inline Json to_json(const SplitSpec& s) {
  Json j;
  j["strategy"] = s.strategy == SplitStrategy::kTemporal ? "temporal" : "random";
  j["test_fraction"] = s.test_fraction;
  j["seed"] = s.strategy == SplitStrategy::kRandom ? Json(s.seed) : Json(nullptr);
  return j;
}

inline SplitSpec split_spec_from_json(const Json& j) {
  SplitSpec s;
  const auto strategy = j.at("strategy").get<std::string>();
  if (strategy == "temporal") s.strategy = SplitStrategy::kTemporal;
  else if (strategy == "random") s.strategy = SplitStrategy::kRandom;
  else fail(ErrorCode::kParse, "unknown split strategy '" + strategy + "'");
  s.test_fraction = j.at("test_fraction").get<double>();
  if (!j.at("seed").is_null()) s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

/// Sidecar written next to split outputs so later reports can name the split.
inline std::filesystem::path split_sidecar(const std::filesystem::path& corpus_file) {
  auto p = corpus_file;
  p += ".split.json";
  return p;
}

/// Identity of a run. Contains no wall-clock time: the timestamps are the
/// generation times of the (cached) rewrites, so warm-cache replays match.
struct ExperimentManifest {
  std::string experiment_id;
  std::string recipe;
  std::string corpus_digest;
  std::optional<SplitSpec> split;
  std::string counterfeiter_model;
  std::string counterfeiter_digest;
  std::string detector_id;
  std::string detector_digest;
  std::string code_version = kVersion;
  std::optional<std::int64_t> first_generation;
  std::optional<std::int64_t> last_generation;

  void note_generations(std::span<const Variant> variants) {
    for (const auto& v : variants) {
      first_generation = first_generation ? std::min(*first_generation, v.created_at) : v.created_at;
      last_generation = last_generation ? std::max(*last_generation, v.created_at) : v.created_at;
    }
  }
};

inline std::string gen_params_digest(const GenParams& p) {
  return sha256_hex(Json{{"model", p.model},
                         {"temperature", p.temperature},
                         {"max_new_tokens", p.max_new_tokens},
                         {"stop", p.stop}}
                        .dump());
}

inline Json to_json(const ExperimentManifest& m) {
  Json j;
  j["experiment_id"] = m.experiment_id;
  j["recipe"] = m.recipe;
  j["corpus_digest"] = m.corpus_digest;
  j["split"] = m.split ? to_json(*m.split) : Json(nullptr);
  j["counterfeiter"] = {{"model", m.counterfeiter_model}, {"params_digest", m.counterfeiter_digest}};
  j["detector"] = {{"id", m.detector_id}, {"spec_digest", m.detector_digest}};
  j["code_version"] = m.code_version;
  j["timestamps"] = {
      {"first_generation", m.first_generation ? Json(*m.first_generation) : Json(nullptr)},
      {"last_generation", m.last_generation ? Json(*m.last_generation) : Json(nullptr)}};
  return j;
}

/// A corpus on disk plus the split that produced it, if known.
struct CorpusInput {
  Corpus corpus;
  std::optional<SplitSpec> split;

  static CorpusInput load(const std::filesystem::path& path) {
    CorpusInput in{ingest(path, CorpusFormat::kLinesOfRecords), std::nullopt};
    const auto sidecar = split_sidecar(path);
    if (std::filesystem::exists(sidecar)) {
      in.split = split_spec_from_json(Json::parse(io::read_file(sidecar)));
    }
    return in;
  }
};

/// Shared state for one CLI invocation: configuration, the client (and its
/// cache), and the output layout.
class Harness {
 public:
  Harness(HarnessConfig config, std::shared_ptr<Transport> transport)
      : config_(std::move(config)),
        client_(std::make_unique<LlmClient>(std::move(transport),
                                            ClientOptions{config_.retry, config_.cache_root, 0})) {}

  const HarnessConfig& config() const { return config_; }
  LlmClient& client() const { return *client_; }

  Counterfeiter counterfeiter() const {
    require(!config_.counterfeiter.model.empty(), "[counterfeiter] model is not configured");
    return Counterfeiter(*client_, config_.counterfeiter.endpoint(), config_.counterfeiter.params());
  }

  Detector detector() const {
    if (config_.detector_kind != DetectorKind::kRemoteClassifier) {
      require(!config_.detector.model.empty(), "[detector] model is not configured");
    }
    return Detector(*client_, config_.detector_spec());
  }

  FactJudge judge() const {
    require(!config_.judge.model.empty(), "[judge] model is not configured");
    return FactJudge(*client_, config_.judge.endpoint(), config_.judge.params());
  }

  std::filesystem::path out(const std::filesystem::path& relative) const {
    return config_.output_dir / relative;
  }

  ExperimentManifest manifest(std::string recipe, const CorpusInput& input) const {
    ExperimentManifest m;
    m.experiment_id = config_.experiment_id;
    m.recipe = std::move(recipe);
    m.corpus_digest = corpus_digest(input.corpus);
    m.split = input.split;
    m.counterfeiter_model = config_.counterfeiter.model;
    m.counterfeiter_digest = gen_params_digest(config_.counterfeiter.params());
    m.detector_id = config_.detector_id;
    m.detector_digest = detector_spec_digest(config_.detector_spec());
    return m;
  }

  std::filesystem::path variant_store_path(const Corpus& corpus, std::string_view target,
                                           int level) const {
    return out("variants") /
           variant_store_name(corpus.name, target, level, config_.counterfeiter.model);
  }

  std::filesystem::path prediction_path(std::string_view run_name) const {
    return out("predictions") / (text::path_component(config_.detector_id) + "." +
                                 text::path_component(run_name) + ".jsonl");
  }

  std::vector<Prediction> evaluate_and_store(std::span<const EvalItem> items,
                                             std::string_view run_name) const {
    const Detector d = detector();
    auto preds = d.evaluate_set(items, config_.max_parallel);
    write_prediction_store(prediction_path(run_name), preds,
                           make_run_manifest(d.spec(), items, kVersion));
    return preds;
  }

 private:
  HarnessConfig config_;
  std::unique_ptr<LlmClient> client_;
};

// ---- report rendering ------------------------------------------------------

/// Renders any report JSON emitted by the recipes as the matching text table.
inline std::string render_report(const Json& r) {
  const auto kind = r.at("kind").get<std::string>();
  const auto dataset = r.value("dataset", std::string("dataset"));
  const auto detector = r.value("detector", std::string("detector"));
  if (kind == "attack_eval") {
    const auto org = metrics_from_json(r.at("original"));
    const auto adv = metrics_from_json(r.at("adversarial"));
    return report_text::drop_table(dataset, {{detector, org.macro_f1, adv.macro_f1}}) + "\n" +
           report_text::metrics_table({{detector, "Original", org}, {detector, "Adversarial", adv}});
  }
  if (kind == "flip_analysis") {
    std::vector<report_text::FlipRow> rows;
    rows.push_back({"Original", r.at("original").at("macro_f1").get<double>(), std::nullopt});
    for (const auto& s : r.at("sets")) {
      rows.push_back({s.at("set").get<std::string>(), s.at("macro_f1").get<double>(),
                      flip_matrix_from_json(s.at("flips"))});
    }
    return report_text::flip_table(dataset, rows);
  }
  if (kind == "metrics" || kind == "generalization") {
    std::vector<report_text::MetricsRow> rows;
    std::string missing;
    for (const auto& s : r.at("sets")) {
      if (s.contains("error")) {
        missing += "missing set " + s.at("set").get<std::string>() + ": " +
                   s.at("error").get<std::string>() + "\n";
        continue;
      }
      rows.push_back({detector, s.at("set").get<std::string>(), metrics_from_json(s.at("metrics"))});
    }
    std::string out = report_text::metrics_table(rows);
    if (r.contains("drop") && !r.at("drop").is_null()) {
      out += "drop vs reference: " + report_text::pct(r.at("drop").get<double>()) + "\n";
    }
    return out + missing;
  }
  if (kind == "consistency") {
    std::vector<report_text::Row> rows;
    for (const auto& s : r.at("sets")) {
      rows.push_back({s.at("set").get<std::string>(), report_text::pct(s.at("macro_f1").get<double>()),
                      report_text::pct(s.at("rr_to_f_percent").get<double>()),
                      report_text::pct(s.at("ff_to_r_percent").get<double>()),
                      report_text::pct(s.at("f1_deviation").get<double>()),
                      report_text::pct(s.at("rr_to_f_deviation").get<double>()),
                      report_text::pct(s.at("ff_to_r_deviation").get<double>())});
    }
    return dataset + "\n" +
           report_text::render_table({"Set", "F1", "RR→F %", "FF→R %", "ΔF1", "ΔRR→F", "ΔFF→R"}, rows);
  }
  if (kind == "agreement") {
    std::vector<report_text::Row> rows;
    for (const auto& a : r.at("annotators")) {
      rows.push_back({a.at("annotator").get<std::string>(), std::to_string(a.at("pairs").get<std::size_t>()),
                      fmt::format("{:.4f}", a.at("kappa").get<double>())});
    }
    return report_text::render_table({"Annotator", "Pairs", "Kappa"}, rows);
  }
  fail(ErrorCode::kParse, "unknown report kind '" + kind + "'");
}

/// Writes <reports>/<name>.json and the rendered <name>.txt.
inline std::string emit_report(const Harness& h, const std::string& name, const Json& report) {
  const std::string text = render_report(report);
  io::write_file_atomic(h.out("reports") / (name + ".json"), report.dump(2) + "\n");
  io::write_file_atomic(h.out("reports") / (name + ".txt"), text);
  return text;
}

// ---- recipes ---------------------------------------------------------------

inline Json prediction_health(const ScoredRun& run) {
  return Json{{"unparseable", run.unparseable}, {"errors", run.errors}, {"excluded", run.excluded}};
}

/// Original test set vs. the mixed adversarial set (real rewritten negative,
/// fake rewritten positive), reported as macro-F1 and performance drop.
inline Json run_attack_eval(const Harness& h, const CorpusInput& input) {
  const Corpus& corpus = input.corpus;
  const auto& cfg = h.config();
  const ReframeRun adv = h.counterfeiter().mixed_adversarial_set(corpus, cfg.max_parallel);
  write_variant_store(h.variant_store_path(corpus, "mixed", 1), adv);

  const auto orig_items = eval_items(corpus.documents);
  const auto adv_items = eval_items(adv.variants);
  const auto orig_preds = h.evaluate_and_store(orig_items, "original");
  const auto adv_preds = h.evaluate_and_store(adv_items, "mixed");

  const ScoredRun orig_scored = score_predictions(corpus, orig_preds, cfg.parse_policy);
  const ScoredRun adv_scored = score_predictions(corpus, adv_preds, cfg.parse_policy);
  const MetricsReport org = report(confusion(orig_scored.gts, orig_scored.preds));
  const MetricsReport advm = report(confusion(adv_scored.gts, adv_scored.preds));

  ExperimentManifest m = h.manifest("attack_eval", input);
  m.note_generations(adv.variants);
  Json r;
  r["kind"] = "attack_eval";
  r["manifest"] = to_json(m);
  r["dataset"] = cfg.dataset;
  r["detector"] = cfg.detector_id;
  r["original"] = to_json(org);
  r["adversarial"] = to_json(advm);
  r["drop"] = round2(performance_drop(org.macro_f1, advm.macro_f1));
  r["generation_failures"] = adv.failures.size();
  r["prediction_health"] = {{"original", prediction_health(orig_scored)},
                            {"adversarial", prediction_health(adv_scored)}};
  return r;
}

/// Flip analysis from stored predictions: the original run plus one or more
/// named sentiment-altered runs of the same documents.
inline Json flip_report(const Corpus& corpus, const std::vector<Prediction>& original,
                        const std::vector<std::pair<std::string, std::vector<Prediction>>>& sets,
                        ParseFailurePolicy policy) {
  const ScoredRun orig_scored = score_predictions(corpus, original, policy);
  const MetricsReport org = report(confusion(orig_scored.gts, orig_scored.preds));
  Json r;
  r["kind"] = "flip_analysis";
  r["original"] = {{"macro_f1", round2(org.macro_f1)}, {"metrics", to_json(org)},
                   {"prediction_health", prediction_health(orig_scored)}};
  Json out_sets = Json::array();
  for (const auto& [name, preds] : sets) {
    const ScoredRun scored = score_predictions(corpus, preds, policy);
    const MetricsReport m = report(confusion(scored.gts, scored.preds));
    const PairedRun paired = pair_predictions(corpus, original, preds, policy);
    const FlipMatrix fm = flip_matrix(paired);
    const auto rates = flip_rates(fm);
    Json rates_j;
    for (const auto& s : kFlipScenarios) rates_j[s.name()] = round2(rates[s.index()]);
    out_sets.push_back({{"set", name},
                        {"macro_f1", round2(m.macro_f1)},
                        {"metrics", to_json(m)},
                        {"flips", to_json(fm)},
                        {"flip_rates", rates_j},
                        {"unmatched", paired.unmatched},
                        {"excluded", paired.excluded},
                        {"prediction_health", prediction_health(scored)}});
  }
  r["sets"] = std::move(out_sets);
  return r;
}

/// Original set plus the positive, negative and neutral rewrites of it.
inline Json run_flip_analysis(const Harness& h, const CorpusInput& input) {
  const Corpus& corpus = input.corpus;
  const auto& cfg = h.config();
  const Counterfeiter cf = h.counterfeiter();
  ExperimentManifest m = h.manifest("flip_analysis", input);
  const auto orig_preds = h.evaluate_and_store(eval_items(corpus.documents), "original");
  std::vector<std::pair<std::string, std::vector<Prediction>>> sets;
  std::size_t failures = 0;
  for (SentimentTarget t : kSentimentTargets) {
    const auto name = std::string(to_string(t));
    const ReframeRun run = cf.reframe_corpus(corpus, t, cfg.max_parallel);
    write_variant_store(h.variant_store_path(corpus, name, 1), run);
    m.note_generations(run.variants);
    failures += run.failures.size();
    sets.emplace_back(name, h.evaluate_and_store(eval_items(run.variants), name));
  }
  Json r = flip_report(corpus, orig_preds, sets, cfg.parse_policy);
  Json out;
  out["kind"] = r["kind"];
  out["manifest"] = to_json(m);
  out["dataset"] = cfg.dataset;
  out["detector"] = cfg.detector_id;
  out["generation_failures"] = failures;
  out["original"] = r["original"];
  out["sets"] = r["sets"];
  return out;
}

struct TrainingExport {
  std::filesystem::path path;
  std::size_t records = 0;
  std::size_t failures = 0;
};

/// Level-1 neutral rewrite of every training document, written in the
/// canonical corpus format with the variant text in place of the original.
inline TrainingExport export_neutralized_training_set(const Harness& h, const CorpusInput& input) {
  const Corpus& train = input.corpus;
  if (train.empty()) fail(ErrorCode::kEmptyCorpus, "training split is empty");
  const ReframeRun run =
      h.counterfeiter().reframe_corpus(train, SentimentTarget::kNeutral, h.config().max_parallel);
  Corpus out{train.name + ".neutral", {}};
  for (const auto& v : run.variants) {
    Document d = *train.find(v.doc_id);
    d.text = std::string(text::trim(v.text));
    out.documents.push_back(std::move(d));
  }
  TrainingExport result;
  result.path = h.out("export") / (text::path_component(out.name) + ".jsonl");
  write_corpus(result.path, out);
  std::vector<Json> failures;
  for (const auto& f : run.failures) failures.push_back(to_json(f));
  io::write_file_atomic(failure_manifest_path(result.path), io::to_jsonl(failures));
  result.records = out.size();
  result.failures = run.failures.size();
  return result;
}

/// One metrics row per external test set. Missing or unreadable files are
/// reported per set instead of aborting the run.
inline Json run_generalization(const Harness& h,
                               const std::vector<std::pair<std::string, std::filesystem::path>>& sets) {
  const auto& cfg = h.config();
  ExperimentManifest m;
  m.experiment_id = cfg.experiment_id;
  m.recipe = "generalization";
  m.detector_id = cfg.detector_id;
  m.detector_digest = detector_spec_digest(cfg.detector_spec());
  Json digests = Json::array();
  Json out_sets = Json::array();
  for (const auto& [name, path] : sets) {
    Json s;
    s["set"] = name;
    s["path"] = path.string();
    if (!std::filesystem::exists(path)) {
      s["error"] = "file not found: " + path.string();
      out_sets.push_back(std::move(s));
      continue;
    }
    try {
      const Corpus corpus = ingest(path, CorpusFormat::kLinesOfRecords);
      digests.push_back(corpus_digest(corpus));
      const auto preds = h.evaluate_and_store(eval_items(corpus.documents), "generalize." + name);
      const ScoredRun scored = score_predictions(corpus, preds, cfg.parse_policy);
      s["metrics"] = to_json(report(confusion(scored.gts, scored.preds)));
      s["prediction_health"] = prediction_health(scored);
    } catch (const Error& e) {
      s["error"] = e.what();
    }
    out_sets.push_back(std::move(s));
  }
  m.corpus_digest = sha256_hex(digests.dump());
  Json r;
  r["kind"] = "generalization";
  r["manifest"] = to_json(m);
  r["dataset"] = cfg.dataset;
  r["detector"] = cfg.detector_id;
  r["sets"] = std::move(out_sets);
  return r;
}

/// Second-level neutralization consistency (Neutral vs Pos2Neu, Neg2Neu,
/// Neu2Neu), with all generated variants and predictions persisted.
inline Json run_consistency(const Harness& h, const CorpusInput& input) {
  const auto& cfg = h.config();
  const Counterfeiter cf = h.counterfeiter();
  const Detector det = h.detector();
  SecondLevelInputs in;
  in.corpus = &input.corpus;
  in.detector = &det;
  in.counterfeiter = &cf;
  in.max_parallel = cfg.max_parallel;
  in.policy = cfg.parse_policy;
  SecondLevelArtifacts art;
  const ConsistencyRunReport rep = second_level_experiment(in, &art);

  ExperimentManifest m = h.manifest("consistency", input);
  for (const auto& [t, run] : art.level1) {
    write_variant_store(h.variant_store_path(input.corpus, to_string(t), 1), run);
    m.note_generations(run.variants);
  }
  for (const auto& [t, run] : art.level2) {
    write_variant_store(h.variant_store_path(input.corpus, std::string(to_string(t)) + "2neutral", 2), run);
    m.note_generations(run.variants);
  }
  const auto items = eval_items(input.corpus.documents);
  write_prediction_store(h.prediction_path("original"), art.original_predictions,
                         make_run_manifest(det.spec(), items, kVersion));
  for (const auto& [name, preds] : art.set_predictions) {
    write_prediction_store(h.prediction_path("consistency." + name), preds,
                           make_run_manifest(det.spec(), art.set_items.at(name), kVersion));
  }
  Json body = to_json(rep);
  Json r;
  r["kind"] = "consistency";
  r["manifest"] = to_json(m);
  r["dataset"] = cfg.dataset;
  r["detector"] = cfg.detector_id;
  r["original"] = body["original"];
  r["sets"] = body["sets"];
  return r;
}

}  // namespace adsent
