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

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adsent/annotation.hpp"
#include "adsent/annotation_service.hpp"
#include "adsent/experiment.hpp"
#include "adsent/http_transport.hpp"

namespace adsent::cli {

struct Context {
  std::shared_ptr<Transport> transport = std::make_shared<HttpTransport>();
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;
};

namespace detail {

inline std::pair<std::string, std::filesystem::path> name_path(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    fail(ErrorCode::kInvalidArgument, "expected NAME=PATH, got '" + spec + "'");
  }
  return {spec.substr(0, eq), spec.substr(eq + 1)};
}

/// Run name for a variant store file: "<corpus>.<target>.L<level>.<model>.jsonl"
/// becomes "<target>".
inline std::string run_name_for_store(const std::filesystem::path& store) {
  const std::string stem = store.filename().string();
  const auto parts = [&] {
    std::vector<std::string> v;
    std::string cur;
    for (char c : stem) {
      if (c == '.') {
        v.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    v.push_back(cur);
    return v;
  }();
  for (std::size_t i = 1; i + 1 < parts.size(); ++i) {
    if (parts[i + 1] == "L1" || parts[i + 1] == "L2") return parts[i];
  }
  return store.stem().string();
}

inline void print_usage_summary(const Harness& h, std::ostream& err) {
  err << "network calls: " << h.client().network_calls()
      << ", cache hits: " << h.client().cache_hits() << "\n";
}

inline std::atomic<AnnotationService*> g_service{nullptr};

inline void stop_service(int) {
  if (auto* s = g_service.load()) s->stop();
}

}  // namespace detail

/// Entry point shared by the adsent binary and the tests. Returns the exit code.
inline int run(const std::vector<std::string>& args, const Context& ctx = {}) {
  std::ostream& out = *ctx.out;
  std::ostream& err = *ctx.err;

  CLI::App app{"adsent: sentiment-manipulation robustness harness for fake-news detectors", "adsent"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::string config_path, cache_root, output_dir;
  std::size_t max_parallel = 0;
  app.add_option("--config", config_path, "Harness configuration file (INI)")->check(CLI::ExistingFile);
  app.add_option("--cache-root", cache_root, "Response cache directory");
  app.add_option("-o,--output-dir", output_dir, "Experiment output directory");
  app.add_option("--max-parallel", max_parallel, "Maximum requests in flight")->check(CLI::PositiveNumber);

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate and convert a corpus to the canonical format");
  std::string in_path, in_format = "jsonl", in_output, in_name, in_source;
  DelimitedColumns cols;
  std::string delimiter = ",";
  bool lun = false;
  std::optional<std::uint64_t> balance_seed;
  ingest_cmd->add_option("--input", in_path)->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--format", in_format, "jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));
  ingest_cmd->add_option("--output", in_output, "Canonical corpus file to write")->required();
  ingest_cmd->add_option("--name", in_name);
  ingest_cmd->add_option("--source", in_source);
  ingest_cmd->add_option("--id-col", cols.id);
  ingest_cmd->add_option("--text-col", cols.text);
  ingest_cmd->add_option("--label-col", cols.label);
  ingest_cmd->add_option("--timestamp-col", cols.timestamp);
  ingest_cmd->add_option("--title-col", cols.title);
  ingest_cmd->add_option("--source-col", cols.source);
  ingest_cmd->add_option("--orig-label-col", cols.orig_label);
  ingest_cmd->add_option("--delimiter", delimiter);
  ingest_cmd->add_flag("--lun-relabel", lun, "Accept satire/hoax/propaganda and map them to fake");
  ingest_cmd->add_option("--balance", balance_seed, "Downsample to the minority class with this seed");

  // split
  auto* split_cmd = app.add_subcommand("split", "Train/test split (temporal or seeded random)");
  std::string sp_corpus, sp_strategy = "temporal", sp_train, sp_test;
  SplitSpec sp;
  split_cmd->add_option("--corpus", sp_corpus)->required()->check(CLI::ExistingFile);
  split_cmd->add_option("--strategy", sp_strategy)->check(CLI::IsMember({"temporal", "random"}));
  split_cmd->add_option("--test-fraction", sp.test_fraction);
  split_cmd->add_option("--seed", sp.seed);
  split_cmd->add_option("--train-output", sp_train);
  split_cmd->add_option("--test-output", sp_test);

  // attack
  auto* attack_cmd = app.add_subcommand("attack", "Generate sentiment-reframed variants");
  std::string at_corpus, at_target = "all", at_from;
  bool at_second = false;
  attack_cmd->add_option("--corpus", at_corpus)->required()->check(CLI::ExistingFile);
  attack_cmd->add_option("--target", at_target, "positive, negative, neutral, mixed or all")
      ->check(CLI::IsMember({"positive", "negative", "neutral", "mixed", "all"}));
  attack_cmd->add_flag("--second-level", at_second, "Also re-neutralize every level-1 variant");
  attack_cmd->add_option("--from-variants", at_from, "Re-neutralize an existing level-1 store")
      ->check(CLI::ExistingFile);

  // detect
  auto* detect_cmd = app.add_subcommand("detect", "Run the configured detector over a corpus or variant store");
  std::string de_corpus, de_variants, de_name;
  detect_cmd->add_option("--corpus", de_corpus)->required()->check(CLI::ExistingFile);
  detect_cmd->add_option("--variants", de_variants)->check(CLI::ExistingFile);
  detect_cmd->add_option("--name", de_name, "Run name (default: original or the variant target)");

  // flips
  auto* flips_cmd = app.add_subcommand("flips", "Prediction-flip analysis");
  std::string fl_corpus, fl_original;
  std::vector<std::string> fl_sets;
  flips_cmd->add_option("--corpus", fl_corpus)->required()->check(CLI::ExistingFile);
  flips_cmd->add_option("--original", fl_original, "Stored predictions on the original texts");
  flips_cmd->add_option("--set", fl_sets, "NAME=PREDICTIONS for a sentiment-altered run");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Metrics for stored predictions, or the attack evaluation recipe");
  std::string ev_corpus, ev_predictions, ev_reference;
  eval_cmd->add_option("--corpus", ev_corpus)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--predictions", ev_predictions)->check(CLI::ExistingFile);
  eval_cmd->add_option("--reference", ev_reference, "Reference predictions for the performance drop")
      ->check(CLI::ExistingFile);

  // judge
  auto* judge_cmd = app.add_subcommand("judge", "LLM fact-preservation judge and human agreement");
  std::string ju_corpus, ju_variants, ju_human, ju_policy = "exclude";
  judge_cmd->add_option("--corpus", ju_corpus)->required()->check(CLI::ExistingFile);
  judge_cmd->add_option("--variants", ju_variants)->required()->check(CLI::ExistingFile);
  judge_cmd->add_option("--human", ju_human, "Annotation label store to compare against")
      ->check(CLI::ExistingFile);
  judge_cmd->add_option("--unparseable", ju_policy, "exclude or disagree")
      ->check(CLI::IsMember({"exclude", "disagree"}));

  // annotate
  auto* annotate_cmd = app.add_subcommand("annotate", "Human fact-preservation annotation");
  annotate_cmd->require_subcommand(1);
  auto* an_sample = annotate_cmd->add_subcommand("sample", "Sample annotation tasks");
  std::string an_corpus, an_output;
  std::vector<std::string> an_variants;
  std::size_t an_per_target = 10;
  std::uint64_t an_seed = 0;
  an_sample->add_option("--corpus", an_corpus)->required()->check(CLI::ExistingFile);
  an_sample->add_option("--variants", an_variants, "Level-1 variant stores")->required();
  an_sample->add_option("--per-target", an_per_target);
  an_sample->add_option("--seed", an_seed);
  an_sample->add_option("--output", an_output)->required();
  auto* an_serve = annotate_cmd->add_subcommand("serve", "Serve tasks to the annotation UI");
  std::string sv_tasks, sv_store, sv_bind = "127.0.0.1:8080", sv_static;
  bool sv_hide = false;
  an_serve->add_option("--tasks", sv_tasks)->required()->check(CLI::ExistingFile);
  an_serve->add_option("--store", sv_store)->required();
  an_serve->add_option("--bind", sv_bind, "host:port");
  an_serve->add_option("--static", sv_static, "UI bundle directory")->check(CLI::ExistingDirectory);
  an_serve->add_flag("--hide-target", sv_hide, "Do not reveal the sentiment target to annotators");
  auto* an_export = annotate_cmd->add_subcommand("export", "Effective labels per annotator");
  std::string ex_store, ex_output;
  an_export->add_option("--store", ex_store)->required()->check(CLI::ExistingFile);
  an_export->add_option("--output", ex_output);

  // export-train
  auto* train_cmd = app.add_subcommand("export-train", "Neutralized training set for the fine-tuning adapter");
  std::string tr_corpus;
  train_cmd->add_option("--corpus", tr_corpus)->required()->check(CLI::ExistingFile);

  // generalize
  auto* gen_cmd = app.add_subcommand("generalize", "Evaluate on external test sets");
  std::vector<std::string> ge_sets;
  gen_cmd->add_option("--set", ge_sets, "NAME=CORPUS")->required();

  // consistency
  auto* cons_cmd = app.add_subcommand("consistency", "Second-level neutralization consistency");
  std::string co_corpus;
  cons_cmd->add_option("--corpus", co_corpus)->required()->check(CLI::ExistingFile);

  // report
  auto* report_cmd = app.add_subcommand("report", "Render a report file as a text table");
  std::string re_input, re_output;
  report_cmd->add_option("--input", re_input)->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--output", re_output);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    HarnessConfig config = config_path.empty() ? HarnessConfig{} : HarnessConfig::load(config_path);
    if (!cache_root.empty()) config.cache_root = cache_root;
    if (!output_dir.empty()) config.output_dir = output_dir;
    if (max_parallel > 0) config.max_parallel = max_parallel;

    if (*ingest_cmd) {
      IngestOptions opt;
      opt.name = in_name;
      opt.source = in_source;
      opt.lun_relabel = lun;
      opt.columns = cols;
      if (delimiter.size() != 1) fail(ErrorCode::kInvalidArgument, "--delimiter must be one character");
      opt.delimiter = delimiter == "\\t" ? '\t' : delimiter[0];
      Corpus c = ingest(in_path, in_format == "csv" ? CorpusFormat::kDelimitedTable
                                                    : CorpusFormat::kLinesOfRecords,
                        opt);
      if (balance_seed) c = balance(c, *balance_seed);
      write_corpus(in_output, c);
      out << c.name << ": " << c.size() << " documents (" << c.count(Label::kReal) << " real, "
          << c.count(Label::kFake) << " fake) -> " << in_output << "\n";
      return 0;
    }

    if (*split_cmd) {
      sp.strategy = sp_strategy == "temporal" ? SplitStrategy::kTemporal : SplitStrategy::kRandom;
      const Corpus c = ingest(sp_corpus, CorpusFormat::kLinesOfRecords);
      const SplitResult r = split(c, sp);
      const std::filesystem::path train_path =
          sp_train.empty() ? config.output_dir / (text::path_component(c.name) + ".train.jsonl") : std::filesystem::path(sp_train);
      const std::filesystem::path test_path =
          sp_test.empty() ? config.output_dir / (text::path_component(c.name) + ".test.jsonl") : std::filesystem::path(sp_test);
      write_corpus(train_path, r.train);
      write_corpus(test_path, r.test);
      const std::string sidecar = to_json(sp).dump(2) + "\n";
      io::write_file_atomic(split_sidecar(train_path), sidecar);
      io::write_file_atomic(split_sidecar(test_path), sidecar);
      out << "train: " << r.train.count(Label::kReal) << " real / " << r.train.count(Label::kFake)
          << " fake -> " << train_path.string() << "\n"
          << "test:  " << r.test.count(Label::kReal) << " real / " << r.test.count(Label::kFake)
          << " fake -> " << test_path.string() << "\n";
      return 0;
    }

    if (*report_cmd) {
      const std::string text = render_report(Json::parse(io::read_file(re_input)));
      if (!re_output.empty()) io::write_file_atomic(re_output, text);
      out << text;
      return 0;
    }

    if (*an_export) {
      Json j = Json::object();
      for (const auto& [annotator, flips] : export_agreement_input(ex_store)) {
        Json arr = Json::array();
        for (const auto& f : flips) arr.push_back({{"pair_id", f.pair_id}, {"flip", f.flip}});
        j[annotator] = std::move(arr);
      }
      if (!ex_output.empty()) io::write_file_atomic(ex_output, j.dump(2) + "\n");
      else out << j.dump(2) << "\n";
      return 0;
    }

    if (*an_sample) {
      const Corpus c = ingest(an_corpus, CorpusFormat::kLinesOfRecords);
      std::map<SentimentTarget, std::vector<Variant>> sets;
      for (const auto& store : an_variants) {
        for (auto& v : read_variant_store(store)) {
          if (v.level == 1) sets[v.target].push_back(std::move(v));
        }
      }
      const auto tasks = sample_tasks(c, sets, an_per_target, an_seed);
      write_tasks(an_output, tasks);
      out << tasks.size() << " tasks -> " << an_output << "\n";
      return 0;
    }

    if (*an_serve) {
      const auto colon = sv_bind.rfind(':');
      if (colon == std::string::npos) fail(ErrorCode::kInvalidArgument, "--bind must be host:port");
      const std::string host = sv_bind.substr(0, colon);
      const int port = std::stoi(sv_bind.substr(colon + 1));
      AnnotationServiceOptions opt;
      opt.hide_target = sv_hide;
      if (!sv_static.empty()) opt.static_dir = sv_static;
      AnnotationService service(read_tasks(sv_tasks), sv_store, opt);
      if (!service.bind(host, port)) fail(ErrorCode::kIo, "cannot bind " + sv_bind);
      detail::g_service.store(&service);
      std::signal(SIGINT, detail::stop_service);
      std::signal(SIGTERM, detail::stop_service);
      err << "annotation service listening on http://" << sv_bind << "\n";
      service.listen();
      detail::g_service.store(nullptr);
      return 0;
    }

    // Everything below talks to model endpoints and writes into the output directory.
    OutputDirLock lock(config.output_dir);
    Harness h(config, ctx.transport);

    if (*attack_cmd) {
      const CorpusInput input = CorpusInput::load(at_corpus);
      const Counterfeiter cf = h.counterfeiter();
      auto emit = [&](const std::string& name, int level, const ReframeRun& run) {
        const auto path = h.variant_store_path(input.corpus, name, level);
        write_variant_store(path, run);
        out << name << " L" << level << ": " << run.variants.size() << " variants, "
            << run.failures.size() << " failures -> " << path.string() << "\n";
      };
      if (!at_from.empty()) {
        const auto parents = read_variant_store(at_from);
        validate_variant_chain(parents, input.corpus);
        emit(detail::run_name_for_store(at_from) + "2neutral", 2,
             cf.second_level_set(parents, config.max_parallel));
      } else if (at_target == "mixed") {
        emit("mixed", 1, cf.mixed_adversarial_set(input.corpus, config.max_parallel));
      } else {
        std::vector<SentimentTarget> targets;
        if (at_target == "all") targets.assign(kSentimentTargets.begin(), kSentimentTargets.end());
        else targets.push_back(parse_sentiment(at_target));
        for (SentimentTarget t : targets) {
          const ReframeRun run = cf.reframe_corpus(input.corpus, t, config.max_parallel);
          emit(std::string(to_string(t)), 1, run);
          if (at_second) {
            emit(std::string(to_string(t)) + "2neutral", 2,
                 cf.second_level_set(run.variants, config.max_parallel));
          }
        }
      }
      detail::print_usage_summary(h, err);
      return 0;
    }

    if (*detect_cmd) {
      const CorpusInput input = CorpusInput::load(de_corpus);
      std::vector<EvalItem> items;
      std::string name = de_name;
      if (de_variants.empty()) {
        items = eval_items(input.corpus.documents);
        if (name.empty()) name = "original";
      } else {
        const auto variants = read_variant_store(de_variants);
        validate_variant_chain(variants, input.corpus, {}, false);
        items = eval_items(variants);
        if (name.empty()) name = detail::run_name_for_store(de_variants);
      }
      const auto preds = h.evaluate_and_store(items, name);
      const ScoredRun scored = score_predictions(input.corpus, preds, config.parse_policy);
      out << name << ": " << preds.size() << " predictions (" << scored.unparseable
          << " unparseable, " << scored.errors << " errors) -> " << h.prediction_path(name).string()
          << "\n";
      detail::print_usage_summary(h, err);
      return 0;
    }

    if (*flips_cmd) {
      const CorpusInput input = CorpusInput::load(fl_corpus);
      Json r;
      if (fl_original.empty()) {
        if (!fl_sets.empty()) fail(ErrorCode::kInvalidArgument, "--set needs --original");
        r = run_flip_analysis(h, input);
      } else {
        if (fl_sets.empty()) fail(ErrorCode::kInvalidArgument, "--original needs at least one --set");
        std::vector<std::pair<std::string, std::vector<Prediction>>> sets;
        for (const auto& s : fl_sets) {
          auto [name, path] = detail::name_path(s);
          sets.emplace_back(name, read_prediction_store(path));
        }
        Json body = flip_report(input.corpus, read_prediction_store(fl_original), sets,
                                config.parse_policy);
        r["kind"] = body["kind"];
        r["manifest"] = to_json(h.manifest("flip_analysis", input));
        r["dataset"] = config.dataset;
        r["detector"] = config.detector_id;
        r["original"] = body["original"];
        r["sets"] = body["sets"];
      }
      out << emit_report(h, "flips", r);
      detail::print_usage_summary(h, err);
      return 0;
    }

    if (*eval_cmd) {
      const CorpusInput input = CorpusInput::load(ev_corpus);
      if (ev_predictions.empty()) {
        out << emit_report(h, "attack_eval", run_attack_eval(h, input));
        detail::print_usage_summary(h, err);
        return 0;
      }
      Json r;
      r["kind"] = "metrics";
      r["manifest"] = to_json(h.manifest("metrics", input));
      r["dataset"] = config.dataset;
      r["detector"] = config.detector_id;
      const auto preds = read_prediction_store(ev_predictions);
      const MetricsReport m = evaluate_predictions(input.corpus, preds, config.parse_policy);
      Json sets = Json::array();
      sets.push_back({{"set", std::filesystem::path(ev_predictions).stem().string()}, {"metrics", to_json(m)}});
      r["drop"] = nullptr;
      if (!ev_reference.empty()) {
        const MetricsReport ref =
            evaluate_predictions(input.corpus, read_prediction_store(ev_reference), config.parse_policy);
        sets.insert(sets.begin(), Json{{"set", std::filesystem::path(ev_reference).stem().string()},
                                       {"metrics", to_json(ref)}});
        r["drop"] = round2(performance_drop(ref.macro_f1, m.macro_f1));
      }
      r["sets"] = std::move(sets);
      out << emit_report(h, "metrics", r);
      return 0;
    }

    if (*judge_cmd) {
      const CorpusInput input = CorpusInput::load(ju_corpus);
      const auto variants = read_variant_store(ju_variants);
      validate_variant_chain(variants, input.corpus, {}, false);
      const auto outcomes = h.judge().judge_all(input.corpus, variants, config.max_parallel);
      std::vector<JudgeVerdict> verdicts;
      std::vector<Json> records;
      std::size_t failed = 0;
      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (!outcomes[i].ok()) {
          ++failed;
          err << "judge failed for " << variants[i].variant_id << ": " << outcomes[i].error().what() << "\n";
          continue;
        }
        verdicts.push_back(outcomes[i].value());
        records.push_back(to_json(verdicts.back()));
      }
      const auto path = h.out("judge") / (std::filesystem::path(ju_variants).stem().string() + ".verdicts.jsonl");
      io::write_file_atomic(path, io::to_jsonl(records));
      out << verdicts.size() << " verdicts (" << failed << " failed) -> " << path.string() << "\n";
      if (!ju_human.empty()) {
        const auto policy = ju_policy == "exclude" ? JudgeFailurePolicy::kExclude
                                                   : JudgeFailurePolicy::kCountAsDisagreement;
        Json r;
        r["kind"] = "agreement";
        r["manifest"] = to_json(h.manifest("agreement", input));
        Json annotators = Json::array();
        for (const auto& [annotator, flips] : export_agreement_input(ju_human)) {
          const AgreementResult a = judge_agreement(flips, verdicts, policy);
          annotators.push_back({{"annotator", annotator}, {"pairs", a.pairs}, {"kappa", a.kappa},
                                {"unparseable_excluded", a.unparseable_excluded}});
        }
        r["annotators"] = std::move(annotators);
        out << emit_report(h, "agreement", r);
      }
      detail::print_usage_summary(h, err);
      return 0;
    }

    if (*train_cmd) {
      const TrainingExport e = export_neutralized_training_set(h, CorpusInput::load(tr_corpus));
      out << e.records << " neutralized records (" << e.failures << " failures) -> "
          << e.path.string() << "\n";
      detail::print_usage_summary(h, err);
      return 0;
    }

    if (*gen_cmd) {
      std::vector<std::pair<std::string, std::filesystem::path>> sets;
      for (const auto& s : ge_sets) sets.push_back(detail::name_path(s));
      out << emit_report(h, "generalization", run_generalization(h, sets));
      detail::print_usage_summary(h, err);
      return 0;
    }

    if (*cons_cmd) {
      out << emit_report(h, "consistency", run_consistency(h, CorpusInput::load(co_corpus)));
      detail::print_usage_summary(h, err);
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

inline int main(int argc, char** argv) {
  return run(std::vector<std::string>(argv + 1, argv + argc));
}

}  // namespace adsent::cli
