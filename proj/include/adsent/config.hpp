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

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "adsent/detector.hpp"
#include "adsent/error.hpp"
#include "adsent/llm_client.hpp"
#include "adsent/text.hpp"

namespace adsent {

struct EndpointConfig {
  std::string base_url;
  std::string model;
  double temperature = 0.0;
  int max_new_tokens = kVerdictMaxTokens;
  std::vector<std::string> stop;
  long timeout_ms = 120000;

  Endpoint endpoint() const {
    Endpoint e = Endpoint::from_config(base_url);
    e.timeout = std::chrono::milliseconds(timeout_ms);
    return e;
  }

  GenParams params() const { return GenParams{model, temperature, max_new_tokens, stop}; }

  static EndpointConfig with_budget(int tokens) {
    EndpointConfig c;
    c.max_new_tokens = tokens;
    return c;
  }
};

/// Harness configuration. The file is INI-style:
///
///   [run]           experiment_id, dataset, cache_root, output_dir, max_parallel,
///                   parse_failure_policy (count_as_wrong | exclude)
///   [retry]         max_attempts, base_delay_ms, factor, jitter
///   [counterfeiter] base_url, model, temperature, max_new_tokens, stop, timeout_ms
///   [detector]      id, kind (zero_shot_llm | remote_classifier | adsent),
///                   classifier (AdSent stage: zero_shot_llm | remote_classifier),
///                   char_budget, plus the endpoint keys above
///   [judge]         endpoint keys
///
/// stop takes a '|' separated list. base_url falls back to ADSENT_API_BASE;
/// the bearer token always comes from ADSENT_API_KEY.
struct HarnessConfig {
  std::string experiment_id = "adsent";
  std::string dataset = "dataset";
  std::filesystem::path cache_root = ".adsent-cache";
  std::filesystem::path output_dir = "adsent-out";
  std::size_t max_parallel = 4;
  ParseFailurePolicy parse_policy = ParseFailurePolicy::kCountAsWrong;
  RetryPolicy retry;

  EndpointConfig counterfeiter = EndpointConfig::with_budget(kRewriteMaxTokens);
  EndpointConfig detector = EndpointConfig::with_budget(kVerdictMaxTokens);
  EndpointConfig judge = EndpointConfig::with_budget(kVerdictMaxTokens);
  std::string detector_id = "detector";
  DetectorKind detector_kind = DetectorKind::kZeroShotLlm;
  DetectorKind adsent_classifier = DetectorKind::kRemoteClassifier;
  std::size_t char_budget = kDefaultCharBudget;

  DetectorSpec detector_spec() const {
    DetectorSpec s;
    s.id = detector_id;
    s.kind = detector_kind;
    s.endpoint = detector.endpoint();
    s.params = detector.params();
    if (detector_kind == DetectorKind::kAdSent) {
      s.counterfeiter_endpoint = counterfeiter.endpoint();
      s.counterfeiter_params = counterfeiter.params();
    }
    s.adsent_classifier = adsent_classifier;
    s.char_budget = char_budget;
    return s;
  }

  static HarnessConfig parse(const std::string& ini_text, const std::string& origin = "config") {
    boost::property_tree::ptree pt;
    std::istringstream in(ini_text);
    try {
      boost::property_tree::read_ini(in, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
      fail(ErrorCode::kParse, origin + ": " + e.what());
    }
    static const std::map<std::string, std::set<std::string>> kKnown = {
        {"run", {"experiment_id", "dataset", "cache_root", "output_dir", "max_parallel",
                 "parse_failure_policy"}},
        {"retry", {"max_attempts", "base_delay_ms", "factor", "jitter"}},
        {"counterfeiter", {"base_url", "model", "temperature", "max_new_tokens", "stop", "timeout_ms"}},
        {"detector", {"base_url", "model", "temperature", "max_new_tokens", "stop", "timeout_ms",
                      "id", "kind", "classifier", "char_budget"}},
        {"judge", {"base_url", "model", "temperature", "max_new_tokens", "stop", "timeout_ms"}},
    };
    for (const auto& [section, body] : pt) {
      auto known = kKnown.find(section);
      if (known == kKnown.end()) fail(ErrorCode::kParse, origin + ": unknown section [" + section + "]");
      for (const auto& [key, value] : body) {
        if (!known->second.contains(key)) {
          fail(ErrorCode::kParse, origin + ": unknown key '" + key + "' in [" + section + "]");
        }
      }
    }

    HarnessConfig c;
    try {
      c.experiment_id = pt.get("run.experiment_id", c.experiment_id);
      c.dataset = pt.get("run.dataset", c.dataset);
      c.cache_root = pt.get("run.cache_root", c.cache_root.string());
      c.output_dir = pt.get("run.output_dir", c.output_dir.string());
      c.max_parallel = pt.get("run.max_parallel", c.max_parallel);
      if (auto p = pt.get_optional<std::string>("run.parse_failure_policy")) {
        c.parse_policy = parse_failure_policy(*p);
      }
      c.retry.max_attempts = pt.get("retry.max_attempts", c.retry.max_attempts);
      c.retry.base_delay = std::chrono::milliseconds(
          pt.get("retry.base_delay_ms", static_cast<long>(c.retry.base_delay.count())));
      c.retry.factor = pt.get("retry.factor", c.retry.factor);
      c.retry.jitter = pt.get("retry.jitter", c.retry.jitter);
      read_endpoint(pt, "counterfeiter", c.counterfeiter);
      read_endpoint(pt, "detector", c.detector);
      read_endpoint(pt, "judge", c.judge);
      c.detector_id = pt.get("detector.id", c.detector_id);
      if (auto k = pt.get_optional<std::string>("detector.kind")) c.detector_kind = parse_detector_kind(*k);
      if (auto k = pt.get_optional<std::string>("detector.classifier")) {
        c.adsent_classifier = parse_detector_kind(*k);
      }
      c.char_budget = pt.get("detector.char_budget", c.char_budget);
    } catch (const boost::property_tree::ptree_error& e) {
      fail(ErrorCode::kParse, origin + ": " + e.what());
    }
    if (c.max_parallel == 0) fail(ErrorCode::kInvalidArgument, origin + ": max_parallel must be >= 1");
    if (c.char_budget == 0) fail(ErrorCode::kInvalidArgument, origin + ": char_budget must be >= 1");
    return c;
  }

  static HarnessConfig load(const std::filesystem::path& path) {
    return parse(io::read_file(path), path.string());
  }

 private:
  static void read_endpoint(const boost::property_tree::ptree& pt, const std::string& section,
                            EndpointConfig& e) {
    e.base_url = pt.get(section + ".base_url", e.base_url);
    e.model = pt.get(section + ".model", e.model);
    e.temperature = pt.get(section + ".temperature", e.temperature);
    e.max_new_tokens = pt.get(section + ".max_new_tokens", e.max_new_tokens);
    e.timeout_ms = pt.get(section + ".timeout_ms", e.timeout_ms);
    if (auto stop = pt.get_optional<std::string>(section + ".stop")) {
      e.stop.clear();
      std::string item;
      std::istringstream ss(*stop);
      while (std::getline(ss, item, '|')) {
        if (!item.empty()) e.stop.push_back(item);
      }
    }
    if (e.temperature < 0) fail(ErrorCode::kInvalidArgument, section + ": temperature must be >= 0");
    if (e.max_new_tokens <= 0) {
      fail(ErrorCode::kInvalidArgument, section + ": max_new_tokens must be positive");
    }
  }
};

}  // namespace adsent
