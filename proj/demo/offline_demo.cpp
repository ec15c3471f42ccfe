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
// Runs the flip analysis on demo/news.csv without any model server. A toy
// transport stands in for the OpenAI-compatible endpoint: it rewrites
// articles by prepending a tone word and "detects" fake news from a few
// hedging phrases, with negative tone nudging verdicts toward fake.
//
// Usage: adsent_offline_demo <news.csv> <output-dir>
#include <iostream>

#include "adsent/experiment.hpp"

namespace {

class ToyTransport : public adsent::Transport {
 public:
  adsent::HttpReply post(const adsent::Endpoint&, std::string_view,
                         const std::string& json_body) override {
    const auto request = adsent::Json::parse(json_body);
    const std::string prompt = request["messages"].back()["content"];
    return {200, reply(answer(prompt)).dump(), ""};
  }

 private:
  static adsent::Json reply(const std::string& content) {
    return {{"choices", {{{"index", 0},
                          {"message", {{"role", "assistant"}, {"content", content}}},
                          {"finish_reason", "stop"}}}}};
  }

  static bool contains(std::string_view s, std::string_view needle) {
    return s.find(needle) != std::string_view::npos;
  }

  static std::string answer(const std::string& prompt) {
    const std::string_view rewrite = "Rewrite the following article with ";
    if (prompt.rfind(rewrite, 0) == 0) {
      const std::string article = prompt.substr(prompt.find("\n\n") + 2);
      if (contains(prompt, "with positive sentiment")) return "Encouragingly, " + article;
      if (contains(prompt, "with negative sentiment")) return "Alarmingly, " + article;
      return article;
    }
    if (prompt.rfind("Is this news article fake or real?", 0) == 0) {
      const bool hedged = contains(prompt, "claims") || contains(prompt, "According to") ||
                          contains(prompt, "tabloid") || contains(prompt, "viral");
      const bool alarmed = contains(prompt, "Alarmingly");
      const bool upbeat = contains(prompt, "Encouragingly");
      if (alarmed && contains(prompt, "voted")) return "Fake";
      if (upbeat && contains(prompt, "tabloid")) return "Real";
      return hedged ? "Fake" : "Real";
    }
    return "Yes";
  }
};

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: " << argv[0] << " <news.csv> <output-dir>\n";
    return 2;
  }
  try {
    adsent::IngestOptions opt;
    opt.name = "demo-news";
    opt.columns.title = "headline";
    opt.columns.text = "body";
    opt.columns.label = "verdict";
    opt.columns.timestamp = "published";
    adsent::CorpusInput input{adsent::ingest(argv[1], adsent::CorpusFormat::kDelimitedTable, opt),
                              std::nullopt};

    adsent::HarnessConfig config;
    config.experiment_id = "offline-demo";
    config.dataset = "demo-news";
    config.output_dir = argv[2];
    config.cache_root = config.output_dir / "cache";
    config.counterfeiter.base_url = config.detector.base_url = "http://toy.invalid/v1";
    config.counterfeiter.model = config.detector.model = "toy";
    config.detector_id = "toy-zs";

    const adsent::Harness harness(config, std::make_shared<ToyTransport>());
    const adsent::Json report = adsent::run_flip_analysis(harness, input);
    std::cout << adsent::emit_report(harness, "flips", report);
    std::cout << "report written to " << (config.output_dir / "reports" / "flips.json").string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
