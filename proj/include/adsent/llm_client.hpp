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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "adsent/digest.hpp"
#include "adsent/error.hpp"
#include "adsent/io.hpp"
#include "adsent/outcome.hpp"
#include "adsent/parallel.hpp"
#include "adsent/text.hpp"

namespace adsent {

inline constexpr int kRewriteMaxTokens = 2048;
inline constexpr int kVerdictMaxTokens = 8;

/// Decoding parameters. The default is greedy decoding.
struct GenParams {
  std::string model;
  double temperature = 0.0;
  int max_new_tokens = kVerdictMaxTokens;
  std::vector<std::string> stop;

  friend bool operator==(const GenParams&, const GenParams&) = default;
};

inline GenParams rewrite_params(std::string model) {
  return GenParams{std::move(model), 0.0, kRewriteMaxTokens, {}};
}

inline GenParams verdict_params(std::string model) {
  return GenParams{std::move(model), 0.0, kVerdictMaxTokens, {}};
}

struct ChatRequest {
  std::optional<std::string> system;
  std::string user;
  GenParams params;
};

enum class FinishReason { kStop, kLength, kError };

inline std::string_view to_string(FinishReason r) {
  switch (r) {
    case FinishReason::kStop: return "stop";
    case FinishReason::kLength: return "length";
    case FinishReason::kError: return "error";
  }
  return "error";
}

inline FinishReason parse_finish_reason(std::string_view s) {
  if (s == "length") return FinishReason::kLength;
  if (s == "error") return FinishReason::kError;
  return FinishReason::kStop;
}

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  friend bool operator==(const Usage&, const Usage&) = default;
};

struct ChatResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::kStop;
  std::optional<Usage> usage;
  std::uint64_t latency_ms = 0;
  int attempts = 1;
  std::int64_t created_at = 0;  // epoch seconds when the generation was produced

  bool truncated() const { return finish_reason == FinishReason::kLength; }

  friend bool operator==(const ChatResponse&, const ChatResponse&) = default;
};

/// Where a model or classifier is served. The api key is resolved once, at
/// construction time, from the environment.
struct Endpoint {
  std::string base_url;
  std::string api_key;
  std::chrono::milliseconds timeout{120000};

  static Endpoint from_config(std::string base_url) {
    if (base_url.empty()) {
      if (const char* env = std::getenv("ADSENT_API_BASE")) base_url = env;
    }
    Endpoint e;
    e.base_url = std::move(base_url);
    if (const char* key = std::getenv("ADSENT_API_KEY")) e.api_key = key;
    return e;
  }
};

struct CacheKey {
  std::string digest;

  friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

inline Json to_json(const ChatRequest& r) {
  Json j;
  j["model"] = r.params.model;
  j["system"] = r.system ? Json(*r.system) : Json(nullptr);
  j["user"] = r.user;
  j["temperature"] = r.params.temperature;
  j["max_new_tokens"] = r.params.max_new_tokens;
  j["stop"] = r.params.stop;
  return j;
}

inline CacheKey make_cache_key(const ChatRequest& r) {
  Json j;
  j["endpoint_model"] = r.params.model;
  j["request"] = to_json(r);
  return CacheKey{sha256_hex(j.dump())};
}

/// Body of POST <base_url>/chat/completions.
inline std::string wire_body(const ChatRequest& r) {
  Json j;
  j["model"] = r.params.model;
  Json messages = Json::array();
  if (r.system) messages.push_back({{"role", "system"}, {"content", *r.system}});
  messages.push_back({{"role", "user"}, {"content", r.user}});
  j["messages"] = std::move(messages);
  j["temperature"] = r.params.temperature;
  j["max_tokens"] = r.params.max_new_tokens;
  if (!r.params.stop.empty()) j["stop"] = r.params.stop;
  return j.dump();
}

/// Reads choices[0].message.content verbatim from a chat-completions reply.
inline ChatResponse parse_wire_response(std::string_view body) {
  const auto malformed = [](const std::string& why) -> ChatResponse {
    fail(ErrorCode::kMalformedResponse, "malformed response: " + why);
  };
  Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return malformed("not a JSON object");
  auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) {
    return malformed("missing choices");
  }
  const auto& first = (*choices)[0];
  if (!first.is_object() || !first.contains("message") || !first["message"].is_object()) {
    return malformed("missing choices[0].message");
  }
  const auto& msg = first["message"];
  auto content = msg.find("content");
  if (content == msg.end() || !content->is_string()) {
    return malformed("missing choices[0].message.content");
  }
  ChatResponse out;
  out.text = content->get<std::string>();
  if (auto fr = first.find("finish_reason"); fr != first.end() && fr->is_string()) {
    out.finish_reason = parse_finish_reason(fr->get<std::string>());
  }
  if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
    Usage usage;
    usage.prompt_tokens = u->value("prompt_tokens", std::int64_t{0});
    usage.completion_tokens = u->value("completion_tokens", std::int64_t{0});
    out.usage = usage;
  }
  return out;
}

inline Json to_json(const ChatResponse& r) {
  Json j;
  j["text"] = r.text;
  j["finish_reason"] = to_string(r.finish_reason);
  j["usage"] = r.usage ? Json{{"prompt_tokens", r.usage->prompt_tokens},
                              {"completion_tokens", r.usage->completion_tokens}}
                       : Json(nullptr);
  j["latency_ms"] = r.latency_ms;
  j["attempts"] = r.attempts;
  j["created_at"] = r.created_at;
  return j;
}

inline ChatResponse response_from_json(const Json& j) {
  ChatResponse r;
  r.text = j.at("text").get<std::string>();
  r.finish_reason = parse_finish_reason(j.at("finish_reason").get<std::string>());
  if (const auto& u = j.at("usage"); !u.is_null()) {
    r.usage = Usage{u.at("prompt_tokens").get<std::int64_t>(),
                    u.at("completion_tokens").get<std::int64_t>()};
  }
  r.latency_ms = j.at("latency_ms").get<std::uint64_t>();
  r.attempts = j.at("attempts").get<int>();
  r.created_at = j.at("created_at").get<std::int64_t>();
  return r;
}

/// status 0 means the request never produced an HTTP response.
struct HttpReply {
  int status = 0;
  std::string body;
  std::string error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpReply post(const Endpoint& endpoint, std::string_view path,
                         const std::string& json_body) = 0;
};

inline bool is_retryable(const HttpReply& r) {
  return r.status == 0 || r.status == 429 || r.status >= 500;
}

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
  double jitter = 0.2;  // +/- fraction of the nominal delay
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };

  std::chrono::milliseconds delay_before_retry(int retry, std::mt19937_64& rng) const {
    double nominal = static_cast<double>(base_delay.count());
    for (int i = 1; i < retry; ++i) nominal *= factor;
    std::uniform_real_distribution<double> u(1.0 - jitter, 1.0 + jitter);
    return std::chrono::milliseconds(static_cast<std::int64_t>(nominal * u(rng)));
  }
};

inline void log_warning(const std::string& msg) {
  static std::mutex m;
  std::lock_guard lock(m);
  std::cerr << "[adsent] warning: " << msg << '\n';
}

/// Content-addressed response store: <root>/<model>/<xx>/<digest>, one file
/// per key, written atomically.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }

  std::filesystem::path path_for(std::string_view model, const CacheKey& key) const {
    return root_ / text::path_component(model) / key.digest.substr(0, 2) / key.digest;
  }

  /// A corrupt or mismatching entry is logged and reported as a miss.
  std::optional<ChatResponse> lookup(std::string_view model, const CacheKey& key) const {
    const auto path = path_for(model, key);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    try {
      const Json entry = Json::parse(io::read_file(path));
      const Json& response = entry.at("response");
      if (entry.at("digest").get<std::string>() != key.digest ||
          entry.at("checksum").get<std::string>() != sha256_hex(response.dump())) {
        log_warning("cache entry digest mismatch, regenerating: " + path.string());
        return std::nullopt;
      }
      return response_from_json(response);
    } catch (const std::exception& e) {
      log_warning("corrupt cache entry, regenerating: " + path.string() + " (" + e.what() + ")");
      return std::nullopt;
    }
  }

  void store(std::string_view model, const CacheKey& key, const ChatResponse& response) const {
    Json entry;
    entry["digest"] = key.digest;
    entry["model"] = model;
    entry["response"] = to_json(response);
    entry["checksum"] = sha256_hex(entry["response"].dump());
    io::write_file_atomic(path_for(model, key), entry.dump(2) + "\n");
  }

 private:
  std::filesystem::path root_;
};

struct ClientOptions {
  RetryPolicy retry;
  std::optional<std::filesystem::path> cache_root;
  std::uint64_t jitter_seed = 0;
};

/// Shareable handle over a Transport. All methods are safe to call
/// concurrently.
class LlmClient {
 public:
  LlmClient(std::shared_ptr<Transport> transport, ClientOptions options = {})
      : transport_(std::move(transport)), options_(std::move(options)),
        rng_(options_.jitter_seed) {
    if (options_.cache_root) cache_.emplace(*options_.cache_root);
  }

  /// POSTs json_body to base_url + path, retrying transport failures, 5xx and
  /// 429 with exponential backoff. Returns the first 2xx reply.
  HttpReply post_json(const Endpoint& endpoint, std::string_view path,
                      const std::string& json_body, int* attempts_out = nullptr) {
    HttpReply last;
    const int max_attempts = std::max(1, options_.retry.max_attempts);
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
      if (attempt > 1) {
        std::chrono::milliseconds delay;
        {
          std::lock_guard lock(rng_mutex_);
          delay = options_.retry.delay_before_retry(attempt - 1, rng_);
        }
        if (options_.retry.sleep) options_.retry.sleep(delay);
      }
      ++network_calls_;
      last = transport_->post(endpoint, path, json_body);
      if (attempts_out) *attempts_out = attempt;
      if (last.status >= 200 && last.status < 300) return last;
      if (!is_retryable(last)) {
        fail(ErrorCode::kHttpStatus, "HTTP " + std::to_string(last.status) + " from " +
                                         endpoint.base_url + std::string(path) + ": " +
                                         last.body.substr(0, 200));
      }
    }
    const std::string why = last.status == 0 ? last.error : "HTTP " + std::to_string(last.status);
    fail(ErrorCode::kRetryExhausted, "retry budget exhausted after " +
                                         std::to_string(max_attempts) + " attempts: " + why);
  }

  ChatResponse complete(const Endpoint& endpoint, const ChatRequest& request) {
    if (text::trim(request.user).empty()) {
      fail(ErrorCode::kPrecondition, "chat request has an empty user prompt");
    }
    const auto start = std::chrono::steady_clock::now();
    int attempts = 0;
    const HttpReply reply = post_json(endpoint, "/chat/completions", wire_body(request), &attempts);
    ChatResponse out = parse_wire_response(reply.body);
    out.attempts = attempts;
    out.latency_ms = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start).count());
    out.created_at = std::chrono::duration_cast<std::chrono::seconds>(
        std::chrono::system_clock::now().time_since_epoch()).count();
    return out;
  }

  /// Cache hits return the stored response and touch no network. Without a
  /// configured cache this is complete().
  ChatResponse cached_complete(const Endpoint& endpoint, const ChatRequest& request) {
    if (!cache_) return complete(endpoint, request);
    const CacheKey key = make_cache_key(request);
    if (auto hit = cache_->lookup(request.params.model, key)) {
      ++cache_hits_;
      return *hit;
    }
    ChatResponse response = complete(endpoint, request);
    if (response.finish_reason != FinishReason::kError) {
      cache_->store(request.params.model, key, response);
    }
    return response;
  }

  std::vector<Outcome<ChatResponse>> batch_complete(
      const Endpoint& endpoint, std::span<const ChatRequest> requests,
      std::size_t max_parallel, BatchMode mode = BatchMode::kCollectErrors) {
    return parallel_map(
        requests, max_parallel,
        [&](const ChatRequest& r) { return cached_complete(endpoint, r); }, mode);
  }

  std::uint64_t network_calls() const { return network_calls_.load(); }
  std::uint64_t cache_hits() const { return cache_hits_.load(); }
  const ResponseCache* cache() const { return cache_ ? &*cache_ : nullptr; }

 private:
  std::shared_ptr<Transport> transport_;
  ClientOptions options_;
  std::optional<ResponseCache> cache_;
  std::atomic<std::uint64_t> network_calls_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::mutex rng_mutex_;
  std::mt19937_64 rng_;
};

}  // namespace adsent
