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

#include <httplib.h>

#include <string>
#include <string_view>

#include "adsent/llm_client.hpp"

namespace adsent {

/// Splits "http://host:port/v1" into the scheme-host-port part and the path
/// prefix that every request path is appended to.
struct BaseUrl {
  std::string origin;
  std::string prefix;

  static BaseUrl parse(std::string_view url) {
    const auto scheme_end = url.find("://");
    const auto host_begin = scheme_end == std::string_view::npos ? 0 : scheme_end + 3;
    const auto path_begin = url.find('/', host_begin);
    BaseUrl out;
    if (path_begin == std::string_view::npos) {
      out.origin = std::string(url);
    } else {
      out.origin = std::string(url.substr(0, path_begin));
      out.prefix = std::string(url.substr(path_begin));
      while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
    }
    return out;
  }
};

class HttpTransport : public Transport {
 public:
  HttpReply post(const Endpoint& endpoint, std::string_view path,
                 const std::string& json_body) override {
    if (endpoint.base_url.empty()) {
      return HttpReply{0, {}, "endpoint has no base URL (set it in the config or ADSENT_API_BASE)"};
    }
    const BaseUrl base = BaseUrl::parse(endpoint.base_url);
    httplib::Client client(base.origin);
    const auto secs = endpoint.timeout.count() / 1000;
    const auto usecs = (endpoint.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!endpoint.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + endpoint.api_key);
    }
    auto res = client.Post(base.prefix + std::string(path), headers, json_body,
                           "application/json");
    if (!res) return HttpReply{0, {}, httplib::to_string(res.error())};
    return HttpReply{res->status, res->body, {}};
  }
};

}  // namespace adsent
