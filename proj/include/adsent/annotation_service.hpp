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

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "adsent/annotation.hpp"

namespace adsent {

struct AnnotationServiceOptions {
  bool hide_target = false;
  std::optional<std::filesystem::path> static_dir;  // UI bundle served at /
};

/// REST backend for the human fact-preservation protocol.
///
///   GET  /api/tasks/next?annotator=ID  next task that annotator has not labeled, 204 when done
///   POST /api/labels                   append one label; 400 malformed, 404 unknown task
///   GET  /api/progress[?annotator=ID]  labeled/total overall and per sentiment target
///   GET  /api/export                   every stored label with its effective flag
class AnnotationService {
 public:
  AnnotationService(std::vector<AnnotationTask> tasks, std::filesystem::path store_path,
                    AnnotationServiceOptions options = {})
      : tasks_(std::move(tasks)), store_(std::move(store_path)), options_(std::move(options)) {
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      if (!task_index_.emplace(tasks_[i].task_id, i).second) {
        fail(ErrorCode::kDuplicateId, "duplicate task id " + tasks_[i].task_id);
      }
    }
    for (const auto& s : store_.load()) {
      if (!task_index_.contains(s.label.task_id)) {
        fail(ErrorCode::kNotFound, "label store refers to unknown task " + s.label.task_id);
      }
      labels_.push_back(s.label);
    }
    routes();
  }

  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  bool bind(const std::string& host, int port) { return server_.bind_to_port(host, port); }
  int bind_to_any_port(const std::string& host) { return server_.bind_to_any_port(host); }

  /// Blocks until stop() is called.
  bool listen() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  static void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, Json{{"error", message}});
  }

  std::set<std::string> labeled_by(const std::optional<std::string>& annotator) const {
    std::set<std::string> out;
    for (const auto& l : labels_) {
      if (!annotator || l.annotator_id == *annotator) out.insert(l.task_id);
    }
    return out;
  }

  void routes() {
    server_.Get("/api/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
      const auto annotator = req.get_param_value("annotator");
      if (annotator.empty()) return send_error(res, 400, "missing annotator parameter");
      std::lock_guard lock(mutex_);
      const auto done = labeled_by(annotator);
      for (const auto& t : tasks_) {
        if (!done.contains(t.task_id)) return send_json(res, 200, to_json(t, !options_.hide_target));
      }
      res.status = 204;
    });

    server_.Post("/api/labels", [this](const httplib::Request& req, httplib::Response& res) {
      const Json body = Json::parse(req.body, nullptr, false);
      if (body.is_discarded()) return send_error(res, 400, "body is not JSON");
      AnnotationLabel label;
      try {
        label = label_from_json(body);
      } catch (const Error& e) {
        return send_error(res, 400, e.what());
      }
      if (!task_index_.contains(label.task_id)) {
        return send_error(res, 404, "unknown task_id " + label.task_id);
      }
      label.created_at = now_epoch_seconds();
      std::lock_guard lock(mutex_);
      try {
        store_.append(label);
      } catch (const Error& e) {
        return send_error(res, 500, e.what());
      }
      labels_.push_back(label);
      send_json(res, 201, to_json(label));
    });

    server_.Get("/api/progress", [this](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::string> annotator;
      if (req.has_param("annotator")) annotator = req.get_param_value("annotator");
      std::lock_guard lock(mutex_);
      const auto done = labeled_by(annotator);
      Json per_target = Json::object();
      std::size_t labeled = 0;
      for (SentimentTarget target : kSentimentTargets) {
        std::size_t total = 0, n_done = 0;
        for (const auto& t : tasks_) {
          if (t.target != target) continue;
          ++total;
          if (done.contains(t.task_id)) ++n_done;
        }
        if (total > 0) per_target[std::string(to_string(target))] = {{"total", total}, {"labeled", n_done}};
        labeled += n_done;
      }
      send_json(res, 200, Json{{"total", tasks_.size()}, {"labeled", labeled}, {"per_target", per_target}});
    });

    server_.Get("/api/export", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      std::map<std::pair<std::string, std::string>, std::size_t> latest;
      for (std::size_t i = 0; i < labels_.size(); ++i) {
        latest[{labels_[i].task_id, labels_[i].annotator_id}] = i;
      }
      Json out = Json::array();
      for (std::size_t i = 0; i < labels_.size(); ++i) {
        Json j = to_json(labels_[i]);
        j["sequence"] = i;
        j["effective"] = latest[{labels_[i].task_id, labels_[i].annotator_id}] == i;
        out.push_back(std::move(j));
      }
      send_json(res, 200, Json{{"labels", out}});
    });

    if (options_.static_dir) {
      server_.set_mount_point("/", options_.static_dir->string());
    } else {
      server_.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(
            "<!doctype html><title>adsent annotation</title>"
            "<p>No UI bundle configured. Start the service with --static &lt;dir&gt; "
            "or use the REST API under /api/.</p>",
            "text/html");
      });
    }
  }

  std::vector<AnnotationTask> tasks_;
  std::unordered_map<std::string, std::size_t> task_index_;
  LabelStore store_;
  AnnotationServiceOptions options_;
  std::vector<AnnotationLabel> labels_;
  mutable std::mutex mutex_;
  httplib::Server server_;
};

}  // namespace adsent
