// Copyright 2026 The Chatlink Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Annotation service behind `chatlink serve`. Handlers are plain methods
// returning (status, JSON body); mount() binds them to an httplib server.

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "chatlink/corpus.hpp"
#include "chatlink/error.hpp"
#include "chatlink/eval.hpp"

namespace chatlink {

struct ServiceResponse {
  int status = 200;
  json body;
};

class AnnotationService {
 public:
  // `predictions` maps chat_id to model distances; `annotation_path` (may be
  // empty) is rewritten atomically after each accepted PUT.
  AnnotationService(Corpus corpus, int window, std::filesystem::path annotation_path = {},
                    std::map<std::string, std::vector<int>> predictions = {})
      : corpus_(std::move(corpus)),
        window_(window),
        annotation_path_(std::move(annotation_path)),
        predictions_(std::move(predictions)) {}

  ServiceResponse list_chats() const {
    std::shared_lock lock(mu_);
    json chats = json::array();
    for (const auto& c : corpus_.chats) {
      json annotators = json::array();
      if (const auto* a = corpus_.find_annotations(c.chat_id))
        for (const auto& [id, _] : a->entries) annotators.push_back(id);
      chats.push_back({{"chat_id", c.chat_id},
                       {"n_messages", c.size()},
                       {"annotators", annotators},
                       {"n_annotations", annotators.size()}});
    }
    return {200, {{"chats", std::move(chats)}, {"window", window_}}};
  }

  ServiceResponse get_chat(const std::string& id) const {
    std::shared_lock lock(mu_);
    const Chat* chat = corpus_.find_chat(id);
    if (!chat) return not_found(id);
    json body = chat_to_json(*chat);
    json ann = json::object();
    if (const auto* a = corpus_.find_annotations(id))
      for (const auto& [annotator, labels] : a->entries) ann[annotator] = distances_of(labels);
    body["annotations"] = std::move(ann);
    body["window"] = window_;
    if (auto it = predictions_.find(id); it != predictions_.end())
      body["predictions"] = it->second;
    return {200, std::move(body)};
  }

  ServiceResponse put_annotation(const std::string& chat_id, const std::string& annotator,
                                 const std::string& payload) {
    json body;
    try {
      body = json::parse(payload);
    } catch (const json::exception& e) {
      return error(400, std::string("malformed JSON: ") + e.what());
    }
    if (!body.is_object() || !body.contains("distances"))
      return error(400, "body needs a distances array");
    if (body.contains("chat_id") && body["chat_id"] != chat_id)
      return error(400, "chat_id in body does not match the URL");
    if (body.contains("annotator_id") && body["annotator_id"] != annotator)
      return error(400, "annotator_id in body does not match the URL");
    if (annotator.empty()) return error(400, "annotator id must be non-empty");

    std::unique_lock lock(mu_);
    const Chat* chat = corpus_.find_chat(chat_id);
    if (!chat) return not_found(chat_id);
    std::vector<LinkLabel> labels;
    try {
      labels = labels_from_distances(detail::parse_distances(body["distances"]));
      validate_labels(labels, chat->size(), window_);
    } catch (const ValidationError& e) {
      return error(400, e.what());
    }
    auto it = std::find_if(corpus_.annotations.begin(), corpus_.annotations.end(),
                           [&](const auto& a) { return a.chat_id == chat_id; });
    if (it == corpus_.annotations.end()) {
      corpus_.annotations.push_back({chat_id, {}});
      it = std::prev(corpus_.annotations.end());
    }
    it->entries[annotator] = labels;
    if (!annotation_path_.empty()) persist();
    return {200, annotation_record(chat_id, annotator, labels)};
  }

  ServiceResponse agreement(const std::string& id) const {
    std::shared_lock lock(mu_);
    const Chat* chat = corpus_.find_chat(id);
    if (!chat) return not_found(id);
    json rows = json::array();
    json kappa = nullptr;
    const auto* set = corpus_.find_annotations(id);
    if (set && !set->entries.empty()) {
      const auto modal = majority_labels(*set);
      for (std::size_t i = 0; i < chat->size(); ++i) {
        json labels = json::object();
        int agree = 0;
        for (const auto& [annotator, l] : set->entries) {
          labels[annotator] = l[i].distance;
          agree += l[i].distance == modal[i].distance;
        }
        rows.push_back({{"index", i},
                        {"labels", std::move(labels)},
                        {"modal", modal[i].distance},
                        {"agreement", static_cast<double>(agree) /
                                          static_cast<double>(set->entries.size())}});
      }
      if (set->entries.size() >= 2) kappa = fleiss_kappa({*set});
    }
    return {200, {{"chat_id", id},
                  {"n_annotators", set ? set->entries.size() : 0},
                  {"per_message", std::move(rows)},
                  {"kappa", kappa}}};
  }

  Corpus snapshot() const {
    std::shared_lock lock(mu_);
    return corpus_;
  }

 private:
  static ServiceResponse error(int status, const std::string& msg) {
    return {status, {{"error", msg}}};
  }
  static ServiceResponse not_found(const std::string& id) {
    return error(404, "unknown chat " + id);
  }

  // Caller holds the exclusive lock.
  void persist() const {
    auto tmp = annotation_path_;
    tmp += ".tmp";
    save_annotations(tmp, corpus_.annotations);
    std::filesystem::rename(tmp, annotation_path_);
  }

  mutable std::shared_mutex mu_;
  Corpus corpus_;
  int window_;
  std::filesystem::path annotation_path_;
  std::map<std::string, std::vector<int>> predictions_;
};

inline void mount(httplib::Server& server, AnnotationService& svc,
                  const std::filesystem::path& static_dir = {}) {
  auto reply = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get("/api/chats", [&svc, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, svc.list_chats());
  });
  server.Get(R"(/api/chats/([^/]+))", [&svc, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.get_chat(req.matches[1]));
  });
  server.Put(R"(/api/annotations/([^/]+)/([^/]+))",
             [&svc, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, svc.put_annotation(req.matches[1], req.matches[2], req.body));
             });
  server.Get(R"(/api/agreement/([^/]+))", [&svc, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.agreement(req.matches[1]));
  });
  if (!static_dir.empty() && std::filesystem::is_directory(static_dir))
    server.set_mount_point("/", static_dir.string());
}

}  // namespace chatlink
