// Copyright 2026 The FAC Toolkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "fac/server.hpp"

#include <sys/socket.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "fac/common.hpp"
#include "httplib.h"

namespace fac {
namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

}  // namespace

RatingServer::RatingServer(SampleManifest manifest, std::vector<ListeningSession> sessions, RatingStore& store,
                           std::filesystem::path static_dir)
    : manifest_(std::move(manifest)), store_(store), http_(std::make_unique<httplib::Server>()) {
  manifest_.validate();
  for (auto& s : sessions) {
    for (const auto& t : s.tasks) {
      if (!manifest_.find(t.sample_id)) {
        throw Error("session '" + s.listener_id + "' references unknown sample '" + t.sample_id + "'");
      }
    }
    const std::string id = s.listener_id;
    if (!sessions_.emplace(id, std::move(s)).second) throw Error("duplicate session for '" + id + "'");
  }
  // SO_REUSEPORT (httplib's default) would let a second server share a busy port.
  http_->set_socket_options([](int sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  if (!static_dir.empty() && !http_->set_mount_point("/", static_dir.string())) {
    throw Error("static directory " + static_dir.string() + " does not exist");
  }
  install_routes();
}

RatingServer::~RatingServer() { stop(); }

void RatingServer::install_routes() {
  http_->Get(R"(/api/session/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) return send_error(res, 404, "unknown listener '" + id + "'");
    std::vector<bool> done;
    for (const auto& t : it->second.tasks) done.push_back(store_.contains(id, t.sample_id, t.axis));
    send_json(res, 200, session_payload(it->second, done));
  });

  http_->Get(R"(/api/audio/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const TestSample* s = manifest_.find(id);
    if (!s) return send_error(res, 404, "unknown sample '" + id + "'");
    std::ifstream in(s->audio, std::ios::binary);
    if (!in) return send_error(res, 500, "audio for sample '" + id + "' is unavailable");
    std::ostringstream bytes;
    bytes << in.rdbuf();
    res.status = 200;
    res.set_content(bytes.str(), "audio/wav");
  });

  http_->Post("/api/rating", [this](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      return send_error(res, 400, "body is not valid JSON");
    }
    if (!body.is_object() || !body.contains("listener_id") || !body.contains("sample_id") ||
        !body.contains("axis") || !body.contains("value") || !body["listener_id"].is_string() ||
        !body["sample_id"].is_string() || !body["axis"].is_string()) {
      return send_error(res, 400, "expected {listener_id, sample_id, axis, value}");
    }
    const std::string listener = body["listener_id"];
    const std::string sample = body["sample_id"];
    const auto session = sessions_.find(listener);
    if (session == sessions_.end()) return send_error(res, 404, "unknown listener '" + listener + "'");
    const TestSample* s = manifest_.find(sample);
    if (!s) return send_error(res, 404, "unknown sample '" + sample + "'");
    Axis axis;
    try {
      axis = parse_axis(body["axis"]);
    } catch (const Error& e) {
      return send_error(res, 422, e.what());
    }
    const auto& tasks = session->second.tasks;
    const bool assigned = std::any_of(tasks.begin(), tasks.end(), [&](const SessionTask& t) {
      return t.sample_id == sample && t.axis == axis;
    });
    if (!assigned) return send_error(res, 404, "no such task in this listener's session");
    const auto& v = body["value"];
    if (!v.is_number_integer() || !in_scale(axis, v.get<int>())) {
      return send_error(res, 422, std::string("value outside the ") + axis_name(axis) + " scale [" +
                                      std::to_string(axis_min(axis)) + ", " + std::to_string(axis_max(axis)) +
                                      "]");
    }
    RatingRecord r{listener, sample, s->system_id, axis, v.get<int>(), ""};
    try {
      if (store_.append(std::move(r)) == RatingStore::AppendStatus::kDuplicate) {
        return send_error(res, 409, "rating already recorded");
      }
    } catch (const Error& e) {
      return send_error(res, 500, e.what());
    }
    send_json(res, 200, {{"status", "stored"}});
  });

  http_->Get("/api/export.csv", [this](const httplib::Request&, httplib::Response& res) {
    res.status = 200;
    res.set_content(store_.export_csv(), "text/csv");
  });
}

int RatingServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = http_->bind_to_any_port(host);
    if (port_ < 0) throw Error("cannot bind to any port on " + host);
  } else {
    if (!http_->bind_to_port(host, port)) {
      throw Error("cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
    }
    port_ = port;
  }
  return port_;
}

void RatingServer::run() {
  if (port_ < 0) throw Error("server is not bound");
  http_->listen_after_bind();
}

void RatingServer::start() {
  if (port_ < 0) throw Error("server is not bound");
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
}

void RatingServer::stop() {
  if (http_) http_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace fac
