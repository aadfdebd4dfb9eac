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


// HTTP service for listening tests:
//   GET  /api/session/{listener_id}   session tasks (JSON)
//   GET  /api/audio/{sample_id}       WAV bytes
//   POST /api/rating                  {listener_id, sample_id, axis, value}
//   GET  /api/export.csv              ratings CSV
// Status codes: 200 ok, 400 malformed body, 404 unknown id, 409 duplicate,
// 422 value outside the axis scale. Responses never carry system ids.

#ifndef FAC_SERVER_HPP_
#define FAC_SERVER_HPP_

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "fac/rating_store.hpp"
#include "fac/sessions.hpp"

namespace httplib {
class Server;
}

namespace fac {

class RatingServer {
 public:
  RatingServer(SampleManifest manifest, std::vector<ListeningSession> sessions, RatingStore& store,
               std::filesystem::path static_dir = {});
  ~RatingServer();
  RatingServer(const RatingServer&) = delete;
  RatingServer& operator=(const RatingServer&) = delete;

  // Port 0 picks a free port. Throws fac::Error when the port is taken.
  int bind(const std::string& host, int port);
  void run();    // blocks until stop()
  void start();  // runs on a background thread
  void stop();
  int port() const { return port_; }

 private:
  void install_routes();

  SampleManifest manifest_;
  std::map<std::string, ListeningSession> sessions_;
  RatingStore& store_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace fac

#endif  // FAC_SERVER_HPP_
