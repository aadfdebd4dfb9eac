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


// ASR adapters: an external command and an HTTP endpoint.

#include <utility>

#include "fac/common.hpp"
#include "fac/evaluation.hpp"
#include "fac/subprocess.hpp"
#include "httplib.h"
#include "json.hpp"

namespace fac {

std::string CommandAsrClient::transcribe(const Utterance& u) const {
  TempDir tmp;
  const auto wav = tmp.path() / "in.wav";
  write_wav(wav, u.samples, u.sample_rate);
  const auto r = run_command(expand_command(command_, {{"wav", wav.string()}}));
  if (r.exit_code != 0) {
    throw Error("asr '" + id_ + "' command failed with exit code " + std::to_string(r.exit_code));
  }
  return trim(r.output);
}

HttpAsrClient::HttpAsrClient(std::string id, std::string host, int port, std::string path)
    : id_(std::move(id)), host_(std::move(host)), port_(port), path_(std::move(path)) {
  if (port_ <= 0 || port_ > 65535) throw Error("asr '" + id_ + "': invalid port " + std::to_string(port_));
  if (path_.empty() || path_[0] != '/') path_ = "/" + path_;
}

std::string HttpAsrClient::transcribe(const Utterance& u) const {
  httplib::Client client(host_, port_);
  client.set_connection_timeout(10);
  client.set_read_timeout(120);
  const auto res = client.Post(path_, encode_wav(u.samples, u.sample_rate), "audio/wav");
  if (!res) {
    throw Error("asr '" + id_ + "': request to " + host_ + ":" + std::to_string(port_) + path_ +
                " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) throw Error("asr '" + id_ + "': HTTP status " + std::to_string(res->status));
  try {
    const auto j = nlohmann::json::parse(res->body);
    return trim(j.at("text").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error("asr '" + id_ + "': malformed response: " + e.what());
  }
}

}  // namespace fac
