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


// Listening-test sample manifests and per-listener session assignment.
// Sample ids are opaque; the system behind each sample is known only to the
// manifest held by the server.

#ifndef FAC_SESSIONS_HPP_
#define FAC_SESSIONS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fac/evaluation.hpp"
#include "json.hpp"

namespace fac {

struct TestSample {
  std::string sample_id;
  std::string system_id;
  std::filesystem::path audio;
  std::string prompt_id;
  // Reference recording of the speaker whose identity should be preserved;
  // samples with a pair are eligible for similarity tasks.
  std::optional<std::string> pair_sample_id;
  // Pair references only appear inside similarity tasks.
  bool rateable = true;

  bool operator==(const TestSample&) const = default;
};

struct SampleManifest {
  std::vector<TestSample> samples;

  const TestSample* find(const std::string& sample_id) const;
  // Throws on duplicate ids or dangling pair references.
  void validate() const;
  bool operator==(const SampleManifest&) const = default;
};

nlohmann::json to_json(const SampleManifest& m);
SampleManifest sample_manifest_from_json(const nlohmann::json& j);
void save_manifest(const SampleManifest& m, const std::filesystem::path& path);
SampleManifest load_manifest(const std::filesystem::path& path);

// Opaque, seed-dependent id; reveals neither system nor file name.
std::string opaque_sample_id(const std::string& system_id, const std::string& audio, std::uint64_t seed);

struct SessionTask {
  std::string sample_id;
  Axis axis = Axis::kNaturalness;
  std::optional<std::string> pair_sample_id;  // similarity only
  bool operator==(const SessionTask&) const = default;
};

struct ListeningSession {
  std::string listener_id;
  std::vector<SessionTask> tasks;  // presentation order
  bool operator==(const ListeningSession&) const = default;
};

std::string listener_id(int index);  // "listener-001", ...

// Every listener gets `per_listener` distinct samples per axis. Within an axis
// the per-sample task counts differ by at most one. Similarity draws from
// rateable samples with a pair; the other axes from all rateable samples.
// Task order within a session is a seeded shuffle. Throws when
// per_listener exceeds an axis pool.
std::vector<ListeningSession> build_sessions(const SampleManifest& manifest, int listeners, int per_listener,
                                             std::uint64_t seed,
                                             const std::vector<Axis>& axes = {Axis::kNaturalness});

// Payload for GET /api/session/{id}: no system ids.
nlohmann::json session_payload(const ListeningSession& s, const std::vector<bool>& completed);

nlohmann::json to_json(const std::vector<ListeningSession>& sessions);
std::vector<ListeningSession> sessions_from_json(const nlohmann::json& j);

}  // namespace fac

#endif  // FAC_SESSIONS_HPP_
