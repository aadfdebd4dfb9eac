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


#include "fac/sessions.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "fac/common.hpp"

namespace fac {

const TestSample* SampleManifest::find(const std::string& sample_id) const {
  for (const auto& s : samples) {
    if (s.sample_id == sample_id) return &s;
  }
  return nullptr;
}

void SampleManifest::validate() const {
  std::set<std::string> ids;
  for (const auto& s : samples) {
    if (s.sample_id.empty()) throw Error("manifest sample with empty id");
    if (!ids.insert(s.sample_id).second) throw Error("duplicate sample id '" + s.sample_id + "'");
  }
  for (const auto& s : samples) {
    if (s.pair_sample_id && !ids.count(*s.pair_sample_id)) {
      throw Error("sample '" + s.sample_id + "' pairs with unknown sample '" + *s.pair_sample_id + "'");
    }
  }
}

nlohmann::json to_json(const SampleManifest& m) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : m.samples) {
    nlohmann::json j = {{"sample_id", s.sample_id},
                        {"system_id", s.system_id},
                        {"audio", s.audio.string()},
                        {"prompt_id", s.prompt_id},
                        {"rateable", s.rateable}};
    if (s.pair_sample_id) j["pair_sample_id"] = *s.pair_sample_id;
    arr.push_back(std::move(j));
  }
  return {{"samples", arr}};
}

SampleManifest sample_manifest_from_json(const nlohmann::json& j) {
  SampleManifest m;
  try {
    for (const auto& s : j.at("samples")) {
      TestSample t;
      t.sample_id = s.at("sample_id").get<std::string>();
      t.system_id = s.at("system_id").get<std::string>();
      t.audio = s.at("audio").get<std::string>();
      t.prompt_id = s.value("prompt_id", std::string());
      t.rateable = s.value("rateable", true);
      if (s.contains("pair_sample_id") && !s.at("pair_sample_id").is_null()) {
        t.pair_sample_id = s.at("pair_sample_id").get<std::string>();
      }
      m.samples.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed sample manifest: ") + e.what());
  }
  m.validate();
  return m;
}

void save_manifest(const SampleManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << to_json(m).dump(2) << '\n';
}

SampleManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("manifest " + path.string() + ": " + e.what());
  }
  SampleManifest m = sample_manifest_from_json(j);
  // Relative audio paths are relative to the manifest.
  for (auto& s : m.samples) {
    if (s.audio.is_relative()) s.audio = path.parent_path() / s.audio;
  }
  return m;
}

std::string opaque_sample_id(const std::string& system_id, const std::string& audio, std::uint64_t seed) {
  Fnv1a h;
  h.update(seed);
  h.update(system_id);
  h.update(std::string_view("\0", 1));
  h.update(audio);
  return "s" + h.hex().substr(0, 12);
}

std::string listener_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "listener-%03d", index);
  return buf;
}

std::vector<ListeningSession> build_sessions(const SampleManifest& manifest, int listeners, int per_listener,
                                             std::uint64_t seed, const std::vector<Axis>& axes) {
  manifest.validate();
  if (listeners < 1) throw Error("build_sessions: need at least one listener");
  if (per_listener < 1) throw Error("build_sessions: per-listener count must be positive");
  if (axes.empty()) throw Error("build_sessions: no axes");

  std::vector<ListeningSession> sessions(static_cast<std::size_t>(listeners));
  for (int l = 0; l < listeners; ++l) sessions[l].listener_id = listener_id(l + 1);

  Rng rng(seed);
  for (Axis axis : axes) {
    std::vector<const TestSample*> pool;
    for (const auto& s : manifest.samples) {
      if (!s.rateable) continue;
      if (axis == Axis::kSimilarity && !s.pair_sample_id) continue;
      pool.push_back(&s);
    }
    if (static_cast<std::size_t>(per_listener) > pool.size()) {
      throw Error("build_sessions: " + std::to_string(per_listener) + " " + axis_name(axis) +
                  " tasks per listener but only " + std::to_string(pool.size()) + " eligible samples");
    }
    // Least-rated samples first; random tie-breaks. Counts stay within one.
    std::vector<std::size_t> counts(pool.size(), 0);
    std::vector<std::size_t> order(pool.size());
    for (auto& session : sessions) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return counts[a] < counts[b]; });
      for (int k = 0; k < per_listener; ++k) {
        const TestSample& s = *pool[order[k]];
        ++counts[order[k]];
        SessionTask t{s.sample_id, axis, std::nullopt};
        if (axis == Axis::kSimilarity) t.pair_sample_id = s.pair_sample_id;
        session.tasks.push_back(std::move(t));
      }
    }
  }
  for (auto& session : sessions) rng.shuffle(session.tasks);
  return sessions;
}

nlohmann::json session_payload(const ListeningSession& s, const std::vector<bool>& completed) {
  nlohmann::json tasks = nlohmann::json::array();
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    const auto& t = s.tasks[i];
    nlohmann::json j = {{"index", i},
                        {"sample_id", t.sample_id},
                        {"axis", axis_name(t.axis)},
                        {"scale", {{"min", axis_min(t.axis)}, {"max", axis_max(t.axis)}}},
                        {"completed", i < completed.size() && completed[i]}};
    j["pair_sample_id"] = t.pair_sample_id ? nlohmann::json(*t.pair_sample_id) : nlohmann::json(nullptr);
    tasks.push_back(std::move(j));
  }
  return {{"listener_id", s.listener_id}, {"tasks", tasks}};
}

nlohmann::json to_json(const std::vector<ListeningSession>& sessions) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : sessions) arr.push_back(session_payload(s, {}));
  return {{"sessions", arr}};
}

std::vector<ListeningSession> sessions_from_json(const nlohmann::json& j) {
  std::vector<ListeningSession> out;
  try {
    for (const auto& sj : j.at("sessions")) {
      ListeningSession s;
      s.listener_id = sj.at("listener_id").get<std::string>();
      for (const auto& tj : sj.at("tasks")) {
        SessionTask t{tj.at("sample_id").get<std::string>(), parse_axis(tj.at("axis").get<std::string>()),
                      std::nullopt};
        if (tj.contains("pair_sample_id") && !tj.at("pair_sample_id").is_null()) {
          t.pair_sample_id = tj.at("pair_sample_id").get<std::string>();
        }
        s.tasks.push_back(std::move(t));
      }
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed sessions file: ") + e.what());
  }
  return out;
}

}  // namespace fac
