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


#include "fac/rating_store.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>

#include "fac/common.hpp"

namespace fac {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char frac[8];
  std::snprintf(frac, sizeof frac, ".%03dZ", static_cast<int>(ms));
  return std::string(buf) + frac;
}

nlohmann::json to_json(const RatingRecord& r) {
  return {{"listener_id", r.listener_id}, {"sample_id", r.sample_id}, {"system_id", r.system_id},
          {"axis", axis_name(r.axis)},     {"value", r.value},          {"timestamp", r.timestamp}};
}

RatingRecord rating_record_from_json(const nlohmann::json& j) {
  try {
    return {j.at("listener_id").get<std::string>(), j.at("sample_id").get<std::string>(),
            j.at("system_id").get<std::string>(),   parse_axis(j.at("axis").get<std::string>()),
            j.at("value").get<int>(),               j.at("timestamp").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed rating record: ") + e.what());
  }
}

RatingStore::RatingStore(std::filesystem::path log_path) : path_(std::move(log_path)), clock_(utc_timestamp) {
  if (path_.empty()) return;
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_);
    if (!in) throw IoError("cannot read rating log " + path_.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      RatingRecord r;
      try {
        r = rating_record_from_json(nlohmann::json::parse(line));
      } catch (const std::exception& e) {
        // A torn final line from a crash is dropped; anything else is fatal.
        if (in.peek() == std::char_traits<char>::eof()) break;
        throw Error("rating log " + path_.string() + " line " + std::to_string(line_no) + ": " + e.what());
      }
      if (keys_.insert({r.listener_id, r.sample_id, static_cast<int>(r.axis)}).second) {
        records_.push_back(std::move(r));
      }
    }
  } else if (path_.has_parent_path()) {
    std::filesystem::create_directories(path_.parent_path());
  }
  log_.open(path_, std::ios::app);
  if (!log_) throw IoError("cannot open rating log " + path_.string() + " for append");
}

RatingStore::AppendStatus RatingStore::append(RatingRecord r) {
  if (!in_scale(r.axis, r.value)) {
    throw Error("value " + std::to_string(r.value) + " outside the " + axis_name(r.axis) + " scale [" +
                std::to_string(axis_min(r.axis)) + ", " + std::to_string(axis_max(r.axis)) + "]");
  }
  std::lock_guard<std::mutex> lock(mu_);
  Key key{r.listener_id, r.sample_id, static_cast<int>(r.axis)};
  if (keys_.count(key)) return AppendStatus::kDuplicate;
  if (r.timestamp.empty()) r.timestamp = clock_();
  if (log_.is_open()) {
    log_ << to_json(r).dump() << '\n';
    log_.flush();
    if (!log_) throw IoError("write to rating log " + path_.string() + " failed");
  }
  keys_.insert(std::move(key));
  records_.push_back(std::move(r));
  return AppendStatus::kStored;
}

bool RatingStore::contains(const std::string& listener_id, const std::string& sample_id, Axis axis) const {
  std::lock_guard<std::mutex> lock(mu_);
  return keys_.count({listener_id, sample_id, static_cast<int>(axis)}) > 0;
}

std::size_t RatingStore::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_.size();
}

std::vector<RatingRecord> RatingStore::records() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_;
}

std::vector<RatingRecord> RatingStore::sorted_records() const {
  auto out = records();
  std::sort(out.begin(), out.end(), [](const RatingRecord& a, const RatingRecord& b) {
    return std::tie(a.timestamp, a.listener_id, a.sample_id, a.axis) <
           std::tie(b.timestamp, b.listener_id, b.sample_id, b.axis);
  });
  return out;
}

std::string RatingStore::export_csv() const { return ratings_csv(sorted_records()); }

Interval RatingStore::aggregate(Axis axis, const std::string& system_id) const {
  std::vector<RatingRecord> subset;
  for (auto& r : records()) {
    if (r.system_id == system_id) subset.push_back(std::move(r));
  }
  return axis == Axis::kSimilarity ? similarity_percentage(subset) : aggregate_ratings(subset, axis);
}

}  // namespace fac
