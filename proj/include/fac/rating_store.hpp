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


// Append-only rating log. One JSON object per line; at most one rating per
// (listener_id, sample_id, axis).

#ifndef FAC_RATING_STORE_HPP_
#define FAC_RATING_STORE_HPP_

#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "fac/evaluation.hpp"

namespace fac {

// ISO-8601 UTC with milliseconds, e.g. 2026-01-31T12:00:00.123Z.
std::string utc_timestamp();

nlohmann::json to_json(const RatingRecord& r);
RatingRecord rating_record_from_json(const nlohmann::json& j);

class RatingStore {
 public:
  enum class AppendStatus { kStored, kDuplicate };

  // Empty path keeps the log in memory. An existing log is replayed.
  explicit RatingStore(std::filesystem::path log_path = {});

  void set_clock(std::function<std::string()> clock) { clock_ = std::move(clock); }

  // Fills an empty timestamp from the clock. Throws fac::Error on an
  // out-of-scale value; duplicates are reported, not thrown.
  AppendStatus append(RatingRecord r);

  bool contains(const std::string& listener_id, const std::string& sample_id, Axis axis) const;
  std::size_t size() const;
  std::vector<RatingRecord> records() const;  // append order

  // Sorted by (timestamp, listener_id, sample_id, axis).
  std::vector<RatingRecord> sorted_records() const;
  std::string export_csv() const;

  Interval aggregate(Axis axis, const std::string& system_id) const;

 private:
  using Key = std::tuple<std::string, std::string, int>;

  mutable std::mutex mu_;
  std::filesystem::path path_;
  std::ofstream log_;
  std::vector<RatingRecord> records_;
  std::set<Key> keys_;
  std::function<std::string()> clock_;
};

}  // namespace fac

#endif  // FAC_RATING_STORE_HPP_
