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

#ifndef FAC_COMMON_HPP_
#define FAC_COMMON_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace fac {

// Row-major by convention of use: rows are frames, columns are feature dims.
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

// Every recoverable failure in the toolkit surfaces as a fac::Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a file or external resource cannot be read.
class IoError : public Error {
 public:
  using Error::Error;
};

// Stable 64-bit FNV-1a. Used for provenance and parameter hashes, which must
// not change across runs or platforms (std::hash gives no such guarantee).
class Fnv1a {
 public:
  void update(std::span<const std::byte> bytes);
  void update(std::string_view text);
  void update(const Matrix& m);
  void update(std::uint64_t v);
  std::uint64_t digest() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

// Portable seeded generator. std::uniform_*_distribution output differs
// between standard libraries, so conversions are done by hand.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). Rejection sampling avoids modulo bias.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// Uppercase, drop punctuation except apostrophes, collapse whitespace.
// Shared by corpus pairing and CER/WER scoring.
std::string normalize_transcript(std::string_view text);

bool all_finite(const Matrix& m);

}  // namespace fac

#endif  // FAC_COMMON_HPP_
