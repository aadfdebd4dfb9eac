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

// Objective and subjective evaluation: edit-distance based CER/WER, rating
// aggregation with 95% intervals, similarity percentages, Pearson
// correlation, and the bundled reference score table.

#ifndef FAC_EVALUATION_HPP_
#define FAC_EVALUATION_HPP_

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fac/audio.hpp"
#include "json.hpp"

namespace fac {

// ---------------------------------------------------------------------------
// Error rates

struct EditOps {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;

  std::size_t total() const { return substitutions + deletions + insertions; }
  EditOps& operator+=(const EditOps& o);
  bool operator==(const EditOps&) const = default;
};

// Unit-cost Levenshtein alignment. Among minimal alignments, substitutions
// are preferred over a deletion plus an insertion.
EditOps edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

// Tokens after transcript normalization. Character tokens exclude spaces.
std::vector<std::string> word_tokens(std::string_view text);
std::vector<std::string> char_tokens(std::string_view text);

struct ErrorCounts {
  EditOps char_ops;
  EditOps word_ops;
  std::size_t ref_chars = 0;
  std::size_t ref_words = 0;

  double cer() const;
  double wer() const;
  ErrorCounts& operator+=(const ErrorCounts& o);
};

// Throws fac::Error when the normalized reference is empty.
ErrorCounts error_counts(std::string_view ref_text, std::string_view hyp_text);

struct ErrorRates {
  double cer = 0.0;
  double wer = 0.0;
};

ErrorRates cer_wer(std::string_view ref_text, std::string_view hyp_text);

class AsrClient {
 public:
  virtual ~AsrClient() = default;
  virtual std::string client_id() const = 0;
  // Throws on failure; an empty transcript is a valid result.
  virtual std::string transcribe(const Utterance& u) const = 0;
};

// Runs `command` with {wav} substituted; stdout is the transcript.
class CommandAsrClient : public AsrClient {
 public:
  CommandAsrClient(std::string id, std::string command) : id_(std::move(id)), command_(std::move(command)) {}
  std::string client_id() const override { return id_; }
  std::string transcribe(const Utterance& u) const override;

 private:
  std::string id_;
  std::string command_;
};

// POSTs the WAV bytes (audio/wav) to http://host:port/path and reads
// {"text": "..."} from the JSON response.
class HttpAsrClient : public AsrClient {
 public:
  HttpAsrClient(std::string id, std::string host, int port, std::string path);
  std::string client_id() const override { return id_; }
  std::string transcribe(const Utterance& u) const override;

 private:
  std::string id_;
  std::string host_;
  int port_;
  std::string path_;
};

struct SampleScore {
  std::string utterance_id;
  std::string reference;
  std::string hypothesis;
  ErrorCounts counts;
};

struct ScoreExclusion {
  std::string utterance_id;
  std::string reason;
};

struct SystemScore {
  double cer = 0.0;  // pooled over scored samples
  double wer = 0.0;
  std::vector<SampleScore> samples;  // input order, failures omitted
  std::vector<ScoreExclusion> exclusions;
};

struct ScoredInput {
  Utterance audio;
  std::string reference;
};

// Corpus-level rates: summed edit operations over summed reference lengths.
// ASR calls run with at most `max_parallel` in flight. Throws fac::Error if
// every sample fails.
SystemScore score_system(const std::vector<ScoredInput>& samples, const AsrClient& asr, int max_parallel = 1);

// ---------------------------------------------------------------------------
// Ratings

enum class Axis { kNaturalness, kAccentedness, kSimilarity };

const char* axis_name(Axis a);
Axis parse_axis(const std::string& name);
int axis_min(Axis a);
int axis_max(Axis a);
bool in_scale(Axis a, int value);

// Similarity values.
inline constexpr int kDifferentSure = 1;
inline constexpr int kDifferentUnsure = 2;
inline constexpr int kSameUnsure = 3;
inline constexpr int kSameSure = 4;

struct RatingRecord {
  std::string listener_id;
  std::string sample_id;
  std::string system_id;
  Axis axis = Axis::kNaturalness;
  int value = 0;
  std::string timestamp;  // ISO-8601 UTC

  bool operator==(const RatingRecord&) const = default;
};

inline constexpr const char* kRatingsCsvHeader = "listener_id,sample_id,system_id,axis,value,timestamp";

void write_ratings_csv(std::ostream& out, const std::vector<RatingRecord>& records);
std::string ratings_csv(const std::vector<RatingRecord>& records);
std::vector<RatingRecord> read_ratings_csv(std::istream& in);
std::vector<RatingRecord> read_ratings_csv(const std::filesystem::path& path);

struct Interval {
  double mean = 0.0;
  double half_width = 0.0;  // NaN when undefined
  std::size_t n = 0;
  bool defined = false;     // false when n == 1
};

// Student-t interval: t(0.975, n-1) * sd / sqrt(n). Throws on empty input.
Interval mean_interval(const std::vector<double>& values);

// Records of other axes are ignored.
Interval aggregate_ratings(const std::vector<RatingRecord>& records, Axis axis);

// Percentage of similarity records judged "same" (unsure or sure), with the
// Wilson score half-width in percentage points.
Interval similarity_percentage(const std::vector<RatingRecord>& records);

Interval wilson_interval(std::size_t successes, std::size_t n);  // fractions

// Throws fac::Error on unequal lengths, fewer than 3 points, or zero variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------------------
// Reference scores and reports

struct ReferenceRow {
  std::string system;
  double cer = 0.0;  // percent
  double wer = 0.0;  // percent
  double naturalness = 0.0;
  double naturalness_ci = 0.0;
  double accentedness = 0.0;
  double accentedness_ci = 0.0;
  std::optional<double> similarity;  // percent
  std::optional<double> similarity_ci;
};

struct ReferenceTable {
  std::string version;
  std::vector<ReferenceRow> rows;
};

std::filesystem::path default_reference_table_path();
ReferenceTable load_reference_table(const std::filesystem::path& path = default_reference_table_path());
ReferenceTable reference_table_from_json(const nlohmann::json& j);

struct CorrelationReport {
  double accentedness_vs_cer = 0.0;
  double accentedness_vs_wer = 0.0;
  std::size_t points = 0;
};

CorrelationReport correlation_report(const ReferenceTable& table);

struct SystemReport {
  std::string system_id;
  std::optional<double> cer;  // fractions
  std::optional<double> wer;
  std::size_t asr_exclusions = 0;
  std::optional<Interval> naturalness;
  std::optional<Interval> accentedness;
  std::optional<Interval> similarity;  // percent
};

struct EvalReport {
  std::vector<SystemReport> systems;
  std::optional<CorrelationReport> correlations;  // over systems with CER, WER and accentedness
};

// Groups ratings by system and merges objective scores keyed by system id.
EvalReport build_report(const std::vector<RatingRecord>& records,
                        const std::map<std::string, SystemScore>& objective = {});

// "4.18±0.19" with `decimals` digits; an undefined interval renders "±n/a".
std::string format_interval(const Interval& i, int decimals = 2);

nlohmann::json to_json(const EvalReport& r);
std::string render_table(const EvalReport& r);

}  // namespace fac

#endif  // FAC_EVALUATION_HPP_
