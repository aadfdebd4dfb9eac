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

#include "fac/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "fac/common.hpp"

namespace fac {

EditOps& EditOps::operator+=(const EditOps& o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  return *this;
}

EditOps edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  // Backtrace, taking the diagonal whenever it is on a minimal path.
  EditOps ops;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        if (!same) ++ops.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++ops.deletions;
      --i;
    } else {
      ++ops.insertions;
      --j;
    }
  }
  return ops;
}

std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (auto& w : split(normalize_transcript(text), ' ')) {
    if (!w.empty()) out.push_back(std::move(w));
  }
  return out;
}

std::vector<std::string> char_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (char c : normalize_transcript(text)) {
    if (c != ' ') out.emplace_back(1, c);
  }
  return out;
}

double ErrorCounts::cer() const {
  return ref_chars == 0 ? 0.0 : static_cast<double>(char_ops.total()) / static_cast<double>(ref_chars);
}

double ErrorCounts::wer() const {
  return ref_words == 0 ? 0.0 : static_cast<double>(word_ops.total()) / static_cast<double>(ref_words);
}

ErrorCounts& ErrorCounts::operator+=(const ErrorCounts& o) {
  char_ops += o.char_ops;
  word_ops += o.word_ops;
  ref_chars += o.ref_chars;
  ref_words += o.ref_words;
  return *this;
}

ErrorCounts error_counts(std::string_view ref_text, std::string_view hyp_text) {
  const auto ref_words = word_tokens(ref_text);
  if (ref_words.empty()) throw Error("reference transcript is empty after normalization");
  const auto ref_chars = char_tokens(ref_text);
  ErrorCounts c;
  c.word_ops = edit_distance(ref_words, word_tokens(hyp_text));
  c.char_ops = edit_distance(ref_chars, char_tokens(hyp_text));
  c.ref_words = ref_words.size();
  c.ref_chars = ref_chars.size();
  return c;
}

ErrorRates cer_wer(std::string_view ref_text, std::string_view hyp_text) {
  const ErrorCounts c = error_counts(ref_text, hyp_text);
  return {c.cer(), c.wer()};
}

SystemScore score_system(const std::vector<ScoredInput>& samples, const AsrClient& asr, int max_parallel) {
  if (samples.empty()) throw Error("score_system: no samples");
  const std::size_t width = static_cast<std::size_t>(std::max(1, max_parallel));

  struct Outcome {
    std::string text;
    std::string error;
    bool ok = false;
  };
  std::vector<Outcome> outcomes(samples.size());
  auto run = [&](std::size_t k) {
    Outcome o;
    try {
      o.text = asr.transcribe(samples[k].audio);
      o.ok = true;
    } catch (const std::exception& e) {
      o.error = e.what();
    }
    return o;
  };
  for (std::size_t start = 0; start < samples.size(); start += width) {
    const std::size_t end = std::min(samples.size(), start + width);
    if (width == 1) {
      outcomes[start] = run(start);
      continue;
    }
    std::vector<std::future<Outcome>> jobs;
    for (std::size_t k = start; k < end; ++k) jobs.push_back(std::async(std::launch::async, run, k));
    for (std::size_t k = start; k < end; ++k) outcomes[k] = jobs[k - start].get();
  }

  SystemScore score;
  ErrorCounts pooled;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& id = samples[k].audio.utterance_id;
    if (!outcomes[k].ok) {
      score.exclusions.push_back({id, "asr failed: " + outcomes[k].error});
      continue;
    }
    SampleScore s{id, samples[k].reference, outcomes[k].text, {}};
    try {
      s.counts = error_counts(s.reference, s.hypothesis);
    } catch (const Error& e) {
      score.exclusions.push_back({id, e.what()});
      continue;
    }
    pooled += s.counts;
    score.samples.push_back(std::move(s));
  }
  if (score.samples.empty()) {
    throw Error("score_system: all " + std::to_string(samples.size()) + " samples failed (first: " +
                score.exclusions.front().reason + ")");
  }
  score.cer = pooled.cer();
  score.wer = pooled.wer();
  return score;
}

// ---------------------------------------------------------------------------

const char* axis_name(Axis a) {
  switch (a) {
    case Axis::kNaturalness: return "naturalness";
    case Axis::kAccentedness: return "accentedness";
    case Axis::kSimilarity: return "similarity";
  }
  return "?";
}

Axis parse_axis(const std::string& name) {
  const std::string n = to_lower(trim(name));
  if (n == "naturalness") return Axis::kNaturalness;
  if (n == "accentedness") return Axis::kAccentedness;
  if (n == "similarity") return Axis::kSimilarity;
  throw Error("unknown rating axis '" + name + "' (expected naturalness, accentedness or similarity)");
}

int axis_min(Axis) { return 1; }

int axis_max(Axis a) {
  switch (a) {
    case Axis::kNaturalness: return 5;
    case Axis::kAccentedness: return 9;
    case Axis::kSimilarity: return 4;
  }
  return 0;
}

bool in_scale(Axis a, int value) { return value >= axis_min(a) && value <= axis_max(a); }

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> parse_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          fields.back() += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  if (quoted) throw Error("ratings csv line " + std::to_string(line_no) + ": unterminated quote");
  return fields;
}

}  // namespace

void write_ratings_csv(std::ostream& out, const std::vector<RatingRecord>& records) {
  out << kRatingsCsvHeader << '\n';
  for (const auto& r : records) {
    out << csv_field(r.listener_id) << ',' << csv_field(r.sample_id) << ',' << csv_field(r.system_id) << ','
        << axis_name(r.axis) << ',' << r.value << ',' << csv_field(r.timestamp) << '\n';
  }
}

std::string ratings_csv(const std::vector<RatingRecord>& records) {
  std::ostringstream os;
  write_ratings_csv(os, records);
  return os.str();
}

std::vector<RatingRecord> read_ratings_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("ratings csv is empty");
  if (trim(line) != kRatingsCsvHeader) {
    throw Error("ratings csv header mismatch: expected '" + std::string(kRatingsCsvHeader) + "'");
  }
  std::vector<RatingRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = parse_csv_line(line, line_no);
    if (f.size() != 6) {
      throw Error("ratings csv line " + std::to_string(line_no) + ": expected 6 fields, got " +
                  std::to_string(f.size()));
    }
    RatingRecord r{f[0], f[1], f[2], parse_axis(f[3]), 0, f[5]};
    try {
      std::size_t used = 0;
      r.value = std::stoi(f[4], &used);
      if (used != f[4].size()) throw std::invalid_argument(f[4]);
    } catch (const std::exception&) {
      throw Error("ratings csv line " + std::to_string(line_no) + ": bad value '" + f[4] + "'");
    }
    if (!in_scale(r.axis, r.value)) {
      throw Error("ratings csv line " + std::to_string(line_no) + ": value " + f[4] + " outside the " +
                  axis_name(r.axis) + " scale");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RatingRecord> read_ratings_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ratings file " + path.string());
  return read_ratings_csv(in);
}

Interval mean_interval(const std::vector<double>& values) {
  if (values.empty()) throw Error("cannot aggregate zero ratings");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  Interval out;
  out.mean = mean;
  out.n = values.size();
  if (values.size() == 1) {
    out.half_width = std::numeric_limits<double>::quiet_NaN();
    out.defined = false;
    return out;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  out.half_width = boost::math::quantile(dist, 0.975) * sd / std::sqrt(n);
  out.defined = true;
  return out;
}

Interval aggregate_ratings(const std::vector<RatingRecord>& records, Axis axis) {
  std::vector<double> values;
  for (const auto& r : records) {
    if (r.axis == axis) values.push_back(r.value);
  }
  if (values.empty()) throw Error(std::string("no ") + axis_name(axis) + " ratings to aggregate");
  // Summation order must not depend on record order.
  std::sort(values.begin(), values.end());
  return mean_interval(values);
}

Interval wilson_interval(std::size_t successes, std::size_t n) {
  if (n == 0) throw Error("wilson interval of zero trials");
  if (successes > n) throw Error("wilson interval: successes exceed trials");
  constexpr double z = 1.959963984540054;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double denom = 1.0 + z * z / nn;
  Interval out;
  out.mean = p;
  out.n = n;
  out.half_width = z / denom * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn));
  out.defined = true;
  return out;
}

Interval similarity_percentage(const std::vector<RatingRecord>& records) {
  std::size_t same = 0, n = 0;
  for (const auto& r : records) {
    if (r.axis != Axis::kSimilarity) continue;
    ++n;
    if (r.value == kSameUnsure || r.value == kSameSure) ++same;
  }
  if (n == 0) throw Error("no similarity ratings");
  Interval w = wilson_interval(same, n);
  w.mean *= 100.0;
  w.half_width *= 100.0;
  return w;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error("pearson: length mismatch");
  if (x.size() < 3) throw Error("pearson: need at least 3 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// ---------------------------------------------------------------------------

std::filesystem::path default_reference_table_path() {
  return std::filesystem::path(FAC_DATA_DIR) / "reference_scores.json";
}

ReferenceTable reference_table_from_json(const nlohmann::json& j) {
  try {
    ReferenceTable t;
    t.version = j.at("version").get<std::string>();
    for (const auto& r : j.at("rows")) {
      ReferenceRow row;
      row.system = r.at("system").get<std::string>();
      row.cer = r.at("cer").get<double>();
      row.wer = r.at("wer").get<double>();
      row.naturalness = r.at("naturalness").at(0).get<double>();
      row.naturalness_ci = r.at("naturalness").at(1).get<double>();
      row.accentedness = r.at("accentedness").at(0).get<double>();
      row.accentedness_ci = r.at("accentedness").at(1).get<double>();
      if (r.contains("similarity") && !r.at("similarity").is_null()) {
        row.similarity = r.at("similarity").at(0).get<double>();
        row.similarity_ci = r.at("similarity").at(1).get<double>();
      }
      t.rows.push_back(std::move(row));
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed reference table: ") + e.what());
  }
}

ReferenceTable load_reference_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open reference table " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("reference table " + path.string() + ": " + e.what());
  }
  return reference_table_from_json(j);
}

CorrelationReport correlation_report(const ReferenceTable& table) {
  std::vector<double> cer, wer, acc;
  for (const auto& r : table.rows) {
    cer.push_back(r.cer);
    wer.push_back(r.wer);
    acc.push_back(r.accentedness);
  }
  CorrelationReport c;
  c.accentedness_vs_cer = pearson(cer, acc);
  c.accentedness_vs_wer = pearson(wer, acc);
  c.points = table.rows.size();
  return c;
}

EvalReport build_report(const std::vector<RatingRecord>& records,
                        const std::map<std::string, SystemScore>& objective) {
  std::map<std::string, std::vector<RatingRecord>> by_system;
  for (const auto& r : records) by_system[r.system_id].push_back(r);
  for (const auto& [id, _] : objective) by_system[id];

  EvalReport report;
  std::vector<double> cer, wer, acc;
  for (const auto& [id, recs] : by_system) {
    SystemReport s;
    s.system_id = id;
    if (auto it = objective.find(id); it != objective.end()) {
      s.cer = it->second.cer;
      s.wer = it->second.wer;
      s.asr_exclusions = it->second.exclusions.size();
    }
    auto has = [&](Axis a) {
      return std::any_of(recs.begin(), recs.end(), [a](const RatingRecord& r) { return r.axis == a; });
    };
    if (has(Axis::kNaturalness)) s.naturalness = aggregate_ratings(recs, Axis::kNaturalness);
    if (has(Axis::kAccentedness)) s.accentedness = aggregate_ratings(recs, Axis::kAccentedness);
    if (has(Axis::kSimilarity)) s.similarity = similarity_percentage(recs);
    if (s.cer && s.accentedness) {
      cer.push_back(*s.cer);
      wer.push_back(*s.wer);
      acc.push_back(s.accentedness->mean);
    }
    report.systems.push_back(std::move(s));
  }
  if (cer.size() >= 3) {
    try {
      report.correlations = CorrelationReport{pearson(cer, acc), pearson(wer, acc), cer.size()};
    } catch (const Error&) {
      // Zero variance: no correlation to report.
    }
  }
  return report;
}

std::string format_interval(const Interval& i, int decimals) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << i.mean << "±";
  if (i.defined && std::isfinite(i.half_width)) {
    os << i.half_width;
  } else {
    os << "n/a";
  }
  return os.str();
}

namespace {

nlohmann::json interval_json(const std::optional<Interval>& i) {
  if (!i) return nullptr;
  nlohmann::json j = {{"mean", i->mean}, {"n", i->n}, {"interval_defined", i->defined}};
  j["half_width"] = i->defined ? nlohmann::json(i->half_width) : nlohmann::json(nullptr);
  return j;
}

std::string optional_percent(const std::optional<double>& v) {
  if (!v) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << *v * 100.0;
  return os.str();
}

}  // namespace

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json systems = nlohmann::json::array();
  for (const auto& s : r.systems) {
    nlohmann::json j;
    j["system_id"] = s.system_id;
    j["cer"] = s.cer ? nlohmann::json(*s.cer) : nlohmann::json(nullptr);
    j["wer"] = s.wer ? nlohmann::json(*s.wer) : nlohmann::json(nullptr);
    j["asr_exclusions"] = s.asr_exclusions;
    j["naturalness"] = interval_json(s.naturalness);
    j["accentedness"] = interval_json(s.accentedness);
    j["similarity_percent"] = interval_json(s.similarity);
    systems.push_back(std::move(j));
  }
  nlohmann::json out = {{"systems", systems}};
  if (r.correlations) {
    out["correlations"] = {{"accentedness_vs_cer", r.correlations->accentedness_vs_cer},
                           {"accentedness_vs_wer", r.correlations->accentedness_vs_wer},
                           {"points", r.correlations->points}};
  } else {
    out["correlations"] = nullptr;
  }
  return out;
}

std::string render_table(const EvalReport& r) {
  std::vector<std::array<std::string, 6>> rows;
  rows.push_back({"System", "CER", "WER", "Naturalness", "Similarity (%)", "Accentedness"});
  for (const auto& s : r.systems) {
    rows.push_back({s.system_id, optional_percent(s.cer), optional_percent(s.wer),
                    s.naturalness ? format_interval(*s.naturalness) : "-",
                    s.similarity ? format_interval(*s.similarity, 1) : "-",
                    s.accentedness ? format_interval(*s.accentedness) : "-"});
  }
  // Width in code points; "±" is two bytes in UTF-8.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
  };
  std::array<std::size_t, 6> widths{};
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], width(row[c]));
  }
  std::ostringstream os;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t c = 0; c < 6; ++c) {
      os << rows[k][c] << std::string(widths[c] - width(rows[k][c]), ' ');
      os << (c + 1 < 6 ? "  " : "\n");
    }
    if (k == 0) {
      for (std::size_t c = 0; c < 6; ++c) os << std::string(widths[c], '-') << (c + 1 < 6 ? "  " : "\n");
    }
  }
  if (r.correlations) {
    os << std::fixed << std::setprecision(3) << "\nPearson r over " << r.correlations->points
       << " systems: accentedness vs CER " << r.correlations->accentedness_vs_cer << ", accentedness vs WER "
       << r.correlations->accentedness_vs_wer << "\n";
  }
  return os.str();
}

}  // namespace fac
