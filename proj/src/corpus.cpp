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

#include "fac/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "fac/common.hpp"
#include "json.hpp"

namespace fac {

namespace fs = std::filesystem;
using nlohmann::json;

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kDev:
      return "dev";
    case Split::kTest:
      return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw Error("unknown split '" + name + "' (expected train, dev or test)");
}

const std::vector<std::string>& CorpusSplits::get(Split s) const {
  switch (s) {
    case Split::kTrain:
      return train;
    case Split::kDev:
      return dev;
    case Split::kTest:
      return test;
  }
  return train;
}

std::string ParallelCorpus::source_speaker() const {
  return pairs.empty() ? std::string() : pairs.begin()->second.source.speaker_id;
}

std::string ParallelCorpus::reference_speaker() const {
  return pairs.empty() ? std::string() : pairs.begin()->second.reference.speaker_id;
}

std::vector<const UtterancePair*> ParallelCorpus::pairs_in(Split s) const {
  std::vector<const UtterancePair*> out;
  for (const auto& id : splits.get(s)) {
    auto it = pairs.find(id);
    if (it == pairs.end()) throw Error("split references unknown prompt '" + id + "'");
    out.push_back(&it->second);
  }
  return out;
}

void ParallelCorpus::validate() const {
  const std::string src = source_speaker();
  const std::string ref = reference_speaker();
  if (!pairs.empty() && src == ref) {
    throw Error("source and reference speakers must differ (both '" + src + "')");
  }
  for (const auto& [prompt, pair] : pairs) {
    if (pair.source.prompt_id != prompt || pair.reference.prompt_id != prompt) {
      throw Error("pair '" + prompt + "' holds utterances of another prompt");
    }
    if (pair.source.speaker_id != src || pair.reference.speaker_id != ref) {
      throw Error("pair '" + prompt + "' breaks the one-speaker-per-side rule");
    }
    if (normalize_transcript(pair.source.transcript) !=
        normalize_transcript(pair.reference.transcript)) {
      throw Error("transcript mismatch for prompt '" + prompt + "'");
    }
    for (const Utterance* u : {&pair.source, &pair.reference}) {
      if (u->sample_rate != kDefaultSampleRate) {
        throw Error("utterance '" + u->utterance_id + "' is not at 16 kHz");
      }
      validate_samples(*u);
    }
  }
  if (!splits.empty()) {
    std::set<std::string> seen;
    for (Split s : {Split::kTrain, Split::kDev, Split::kTest}) {
      for (const auto& id : splits.get(s)) {
        if (!pairs.contains(id)) throw Error("split references unknown prompt '" + id + "'");
        if (!seen.insert(id).second) throw Error("prompt '" + id + "' appears in two splits");
      }
    }
    if (seen.size() != pairs.size()) throw Error("splits do not cover every paired prompt");
  }
}

std::string ParallelCorpus::content_hash() const {
  Fnv1a h;
  for (const auto& [prompt, pair] : pairs) {
    h.update(prompt);
    for (const Utterance* u : {&pair.source, &pair.reference}) {
      h.update(u->utterance_id);
      h.update(u->speaker_id);
      h.update(u->transcript);
      h.update(static_cast<std::uint64_t>(u->sample_rate));
      h.update(std::as_bytes(std::span(u->samples)));
    }
  }
  for (Split s : {Split::kTrain, Split::kDev, Split::kTest}) {
    h.update(split_name(s));
    for (const auto& id : splits.get(s)) h.update(id);
  }
  return h.hex();
}

const std::string* TranscriptTable::find(const std::string& speaker,
                                         const std::string& prompt) const {
  if (auto it = per_speaker.find({speaker, prompt}); it != per_speaker.end()) return &it->second;
  if (auto it = shared.find(prompt); it != shared.end()) return &it->second;
  return nullptr;
}

TranscriptTable read_transcript_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open transcript table " + path.string());
  TranscriptTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    const auto cols = split(line, '\t');
    if (cols.size() == 2) {
      table.shared[trim(cols[0])] = trim(cols[1]);
    } else if (cols.size() == 3) {
      table.per_speaker[{trim(cols[0]), trim(cols[1])}] = trim(cols[2]);
    } else {
      throw Error(path.string() + ":" + std::to_string(lineno) +
                  ": expected 2 or 3 tab-separated columns");
    }
  }
  return table;
}

namespace {

std::map<std::string, fs::path> list_wavs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (to_lower(entry.path().extension().string()) != ".wav") continue;
    out[entry.path().stem().string()] = fs::absolute(entry.path()).lexically_normal();
  }
  return out;
}

std::string speaker_of(const fs::path& dir) {
  fs::path p = fs::absolute(dir).lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  return p.filename().string();
}

Utterance load_utterance(const fs::path& wav, const std::string& speaker,
                         const std::string& prompt, const std::string& transcript) {
  WavData data = read_wav(wav);
  Utterance u;
  u.speaker_id = speaker;
  u.prompt_id = prompt;
  u.utterance_id = speaker + "_" + prompt;
  u.sample_rate = data.sample_rate;
  u.samples = std::move(data.samples);
  u.transcript = transcript;
  if (u.sample_rate != kDefaultSampleRate) u = resample(u, kDefaultSampleRate);
  validate_samples(u);
  return u;
}

}  // namespace

ParallelCorpus ingest_corpus(const fs::path& source_dir, const fs::path& reference_dir,
                             const fs::path& transcript_table, IngestReport* report) {
  const TranscriptTable table = read_transcript_table(transcript_table);
  const auto src_files = list_wavs(source_dir);
  const auto ref_files = list_wavs(reference_dir);
  const std::string src_speaker = speaker_of(source_dir);
  const std::string ref_speaker = speaker_of(reference_dir);
  if (src_speaker == ref_speaker) {
    throw Error("source and reference directories share the speaker id '" + src_speaker + "'");
  }

  std::set<std::string> prompts;
  for (const auto& [p, _] : src_files) prompts.insert(p);
  for (const auto& [p, _] : ref_files) prompts.insert(p);

  ParallelCorpus corpus;
  IngestReport local;
  for (const auto& prompt : prompts) {
    const bool has_src = src_files.contains(prompt);
    const bool has_ref = ref_files.contains(prompt);
    const std::string* src_text = table.find(src_speaker, prompt);
    const std::string* ref_text = table.find(ref_speaker, prompt);
    if ((has_src && src_text == nullptr) || (has_ref && ref_text == nullptr)) {
      throw Error("missing transcript for prompt '" + prompt + "'");
    }
    if (!has_src || !has_ref) {
      local.excluded.push_back(
          {prompt, has_src ? "no reference recording" : "no source recording"});
      continue;
    }
    if (normalize_transcript(*src_text) != normalize_transcript(*ref_text)) {
      throw Error("transcript mismatch for prompt '" + prompt + "': \"" + *src_text +
                  "\" vs \"" + *ref_text + "\"");
    }
    UtterancePair pair{load_utterance(src_files.at(prompt), src_speaker, prompt, *src_text),
                       load_utterance(ref_files.at(prompt), ref_speaker, prompt, *ref_text)};
    local.audio_paths[pair.source.utterance_id] = src_files.at(prompt);
    local.audio_paths[pair.reference.utterance_id] = ref_files.at(prompt);
    corpus.pairs.emplace(prompt, std::move(pair));
  }
  corpus.validate();
  if (report != nullptr) *report = std::move(local);
  return corpus;
}

Utterance resample(const Utterance& u, int target_rate, int taps) {
  if (target_rate <= 0) throw Error("resample: target rate must be positive");
  if (u.sample_rate < 8000) {
    throw Error("resample: input rate " + std::to_string(u.sample_rate) + " Hz is below 8000 Hz");
  }
  if (taps < 2) throw Error("resample: need at least 2 taps");
  if (u.sample_rate == target_rate) return u;

  const double ratio = static_cast<double>(target_rate) / u.sample_rate;
  const auto n_in = static_cast<std::ptrdiff_t>(u.samples.size());
  const auto n_out = static_cast<std::ptrdiff_t>(std::llround(n_in * ratio));
  // Cutoff relative to the input Nyquist; lowered when decimating.
  const double fc = std::min(1.0, ratio);
  // `taps` counts kernel taps at the lower of the two rates.
  const double half_width = 0.5 * taps / fc;

  Utterance out = u;
  out.sample_rate = target_rate;
  out.samples.assign(static_cast<std::size_t>(n_out), 0.0);
  for (std::ptrdiff_t n = 0; n < n_out; ++n) {
    const double t = static_cast<double>(n) / ratio;
    const auto k_lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(t - half_width)));
    const auto k_hi =
        std::min<std::ptrdiff_t>(n_in - 1, static_cast<std::ptrdiff_t>(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t k = k_lo; k <= k_hi; ++k) {
      const double x = t - static_cast<double>(k);
      const double arg = std::numbers::pi * fc * x;
      const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(arg) / arg;
      // Blackman window over [-half_width, half_width].
      const double w_pos = std::numbers::pi * x / half_width;
      const double window = 0.42 + 0.5 * std::cos(w_pos) + 0.08 * std::cos(2.0 * w_pos);
      acc += u.samples[static_cast<std::size_t>(k)] * fc * sinc * window;
    }
    out.samples[static_cast<std::size_t>(n)] = std::clamp(acc, -1.0, 1.0);
  }
  return out;
}

ParallelCorpus split_corpus(const ParallelCorpus& c, SplitSizes sizes, std::uint64_t seed) {
  const std::size_t wanted = sizes.train + sizes.dev + sizes.test;
  if (wanted > c.pairs.size()) {
    throw Error("split sizes sum to " + std::to_string(wanted) + " but the corpus has only " +
                std::to_string(c.pairs.size()) + " pairs");
  }
  std::vector<std::string> ids;
  ids.reserve(c.pairs.size());
  for (const auto& [prompt, _] : c.pairs) ids.push_back(prompt);  // map order is sorted
  Rng rng(seed);
  rng.shuffle(ids);

  ParallelCorpus out;
  auto take = [&](std::size_t begin, std::size_t count) {
    std::vector<std::string> part(ids.begin() + static_cast<std::ptrdiff_t>(begin),
                                  ids.begin() + static_cast<std::ptrdiff_t>(begin + count));
    std::sort(part.begin(), part.end());
    for (const auto& id : part) out.pairs.emplace(id, c.pairs.at(id));
    return part;
  };
  out.splits.train = take(0, sizes.train);
  out.splits.dev = take(sizes.train, sizes.dev);
  out.splits.test = take(sizes.train + sizes.dev, sizes.test);
  return out;
}

namespace {

std::string split_of(const ParallelCorpus& c, const std::string& prompt) {
  for (Split s : {Split::kTrain, Split::kDev, Split::kTest}) {
    const auto& ids = c.splits.get(s);
    if (std::binary_search(ids.begin(), ids.end(), prompt)) return split_name(s);
    // Splits are kept sorted by split_corpus, but manifests may be hand-written.
    if (std::find(ids.begin(), ids.end(), prompt) != ids.end()) return split_name(s);
  }
  return "";
}

}  // namespace

void write_manifest(const ParallelCorpus& c, const fs::path& manifest_path,
                    const std::map<std::string, fs::path>& audio_paths) {
  std::ofstream out(manifest_path);
  if (!out) throw IoError("cannot write manifest " + manifest_path.string());
  const fs::path base = fs::absolute(manifest_path).parent_path();
  for (const auto& [prompt, pair] : c.pairs) {
    const std::string split = split_of(c, prompt);
    for (const Utterance* u : {&pair.source, &pair.reference}) {
      auto it = audio_paths.find(u->utterance_id);
      if (it == audio_paths.end()) {
        throw Error("no audio path for utterance '" + u->utterance_id + "'");
      }
      json row = {{"utterance_id", u->utterance_id},
                  {"speaker_id", u->speaker_id},
                  {"prompt_id", u->prompt_id},
                  {"path", fs::absolute(it->second).lexically_relative(base).generic_string()},
                  {"transcript", u->transcript},
                  {"split", split.empty() ? json(nullptr) : json(split)}};
      out << row.dump() << '\n';
    }
  }
}

fs::path export_corpus(const ParallelCorpus& c, const fs::path& dir) {
  fs::create_directories(dir / "wav");
  std::map<std::string, fs::path> paths;
  for (const auto& [prompt, pair] : c.pairs) {
    for (const Utterance* u : {&pair.source, &pair.reference}) {
      const fs::path p = dir / "wav" / (u->utterance_id + ".wav");
      write_wav(p, u->samples, u->sample_rate);
      paths[u->utterance_id] = p;
    }
  }
  const fs::path manifest = dir / "manifest.jsonl";
  write_manifest(c, manifest, paths);
  return manifest;
}

ParallelCorpus read_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest " + manifest_path.string());
  const fs::path base = fs::absolute(manifest_path).parent_path();

  struct Row {
    Utterance u;
    std::string split;
  };
  std::map<std::string, std::vector<Row>> by_prompt;
  std::set<std::string> speakers_in_order;
  std::vector<std::string> speaker_sequence;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(manifest_path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    for (const char* key : {"utterance_id", "speaker_id", "prompt_id", "path", "transcript"}) {
      if (!row.contains(key) || !row[key].is_string()) {
        throw Error(manifest_path.string() + ":" + std::to_string(lineno) + ": missing key '" +
                    key + "'");
      }
    }
    fs::path audio = row["path"].get<std::string>();
    if (audio.is_relative()) audio = base / audio;
    WavData data = read_wav(audio);
    Row r;
    r.u.utterance_id = row["utterance_id"];
    r.u.speaker_id = row["speaker_id"];
    r.u.prompt_id = row["prompt_id"];
    r.u.transcript = row["transcript"];
    r.u.sample_rate = data.sample_rate;
    r.u.samples = std::move(data.samples);
    if (r.u.sample_rate != kDefaultSampleRate) r.u = resample(r.u, kDefaultSampleRate);
    if (row.contains("split") && row["split"].is_string()) r.split = row["split"];
    if (speakers_in_order.insert(r.u.speaker_id).second) speaker_sequence.push_back(r.u.speaker_id);
    by_prompt[r.u.prompt_id].push_back(std::move(r));
  }
  if (speaker_sequence.size() != 2) {
    throw Error("manifest must contain exactly two speakers, found " +
                std::to_string(speaker_sequence.size()));
  }
  // The first speaker listed is the non-native source, as written by write_manifest.
  const std::string& src = speaker_sequence[0];

  ParallelCorpus corpus;
  for (auto& [prompt, rows] : by_prompt) {
    if (rows.size() != 2 || rows[0].u.speaker_id == rows[1].u.speaker_id) {
      throw Error("prompt '" + prompt + "' does not have exactly one utterance per speaker");
    }
    if (rows[0].split != rows[1].split) {
      throw Error("prompt '" + prompt + "' is assigned to two different splits");
    }
    if (normalize_transcript(rows[0].u.transcript) != normalize_transcript(rows[1].u.transcript)) {
      throw Error("transcript mismatch for prompt '" + prompt + "'");
    }
    const bool first_is_src = rows[0].u.speaker_id == src;
    UtterancePair pair{std::move(rows[first_is_src ? 0 : 1].u),
                       std::move(rows[first_is_src ? 1 : 0].u)};
    if (!rows[0].split.empty()) {
      switch (parse_split(rows[0].split)) {
        case Split::kTrain:
          corpus.splits.train.push_back(prompt);
          break;
        case Split::kDev:
          corpus.splits.dev.push_back(prompt);
          break;
        case Split::kTest:
          corpus.splits.test.push_back(prompt);
          break;
      }
    }
    corpus.pairs.emplace(prompt, std::move(pair));
  }
  corpus.validate();
  return corpus;
}

}  // namespace fac
