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

// Parallel non-native/native corpus: ingest, resampling, splitting and the
// JSON-lines manifest format.

#ifndef FAC_CORPUS_HPP_
#define FAC_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fac/audio.hpp"

namespace fac {

struct UtterancePair {
  Utterance source;     // non-native speaker
  Utterance reference;  // native reference speaker
  bool operator==(const UtterancePair&) const = default;
};

enum class Split { kTrain, kDev, kTest };

const char* split_name(Split s);
Split parse_split(const std::string& name);

struct CorpusSplits {
  std::vector<std::string> train;
  std::vector<std::string> dev;
  std::vector<std::string> test;

  const std::vector<std::string>& get(Split s) const;
  bool empty() const { return train.empty() && dev.empty() && test.empty(); }
  bool operator==(const CorpusSplits&) const = default;
};

struct ParallelCorpus {
  std::map<std::string, UtterancePair> pairs;  // keyed by prompt_id
  CorpusSplits splits;

  std::string source_speaker() const;
  std::string reference_speaker() const;
  std::vector<const UtterancePair*> pairs_in(Split s) const;

  // Throws fac::Error describing the first violated corpus invariant.
  void validate() const;

  // Stable hash over ids, transcripts and samples; feeds bundle provenance.
  std::string content_hash() const;

  bool operator==(const ParallelCorpus&) const = default;
};

struct Exclusion {
  std::string prompt_id;
  std::string reason;
};

struct IngestReport {
  std::vector<Exclusion> excluded;
  std::map<std::string, std::filesystem::path> audio_paths;  // by utterance_id
};

// Transcript table: one row per line, tab separated, either
//   prompt_id <TAB> text                 (shared by both speakers)
//   speaker_id <TAB> prompt_id <TAB> text
// Blank lines and lines starting with '#' are ignored.
struct TranscriptTable {
  std::map<std::string, std::string> shared;
  std::map<std::pair<std::string, std::string>, std::string> per_speaker;

  const std::string* find(const std::string& speaker, const std::string& prompt) const;
};

TranscriptTable read_transcript_table(const std::filesystem::path& path);

// Audio files are <dir>/<prompt_id>.wav; the directory name is the speaker id.
// Prompts present on only one side are excluded and listed in `report`.
ParallelCorpus ingest_corpus(const std::filesystem::path& source_dir,
                             const std::filesystem::path& reference_dir,
                             const std::filesystem::path& transcript_table,
                             IngestReport* report = nullptr);

// Band-limited (windowed-sinc) sample-rate conversion.
inline constexpr int kDefaultResampleTaps = 64;
Utterance resample(const Utterance& u, int target_rate, int taps = kDefaultResampleTaps);

struct SplitSizes {
  std::size_t train = 1032;
  std::size_t dev = 50;
  std::size_t test = 50;
};

// Prompts are sorted, shuffled with `seed`, then cut into train/dev/test.
// Pairs not assigned to any split are dropped from the returned corpus.
ParallelCorpus split_corpus(const ParallelCorpus& c, SplitSizes sizes, std::uint64_t seed);

// One JSON object per utterance: utterance_id, speaker_id, prompt_id, path,
// transcript, split. Paths are written relative to the manifest directory.
void write_manifest(const ParallelCorpus& c, const std::filesystem::path& manifest_path,
                    const std::map<std::string, std::filesystem::path>& audio_paths);

// Writes every utterance as 16-bit WAV under `dir`/wav and a manifest at
// `dir`/manifest.jsonl. Returns the manifest path.
std::filesystem::path export_corpus(const ParallelCorpus& c, const std::filesystem::path& dir);

ParallelCorpus read_manifest(const std::filesystem::path& manifest_path);

}  // namespace fac

#endif  // FAC_CORPUS_HPP_
