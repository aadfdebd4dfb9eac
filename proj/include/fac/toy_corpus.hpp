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

// Synthetic parallel corpus for desk-scale experiments. Each prompt is a
// short sequence of "phones", each rendered as a pair of sinusoids. The
// non-native speaker stretches every phone in time and lowers all
// frequencies; the native reference speaker uses the base patterns.

#ifndef FAC_TOY_CORPUS_HPP_
#define FAC_TOY_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fac/common.hpp"
#include "fac/corpus.hpp"
#include "fac/extractors.hpp"

namespace fac {

struct ToyCorpusConfig {
  int n_prompts = 70;
  int min_phones = 3;
  int max_phones = 5;
  double phone_ms = 80.0;
  double edge_silence_ms = 48.0;
  double source_stretch = 1.3;
  double source_freq_scale = 0.9;
  double amplitude = 0.25;
  int sample_rate = kDefaultSampleRate;
  std::uint64_t seed = 7;
  SplitSizes splits{50, 10, 10};
  std::string source_speaker = "toy_nonnative";
  std::string reference_speaker = "toy_native";
};

// Sample range [begin, end) carrying one phone; phone 0 is silence.
struct PhoneSegment {
  std::size_t begin = 0;
  std::size_t end = 0;
  int phone = 0;
};

struct ToyCorpus {
  ParallelCorpus corpus;
  std::map<std::string, std::vector<PhoneSegment>> segments;  // by utterance_id
  int n_phones = 0;  // including silence

  // Phone label at each frame center (frame t is centered on sample t * hop).
  std::vector<int> frame_labels(const std::string& utterance_id, int hop, Eigen::Index frames) const;
};

inline constexpr int kToyPhoneTypes = 6;

ToyCorpus generate_toy_corpus(const ToyCorpusConfig& cfg = {});

// Writes <dir>/<speaker>/<prompt>.wav for both speakers, <dir>/transcripts.tsv
// and <dir>/segments.jsonl (utterance_id plus [begin, end, phone] triples).
void write_toy_corpus(const ToyCorpus& toy, const std::filesystem::path& dir);

std::map<std::string, std::vector<PhoneSegment>> read_segments(const std::filesystem::path& path);

std::vector<int> frame_labels_from_segments(const std::vector<PhoneSegment>& segments, int hop,
                                            Eigen::Index frames);

// Stacked mel frames of every utterance in `corpus` with their phone labels.
struct LabelledFrames {
  Matrix frames;
  std::vector<int> labels;
};

LabelledFrames labelled_frames(const ParallelCorpus& corpus,
                               const std::map<std::string, std::vector<PhoneSegment>>& segments,
                               const AnalysisConfig& analysis = {});

// Stand-in extractors fitted on the toy corpus: a phone classifier trained
// on the segment labels and a k-means quantizer over all mel frames.
std::shared_ptr<ToyPpgExtractor> train_toy_ppg(const ParallelCorpus& corpus,
                                               const std::map<std::string, std::vector<PhoneSegment>>& segments,
                                               int n_phones, const AnalysisConfig& analysis = {},
                                               const ToyPpgConfig& cfg = {});
std::shared_ptr<ToyQuantizedExtractor> train_toy_quantized(const ParallelCorpus& corpus, int k,
                                                           std::uint64_t seed,
                                                           const AnalysisConfig& analysis = {},
                                                           const ToyQuantizedConfig& cfg = {});

}  // namespace fac

#endif  // FAC_TOY_CORPUS_HPP_
