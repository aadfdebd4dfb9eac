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

#ifndef FAC_AUDIO_HPP_
#define FAC_AUDIO_HPP_

#include <filesystem>
#include <string>
#include <vector>

namespace fac {

inline constexpr int kDefaultSampleRate = 16000;

// One recording. Amplitudes are in [-1, 1].
struct Utterance {
  std::string utterance_id;
  std::string speaker_id;
  std::string prompt_id;
  int sample_rate = kDefaultSampleRate;
  std::vector<double> samples;
  std::string transcript;

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }

  bool operator==(const Utterance&) const = default;
};

// Throws fac::Error unless samples are non-empty, finite, and within [-1, 1].
void validate_samples(const Utterance& u);

struct WavData {
  int sample_rate = 0;
  std::vector<double> samples;
};

// 16-bit PCM mono only. Stereo and other encodings are rejected.
WavData read_wav(const std::filesystem::path& path);
WavData decode_wav(const std::string& bytes, const std::string& origin = "<memory>");

void write_wav(const std::filesystem::path& path, const std::vector<double>& samples,
               int sample_rate);
std::string encode_wav(const std::vector<double>& samples, int sample_rate);

}  // namespace fac

#endif  // FAC_AUDIO_HPP_
