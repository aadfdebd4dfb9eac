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

// Log-mel analysis, STFT helpers, Griffin-Lim inversion and the feature dump
// file format (float32 matrix + JSON sidecar).

#ifndef FAC_FEATURES_HPP_
#define FAC_FEATURES_HPP_

#include <complex>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "fac/audio.hpp"
#include "fac/common.hpp"
#include "json.hpp"

namespace fac {

struct AnalysisConfig {
  int sample_rate = kDefaultSampleRate;
  int hop_size = 256;
  int win_size = 1024;  // also the FFT size
  int n_mels = 80;
  double fmin = 80.0;
  double fmax = 7600.0;
  double log_floor = 1e-10;

  double frame_period_ms() const { return 1000.0 * hop_size / sample_rate; }
  int n_bins() const { return win_size / 2 + 1; }
  void validate() const;
  bool operator==(const AnalysisConfig&) const = default;
};

nlohmann::json to_json(const AnalysisConfig& cfg);
AnalysisConfig analysis_config_from_json(const nlohmann::json& j);

// frames x n_mels natural-log mel power.
struct MelSpectrogram {
  Matrix values;
  AnalysisConfig config;

  Eigen::Index frames() const { return values.rows(); }
  int n_mels() const { return config.n_mels; }
  int hop_size() const { return config.hop_size; }
  int win_size() const { return config.win_size; }
  int sample_rate() const { return config.sample_rate; }
};

// 1 + floor(num_samples / hop) under center padding.
inline Eigen::Index frame_count(std::size_t num_samples, int hop) {
  return 1 + static_cast<Eigen::Index>(num_samples / static_cast<std::size_t>(hop));
}

// n_mels x n_bins triangular filters (HTK mel scale, Slaney area norm).
Matrix mel_filterbank(const AnalysisConfig& cfg);

using ComplexMatrix = Eigen::MatrixXcd;

// Centered, zero-padded STFT with a periodic Hann window. frames x n_bins.
ComplexMatrix stft(const std::vector<double>& signal, int n_fft, int hop);

// Weighted overlap-add inverse. `length` 0 means hop * (frames - 1) samples,
// which re-analyses to the same frame count.
std::vector<double> istft(const ComplexMatrix& spec, int n_fft, int hop, std::size_t length = 0);

MelSpectrogram mel_analyze(const std::vector<double>& samples, const AnalysisConfig& cfg);
MelSpectrogram mel_analyze(const Utterance& u, const AnalysisConfig& cfg = {});

struct GriffinLimOptions {
  int iterations = 60;
  std::uint64_t seed = 0;
};

// Non-negative least squares maps mel power back to linear power,
// then phase is recovered iteratively from a seeded random start.
std::vector<double> griffin_lim(const MelSpectrogram& m, const GriffinLimOptions& opts = {});

// Pearson correlation over all cells of the common leading frames of two
// spectrograms. Throws when either has zero variance.
double spectral_correlation(const Matrix& a, const Matrix& b);

// Feature dump: <stem>.bin holds little-endian float32 values row-major,
// <stem>.json holds {"shape": [rows, cols], "dtype": "float32", ...meta}.
void write_matrix_dump(const std::filesystem::path& stem, const Matrix& m,
                       nlohmann::json meta = nlohmann::json::object());

struct MatrixDump {
  Matrix values;
  nlohmann::json meta;
};

// Accepts either the stem, the .bin, or the .json path.
MatrixDump read_matrix_dump(const std::filesystem::path& path);

void write_mel_dump(const std::filesystem::path& stem, const MelSpectrogram& m);
MelSpectrogram read_mel_dump(const std::filesystem::path& path);

}  // namespace fac

#endif  // FAC_FEATURES_HPP_
