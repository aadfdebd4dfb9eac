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

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>

#include <gtest/gtest.h>
#include <unsupported/Eigen/FFT>

#include "fac/features.hpp"
#include "fac/subprocess.hpp"
#include "fac/toy_corpus.hpp"
#include "fac/vocoder.hpp"

namespace fac {
namespace {

std::vector<double> tones(const std::vector<double>& hz, std::size_t n, double amp = 0.2) {
  std::vector<double> s(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (double f : hz) s[i] += amp * std::sin(2.0 * std::numbers::pi * f * i / 16000.0);
  }
  return s;
}

// Frequency of the largest component, from a zero-padded FFT of `s`.
double peak_hz(const std::vector<double>& s, int rate) {
  std::vector<double> padded(s);
  padded.resize(8 * s.size(), 0.0);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  std::size_t best = 1;
  for (std::size_t k = 1; k < padded.size() / 2; ++k) {
    if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
  }
  return static_cast<double>(best) * rate / static_cast<double>(padded.size());
}

TEST(Analysis, FrameCountExamples) {
  const AnalysisConfig cfg;
  EXPECT_EQ(mel_analyze(tones({440}, 16000), cfg).frames(), 63);
  EXPECT_EQ(mel_analyze(tones({440}, 256), cfg).frames(), 2);
}

TEST(Analysis, FrameCountSweep) {
  AnalysisConfig cfg;
  for (std::size_t n = 1; n <= 10 * static_cast<std::size_t>(cfg.hop_size); ++n) {
    const std::vector<double> s(n, 0.01);
    ASSERT_EQ(mel_analyze(s, cfg).frames(), 1 + static_cast<Eigen::Index>(n / cfg.hop_size)) << n;
  }
}

TEST(Analysis, SilenceIsLogFloor) {
  const AnalysisConfig cfg;
  const MelSpectrogram m = mel_analyze(std::vector<double>(4000, 0.0), cfg);
  // Vectorized log may differ from std::log in the last ulp.
  EXPECT_TRUE((m.values.array() == m.values(0, 0)).all());
  EXPECT_NEAR(m.values(0, 0), std::log(cfg.log_floor), 1e-12);
}

TEST(Analysis, EmptyAndRateMismatchAreErrors) {
  EXPECT_THROW(mel_analyze(std::vector<double>{}, AnalysisConfig{}), Error);
  Utterance u;
  u.sample_rate = 22050;
  u.samples = {0.1, 0.2};
  EXPECT_THROW(mel_analyze(u), Error);
}

TEST(Analysis, Deterministic) {
  const auto s = tones({300, 1100}, 5000);
  EXPECT_EQ(mel_analyze(s, {}).values, mel_analyze(s, {}).values);
}

TEST(Analysis, DoublingAmplitudeAddsLog4) {
  const AnalysisConfig cfg;
  const auto s = tones({250, 900, 3100}, 8000, 0.1);
  std::vector<double> s2(s);
  for (double& x : s2) x *= 2.0;
  const Matrix a = mel_analyze(s, cfg).values;
  const Matrix b = mel_analyze(s2, cfg).values;
  const double floor = std::log(cfg.log_floor);
  int checked = 0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      if (a(r, c) < floor + 5.0) continue;
      ASSERT_NEAR(b(r, c) - a(r, c), std::log(4.0), 1e-6);
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(Filterbank, CentersAndArea) {
  const AnalysisConfig cfg;
  const Matrix fb = mel_filterbank(cfg);
  ASSERT_EQ(fb.rows(), 80);
  ASSERT_EQ(fb.cols(), 513);
  auto mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  auto inv = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  const double bin_hz = 16000.0 / 1024.0;
  for (int i = 0; i < 80; ++i) {
    const double center = inv(mel(80.0) + (mel(7600.0) - mel(80.0)) * (i + 1) / 81.0);
    Eigen::Index k;
    fb.row(i).maxCoeff(&k);
    EXPECT_LE(std::abs(static_cast<double>(k) * bin_hz - center), bin_hz) << i;
    EXPECT_TRUE((fb.row(i).array() >= 0).all());
    // Area normalization: a unit-area triangle once the filter spans many bins.
    if (i >= 40) {
      EXPECT_NEAR(fb.row(i).sum() * bin_hz, 1.0, 0.02) << i;
    }
  }
}

TEST(Stft, OverlapAddReconstructs) {
  const auto s = tones({123, 777}, 4096);
  const ComplexMatrix X = stft(s, 1024, 256);
  EXPECT_EQ(X.rows(), frame_count(s.size(), 256));
  const std::vector<double> y = istft(X, 1024, 256, s.size());
  ASSERT_EQ(y.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) ASSERT_NEAR(y[i], s[i], 1e-9) << i;
}

TEST(GriffinLim, SinusoidPeakSurvives) {
  const AnalysisConfig cfg;
  const MelSpectrogram m = mel_analyze(tones({440}, 16000, 0.5), cfg);
  const std::vector<double> y = griffin_lim(m, {60, 0});
  EXPECT_NEAR(peak_hz(y, 16000), 440.0, 5.0);
}

TEST(GriffinLim, SilenceGivesNearZero) {
  const MelSpectrogram m = mel_analyze(std::vector<double>(8000, 0.0), AnalysisConfig{});
  const std::vector<double> y = griffin_lim(m);
  double peak = 0;
  for (double v : y) peak = std::max(peak, std::abs(v));
  EXPECT_LT(peak, 1e-3);
}

TEST(GriffinLim, DeterministicLengthAndRoundTrip) {
  const AnalysisConfig cfg;
  ToyCorpusConfig tc;
  tc.n_prompts = 2;
  tc.splits = {2, 0, 0};
  const ToyCorpus toy = generate_toy_corpus(tc);
  for (const auto& [_, pair] : toy.corpus.pairs) {
    const MelSpectrogram m = mel_analyze(pair.reference, cfg);
    const auto a = griffin_lim(m, {60, 3});
    EXPECT_EQ(a, griffin_lim(m, {60, 3}));
    const double expected = static_cast<double>(m.frames() * cfg.hop_size);
    EXPECT_LE(std::abs(static_cast<double>(a.size()) - expected), cfg.hop_size);
    EXPECT_GT(spectral_correlation(mel_analyze(a, cfg).values, m.values), 0.9);
  }
  EXPECT_THROW(griffin_lim(mel_analyze(tones({440}, 1000), cfg), {0, 0}), Error);
}

TEST(SpectralCorrelation, ZeroVarianceIsError) {
  const Matrix a = Matrix::Constant(3, 4, 1.0);
  EXPECT_THROW(spectral_correlation(a, a), Error);
  Matrix b = Matrix::Random(5, 4);
  EXPECT_NEAR(spectral_correlation(b, b), 1.0, 1e-12);
  EXPECT_NEAR(spectral_correlation(b, -b), -1.0, 1e-12);
}

TEST(Dump, MatrixRoundTripAllPathForms) {
  TempDir dir;
  Matrix m(3, 2);
  m << 1.5, -2.25, 0.125, 3.0, 1e-3, 7.0;
  write_matrix_dump(dir.path() / "x", m, {{"note", "hi"}});
  for (const char* p : {"x", "x.bin", "x.json"}) {
    const MatrixDump d = read_matrix_dump(dir.path() / p);
    ASSERT_EQ(d.values.rows(), 3);
    ASSERT_EQ(d.values.cols(), 2);
    EXPECT_TRUE(d.values.isApprox(m.cast<float>().cast<double>()));
    EXPECT_EQ(d.meta["note"], "hi");
    EXPECT_EQ(d.meta["dtype"], "float32");
  }
}

TEST(Dump, MelSidecarCarriesAnalysis) {
  TempDir dir;
  AnalysisConfig cfg;
  cfg.n_mels = 40;
  const MelSpectrogram m = mel_analyze(tones({500}, 3000), cfg);
  write_mel_dump(dir.path() / "mel", m);
  const MelSpectrogram r = read_mel_dump(dir.path() / "mel");
  EXPECT_EQ(r.config, cfg);
  EXPECT_EQ(r.frames(), m.frames());
}

TEST(Vocoder, RegistryDispatchAndUnknownId) {
  VocoderRegistry reg = VocoderRegistry::with_defaults();
  const MelSpectrogram m = mel_analyze(tones({440}, 4000), AnalysisConfig{});
  const Utterance u = vocode(m, reg, "griffin-lim");
  EXPECT_EQ(u.samples, griffin_lim(m));
  EXPECT_EQ(u.sample_rate, 16000);
  try {
    vocode(m, reg, "pwg-x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("griffin-lim"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("pwg-x"), std::string::npos);
  }
}

TEST(Vocoder, ExternalCommandAdapter) {
  // Writes frames * hop samples of a constant 0.25 using the sidecar shape.
  const std::string script =
      "python3 -c \"import json,struct,sys,wave; m=json.load(open(sys.argv[1]+'.json')); "
      "n=m['shape'][0]*m['hop']; w=wave.open(sys.argv[2],'wb'); w.setnchannels(1); w.setsampwidth(2); "
      "w.setframerate(m['sample_rate']); w.writeframes(struct.pack('<h',8192)*n); w.close()\" {mel} {wav}";
  VocoderRegistry reg = VocoderRegistry::with_defaults();
  reg.add(std::make_shared<CommandVocoder>("external", script));
  const MelSpectrogram m = mel_analyze(tones({440}, 2560), AnalysisConfig{});
  const Utterance u = vocode(m, reg, "external");
  ASSERT_EQ(u.samples.size(), static_cast<std::size_t>(m.frames() * 256));
  EXPECT_NEAR(u.samples[10], 0.25, 1e-4);
  reg.add(std::make_shared<CommandVocoder>("broken", "exit 2"));
  EXPECT_THROW(vocode(m, reg, "broken"), Error);
}

}  // namespace
}  // namespace fac
