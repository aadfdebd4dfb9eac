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

#include "fac/features.hpp"

#include <cmath>
#include <algorithm>
#include <cstring>
#include <fstream>
#include <numbers>

#include <unsupported/Eigen/FFT>

namespace fac {

namespace fs = std::filesystem;
using nlohmann::json;

void AnalysisConfig::validate() const {
  if (sample_rate <= 0 || hop_size <= 0 || win_size <= 0 || n_mels <= 0) {
    throw Error("analysis config: sizes and rates must be positive");
  }
  if (win_size % 2 != 0) throw Error("analysis config: win_size must be even");
  if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0)) {
    throw Error("analysis config: need 0 <= fmin < fmax <= sample_rate / 2");
  }
  if (!(log_floor > 0.0)) throw Error("analysis config: log_floor must be positive");
}

json to_json(const AnalysisConfig& cfg) {
  return {{"sample_rate", cfg.sample_rate}, {"hop_size", cfg.hop_size},
          {"win_size", cfg.win_size},       {"n_mels", cfg.n_mels},
          {"fmin", cfg.fmin},               {"fmax", cfg.fmax},
          {"log_floor", cfg.log_floor}};
}

AnalysisConfig analysis_config_from_json(const json& j) {
  AnalysisConfig cfg;
  cfg.sample_rate = j.value("sample_rate", cfg.sample_rate);
  cfg.hop_size = j.value("hop_size", cfg.hop_size);
  cfg.win_size = j.value("win_size", cfg.win_size);
  cfg.n_mels = j.value("n_mels", cfg.n_mels);
  cfg.fmin = j.value("fmin", cfg.fmin);
  cfg.fmax = j.value("fmax", cfg.fmax);
  cfg.log_floor = j.value("log_floor", cfg.log_floor);
  cfg.validate();
  return cfg;
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> hann(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

}  // namespace

Matrix mel_filterbank(const AnalysisConfig& cfg) {
  cfg.validate();
  const int n_bins = cfg.n_bins();
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels + 2));
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[static_cast<std::size_t>(i)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));
  }
  Matrix fb = Matrix::Zero(cfg.n_mels, n_bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double mid = edges[static_cast<std::size_t>(m + 1)];
    const double hi = edges[static_cast<std::size_t>(m + 2)];
    const double norm = 2.0 / (hi - lo);
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.win_size;
      const double rise = (f - lo) / (mid - lo);
      const double fall = (hi - f) / (hi - mid);
      fb(m, k) = std::max(0.0, std::min(rise, fall)) * norm;
    }
  }
  return fb;
}

ComplexMatrix stft(const std::vector<double>& signal, int n_fft, int hop) {
  if (signal.empty()) throw Error("stft: empty signal");
  const Eigen::Index frames = frame_count(signal.size(), hop);
  const int pad = n_fft / 2;
  const auto window = hann(n_fft);
  const int n_bins = n_fft / 2 + 1;
  ComplexMatrix out(frames, n_bins);
  Eigen::FFT<double> fft;
  std::vector<double> buf(static_cast<std::size_t>(n_fft));
  std::vector<std::complex<double>> spec;
  const auto n = static_cast<std::ptrdiff_t>(signal.size());
  for (Eigen::Index f = 0; f < frames; ++f) {
    const std::ptrdiff_t start = f * hop - pad;
    for (int i = 0; i < n_fft; ++i) {
      const std::ptrdiff_t idx = start + i;
      const double s = (idx >= 0 && idx < n) ? signal[static_cast<std::size_t>(idx)] : 0.0;
      buf[static_cast<std::size_t>(i)] = s * window[static_cast<std::size_t>(i)];
    }
    fft.fwd(spec, buf);
    for (int k = 0; k < n_bins; ++k) out(f, k) = spec[static_cast<std::size_t>(k)];
  }
  return out;
}

std::vector<double> istft(const ComplexMatrix& spec, int n_fft, int hop, std::size_t length) {
  const Eigen::Index frames = spec.rows();
  const int n_bins = n_fft / 2 + 1;
  if (spec.cols() != n_bins) throw Error("istft: bin count does not match n_fft");
  const int pad = n_fft / 2;
  const auto window = hann(n_fft);
  const std::size_t full = static_cast<std::size_t>(n_fft + hop * (frames - 1));
  std::vector<double> acc(full, 0.0), wsum(full, 0.0);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> half(static_cast<std::size_t>(n_fft));
  std::vector<double> frame;
  for (Eigen::Index f = 0; f < frames; ++f) {
    // Rebuild the Hermitian-symmetric full spectrum.
    for (int k = 0; k < n_bins; ++k) half[static_cast<std::size_t>(k)] = spec(f, k);
    for (int k = n_bins; k < n_fft; ++k) {
      half[static_cast<std::size_t>(k)] = std::conj(spec(f, n_fft - k));
    }
    fft.inv(frame, half);
    const std::size_t start = static_cast<std::size_t>(f * hop);
    for (int i = 0; i < n_fft; ++i) {
      const double w = window[static_cast<std::size_t>(i)];
      acc[start + static_cast<std::size_t>(i)] += frame[static_cast<std::size_t>(i)] * w;
      wsum[start + static_cast<std::size_t>(i)] += w * w;
    }
  }
  if (length == 0) length = static_cast<std::size_t>(hop * (frames - 1));
  length = std::min(length, full - static_cast<std::size_t>(pad));
  std::vector<double> out(length, 0.0);
  for (std::size_t i = 0; i < length; ++i) {
    const double w = wsum[i + static_cast<std::size_t>(pad)];
    out[i] = w > 1e-8 ? acc[i + static_cast<std::size_t>(pad)] / w : 0.0;
  }
  return out;
}

MelSpectrogram mel_analyze(const std::vector<double>& samples, const AnalysisConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw Error("mel_analyze: empty signal");
  const ComplexMatrix spec = stft(samples, cfg.win_size, cfg.hop_size);
  const Matrix power = spec.cwiseAbs2();
  const Matrix fb = mel_filterbank(cfg);
  MelSpectrogram m;
  m.config = cfg;
  m.values = (power * fb.transpose()).array().max(cfg.log_floor).log().matrix();
  return m;
}

MelSpectrogram mel_analyze(const Utterance& u, const AnalysisConfig& cfg) {
  if (u.sample_rate != cfg.sample_rate) {
    throw Error("mel_analyze: utterance '" + u.utterance_id + "' is at " +
                std::to_string(u.sample_rate) + " Hz, analysis expects " +
                std::to_string(cfg.sample_rate) + " Hz");
  }
  return mel_analyze(u.samples, cfg);
}

namespace {

// Non-negative least squares for P fb^T = mel_power by multiplicative
// updates; a clamped pseudo-inverse leaks energy into silent bands.
Matrix mel_to_linear_power(const Matrix& mel_power, const Matrix& fb) {
  constexpr int kIterations = 200;
  constexpr double kTiny = 1e-30;
  Matrix p = (mel_power * fb).cwiseMax(0.0);  // frames x bins
  // Bins outside every filter cannot be recovered; keep them silent.
  const RowVector coverage = fb.colwise().sum();
  const Matrix numer = mel_power * fb;
  for (int it = 0; it < kIterations; ++it) {
    const Matrix denom = (p * fb.transpose()) * fb;
    p = p.cwiseProduct(numer).cwiseQuotient(denom.array().max(kTiny).matrix());
  }
  for (Eigen::Index k = 0; k < p.cols(); ++k) {
    if (coverage(k) <= 0.0) p.col(k).setZero();
  }
  return p;
}

}  // namespace

std::vector<double> griffin_lim(const MelSpectrogram& m, const GriffinLimOptions& opts) {
  const AnalysisConfig& cfg = m.config;
  cfg.validate();
  if (opts.iterations < 1) throw Error("griffin_lim: iterations must be >= 1");
  if (m.values.rows() < 1 || m.values.cols() != cfg.n_mels) {
    throw Error("griffin_lim: mel matrix shape does not match its config");
  }
  if (!m.values.allFinite()) throw Error("griffin_lim: non-finite mel values");

  // Values at the log floor carry no energy.
  const double floor_log = std::log(cfg.log_floor);
  Matrix mel_power = m.values.unaryExpr([floor_log](double v) {
    return v > floor_log + 1e-9 ? std::exp(v) : 0.0;
  });
  const Matrix magnitude = mel_to_linear_power(mel_power, mel_filterbank(cfg)).cwiseSqrt();

  const Eigen::Index frames = magnitude.rows();
  const Eigen::Index bins = magnitude.cols();
  Rng rng(opts.seed);
  ComplexMatrix spec(frames, bins);
  for (Eigen::Index f = 0; f < frames; ++f) {
    for (Eigen::Index k = 0; k < bins; ++k) {
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      spec(f, k) = std::polar(magnitude(f, k), phase);
    }
  }
  if (frames == 1) {
    // Re-analysing a one-hop signal would yield two frames, so skip iterating.
    std::vector<double> single = istft(spec, cfg.win_size, cfg.hop_size,
                                       static_cast<std::size_t>(cfg.hop_size));
    for (double& s : single) s = std::clamp(s, -1.0, 1.0);
    return single;
  }
  std::vector<double> signal = istft(spec, cfg.win_size, cfg.hop_size);
  for (int it = 1; it < opts.iterations; ++it) {
    const ComplexMatrix rebuilt = stft(signal, cfg.win_size, cfg.hop_size);
    for (Eigen::Index f = 0; f < frames; ++f) {
      for (Eigen::Index k = 0; k < bins; ++k) {
        const std::complex<double> c = rebuilt(f, k);
        const double a = std::abs(c);
        spec(f, k) = a > 1e-12 ? magnitude(f, k) * (c / a) : std::complex<double>(magnitude(f, k), 0.0);
      }
    }
    signal = istft(spec, cfg.win_size, cfg.hop_size);
  }
  for (double& s : signal) s = std::clamp(s, -1.0, 1.0);
  return signal;
}

void write_matrix_dump(const fs::path& stem, const Matrix& m, json meta) {
  if (!stem.parent_path().empty()) fs::create_directories(stem.parent_path());
  fs::path bin = stem;
  bin += ".bin";
  fs::path side = stem;
  side += ".json";
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw IoError("cannot write " + bin.string());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const auto v = static_cast<float>(m(r, c));
      std::uint32_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      char b[4];
      for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
      out.write(b, 4);
    }
  }
  meta["shape"] = {m.rows(), m.cols()};
  meta["dtype"] = "float32";
  std::ofstream js(side);
  if (!js) throw IoError("cannot write " + side.string());
  js << meta.dump(2) << '\n';
}

MatrixDump read_matrix_dump(const fs::path& path) {
  fs::path stem = path;
  if (stem.extension() == ".bin" || stem.extension() == ".json") stem.replace_extension();
  fs::path bin = stem;
  bin += ".bin";
  fs::path side = stem;
  side += ".json";
  std::ifstream js(side);
  if (!js) throw IoError("cannot open sidecar " + side.string());
  MatrixDump out;
  try {
    js >> out.meta;
  } catch (const json::exception& e) {
    throw Error(side.string() + ": " + e.what());
  }
  if (!out.meta.contains("shape") || out.meta["shape"].size() != 2) {
    throw Error(side.string() + ": missing shape");
  }
  const auto rows = out.meta["shape"][0].get<Eigen::Index>();
  const auto cols = out.meta["shape"][1].get<Eigen::Index>();
  const std::string dtype = out.meta.value("dtype", "float32");
  const std::size_t width = dtype == "float64" ? 8 : dtype == "float32" ? 4 : 0;
  if (width == 0) throw Error(side.string() + ": unsupported dtype " + dtype);
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw IoError("cannot open " + bin.string());
  std::vector<char> raw(static_cast<std::size_t>(rows * cols) * width);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw Error(bin.string() + ": expected " + std::to_string(raw.size()) + " bytes");
  }
  out.values.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows * cols; ++i) {
    const auto* p = reinterpret_cast<const unsigned char*>(raw.data()) + i * static_cast<Eigen::Index>(width);
    std::uint64_t bits = 0;
    for (std::size_t b = 0; b < width; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    double v;
    if (width == 4) {
      float f;
      const auto b32 = static_cast<std::uint32_t>(bits);
      std::memcpy(&f, &b32, sizeof f);
      v = f;
    } else {
      std::memcpy(&v, &bits, sizeof v);
    }
    out.values(i / cols, i % cols) = v;
  }
  return out;
}

void write_mel_dump(const fs::path& stem, const MelSpectrogram& m) {
  json meta = to_json(m.config);
  meta["kind"] = "mel";
  meta["hop"] = m.hop_size();
  write_matrix_dump(stem, m.values, std::move(meta));
}

MelSpectrogram read_mel_dump(const fs::path& path) {
  MatrixDump d = read_matrix_dump(path);
  MelSpectrogram m;
  m.config = analysis_config_from_json(d.meta);
  if (d.values.cols() != m.config.n_mels) throw Error("mel dump: n_mels does not match shape");
  m.values = std::move(d.values);
  return m;
}

double spectral_correlation(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw Error("spectral_correlation: bin count mismatch");
  const Eigen::Index n = std::min(a.rows(), b.rows());
  if (n == 0) throw Error("spectral_correlation: empty input");
  const Eigen::ArrayXXd x = a.topRows(n).array() - a.topRows(n).mean();
  const Eigen::ArrayXXd y = b.topRows(n).array() - b.topRows(n).mean();
  const double sxx = (x * x).sum();
  const double syy = (y * y).sum();
  if (sxx == 0.0 || syy == 0.0) throw Error("spectral_correlation: zero variance");
  return (x * y).sum() / std::sqrt(sxx * syy);
}

}  // namespace fac
