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

#include "fac/extractors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fac/subprocess.hpp"

namespace fac {

using nlohmann::json;

const AnalysisConfig& ExtractorBackend::analysis() const {
  throw Error("extractor '" + extractor_id() + "' does not operate on mel spectrograms");
}

Matrix ExtractorBackend::extract_from_mel(const MelSpectrogram&) const {
  throw Error("extractor '" + extractor_id() + "' does not accept mel input");
}

LatentSequence ExtractorBackend::wrap(Matrix values) const {
  if (values.rows() < 1) throw Error("extractor '" + extractor_id() + "' produced no frames");
  if (values.cols() != dim()) {
    throw Error("extractor '" + extractor_id() + "' produced dim " + std::to_string(values.cols()) +
                ", declared " + std::to_string(dim()));
  }
  if (!all_finite(values)) throw Error("extractor '" + extractor_id() + "' produced non-finite values");
  return {std::move(values), extractor_id(), frame_period_ms()};
}

LatentSequence ExtractorBackend::extract(const Utterance& u) const {
  const AnalysisConfig& cfg = analysis();
  if (u.sample_rate != cfg.sample_rate) {
    throw Error("extractor '" + extractor_id() + "' expects " + std::to_string(cfg.sample_rate) +
                " Hz audio, got " + std::to_string(u.sample_rate));
  }
  if (u.samples.size() < static_cast<std::size_t>(cfg.hop_size)) {
    throw Error("utterance '" + u.utterance_id + "' is shorter than one frame");
  }
  return wrap(extract_from_mel(mel_analyze(u, cfg)));
}

// ---------------------------------------------------------------------------
// Identity

Matrix IdentityExtractor::extract_from_mel(const MelSpectrogram& m) const { return m.values; }

nn::Checkpoint IdentityExtractor::to_checkpoint() const {
  nn::Checkpoint c;
  c.meta = {{"kind", "extractor"}, {"type", "identity"}, {"extractor_id", extractor_id()},
            {"analysis", to_json(analysis_)}};
  return c;
}

// ---------------------------------------------------------------------------
// Toy PPG

ToyPpgExtractor::ToyPpgExtractor(std::string id, AnalysisConfig analysis, nn::ParameterStore params)
    : id_(std::move(id)), analysis_(analysis), params_(std::move(params)) {
  for (const char* name : {"input.mean", "input.std", "hidden.weight", "hidden.bias",
                           "output.weight", "output.bias"}) {
    if (!params_.contains(name)) throw Error(std::string("toy-ppg parameters lack '") + name + "'");
  }
  if (params_.at("hidden.weight").rows() != analysis_.n_mels) {
    throw Error("toy-ppg input width does not match n_mels");
  }
}

int ToyPpgExtractor::dim() const { return static_cast<int>(params_.at("output.weight").cols()); }

Matrix ToyPpgExtractor::logits(const Matrix& mel_rows) const {
  const RowVector mean = params_.at("input.mean");
  const RowVector std = params_.at("input.std");
  const Matrix x = (mel_rows.rowwise() - mean).array().rowwise() / std.array();
  const Matrix h = ((x * params_.at("hidden.weight")).rowwise() +
                    RowVector(params_.at("hidden.bias"))).array().tanh().matrix();
  return (h * params_.at("output.weight")).rowwise() + RowVector(params_.at("output.bias"));
}

Matrix ToyPpgExtractor::extract_from_mel(const MelSpectrogram& m) const {
  Matrix z = logits(m.values);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double mx = z.row(r).maxCoeff();
    z.row(r) = (z.row(r).array() - mx).exp().matrix();
    z.row(r) /= z.row(r).sum();
  }
  return z;
}

nn::Checkpoint ToyPpgExtractor::to_checkpoint() const {
  nn::Checkpoint c;
  c.meta = {{"kind", "extractor"}, {"type", "toy-ppg"}, {"extractor_id", id_},
            {"analysis", to_json(analysis_)}};
  c.params = params_;
  return c;
}

std::shared_ptr<ToyPpgExtractor> train_toy_ppg(const Matrix& frames, const std::vector<int>& labels,
                                               int n_phones, const AnalysisConfig& analysis,
                                               const ToyPpgConfig& cfg) {
  if (n_phones < 2) throw Error("train_toy_ppg: need at least 2 phones");
  if (frames.rows() != static_cast<Eigen::Index>(labels.size()) || frames.rows() == 0) {
    throw Error("train_toy_ppg: frame and label counts differ or are zero");
  }
  if (frames.cols() != analysis.n_mels) throw Error("train_toy_ppg: frame width must equal n_mels");
  std::vector<int> seen(static_cast<std::size_t>(n_phones), 0);
  for (int l : labels) {
    if (l < 0 || l >= n_phones) throw Error("train_toy_ppg: label out of range");
    seen[static_cast<std::size_t>(l)] = 1;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw Error("train_toy_ppg: every phone needs at least one frame");
  }

  const RowVector mean = frames.colwise().mean();
  const Matrix centered = frames.rowwise() - mean;
  RowVector std = (centered.array().square().colwise().sum() / static_cast<double>(frames.rows()))
                      .sqrt()
                      .matrix();
  std = std.cwiseMax(1e-3);
  const Matrix x = centered.array().rowwise() / std.array();

  Rng rng(cfg.seed);
  nn::ParameterStore p;
  p.add("input.mean", mean);
  p.add("input.std", std);
  const auto w1 = p.add("hidden.weight", nn::xavier_uniform(analysis.n_mels, cfg.hidden, rng));
  const auto b1 = p.add("hidden.bias", Matrix::Zero(1, cfg.hidden));
  const auto w2 = p.add("output.weight", nn::xavier_uniform(cfg.hidden, n_phones, rng));
  const auto b2 = p.add("output.bias", Matrix::Zero(1, n_phones));

  for (int step = 0; step < cfg.steps; ++step) {
    nn::Tape t(p);
    const nn::Var h = t.tanh(t.linear(t.constant(x), w1, b1));
    const nn::Var loss = t.cross_entropy(t.linear(h, w2, b2), labels);
    std::vector<Matrix> grads = p.zeros_like();
    t.backward(loss, grads);
    for (auto idx : {w1, b1, w2, b2}) p.at(idx) -= cfg.learning_rate * grads[idx];
  }
  return std::make_shared<ToyPpgExtractor>(cfg.extractor_id, analysis, std::move(p));
}

// ---------------------------------------------------------------------------
// Toy quantized

ToyQuantizedExtractor::ToyQuantizedExtractor(std::string id, AnalysisConfig analysis, Matrix codebook)
    : id_(std::move(id)), analysis_(analysis), codebook_(std::move(codebook)) {
  if (codebook_.rows() < 2) throw Error("toy-vq codebook needs at least 2 entries");
  if (codebook_.cols() != analysis_.n_mels) throw Error("toy-vq codebook width must equal n_mels");
}

std::vector<int> ToyQuantizedExtractor::assign(const Matrix& rows) const {
  std::vector<int> out(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    Eigen::Index best = 0;
    (codebook_.rowwise() - rows.row(r)).rowwise().squaredNorm().minCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

Matrix ToyQuantizedExtractor::extract_from_mel(const MelSpectrogram& m) const {
  const auto codes = assign(m.values);
  Matrix out(m.values.rows(), codebook_.cols());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = codebook_.row(codes[i]);
  }
  return out;
}

nn::Checkpoint ToyQuantizedExtractor::to_checkpoint() const {
  nn::Checkpoint c;
  c.meta = {{"kind", "extractor"}, {"type", "toy-vq"}, {"extractor_id", id_},
            {"analysis", to_json(analysis_)}};
  c.params.add("codebook", codebook_);
  return c;
}

std::shared_ptr<ToyQuantizedExtractor> train_toy_quantized(const std::vector<MelSpectrogram>& mels,
                                                           int k, std::uint64_t seed,
                                                           const ToyQuantizedConfig& cfg) {
  if (k < 2) throw Error("train_toy_quantized: K must be >= 2");
  if (mels.empty()) throw Error("train_toy_quantized: no spectrograms");
  Eigen::Index total = 0;
  for (const auto& m : mels) {
    if (m.config != mels.front().config) throw Error("train_toy_quantized: mixed analysis settings");
    total += m.frames();
  }
  if (k > total) {
    throw Error("train_toy_quantized: K = " + std::to_string(k) + " exceeds " +
                std::to_string(total) + " frames");
  }
  Matrix data(total, mels.front().n_mels());
  Eigen::Index row = 0;
  for (const auto& m : mels) {
    data.middleRows(row, m.frames()) = m.values;
    row += m.frames();
  }

  Rng rng(seed);
  Matrix centers(k, data.cols());
  centers.row(0) = data.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(total))));
  Eigen::VectorXd d2 = (data.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double sum = d2.sum();
    Eigen::Index pick = 0;
    if (sum > 0.0) {
      double u = rng.uniform() * sum;
      pick = total - 1;
      for (Eigen::Index i = 0; i < total; ++i) {
        u -= d2(i);
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
      while (d2(pick) == 0.0) --pick;
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(total)));
    }
    centers.row(c) = data.row(pick);
    d2 = d2.cwiseMin((data.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  std::vector<int> assign(static_cast<std::size_t>(total), -1);
  for (int it = 0; it < cfg.max_iterations; ++it) {
    bool changed = false;
    for (Eigen::Index r = 0; r < total; ++r) {
      Eigen::Index best = 0;
      (centers.rowwise() - data.row(r)).rowwise().squaredNorm().minCoeff(&best);
      if (assign[static_cast<std::size_t>(r)] != best) {
        assign[static_cast<std::size_t>(r)] = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums = Matrix::Zero(k, data.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index r = 0; r < total; ++r) {
      sums.row(assign[static_cast<std::size_t>(r)]) += data.row(r);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(r)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
    }
  }
  return std::make_shared<ToyQuantizedExtractor>(cfg.extractor_id, mels.front().config,
                                                 std::move(centers));
}

// ---------------------------------------------------------------------------
// External

ExternalExtractor::ExternalExtractor(std::string id, std::string command, int dim,
                                     double frame_period_ms)
    : id_(std::move(id)), command_(std::move(command)), dim_(dim), period_ms_(frame_period_ms) {
  if (dim_ < 1 || period_ms_ <= 0.0) throw Error("external extractor needs positive dim and frame period");
}

LatentSequence ExternalExtractor::extract(const Utterance& u) const {
  const double min_samples = period_ms_ * u.sample_rate / 1000.0;
  if (static_cast<double>(u.samples.size()) < min_samples) {
    throw Error("utterance '" + u.utterance_id + "' is shorter than one frame");
  }
  TempDir tmp;
  const auto wav = tmp.path() / "in.wav";
  const auto out = tmp.path() / "latent";
  write_wav(wav, u.samples, u.sample_rate);
  const auto r = run_command(expand_command(command_, {{"wav", wav.string()}, {"out", out.string()}}));
  if (r.exit_code != 0) {
    throw Error("extractor '" + id_ + "' command failed with exit code " + std::to_string(r.exit_code));
  }
  return wrap(read_matrix_dump(out).values);
}

nn::Checkpoint ExternalExtractor::to_checkpoint() const {
  nn::Checkpoint c;
  c.meta = {{"kind", "extractor"}, {"type", "external"}, {"extractor_id", id_},
            {"command", command_}, {"dim", dim_}, {"frame_period_ms", period_ms_},
            {"posteriors", posteriors_}};
  return c;
}

// ---------------------------------------------------------------------------
// Persistence and registry

void save_extractor(const ExtractorBackend& backend, const std::filesystem::path& path) {
  const nn::Checkpoint c = backend.to_checkpoint();
  nn::save_checkpoint(path, c.params, c.meta);
}

ExtractorPtr extractor_from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.meta.value("kind", std::string()) != "extractor") throw Error("checkpoint is not an extractor");
  const std::string type = ckpt.meta.at("type").get<std::string>();
  const std::string id = ckpt.meta.at("extractor_id").get<std::string>();
  if (type == "identity") {
    return std::make_shared<IdentityExtractor>(analysis_config_from_json(ckpt.meta.at("analysis")));
  }
  if (type == "toy-ppg") {
    return std::make_shared<ToyPpgExtractor>(id, analysis_config_from_json(ckpt.meta.at("analysis")),
                                             ckpt.params);
  }
  if (type == "toy-vq") {
    return std::make_shared<ToyQuantizedExtractor>(
        id, analysis_config_from_json(ckpt.meta.at("analysis")), ckpt.params.at("codebook"));
  }
  if (type == "external") {
    auto e = std::make_shared<ExternalExtractor>(id, ckpt.meta.at("command").get<std::string>(),
                                                 ckpt.meta.at("dim").get<int>(),
                                                 ckpt.meta.at("frame_period_ms").get<double>());
    e->set_produces_posteriors(ckpt.meta.value("posteriors", false));
    return e;
  }
  throw Error("unknown extractor type '" + type + "'");
}

ExtractorPtr load_extractor(const std::filesystem::path& path) {
  return extractor_from_checkpoint(nn::load_checkpoint(path));
}

void ExtractorRegistry::add(ExtractorPtr backend) {
  if (!backend) throw Error("cannot register a null extractor");
  backends_[backend->extractor_id()] = std::move(backend);
}

ExtractorPtr ExtractorRegistry::get_ptr(const std::string& id) const {
  auto it = backends_.find(id);
  if (it == backends_.end()) {
    std::string known;
    for (const auto& [k, _] : backends_) known += (known.empty() ? "" : ", ") + k;
    throw Error("unknown extractor '" + id + "'; registered: " + (known.empty() ? "(none)" : known));
  }
  return it->second;
}

const ExtractorBackend& ExtractorRegistry::get(const std::string& id) const { return *get_ptr(id); }

std::vector<std::string> ExtractorRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : backends_) out.push_back(k);
  return out;
}

Matrix align_to_grid(const LatentSequence& l, double target_period_ms, Eigen::Index target_frames) {
  if (l.frames() < 1) throw Error("align_to_grid: empty latent sequence");
  if (target_period_ms <= 0.0 || l.frame_period_ms <= 0.0) throw Error("align_to_grid: non-positive period");
  if (target_frames < 0) {
    target_frames = std::max<Eigen::Index>(
        1, std::llround(static_cast<double>(l.frames()) * l.frame_period_ms / target_period_ms));
  }
  Matrix out(target_frames, l.dim());
  const double step = target_period_ms / l.frame_period_ms;
  for (Eigen::Index i = 0; i < target_frames; ++i) {
    const auto src = std::min<Eigen::Index>(l.frames() - 1, std::llround(static_cast<double>(i) * step));
    out.row(i) = l.values.row(src);
  }
  return out;
}

Matrix renormalize_rows(const Matrix& m) {
  Matrix out = m.cwiseMax(0.0);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double s = out.row(r).sum();
    if (s > 0.0) {
      out.row(r) /= s;
    } else {
      out.row(r).setConstant(1.0 / static_cast<double>(out.cols()));
    }
  }
  return out;
}

}  // namespace fac
