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

#include "fac/frame_vc.hpp"

#include <cmath>
#include <numeric>

namespace fac {

using nlohmann::json;
using nn::Tape;
using nn::Var;

json to_json(const FrameVCConfig& c) {
  return {{"hidden", c.hidden},
          {"prenet_dim", c.prenet_dim},
          {"prenet_dropout", c.prenet_dropout},
          {"steps", c.steps},
          {"learning_rate", c.adam.learning_rate},
          {"final_lr_fraction", c.adam.final_lr_fraction},
          {"clip_norm", c.adam.clip_norm},
          {"seed", c.seed}};
}

FrameVCConfig frame_vc_config_from_json(const json& j) {
  FrameVCConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.prenet_dim = j.value("prenet_dim", c.prenet_dim);
  c.prenet_dropout = j.value("prenet_dropout", c.prenet_dropout);
  c.steps = j.value("steps", c.steps);
  c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
  c.adam.final_lr_fraction = j.value("final_lr_fraction", c.adam.final_lr_fraction);
  c.adam.clip_norm = j.value("clip_norm", c.adam.clip_norm);
  c.seed = j.value("seed", c.seed);
  if (c.hidden < 1 || c.prenet_dim < 1 || c.steps < 0) throw Error("frame_vc: invalid config");
  if (c.prenet_dropout < 0.0 || c.prenet_dropout >= 1.0) throw Error("frame_vc: prenet_dropout must be in [0, 1)");
  return c;
}

FrameRatio frame_ratio_from_periods(double latent_period_ms, double mel_period_ms) {
  if (latent_period_ms <= 0.0 || mel_period_ms <= 0.0) throw Error("frame ratio: non-positive period");
  // Periods are compared at microsecond resolution.
  FrameRatio r{std::llround(latent_period_ms * 1000.0), std::llround(mel_period_ms * 1000.0)};
  const auto g = std::gcd(r.num, r.den);
  r.num /= g;
  r.den /= g;
  return r;
}

namespace {

constexpr int kContext = 1;  // latent frames on each side
constexpr double kMinStd = 1e-3;

Matrix standardize(const Matrix& m, const Matrix& mean, const Matrix& std) {
  return (m.rowwise() - RowVector(mean)).array().rowwise() / RowVector(std).array();
}

Matrix shifted_rows(const Matrix& target) {
  Matrix prev = Matrix::Zero(target.rows(), target.cols());
  if (target.rows() > 1) prev.bottomRows(target.rows() - 1) = target.topRows(target.rows() - 1);
  return prev;
}

void column_stats(const Matrix& m, RowVector& mean, RowVector& std) {
  mean = m.colwise().mean();
  std = ((m.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(m.rows()))
            .sqrt()
            .matrix()
            .cwiseMax(kMinStd);
}

}  // namespace

FrameVCModel::FrameVCModel(FrameVCConfig cfg, std::string extractor_id, int latent_dim,
                           double latent_period_ms, AnalysisConfig analysis,
                           std::string target_speaker_id)
    : cfg_(cfg),
      extractor_id_(std::move(extractor_id)),
      latent_dim_(latent_dim),
      latent_period_ms_(latent_period_ms),
      analysis_(analysis),
      target_speaker_id_(std::move(target_speaker_id)) {
  if (latent_dim_ < 1) throw Error("frame_vc: latent_dim must be positive");
  if (latent_period_ms_ <= 0.0) throw Error("frame_vc: latent frame period must be positive");
  analysis_.validate();
  const int m = analysis_.n_mels;
  const int z = (2 * kContext + 1) * latent_dim_ + cfg_.prenet_dim;
  Rng rng(cfg_.seed);
  pre_w_ = params_.add("prenet.weight", nn::xavier_uniform(m, cfg_.prenet_dim, rng));
  pre_b_ = params_.add("prenet.bias", Matrix::Zero(1, cfg_.prenet_dim));
  w1_ = params_.add("hidden.weight", nn::xavier_uniform(z, cfg_.hidden, rng));
  b1_ = params_.add("hidden.bias", Matrix::Zero(1, cfg_.hidden));
  w2_ = params_.add("output.weight", nn::xavier_uniform(cfg_.hidden, m, rng, 0.5));
  b2_ = params_.add("output.bias", Matrix::Zero(1, m));
  ws_ = params_.add("skip.weight", nn::xavier_uniform(z, m, rng, 0.5));
  norm_.add("norm.latent_mean", Matrix::Zero(1, latent_dim_));
  norm_.add("norm.latent_std", Matrix::Ones(1, latent_dim_));
  norm_.add("norm.mel_mean", Matrix::Zero(1, m));
  norm_.add("norm.mel_std", Matrix::Ones(1, m));
}

void FrameVCModel::set_normalization(const RowVector& latent_mean, const RowVector& latent_std,
                                     const RowVector& mel_mean, const RowVector& mel_std) {
  if (latent_mean.size() != latent_dim_ || latent_std.size() != latent_dim_ ||
      mel_mean.size() != analysis_.n_mels || mel_std.size() != analysis_.n_mels) {
    throw Error("frame_vc: normalization statistics have the wrong width");
  }
  norm_.at("norm.latent_mean") = latent_mean;
  norm_.at("norm.latent_std") = latent_std;
  norm_.at("norm.mel_mean") = mel_mean;
  norm_.at("norm.mel_std") = mel_std;
}

std::string FrameVCModel::parameter_hash() const {
  Fnv1a h;
  h.update(params_.hash());
  h.update(norm_.hash());
  return h.hex();
}

Matrix FrameVCModel::latent_context(const Matrix& x) const {
  const Eigen::Index n = x.rows();
  Matrix out(n, (2 * kContext + 1) * latent_dim_);
  for (Eigen::Index t = 0; t < n; ++t) {
    for (int k = -kContext; k <= kContext; ++k) {
      const Eigen::Index src = std::clamp<Eigen::Index>(t + k, 0, n - 1);
      out.block(t, (k + kContext) * latent_dim_, 1, latent_dim_) = x.row(src);
    }
  }
  return out;
}

FrameVCModel::FrameBatch FrameVCModel::make_batch(const Matrix& aligned_latents, const Matrix& mel) const {
  if (aligned_latents.rows() != mel.rows() || mel.rows() < 1) {
    throw Error("frame_vc: latent and mel frame counts differ");
  }
  if (aligned_latents.cols() != latent_dim_ || mel.cols() != analysis_.n_mels) {
    throw Error("frame_vc: feature width mismatch");
  }
  FrameBatch b;
  b.target = standardize(mel, norm_.at("norm.mel_mean"), norm_.at("norm.mel_std"));
  b.context = latent_context(
      standardize(aligned_latents, norm_.at("norm.latent_mean"), norm_.at("norm.latent_std")));
  b.previous = shifted_rows(b.target);
  return b;
}

Var FrameVCModel::batch_loss(Tape& t, const FrameBatch& b, Rng* rng) const {
  Var p = t.relu(t.linear(t.constant(b.previous), pre_w_, pre_b_));
  if (rng != nullptr && cfg_.prenet_dropout > 0.0) {
    const double keep = 1.0 - cfg_.prenet_dropout;
    Matrix mask(b.previous.rows(), cfg_.prenet_dim);
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i) = rng->uniform() < keep ? 1.0 / keep : 0.0;
    p = t.mul_const(p, mask);
  }
  const Var z = t.concat_cols({t.constant(b.context), p});
  const Var hidden = t.tanh(t.linear(z, w1_, b1_));
  const Var y = t.add(t.linear(hidden, w2_, b2_), t.matmul(z, t.param(ws_)));
  return t.l1_loss(y, b.target);
}

Var FrameVCModel::teacher_forced(Tape& t, const Matrix& aligned_latents, const Matrix& mel,
                                 Rng* rng) const {
  return batch_loss(t, make_batch(aligned_latents, mel), rng);
}

Matrix FrameVCModel::decode_aligned(const Matrix& aligned_latents) const {
  if (aligned_latents.rows() < 1) throw Error("frame_vc: no latent frames to decode");
  if (aligned_latents.cols() != latent_dim_) {
    throw Error("frame_vc: latent dim " + std::to_string(aligned_latents.cols()) + ", model expects " +
                std::to_string(latent_dim_));
  }
  const Matrix ctx = latent_context(
      standardize(aligned_latents, norm_.at("norm.latent_mean"), norm_.at("norm.latent_std")));
  const Eigen::Index cw = ctx.cols();
  const Matrix& pw = params_.at(pre_w_);
  const RowVector pb = params_.at(pre_b_);
  const Matrix& w1 = params_.at(w1_);
  const RowVector b1 = params_.at(b1_);
  const Matrix& w2 = params_.at(w2_);
  const RowVector b2 = params_.at(b2_);
  const Matrix& ws = params_.at(ws_);

  // Context contributions do not depend on the recursion.
  const Matrix ctx_hidden = (ctx * w1.topRows(cw)).rowwise() + b1;
  const Matrix ctx_skip = (ctx * ws.topRows(cw)).rowwise() + b2;

  Matrix out(ctx.rows(), analysis_.n_mels);
  RowVector prev = RowVector::Zero(analysis_.n_mels);
  for (Eigen::Index t = 0; t < ctx.rows(); ++t) {
    const RowVector p = (prev * pw + pb).cwiseMax(0.0);
    const RowVector h = (ctx_hidden.row(t) + p * w1.bottomRows(cfg_.prenet_dim)).array().tanh().matrix();
    const RowVector y = h * w2 + ctx_skip.row(t) + p * ws.bottomRows(cfg_.prenet_dim);
    out.row(t) = y;
    prev = y;
  }
  const RowVector mean = norm_.at("norm.mel_mean");
  const RowVector std = norm_.at("norm.mel_std");
  return (out.array().rowwise() * std.array()).rowwise() + mean.array();
}

void FrameVCModel::save(const std::filesystem::path& path) const {
  nn::ParameterStore all = params_;
  for (std::size_t i = 0; i < norm_.size(); ++i) all.add(norm_.name(i), norm_.at(i));
  const FrameRatio r = frame_ratio();
  const json meta = {{"kind", "frame_vc"},
                     {"config", to_json(cfg_)},
                     {"extractor_id", extractor_id_},
                     {"target_speaker_id", target_speaker_id_},
                     {"latent_dim", latent_dim_},
                     {"latent_period_ms", latent_period_ms_},
                     {"analysis", to_json(analysis_)},
                     {"frame_ratio", {{"num", r.num}, {"den", r.den}}},
                     {"seed", cfg_.seed},
                     {"step", trained_steps_}};
  nn::save_checkpoint(path, all, meta);
}

FrameVCModel FrameVCModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  const json& m = ckpt.meta;
  if (m.value("kind", std::string()) != "frame_vc") throw Error("checkpoint is not a frame_vc model");
  FrameVCModel model(frame_vc_config_from_json(m.at("config")), m.at("extractor_id").get<std::string>(),
                     m.at("latent_dim").get<int>(), m.at("latent_period_ms").get<double>(),
                     analysis_config_from_json(m.at("analysis")),
                     m.at("target_speaker_id").get<std::string>());
  for (nn::ParameterStore* store : {&model.params_, &model.norm_}) {
    for (std::size_t i = 0; i < store->size(); ++i) {
      const std::string& name = store->name(i);
      if (!ckpt.params.contains(name)) throw Error("frame_vc checkpoint lacks tensor '" + name + "'");
      const Matrix& v = ckpt.params.at(name);
      if (v.rows() != store->at(i).rows() || v.cols() != store->at(i).cols()) {
        throw Error("frame_vc checkpoint tensor '" + name + "' has the wrong shape");
      }
      store->at(i) = v;
    }
  }
  model.trained_steps_ = m.value("step", std::int64_t{0});
  return model;
}

FrameVCModel FrameVCModel::load(const std::filesystem::path& path) {
  return from_checkpoint(nn::load_checkpoint(path));
}

namespace {

LatentSequence latents_for(const ExtractorBackend& backend, const Utterance& u, const MelSpectrogram* mel) {
  if (mel != nullptr && backend.mel_native() && backend.analysis() == mel->config) {
    LatentSequence l{backend.extract_from_mel(*mel), backend.extractor_id(), backend.frame_period_ms()};
    if (l.values.cols() != backend.dim()) throw Error("extractor produced an unexpected dim");
    return l;
  }
  return backend.extract(u);
}

}  // namespace

FrameVCModel train_frame_decoder(const std::vector<Utterance>& utterances,
                                 const ExtractorBackend& backend, const FrameVCConfig& cfg,
                                 FrameVCTrainLog* log) {
  if (utterances.empty()) throw Error("train_frame_decoder: no utterances");
  const std::string speaker = utterances.front().speaker_id;
  for (const auto& u : utterances) {
    if (u.speaker_id != speaker) {
      throw Error("train_frame_decoder: mixed speakers ('" + speaker + "' and '" + u.speaker_id + "')");
    }
  }
  const AnalysisConfig analysis = backend.mel_native() ? backend.analysis() : AnalysisConfig{};
  FrameVCModel model(cfg, backend.extractor_id(), backend.dim(), backend.frame_period_ms(), analysis,
                     speaker);

  std::vector<Matrix> lat, mel;
  Eigen::Index rows = 0;
  for (const auto& u : utterances) {
    const MelSpectrogram m = mel_analyze(u, analysis);
    const LatentSequence l = latents_for(backend, u, &m);
    lat.push_back(align_to_grid(l, analysis.frame_period_ms(), m.frames()));
    mel.push_back(m.values);
    rows += m.frames();
  }
  Matrix all_lat(rows, backend.dim()), all_mel(rows, analysis.n_mels);
  for (std::size_t i = 0, r = 0; i < lat.size(); r += static_cast<std::size_t>(lat[i].rows()), ++i) {
    all_lat.middleRows(static_cast<Eigen::Index>(r), lat[i].rows()) = lat[i];
    all_mel.middleRows(static_cast<Eigen::Index>(r), mel[i].rows()) = mel[i];
  }
  RowVector lm, ls, mm, ms;
  column_stats(all_lat, lm, ls);
  column_stats(all_mel, mm, ms);
  model.set_normalization(lm, ls, mm, ms);

  FrameVCModel::FrameBatch all;
  all.context.resize(rows, (2 * kContext + 1) * backend.dim());
  all.previous.resize(rows, analysis.n_mels);
  all.target.resize(rows, analysis.n_mels);
  for (std::size_t i = 0, r = 0; i < lat.size(); r += static_cast<std::size_t>(lat[i].rows()), ++i) {
    const auto b = model.make_batch(lat[i], mel[i]);
    const auto at = static_cast<Eigen::Index>(r);
    all.context.middleRows(at, b.context.rows()) = b.context;
    all.previous.middleRows(at, b.previous.rows()) = b.previous;
    all.target.middleRows(at, b.target.rows()) = b.target;
  }

  nn::Adam adam(model.params(), cfg.adam);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  FrameVCTrainLog local;
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<Matrix> grads = model.params().zeros_like();
    Tape t(model.params());
    const Var l = model.batch_loss(t, all, cfg.prenet_dropout > 0.0 ? &rng : nullptr);
    t.backward(l, grads);
    adam.set_learning_rate(cfg.adam.rate_at(step, cfg.steps));
    adam.step(model.params(), grads);
    local.loss.push_back(t.value(l)(0, 0));
  }
  model.set_trained_steps(cfg.steps);
  if (!model.params().all_finite()) throw Error("frame_vc training diverged (non-finite parameters)");
  if (log != nullptr) *log = std::move(local);
  return model;
}

MelSpectrogram decode_latents(const FrameVCModel& model, const LatentSequence& l) {
  if (l.extractor_id != model.extractor_id()) {
    throw Error("latents come from extractor '" + l.extractor_id + "' but the model was trained with '" +
                model.extractor_id() + "'");
  }
  MelSpectrogram out;
  out.config = model.analysis();
  out.values = model.decode_aligned(align_to_grid(l, model.analysis().frame_period_ms()));
  return out;
}

MelSpectrogram convert_a2o(const FrameVCModel& model, const Utterance& u,
                           const ExtractorRegistry& extractors) {
  return decode_latents(model, extractors.get(model.extractor_id()).extract(u));
}

double reconstruction_l1(const FrameVCModel& model, const std::vector<Utterance>& utterances,
                         const ExtractorBackend& backend) {
  if (utterances.empty()) throw Error("reconstruction_l1: no utterances");
  double sum = 0.0;
  double count = 0.0;
  for (const auto& u : utterances) {
    const MelSpectrogram m = mel_analyze(u, model.analysis());
    const Matrix rec = model.decode_aligned(
        align_to_grid(latents_for(backend, u, &m), model.analysis().frame_period_ms(), m.frames()));
    sum += (rec - m.values).cwiseAbs().sum();
    count += static_cast<double>(m.values.size());
  }
  return sum / count;
}

}  // namespace fac
