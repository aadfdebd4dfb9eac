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

// Any-to-one frame-based conversion: a decoder from latent sequences (aligned
// to the mel frame grid) to the mel spectrogram of one target speaker,
// trained by reconstruction with a frozen extractor.
//
// Per output frame t the decoder sees the latent context
// [l(t-1), l(t), l(t+1)] and a prenet embedding of the previous output frame:
//   z = [context, prenet(y(t-1))]
//   y(t) = W2 tanh(W1 z + b1) + b2 + Ws z
// Latents and mels are standardized with statistics stored in the model.

#ifndef FAC_FRAME_VC_HPP_
#define FAC_FRAME_VC_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fac/extractors.hpp"
#include "fac/nn.hpp"

namespace fac {

struct FrameVCConfig {
  int hidden = 64;
  int prenet_dim = 32;
  double prenet_dropout = 0.5;  // training only
  int steps = 1000;
  nn::AdamConfig adam{.learning_rate = 3e-3, .final_lr_fraction = 0.05};
  std::uint64_t seed = 1;

  bool operator==(const FrameVCConfig&) const = default;
};

nlohmann::json to_json(const FrameVCConfig& cfg);
FrameVCConfig frame_vc_config_from_json(const nlohmann::json& j);

// Mel frames per latent frame, as a reduced fraction.
struct FrameRatio {
  std::int64_t num = 1;
  std::int64_t den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const FrameRatio&) const = default;
};

FrameRatio frame_ratio_from_periods(double latent_period_ms, double mel_period_ms);

class FrameVCModel {
 public:
  FrameVCModel(FrameVCConfig cfg, std::string extractor_id, int latent_dim, double latent_period_ms,
               AnalysisConfig analysis, std::string target_speaker_id);

  const FrameVCConfig& config() const { return cfg_; }
  const std::string& extractor_id() const { return extractor_id_; }
  const std::string& target_speaker_id() const { return target_speaker_id_; }
  int latent_dim() const { return latent_dim_; }
  double latent_period_ms() const { return latent_period_ms_; }
  const AnalysisConfig& analysis() const { return analysis_; }
  FrameRatio frame_ratio() const { return frame_ratio_from_periods(latent_period_ms_, analysis_.frame_period_ms()); }
  std::int64_t trained_steps() const { return trained_steps_; }
  void set_trained_steps(std::int64_t s) { trained_steps_ = s; }

  const nn::ParameterStore& params() const { return params_; }
  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& normalization() const { return norm_; }
  void set_normalization(const RowVector& latent_mean, const RowVector& latent_std,
                         const RowVector& mel_mean, const RowVector& mel_std);

  // Hash over trainable parameters and normalization statistics.
  std::string parameter_hash() const;

  // Mean L1 in standardized mel units under teacher forcing. Inputs are raw
  // values with equal frame counts. `rng` enables prenet dropout.
  nn::Var teacher_forced(nn::Tape& tape, const Matrix& aligned_latents, const Matrix& mel,
                         Rng* rng = nullptr) const;

  // Standardized decoder inputs and targets for one utterance. Rows are
  // independent under teacher forcing, so batches may stack them.
  struct FrameBatch {
    Matrix context;   // latent context per frame
    Matrix previous;  // previous target frame (zeros first)
    Matrix target;
  };
  FrameBatch make_batch(const Matrix& aligned_latents, const Matrix& mel) const;
  nn::Var batch_loss(nn::Tape& tape, const FrameBatch& batch, Rng* rng = nullptr) const;

  // Autoregressive decoding of latents already on the mel grid; returns raw
  // log-mel values with one frame per input row.
  Matrix decode_aligned(const Matrix& aligned_latents) const;

  void save(const std::filesystem::path& path) const;
  static FrameVCModel load(const std::filesystem::path& path);
  static FrameVCModel from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  Matrix latent_context(const Matrix& normalized_latents) const;

  FrameVCConfig cfg_;
  std::string extractor_id_;
  int latent_dim_;
  double latent_period_ms_;
  AnalysisConfig analysis_;
  std::string target_speaker_id_;
  std::int64_t trained_steps_ = 0;

  nn::ParameterStore params_;
  nn::ParameterStore norm_;
  std::size_t pre_w_, pre_b_, w1_, b1_, w2_, b2_, ws_;
};

struct FrameVCTrainLog {
  std::vector<double> loss;  // standardized L1 per step
};

// Throws fac::Error when the utterances are empty or span several speakers.
FrameVCModel train_frame_decoder(const std::vector<Utterance>& utterances,
                                 const ExtractorBackend& backend, const FrameVCConfig& cfg,
                                 FrameVCTrainLog* log = nullptr);

// Throws fac::Error naming both ids when l was produced by another extractor.
MelSpectrogram decode_latents(const FrameVCModel& model, const LatentSequence& l);

MelSpectrogram convert_a2o(const FrameVCModel& model, const Utterance& u,
                           const ExtractorRegistry& extractors);

// Mean per-element L1 (raw log-mel units) between autoregressive
// reconstructions and the utterances' own mels.
double reconstruction_l1(const FrameVCModel& model, const std::vector<Utterance>& utterances,
                         const ExtractorBackend& backend);

}  // namespace fac

#endif  // FAC_FRAME_VC_HPP_
