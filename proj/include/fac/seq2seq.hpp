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

// Autoregressive attention encoder-decoder mapping one feature sequence to
// another of a different length.
//
// The residual stream of width `model_dim` is split into content channels
// followed by `position_dim` channels that carry sinusoidal positions. The
// encoder input is the feature frame plus an end-of-input indicator channel.
// Each decoder step consumes the previous output frame (zeros at step 0)
// through a two-layer prenet and emits one frame and a stop logit.

#ifndef FAC_SEQ2SEQ_HPP_
#define FAC_SEQ2SEQ_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "fac/common.hpp"
#include "fac/nn.hpp"
#include "json.hpp"

namespace fac {

enum class Seq2seqInit {
  kRandom,
  // Exact pass-through: output frame t equals input frame t and the stop
  // token fires on the last input frame. Requires input_dim == output_dim.
  kIdentity,
};

struct Seq2seqConfig {
  int input_dim = 80;
  int output_dim = 80;
  int model_dim = 64;
  int position_dim = 16;
  int ffn_dim = 128;
  int prenet_dim = 64;
  int encoder_layers = 1;
  int decoder_layers = 1;
  double prenet_dropout = 0.5;  // training only
  double stop_pos_weight = 5.0;
  double guided_attention_weight = 0.0;
  double guided_attention_sigma = 0.4;
  int max_positions = 4096;
  std::uint64_t seed = 1;
  Seq2seqInit init = Seq2seqInit::kRandom;

  void validate() const;
  bool operator==(const Seq2seqConfig&) const = default;
};

nlohmann::json to_json(const Seq2seqConfig& cfg);
Seq2seqConfig seq2seq_config_from_json(const nlohmann::json& j);

struct TrainingPair {
  Matrix input;   // frames_in x input_dim
  Matrix target;  // frames_out x output_dim
};

struct DecodeResult {
  Matrix output;
  bool stopped_naturally = false;
  std::vector<double> stop_probabilities;
};

class Seq2seqModel {
 public:
  explicit Seq2seqModel(Seq2seqConfig cfg);

  const Seq2seqConfig& config() const { return cfg_; }
  int input_dim() const { return cfg_.input_dim; }
  int output_dim() const { return cfg_.output_dim; }
  const nn::ParameterStore& params() const { return params_; }
  nn::ParameterStore& params() { return params_; }
  std::int64_t trained_steps() const { return trained_steps_; }
  void set_trained_steps(std::int64_t s) { trained_steps_ = s; }

  struct Losses {
    nn::Var total;
    nn::Var l1;
    nn::Var stop;
  };

  // Teacher-forced losses for one pair. `rng` enables prenet dropout.
  Losses teacher_forced(nn::Tape& tape, const TrainingPair& pair, Rng* rng = nullptr) const;

  // Halts after the first frame whose stop probability exceeds
  // `stop_threshold`, or after `max_frames` frames.
  DecodeResult infer(const Matrix& input, int max_frames, double stop_threshold = 0.5) const;

  void save(const std::filesystem::path& path, nlohmann::json extra = nlohmann::json::object()) const;
  static Seq2seqModel load(const std::filesystem::path& path);
  static Seq2seqModel from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  struct Attention {
    std::size_t q, k, v, o;
  };
  struct Ffn {
    std::size_t w1, b1, w2, b2;
  };
  struct EncoderLayer {
    Attention self;
    Ffn ffn;
  };
  struct DecoderLayer {
    Attention self;
    Attention cross;
    Ffn ffn;
  };

  void build(Rng& rng);
  void make_identity();
  Attention add_attention(const std::string& prefix, Rng& rng);
  Ffn add_ffn(const std::string& prefix, Rng& rng);

  nn::Var attention(nn::Tape& t, const Attention& a, nn::Var x, nn::Var memory, bool causal,
                    nn::Var* weights = nullptr) const;
  nn::Var ffn(nn::Tape& t, const Ffn& f, nn::Var x) const;
  nn::Var encode(nn::Tape& t, const Matrix& input) const;
  // Returns the final residual stream; `cross_weights` receives the last
  // decoder layer's attention matrix.
  nn::Var decode(nn::Tape& t, nn::Var memory, const Matrix& prev_frames, Rng* rng,
                 nn::Var* cross_weights) const;

  Seq2seqConfig cfg_;
  nn::ParameterStore params_;
  std::int64_t trained_steps_ = 0;

  std::size_t in_w_, in_b_;
  std::vector<EncoderLayer> enc_;
  std::size_t pre1_w_, pre1_b_, pre2_w_, pre2_b_;
  std::vector<DecoderLayer> dec_;
  std::size_t out_w_, out_b_, stop_w_, stop_b_;
};

// Sinusoidal position table: rows are positions, `dim` must be even.
Matrix sinusoid_positions(int count, int dim);

struct Seq2seqTrainConfig {
  int steps = 2000;
  int batch_size = 0;  // 0 means full batch
  nn::AdamConfig adam;
  std::uint64_t seed = 1;  // batch order and dropout masks
  // Optional per-step observer: (step, total loss, l1 loss).
  std::function<void(int, double, double)> on_step;
  // Optional observer of the model after each update.
  std::function<void(int, const Seq2seqModel&)> on_update;
};

struct Seq2seqTrainLog {
  std::vector<double> loss;  // total training loss per step
  std::vector<double> l1;    // feature L1 per step
  nn::TransferReport transfer;
};

// Trains from cfg.init, optionally overwritten by matching tensors of
// `pretrained`. Zero steps returns the initialization unchanged.
Seq2seqModel train_seq2seq(const std::vector<TrainingPair>& pairs, const Seq2seqConfig& cfg,
                           const Seq2seqTrainConfig& train, const nn::Checkpoint* pretrained = nullptr,
                           Seq2seqTrainLog* log = nullptr);

nn::TransferReport load_pretrained(Seq2seqModel& model, const nn::Checkpoint& checkpoint);
nn::TransferReport load_pretrained(Seq2seqModel& model, const std::filesystem::path& checkpoint);

// Mean per-element L1 under teacher forcing (no dropout), averaged over pairs.
double teacher_forced_l1(const Seq2seqModel& model, const std::vector<TrainingPair>& pairs);

// Total teacher-forced loss averaged over pairs (no dropout).
double teacher_forced_loss(const Seq2seqModel& model, const std::vector<TrainingPair>& pairs);

}  // namespace fac

#endif  // FAC_SEQ2SEQ_HPP_
