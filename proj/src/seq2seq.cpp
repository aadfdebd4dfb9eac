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

#include "fac/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fac {

using nlohmann::json;
using nn::Tape;
using nn::Var;

void Seq2seqConfig::validate() const {
  if (input_dim < 1 || output_dim < 1) throw Error("seq2seq: feature dims must be positive");
  if (position_dim < 2 || position_dim % 2 != 0) {
    throw Error("seq2seq: position_dim must be even and >= 2");
  }
  if (model_dim <= position_dim) throw Error("seq2seq: model_dim must exceed position_dim");
  if (ffn_dim < 1 || prenet_dim < 1) throw Error("seq2seq: layer widths must be positive");
  if (encoder_layers < 0 || decoder_layers < 1) {
    throw Error("seq2seq: need >= 0 encoder layers and >= 1 decoder layer");
  }
  if (prenet_dropout < 0.0 || prenet_dropout >= 1.0) {
    throw Error("seq2seq: prenet_dropout must be in [0, 1)");
  }
  if (init == Seq2seqInit::kIdentity) {
    if (input_dim != output_dim) throw Error("seq2seq: identity init needs input_dim == output_dim");
    if (input_dim + 1 > model_dim - position_dim) {
      throw Error("seq2seq: identity init needs model_dim - position_dim >= input_dim + 1");
    }
  }
}

json to_json(const Seq2seqConfig& c) {
  return {{"input_dim", c.input_dim},
          {"output_dim", c.output_dim},
          {"model_dim", c.model_dim},
          {"position_dim", c.position_dim},
          {"ffn_dim", c.ffn_dim},
          {"prenet_dim", c.prenet_dim},
          {"encoder_layers", c.encoder_layers},
          {"decoder_layers", c.decoder_layers},
          {"prenet_dropout", c.prenet_dropout},
          {"stop_pos_weight", c.stop_pos_weight},
          {"guided_attention_weight", c.guided_attention_weight},
          {"guided_attention_sigma", c.guided_attention_sigma},
          {"max_positions", c.max_positions},
          {"seed", c.seed},
          {"init", c.init == Seq2seqInit::kIdentity ? "identity" : "random"}};
}

Seq2seqConfig seq2seq_config_from_json(const json& j) {
  Seq2seqConfig c;
  c.input_dim = j.value("input_dim", c.input_dim);
  c.output_dim = j.value("output_dim", c.output_dim);
  c.model_dim = j.value("model_dim", c.model_dim);
  c.position_dim = j.value("position_dim", c.position_dim);
  c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
  c.prenet_dim = j.value("prenet_dim", c.prenet_dim);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
  c.prenet_dropout = j.value("prenet_dropout", c.prenet_dropout);
  c.stop_pos_weight = j.value("stop_pos_weight", c.stop_pos_weight);
  c.guided_attention_weight = j.value("guided_attention_weight", c.guided_attention_weight);
  c.guided_attention_sigma = j.value("guided_attention_sigma", c.guided_attention_sigma);
  c.max_positions = j.value("max_positions", c.max_positions);
  c.seed = j.value("seed", c.seed);
  const std::string init = j.value("init", std::string("random"));
  if (init == "identity") {
    c.init = Seq2seqInit::kIdentity;
  } else if (init == "random") {
    c.init = Seq2seqInit::kRandom;
  } else {
    throw Error("seq2seq: unknown init '" + init + "'");
  }
  c.validate();
  return c;
}

Matrix sinusoid_positions(int count, int dim) {
  if (dim % 2 != 0) throw Error("sinusoid_positions: dim must be even");
  Matrix pe(count, dim);
  for (int pos = 0; pos < count; ++pos) {
    for (int i = 0; i < dim / 2; ++i) {
      const double freq = std::pow(10000.0, -2.0 * i / dim);
      pe(pos, 2 * i) = std::sin(pos * freq);
      pe(pos, 2 * i + 1) = std::cos(pos * freq);
    }
  }
  return pe;
}

namespace {

// [0 | positions] so the table only touches the trailing channels.
Matrix position_block(int rows, int model_dim, int position_dim) {
  Matrix m = Matrix::Zero(rows, model_dim);
  m.rightCols(position_dim) = sinusoid_positions(rows, position_dim);
  return m;
}

Matrix causal_mask(Eigen::Index n) {
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = r + 1; c < n; ++c) m(r, c) = -1e30;
  }
  return m;
}

Matrix with_end_flag(const Matrix& input) {
  Matrix x(input.rows(), input.cols() + 1);
  x.leftCols(input.cols()) = input;
  x.col(input.cols()).setZero();
  x(input.rows() - 1, input.cols()) = 1.0;
  return x;
}

Matrix shifted_targets(const Matrix& target) {
  Matrix prev = Matrix::Zero(target.rows(), target.cols());
  if (target.rows() > 1) prev.bottomRows(target.rows() - 1) = target.topRows(target.rows() - 1);
  return prev;
}

// Smallest drop in the position-table dot product between distinct positions.
double min_position_gap(int position_dim, int max_positions) {
  const Matrix pe = sinusoid_positions(2, position_dim);
  double best = std::numeric_limits<double>::infinity();
  for (int delta = 1; delta < max_positions; ++delta) {
    double dot = 0.0;
    for (int i = 0; i < position_dim / 2; ++i) {
      dot += std::cos(delta * std::pow(10000.0, -2.0 * i / position_dim));
    }
    best = std::min(best, position_dim / 2.0 - dot);
  }
  return best;
}

}  // namespace

Seq2seqModel::Seq2seqModel(Seq2seqConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  build(rng);
  if (cfg_.init == Seq2seqInit::kIdentity) make_identity();
}

Seq2seqModel::Attention Seq2seqModel::add_attention(const std::string& prefix, Rng& rng) {
  const int d = cfg_.model_dim;
  Attention a;
  a.q = params_.add(prefix + ".q.weight", nn::xavier_uniform(d, d, rng));
  a.k = params_.add(prefix + ".k.weight", nn::xavier_uniform(d, d, rng));
  a.v = params_.add(prefix + ".v.weight", nn::xavier_uniform(d, d, rng));
  a.o = params_.add(prefix + ".o.weight", nn::xavier_uniform(d, d, rng, 0.5));
  return a;
}

Seq2seqModel::Ffn Seq2seqModel::add_ffn(const std::string& prefix, Rng& rng) {
  const int d = cfg_.model_dim;
  Ffn f;
  f.w1 = params_.add(prefix + ".0.weight", nn::xavier_uniform(d, cfg_.ffn_dim, rng));
  f.b1 = params_.add(prefix + ".0.bias", Matrix::Zero(1, cfg_.ffn_dim));
  f.w2 = params_.add(prefix + ".1.weight", nn::xavier_uniform(cfg_.ffn_dim, d, rng, 0.5));
  f.b2 = params_.add(prefix + ".1.bias", Matrix::Zero(1, d));
  return f;
}

void Seq2seqModel::build(Rng& rng) {
  const int d = cfg_.model_dim;
  in_w_ = params_.add("encoder.input.weight", nn::xavier_uniform(cfg_.input_dim + 1, d, rng));
  in_b_ = params_.add("encoder.input.bias", Matrix::Zero(1, d));
  for (int i = 0; i < cfg_.encoder_layers; ++i) {
    const std::string p = "encoder.layers." + std::to_string(i);
    EncoderLayer layer;
    layer.self = add_attention(p + ".self_attn", rng);
    layer.ffn = add_ffn(p + ".ffn", rng);
    enc_.push_back(layer);
  }
  pre1_w_ = params_.add("decoder.prenet.0.weight",
                        nn::xavier_uniform(cfg_.output_dim, cfg_.prenet_dim, rng));
  pre1_b_ = params_.add("decoder.prenet.0.bias", Matrix::Zero(1, cfg_.prenet_dim));
  pre2_w_ = params_.add("decoder.prenet.1.weight", nn::xavier_uniform(cfg_.prenet_dim, d, rng));
  pre2_b_ = params_.add("decoder.prenet.1.bias", Matrix::Zero(1, d));
  for (int i = 0; i < cfg_.decoder_layers; ++i) {
    const std::string p = "decoder.layers." + std::to_string(i);
    DecoderLayer layer;
    layer.self = add_attention(p + ".self_attn", rng);
    layer.cross = add_attention(p + ".cross_attn", rng);
    layer.ffn = add_ffn(p + ".ffn", rng);
    dec_.push_back(layer);
  }
  out_w_ = params_.add("decoder.output.weight", nn::xavier_uniform(d, cfg_.output_dim, rng));
  out_b_ = params_.add("decoder.output.bias", Matrix::Zero(1, cfg_.output_dim));
  stop_w_ = params_.add("decoder.stop.weight", nn::xavier_uniform(d, 1, rng));
  stop_b_ = params_.add("decoder.stop.bias", Matrix::Zero(1, 1));
}

void Seq2seqModel::make_identity() {
  for (std::size_t i = 0; i < params_.size(); ++i) params_.at(i).setZero();
  const int d = cfg_.model_dim;
  const int p = cfg_.position_dim;
  const int content = cfg_.input_dim + 1;  // features + end flag

  params_.at(in_w_).topLeftCorner(content, content).setIdentity();

  // The first decoder layer's cross attention selects the encoder frame at
  // the same position. Scores between distinct positions differ by at least
  // 1000 after scaling, so the softmax is exactly one-hot in double precision.
  const double gap = min_position_gap(p, cfg_.max_positions);
  const double sharpness = 1000.0 * std::sqrt(static_cast<double>(d)) / gap;
  const Attention& cross = dec_.front().cross;
  params_.at(cross.q).bottomRightCorner(p, p) = Matrix::Identity(p, p) * sharpness;
  params_.at(cross.k).bottomRightCorner(p, p).setIdentity();
  params_.at(cross.v).topLeftCorner(content, content).setIdentity();
  params_.at(cross.o).topLeftCorner(content, content).setIdentity();

  params_.at(out_w_).topLeftCorner(cfg_.output_dim, cfg_.output_dim).setIdentity();
  constexpr double kStopLogit = 10.0;
  params_.at(stop_w_)(cfg_.input_dim, 0) = 2.0 * kStopLogit;
  params_.at(stop_b_)(0, 0) = -kStopLogit;
}

Var Seq2seqModel::attention(Tape& t, const Attention& a, Var x, Var memory, bool causal,
                            Var* weights) const {
  const Var q = t.matmul(x, t.param(a.q));
  const Var k = t.matmul(memory, t.param(a.k));
  const Var v = t.matmul(memory, t.param(a.v));
  Var scores = t.scale(t.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(cfg_.model_dim)));
  if (causal) scores = t.add_const(scores, causal_mask(t.value(scores).rows()));
  const Var w = t.softmax_rows(scores);
  if (weights != nullptr) *weights = w;
  return t.matmul(t.matmul(w, v), t.param(a.o));
}

Var Seq2seqModel::ffn(Tape& t, const Ffn& f, Var x) const {
  return t.linear(t.relu(t.linear(x, f.w1, f.b1)), f.w2, f.b2);
}

Var Seq2seqModel::encode(Tape& t, const Matrix& input) const {
  if (input.rows() < 1) throw Error("seq2seq: empty input sequence");
  if (input.cols() != cfg_.input_dim) {
    throw Error("seq2seq: input has " + std::to_string(input.cols()) + " dims, model expects " +
                std::to_string(cfg_.input_dim));
  }
  Var h = t.linear(t.constant(with_end_flag(input)), in_w_, in_b_);
  h = t.add_const(h, position_block(static_cast<int>(input.rows()), cfg_.model_dim, cfg_.position_dim));
  for (const auto& layer : enc_) {
    h = t.add(h, attention(t, layer.self, h, h, false));
    h = t.add(h, ffn(t, layer.ffn, h));
  }
  return h;
}

Var Seq2seqModel::decode(Tape& t, Var memory, const Matrix& prev_frames, Rng* rng,
                         Var* cross_weights) const {
  const auto rows = prev_frames.rows();
  Var h = t.relu(t.linear(t.constant(prev_frames), pre1_w_, pre1_b_));
  if (rng != nullptr && cfg_.prenet_dropout > 0.0) {
    const double keep = 1.0 - cfg_.prenet_dropout;
    Matrix mask(rows, cfg_.prenet_dim);
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i) = rng->uniform() < keep ? 1.0 / keep : 0.0;
    h = t.mul_const(h, mask);
  }
  h = t.linear(h, pre2_w_, pre2_b_);
  h = t.add_const(h, position_block(static_cast<int>(rows), cfg_.model_dim, cfg_.position_dim));
  for (const auto& layer : dec_) {
    h = t.add(h, attention(t, layer.self, h, h, true));
    h = t.add(h, attention(t, layer.cross, h, memory, false, cross_weights));
    h = t.add(h, ffn(t, layer.ffn, h));
  }
  return h;
}

Seq2seqModel::Losses Seq2seqModel::teacher_forced(Tape& t, const TrainingPair& pair, Rng* rng) const {
  if (pair.target.rows() < 1 || pair.target.cols() != cfg_.output_dim) {
    throw Error("seq2seq: target shape does not match output_dim");
  }
  const Var memory = encode(t, pair.input);
  Var cross;
  const Var h = decode(t, memory, shifted_targets(pair.target), rng, &cross);
  const Var out = t.linear(h, out_w_, out_b_);
  const Var stop = t.linear(h, stop_w_, stop_b_);

  Matrix stop_target = Matrix::Zero(pair.target.rows(), 1);
  stop_target(pair.target.rows() - 1, 0) = 1.0;

  Losses l;
  l.l1 = t.l1_loss(out, pair.target);
  l.stop = t.bce_with_logits(stop, stop_target, cfg_.stop_pos_weight);
  l.total = t.add(l.l1, l.stop);
  if (cfg_.guided_attention_weight > 0.0) {
    const Eigen::Index n_out = pair.target.rows();
    const Eigen::Index n_in = pair.input.rows();
    Matrix penalty(n_out, n_in);
    const double s2 = 2.0 * cfg_.guided_attention_sigma * cfg_.guided_attention_sigma;
    for (Eigen::Index i = 0; i < n_out; ++i) {
      for (Eigen::Index j = 0; j < n_in; ++j) {
        const double diff = static_cast<double>(i) / n_out - static_cast<double>(j) / n_in;
        penalty(i, j) = 1.0 - std::exp(-diff * diff / s2);
      }
    }
    const Var ga = t.scale(t.mean(t.mul_const(cross, penalty)), cfg_.guided_attention_weight);
    l.total = t.add(l.total, ga);
  }
  return l;
}

DecodeResult Seq2seqModel::infer(const Matrix& input, int max_frames, double stop_threshold) const {
  if (max_frames < 1) throw Error("seq2seq: max_frames must be >= 1");
  Matrix memory;
  {
    Tape t(params_, false);
    memory = t.value(encode(t, input));
  }
  DecodeResult result;
  Matrix prev = Matrix::Zero(1, cfg_.output_dim);
  std::vector<RowVector> frames;
  for (int step = 0; step < max_frames; ++step) {
    Tape t(params_, false);
    const Var h = decode(t, t.constant(memory), prev, nullptr, nullptr);
    const Matrix& hv = t.value(h);
    const RowVector last = hv.row(hv.rows() - 1);
    const RowVector frame = last * params_.at(out_w_) + params_.at(out_b_);
    const double logit = (last * params_.at(stop_w_))(0) + params_.at(stop_b_)(0, 0);
    const double prob = 1.0 / (1.0 + std::exp(-logit));
    frames.push_back(frame);
    result.stop_probabilities.push_back(prob);
    if (stop_threshold <= 0.0 || prob > stop_threshold) {
      result.stopped_naturally = true;
      break;
    }
    prev.conservativeResize(prev.rows() + 1, Eigen::NoChange);
    prev.row(prev.rows() - 1) = frame;
  }
  result.output.resize(static_cast<Eigen::Index>(frames.size()), cfg_.output_dim);
  for (std::size_t i = 0; i < frames.size(); ++i) result.output.row(static_cast<Eigen::Index>(i)) = frames[i];
  return result;
}

void Seq2seqModel::save(const std::filesystem::path& path, json extra) const {
  json meta = std::move(extra);
  meta["kind"] = "seq2seq";
  meta["config"] = to_json(cfg_);
  meta["seed"] = cfg_.seed;
  meta["step"] = trained_steps_;
  nn::save_checkpoint(path, params_, meta);
}

Seq2seqModel Seq2seqModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.meta.value("kind", std::string()) != "seq2seq") {
    throw Error("checkpoint is not a seq2seq model");
  }
  Seq2seqModel model(seq2seq_config_from_json(ckpt.meta.at("config")));
  const nn::TransferReport report = nn::transfer_parameters(model.params_, ckpt.params);
  for (const auto& e : report) {
    if (e.action != "copied") throw Error("checkpoint tensor '" + e.name + "' is " + e.action);
  }
  model.trained_steps_ = ckpt.meta.value("step", std::int64_t{0});
  return model;
}

Seq2seqModel Seq2seqModel::load(const std::filesystem::path& path) {
  return from_checkpoint(nn::load_checkpoint(path));
}

nn::TransferReport load_pretrained(Seq2seqModel& model, const nn::Checkpoint& checkpoint) {
  return nn::transfer_parameters(model.params(), checkpoint.params);
}

nn::TransferReport load_pretrained(Seq2seqModel& model, const std::filesystem::path& checkpoint) {
  return load_pretrained(model, nn::load_checkpoint(checkpoint));
}

namespace {

void check_pairs(const std::vector<TrainingPair>& pairs, const Seq2seqConfig& cfg) {
  if (pairs.empty()) throw Error("seq2seq training needs at least one pair");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.input.rows() < 1 || p.target.rows() < 1) {
      throw Error("training pair " + std::to_string(i) + " has an empty sequence");
    }
    if (p.input.cols() != cfg.input_dim || p.target.cols() != cfg.output_dim) {
      throw Error("dimension mismatch in training pair " + std::to_string(i) + ": got " +
                  std::to_string(p.input.cols()) + " -> " + std::to_string(p.target.cols()) +
                  ", expected " + std::to_string(cfg.input_dim) + " -> " +
                  std::to_string(cfg.output_dim));
    }
  }
}

}  // namespace

Seq2seqModel train_seq2seq(const std::vector<TrainingPair>& pairs, const Seq2seqConfig& cfg,
                           const Seq2seqTrainConfig& train, const nn::Checkpoint* pretrained,
                           Seq2seqTrainLog* log) {
  check_pairs(pairs, cfg);
  if (train.steps < 0) throw Error("seq2seq: steps must be >= 0");
  Seq2seqModel model(cfg);
  Seq2seqTrainLog local;
  if (pretrained != nullptr) local.transfer = load_pretrained(model, *pretrained);

  nn::Adam adam(model.params(), train.adam);
  Rng rng(train.seed);
  const std::size_t n = pairs.size();
  const std::size_t batch =
      (train.batch_size <= 0 || static_cast<std::size_t>(train.batch_size) >= n) ? n
                                                                                 : static_cast<std::size_t>(train.batch_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = n;  // forces a shuffle on the first minibatch

  for (int step = 0; step < train.steps; ++step) {
    std::vector<std::size_t> chosen;
    if (batch == n) {
      chosen = order;
    } else {
      for (std::size_t i = 0; i < batch; ++i) {
        if (cursor >= n) {
          rng.shuffle(order);
          cursor = 0;
        }
        chosen.push_back(order[cursor++]);
      }
    }
    std::vector<Matrix> grads = model.params().zeros_like();
    double total = 0.0, l1 = 0.0;
    const double inv = 1.0 / static_cast<double>(chosen.size());
    for (std::size_t idx : chosen) {
      Tape tape(model.params());
      const auto losses = model.teacher_forced(tape, pairs[idx], cfg.prenet_dropout > 0.0 ? &rng : nullptr);
      total += tape.value(losses.total)(0, 0) * inv;
      l1 += tape.value(losses.l1)(0, 0) * inv;
      tape.backward(tape.scale(losses.total, inv), grads);
    }
    adam.set_learning_rate(train.adam.rate_at(step, train.steps));
    adam.step(model.params(), grads);
    local.loss.push_back(total);
    local.l1.push_back(l1);
    if (train.on_step) train.on_step(step, total, l1);
    if (train.on_update) train.on_update(step, model);
  }
  model.set_trained_steps(model.trained_steps() + train.steps);
  if (!model.params().all_finite()) throw Error("seq2seq training diverged (non-finite parameters)");
  if (log != nullptr) *log = std::move(local);
  return model;
}

double teacher_forced_l1(const Seq2seqModel& model, const std::vector<TrainingPair>& pairs) {
  if (pairs.empty()) throw Error("teacher_forced_l1: no pairs");
  double sum = 0.0;
  for (const auto& p : pairs) {
    Tape t(model.params(), false);
    sum += t.value(model.teacher_forced(t, p).l1)(0, 0);
  }
  return sum / static_cast<double>(pairs.size());
}

double teacher_forced_loss(const Seq2seqModel& model, const std::vector<TrainingPair>& pairs) {
  if (pairs.empty()) throw Error("teacher_forced_loss: no pairs");
  double sum = 0.0;
  for (const auto& p : pairs) {
    Tape t(model.params(), false);
    sum += t.value(model.teacher_forced(t, p).total)(0, 0);
  }
  return sum / static_cast<double>(pairs.size());
}

}  // namespace fac
