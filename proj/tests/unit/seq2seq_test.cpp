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

#include <gtest/gtest.h>

#include "fac/pipelines.hpp"
#include "fac/seq2seq.hpp"
#include "fac/subprocess.hpp"
#include "fac/toy_corpus.hpp"
#include "test_util.hpp"

namespace fac {
namespace {

Seq2seqConfig micro_config(int in = 3, int out = 4) {
  Seq2seqConfig c;
  c.input_dim = in;
  c.output_dim = out;
  c.model_dim = 12;
  c.position_dim = 4;
  c.ffn_dim = 10;
  c.prenet_dim = 6;
  c.encoder_layers = 2;
  c.decoder_layers = 2;
  c.seed = 3;
  return c;
}

std::vector<TrainingPair> random_pairs(int n, int in, int out, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainingPair> pairs;
  for (int i = 0; i < n; ++i) {
    TrainingPair p{Matrix(4 + i, in), Matrix(6 + i, out)};
    for (Eigen::Index k = 0; k < p.input.size(); ++k) p.input(k) = rng.normal();
    for (Eigen::Index k = 0; k < p.target.size(); ++k) p.target(k) = rng.normal();
    pairs.push_back(p);
  }
  return pairs;
}

TEST(Seq2seq, GradientCheckTwoLayerMicro) {
  Seq2seqConfig c = micro_config();
  c.guided_attention_weight = 0.5;
  Seq2seqModel model(c);
  testing::jitter(model.params(), 31);
  const TrainingPair pair = random_pairs(1, 3, 4, 9)[0];
  auto loss = [&](std::vector<Matrix>* grads) {
    nn::Tape tape(model.params());
    const auto l = model.teacher_forced(tape, pair);
    if (grads) tape.backward(l.total, *grads);
    return tape.value(l.total)(0, 0);
  };
  const auto r = testing::gradient_check(model.params(), loss, 40, 17);
  EXPECT_LT(r.max_relative_error, 1e-3) << r.worst;
}

TEST(Seq2seq, ConfigValidation) {
  Seq2seqConfig c = micro_config();
  c.position_dim = 3;
  EXPECT_THROW(c.validate(), Error);
  c = micro_config(5, 5);
  c.init = Seq2seqInit::kIdentity;
  c.model_dim = 9;  // needs 5 + 1 + 4
  EXPECT_THROW(c.validate(), Error);
  c.model_dim = 10;
  EXPECT_NO_THROW(c.validate());
  c = micro_config(3, 4);
  c.init = Seq2seqInit::kIdentity;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_EQ(seq2seq_config_from_json(to_json(micro_config())), micro_config());
}

TEST(Seq2seq, ZeroStepsReturnsInitialization) {
  const auto pairs = random_pairs(3, 3, 4, 1);
  Seq2seqTrainConfig t;
  t.steps = 0;
  const Seq2seqModel trained = train_seq2seq(pairs, micro_config(), t);
  EXPECT_EQ(trained.params(), Seq2seqModel(micro_config()).params());
  EXPECT_EQ(trained.trained_steps(), 0);
}

TEST(Seq2seq, DeterministicTraining) {
  const auto pairs = random_pairs(3, 3, 4, 2);
  Seq2seqTrainConfig t;
  t.steps = 15;
  t.batch_size = 2;
  const Seq2seqModel a = train_seq2seq(pairs, micro_config(), t);
  const Seq2seqModel b = train_seq2seq(pairs, micro_config(), t);
  EXPECT_EQ(a.params(), b.params());
  EXPECT_EQ(a.trained_steps(), 15);
  EXPECT_NE(a.params(), Seq2seqModel(micro_config()).params());
}

TEST(Seq2seq, DimensionMismatchIsError) {
  auto pairs = random_pairs(2, 3, 4, 3);
  pairs[1].target = Matrix::Zero(5, 2);
  Seq2seqTrainConfig t;
  t.steps = 1;
  EXPECT_THROW(train_seq2seq(pairs, micro_config(), t), Error);
  EXPECT_THROW(train_seq2seq({}, micro_config(), t), Error);
}

TEST(Seq2seq, InferenceCaps) {
  const Seq2seqModel m(micro_config());
  const Matrix in = random_pairs(1, 3, 4, 4)[0].input;
  const DecodeResult one = m.infer(in, 1);
  EXPECT_EQ(one.output.rows(), 1);
  EXPECT_EQ(one.stopped_naturally, one.stop_probabilities[0] > 0.5);
  const DecodeResult zero = m.infer(in, 50, 0.0);
  EXPECT_EQ(zero.output.rows(), 1);
  EXPECT_TRUE(zero.stopped_naturally);
  const DecodeResult never = m.infer(in, 7, 1.0);
  EXPECT_EQ(never.output.rows(), 7);
  EXPECT_FALSE(never.stopped_naturally);
  EXPECT_THROW(m.infer(Matrix::Zero(3, 5), 4), Error);
  EXPECT_THROW(m.infer(in, 0), Error);
}

TEST(Seq2seq, FrameCountAndDimProperty) {
  Rng rng(6);
  for (int k = 0; k < 20; ++k) {
    Seq2seqConfig c = micro_config();
    c.seed = k;
    const Seq2seqModel m(c);
    Matrix in(1 + static_cast<int>(rng.below(6)), 3);
    for (Eigen::Index i = 0; i < in.size(); ++i) in(i) = rng.normal();
    const int cap = 1 + static_cast<int>(rng.below(12));
    const DecodeResult r = m.infer(in, cap, rng.uniform());
    ASSERT_LE(r.output.rows(), cap);
    ASSERT_GE(r.output.rows(), 1);
    ASSERT_EQ(r.output.cols(), 4);
    ASSERT_TRUE(all_finite(r.output));
  }
}

TEST(Seq2seq, IdentityInitPassesThrough) {
  Seq2seqConfig c = micro_config(5, 5);
  c.model_dim = 14;
  c.init = Seq2seqInit::kIdentity;
  const Seq2seqModel m(c);
  const Matrix in = random_pairs(1, 5, 5, 8)[0].input;
  const DecodeResult r = m.infer(in, 4 * static_cast<int>(in.rows()));
  EXPECT_TRUE(r.stopped_naturally);
  ASSERT_EQ(r.output.rows(), in.rows());
  EXPECT_LT((r.output - in).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Seq2seq, CheckpointRoundTrip) {
  TempDir dir;
  const Seq2seqModel m(micro_config());
  m.save(dir.path() / "m.ckpt", {{"note", "x"}});
  const Seq2seqModel r = Seq2seqModel::load(dir.path() / "m.ckpt");
  EXPECT_EQ(r.params(), m.params());
  EXPECT_EQ(r.config(), m.config());
}

TEST(Pretrained, SameArchitectureTransfersEverything) {
  TempDir dir;
  Seq2seqConfig other = micro_config();
  other.seed = 99;
  Seq2seqModel(other).save(dir.path() / "p.ckpt");
  Seq2seqModel m(micro_config());
  const nn::TransferReport r = load_pretrained(m, dir.path() / "p.ckpt");
  for (const auto& e : r) EXPECT_EQ(e.action, "copied") << e.name;
  EXPECT_EQ(m.params(), Seq2seqModel(other).params());
}

TEST(Pretrained, TextInputLayerSkipped) {
  // A TTS model whose input layer embeds 40 text symbols instead of 3 features.
  Seq2seqConfig tts = micro_config(40, 4);
  const nn::Checkpoint ckpt{{}, Seq2seqModel(tts).params()};
  Seq2seqModel m(micro_config());
  const nn::TransferReport r = load_pretrained(m, ckpt);
  std::vector<std::string> skipped;
  for (const auto& e : r) {
    if (e.action != "copied") skipped.push_back(e.name + ":" + e.action);
  }
  ASSERT_EQ(skipped.size(), 1u);
  EXPECT_EQ(skipped[0], m.params().name(0) + ":skipped_shape");
}

TEST(Pretrained, EmptyCheckpointChangesNothing) {
  Seq2seqModel m(micro_config());
  const nn::ParameterStore before = m.params();
  const nn::TransferReport r = load_pretrained(m, nn::Checkpoint{});
  EXPECT_EQ(m.params(), before);
  for (const auto& e : r) EXPECT_EQ(e.action, "skipped_missing");
  EXPECT_THROW(load_pretrained(m, std::filesystem::path("/nonexistent.ckpt")), Error);
}

// Small toy overfit: 4 time-stretched pairs, 20 mel bands.
class ToyOverfit : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ToyCorpusConfig tc;
    tc.n_prompts = 4;
    tc.min_phones = 2;
    tc.max_phones = 3;
    tc.splits = {4, 0, 0};
    AnalysisConfig a;
    a.n_mels = 20;
    const ToyCorpus toy = generate_toy_corpus(tc);
    const auto raw = cascade_pairs(toy.corpus, a);
    norm_ = new FeatureNorm(fit_feature_norm(raw));
    pairs_ = new std::vector<TrainingPair>();
    for (const auto& p : raw) pairs_->push_back({norm_->input(p.input), norm_->target(p.target)});

    Seq2seqConfig c;
    c.input_dim = c.output_dim = 20;
    c.model_dim = 48;
    c.position_dim = 16;
    c.ffn_dim = 96;
    c.prenet_dim = 48;
    Seq2seqTrainConfig t;
    t.steps = kSteps;
    t.adam.learning_rate = 3e-3;
    t.adam.final_lr_fraction = 0.05;
    // Dropout-free loss on the fixed training batch after every update.
    fixed_loss_ = new std::vector<double>();
    t.on_update = [](int, const Seq2seqModel& m) { fixed_loss_->push_back(teacher_forced_loss(m, *pairs_)); };
    initial_l1_ = teacher_forced_l1(Seq2seqModel(c), *pairs_);
    model_ = new Seq2seqModel(train_seq2seq(*pairs_, c, t));
  }
  static void TearDownTestSuite() {
    delete model_;
    delete fixed_loss_;
    delete pairs_;
    delete norm_;
  }

  static constexpr int kSteps = 2000;
  static inline FeatureNorm* norm_ = nullptr;
  static inline std::vector<TrainingPair>* pairs_ = nullptr;
  static inline std::vector<double>* fixed_loss_ = nullptr;
  static inline Seq2seqModel* model_ = nullptr;
  static inline double initial_l1_ = 0.0;
};

TEST_F(ToyOverfit, TeacherForcedL1Drops) {
  const double final_l1 = teacher_forced_l1(*model_, *pairs_);
  EXPECT_LT(final_l1, 0.1 * initial_l1_) << initial_l1_ << " -> " << final_l1;
}

TEST_F(ToyOverfit, LossWindowsMostlyNonIncreasing) {
  const auto& loss = *fixed_loss_;
  ASSERT_EQ(loss.size(), static_cast<std::size_t>(kSteps));
  std::size_t windows = 0, violations = 0;
  for (std::size_t t = 0; t + 100 < loss.size(); ++t) {
    ++windows;
    if (loss[t + 100] > loss[t]) ++violations;
  }
  EXPECT_LE(static_cast<double>(violations), 0.05 * static_cast<double>(windows))
      << violations << " of " << windows;
}

TEST_F(ToyOverfit, InferenceReproducesTrainingTarget) {
  for (const auto& p : *pairs_) {
    const DecodeResult r = model_->infer(p.input, 4 * static_cast<int>(p.input.rows()));
    EXPECT_TRUE(r.stopped_naturally);
    // Raw log-mel units over the common frames.
    const Matrix out = norm_->output(r.output);
    const Matrix target = norm_->output(p.target);
    const Eigen::Index n = std::min(out.rows(), target.rows());
    EXPECT_LE(std::abs(out.rows() - target.rows()), 2);
    const double per_frame = (out.topRows(n) - target.topRows(n)).cwiseAbs().mean();
    EXPECT_LT(per_frame, 0.15) << "frames " << out.rows() << " vs " << target.rows();
  }
}

}  // namespace
}  // namespace fac
