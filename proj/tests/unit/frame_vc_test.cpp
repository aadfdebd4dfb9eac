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

#include "fac/frame_vc.hpp"
#include "fac/subprocess.hpp"
#include "fac/toy_corpus.hpp"
#include "test_util.hpp"

namespace fac {
namespace {

std::vector<Utterance> toy_source(int n) {
  ToyCorpusConfig tc;
  tc.n_prompts = n;
  tc.splits = {static_cast<std::size_t>(n), 0, 0};
  const ToyCorpus toy = generate_toy_corpus(tc);
  std::vector<Utterance> out;
  for (const auto* p : toy.corpus.pairs_in(Split::kTrain)) out.push_back(p->source);
  return out;
}

FrameVCConfig quick(int steps) {
  FrameVCConfig c;
  c.hidden = 16;
  c.prenet_dim = 8;
  c.steps = steps;
  return c;
}

TEST(FrameRatio, ReducedFraction) {
  EXPECT_EQ(frame_ratio_from_periods(16.0, 16.0), (FrameRatio{1, 1}));
  EXPECT_EQ(frame_ratio_from_periods(20.0, 16.0), (FrameRatio{5, 4}));
  EXPECT_EQ(frame_ratio_from_periods(10.0, 16.0), (FrameRatio{5, 8}));
  EXPECT_DOUBLE_EQ(frame_ratio_from_periods(32.0, 16.0).value(), 2.0);
}

TEST(FrameVC, GradientCheckMicroConfig) {
  FrameVCConfig c;
  c.hidden = 7;
  c.prenet_dim = 5;
  c.seed = 4;
  AnalysisConfig a;
  a.n_mels = 6;
  FrameVCModel model(c, "micro", 3, a.frame_period_ms(), a, "spk");
  testing::jitter(model.params(), 31);
  Rng rng(9);
  Matrix lat(8, 3), mel(8, 6);
  for (Eigen::Index i = 0; i < lat.size(); ++i) lat(i) = rng.normal();
  for (Eigen::Index i = 0; i < mel.size(); ++i) mel(i) = rng.normal();
  auto loss = [&](std::vector<Matrix>* grads) {
    nn::Tape tape(model.params());
    const nn::Var l = model.teacher_forced(tape, lat, mel);
    if (grads) tape.backward(l, *grads);
    return tape.value(l)(0, 0);
  };
  const auto r = testing::gradient_check(model.params(), loss, 20, 13);
  EXPECT_EQ(r.checked, 20u);
  EXPECT_LT(r.max_relative_error, 1e-3) << r.worst;
}

TEST(FrameVC, ZeroStepsEqualsInitialization) {
  const auto utts = toy_source(2);
  const IdentityExtractor id;
  const FrameVCConfig c = quick(0);
  const FrameVCModel trained = train_frame_decoder(utts, id, c);
  const FrameVCModel fresh(c, "identity", 80, 16.0, AnalysisConfig{}, utts[0].speaker_id);
  ASSERT_EQ(trained.params().size(), fresh.params().size());
  for (std::size_t i = 0; i < fresh.params().size(); ++i) EXPECT_EQ(trained.params().at(i), fresh.params().at(i));
  EXPECT_EQ(trained.trained_steps(), 0);
  EXPECT_EQ(trained.target_speaker_id(), "toy_nonnative");
}

TEST(FrameVC, DeterministicGivenSeed) {
  const auto utts = toy_source(2);
  const IdentityExtractor id;
  const FrameVCModel a = train_frame_decoder(utts, id, quick(15));
  const FrameVCModel b = train_frame_decoder(utts, id, quick(15));
  EXPECT_EQ(a.parameter_hash(), b.parameter_hash());
  FrameVCConfig other = quick(15);
  other.seed = 2;
  EXPECT_NE(train_frame_decoder(utts, id, other).parameter_hash(), a.parameter_hash());
}

TEST(FrameVC, MixedSpeakersAndEmptyAreErrors) {
  auto utts = toy_source(2);
  utts[1].speaker_id = "someone_else";
  const IdentityExtractor id;
  EXPECT_THROW(train_frame_decoder(utts, id, quick(1)), Error);
  EXPECT_THROW(train_frame_decoder({}, id, quick(1)), Error);
}

TEST(FrameVC, DecodeContract) {
  const auto utts = toy_source(3);
  ExtractorRegistry reg;
  auto id = std::make_shared<IdentityExtractor>();
  reg.add(id);
  const FrameVCModel model = train_frame_decoder(utts, *id, quick(10));
  for (const auto& u : utts) {
    const LatentSequence l = id->extract(u);
    const MelSpectrogram direct = decode_latents(model, l);
    const MelSpectrogram a2o = convert_a2o(model, u, reg);
    EXPECT_EQ(direct.values, a2o.values);
    EXPECT_LE(std::abs(a2o.frames() - l.frames()), 1);
    EXPECT_TRUE(a2o.values.allFinite());
  }
  LatentSequence one = id->extract(utts[0]);
  one.values = one.values.topRows(1).eval();
  EXPECT_GE(decode_latents(model, one).frames(), 1);
}

TEST(FrameVC, ExtractorMismatchNamesBothIds) {
  const auto utts = toy_source(2);
  const IdentityExtractor id;
  const FrameVCModel model = train_frame_decoder(utts, id, quick(1));
  LatentSequence l = id.extract(utts[0]);
  l.extractor_id = "toy-vq";
  try {
    decode_latents(model, l);
    FAIL();
  } catch (const Error& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("toy-vq"), std::string::npos);
    EXPECT_NE(what.find("identity"), std::string::npos);
  }
  EXPECT_THROW(convert_a2o(model, utts[0], ExtractorRegistry{}), Error);
}

TEST(FrameVC, DifferentInputsGiveDifferentOutputs) {
  ToyCorpusConfig tc;
  tc.n_prompts = 2;
  tc.splits = {2, 0, 0};
  const ToyCorpus toy = generate_toy_corpus(tc);
  const auto* p = toy.corpus.pairs_in(Split::kTrain)[0];
  ExtractorRegistry reg;
  auto id = std::make_shared<IdentityExtractor>();
  reg.add(id);
  const FrameVCModel model = train_frame_decoder({p->source}, *id, quick(20));
  EXPECT_NE(convert_a2o(model, p->source, reg).values, convert_a2o(model, p->reference, reg).values);
}

TEST(FrameVC, SaveLoadRoundTrip) {
  TempDir dir;
  const auto utts = toy_source(2);
  const IdentityExtractor id;
  const FrameVCModel model = train_frame_decoder(utts, id, quick(5));
  model.save(dir.path() / "fvc.ckpt");
  const FrameVCModel back = FrameVCModel::load(dir.path() / "fvc.ckpt");
  EXPECT_EQ(back.parameter_hash(), model.parameter_hash());
  EXPECT_EQ(back.config(), model.config());
  EXPECT_EQ(back.target_speaker_id(), model.target_speaker_id());
  EXPECT_EQ(back.trained_steps(), 5);
  const Matrix lat = id.extract(utts[0]).values;
  EXPECT_EQ(back.decode_aligned(lat), model.decode_aligned(lat));
}

// Overfit with the identity extractor: the decoder only needs to copy.
class IdentityOverfit : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    utts_ = new std::vector<Utterance>(toy_source(4));
    FrameVCConfig c;
    c.steps = 1500;
    log_ = new FrameVCTrainLog;
    model_ = new FrameVCModel(train_frame_decoder(*utts_, IdentityExtractor{}, c, log_));
  }
  static void TearDownTestSuite() {
    delete model_;
    delete log_;
    delete utts_;
  }
  static inline std::vector<Utterance>* utts_ = nullptr;
  static inline FrameVCTrainLog* log_ = nullptr;
  static inline FrameVCModel* model_ = nullptr;
};

TEST_F(IdentityOverfit, LossHalves) {
  ASSERT_EQ(log_->loss.size(), 1500u);
  EXPECT_LE(log_->loss.back(), 0.5 * log_->loss.front());
}

TEST_F(IdentityOverfit, ReconstructionL1) {
  const double l1 = reconstruction_l1(*model_, *utts_, IdentityExtractor{});
  std::printf("identity reconstruction L1 %.4f\n", l1);
  EXPECT_LT(l1, 0.05);
}

TEST_F(IdentityOverfit, TrainingUtterancePerFrameL1) {
  for (const auto& u : *utts_) {
    const MelSpectrogram mel = mel_analyze(u);
    const Matrix out = model_->decode_aligned(IdentityExtractor{}.extract(u).values);
    ASSERT_EQ(out.rows(), mel.frames());
    const double l1 = (out - mel.values).cwiseAbs().mean();
    std::printf("%s per-frame L1 %.4f\n", u.utterance_id.c_str(), l1);
    EXPECT_LT(l1, 0.1);
  }
}

}  // namespace
}  // namespace fac
