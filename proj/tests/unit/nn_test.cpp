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
#include <fstream>
#include <numbers>

#include <gtest/gtest.h>

#include "fac/nn.hpp"
#include "fac/subprocess.hpp"
#include "test_util.hpp"

namespace fac::nn {
namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
  return m;
}

// Exercises every tape op in one scalar loss.
class TapeGradients : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(1);
    w_ = params_.add("w", random_matrix(4, 5, rng));
    b_ = params_.add("b", random_matrix(1, 5, rng));
    k_ = params_.add("k", random_matrix(3, 5, rng));
    x_ = random_matrix(6, 4, rng);
    mask_ = random_matrix(6, 5, rng);
    target_ = random_matrix(6, 8, rng);
    stop_ = Matrix::Zero(6, 1);
    stop_(5, 0) = 1.0;
  }

  double loss(std::vector<Matrix>* grads) {
    Tape t(params_);
    const Var x = t.constant(x_);
    const Var h = t.linear(x, w_, b_);                       // 6x5
    const Var a = t.relu(t.add_const(h, Matrix::Constant(6, 5, 0.05)));
    const Var g = t.tanh(t.mul_const(h, mask_));
    const Var s = t.softmax_rows(t.matmul_nt(t.add(a, g), t.param(k_)));  // 6x3
    const Var cat = t.concat_cols({s, t.scale(g, 0.5)});   // 6x8
    const Var l1 = t.l1_loss(cat, target_);
    const Var bce = t.bce_with_logits(t.matmul(s, t.constant(Matrix::Ones(3, 1))), stop_, 3.0);
    const Var ce = t.cross_entropy(h, {0, 1, 2, 3, 4, 0});
    const Var total = t.add(t.add(l1, bce), t.add(ce, t.mean(g)));
    if (grads) t.backward(total, *grads);
    return t.value(total)(0, 0);
  }

  ParameterStore params_;
  std::size_t w_, b_, k_;
  Matrix x_, mask_, target_, stop_;
};

TEST_F(TapeGradients, MatchFiniteDifferences) {
  auto fn = [this](std::vector<Matrix>* g) { return loss(g); };
  const auto r = testing::gradient_check(params_, fn, 60, 3);
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst;
}

TEST(Tape, NonRecordingRefusesBackward) {
  ParameterStore p;
  p.add("w", Matrix::Ones(2, 2));
  Tape t(p, false);
  const Var v = t.mean(t.param("w"));
  EXPECT_EQ(t.value(v)(0, 0), 1.0);
  std::vector<Matrix> g = p.zeros_like();
  EXPECT_THROW(t.backward(v, g), Error);
}

TEST(Tape, SoftmaxRowsSumToOne) {
  ParameterStore p;
  Tape t(p, false);
  Rng rng(2);
  const Var s = t.softmax_rows(t.constant(10.0 * random_matrix(5, 7, rng)));
  for (Eigen::Index r = 0; r < 5; ++r) EXPECT_NEAR(t.value(s).row(r).sum(), 1.0, 1e-12);
}

TEST(ParameterStore, NamesHashAndErrors) {
  ParameterStore p;
  p.add("a", Matrix::Zero(2, 3));
  p.add("b", Matrix::Ones(1, 3));
  EXPECT_EQ(p.scalar_count(), 9u);
  EXPECT_EQ(p.index("b"), 1u);
  EXPECT_THROW(p.index("missing"), Error);
  EXPECT_THROW(p.add("a", Matrix::Zero(1, 1)), Error);
  const std::string h = p.hash();
  p.at("a")(0, 0) = 1e-300;
  EXPECT_NE(p.hash(), h);
  p.at("a")(0, 0) = NAN;
  EXPECT_FALSE(p.all_finite());
}

TEST(Xavier, Bounds) {
  Rng rng(4);
  const Matrix m = xavier_uniform(30, 50, rng);
  const double bound = std::sqrt(6.0 / 80.0);
  EXPECT_LE(m.cwiseAbs().maxCoeff(), bound);
  EXPECT_GT(m.cwiseAbs().maxCoeff(), 0.8 * bound);
}

TEST(Adam, MinimizesQuadratic) {
  ParameterStore p;
  p.add("x", (Matrix(1, 3) << 3.0, -2.0, 1.0).finished());
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.clip_norm = 0.0;
  Adam adam(p, cfg);
  for (int i = 0; i < 500; ++i) {
    std::vector<Matrix> g = {2.0 * p.at(0)};
    adam.step(p, g);
  }
  EXPECT_LT(p.at(0).cwiseAbs().maxCoeff(), 1e-2);
  EXPECT_EQ(adam.steps(), 500);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // Bias correction makes the first update lr * sign(g).
  ParameterStore p;
  p.add("x", Matrix::Zero(1, 2));
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.clip_norm = 0.0;
  Adam adam(p, cfg);
  std::vector<Matrix> g = {(Matrix(1, 2) << 5.0, -0.001).finished()};
  adam.step(p, g);
  EXPECT_NEAR(p.at(0)(0, 0), -0.01, 1e-6);
  EXPECT_NEAR(p.at(0)(0, 1), 0.01, 1e-4);
}

TEST(Adam, ClipReturnsPreClipNorm) {
  ParameterStore p;
  p.add("x", Matrix::Zero(1, 2));
  AdamConfig cfg;
  cfg.clip_norm = 1.0;
  Adam adam(p, cfg);
  std::vector<Matrix> g = {(Matrix(1, 2) << 3.0, 4.0).finished()};
  EXPECT_NEAR(adam.step(p, g), 5.0, 1e-12);
}

TEST(Adam, CosineSchedule) {
  AdamConfig cfg;
  cfg.learning_rate = 1.0;
  cfg.final_lr_fraction = 0.1;
  EXPECT_DOUBLE_EQ(cfg.rate_at(0, 101), 1.0);
  EXPECT_NEAR(cfg.rate_at(50, 101), 0.55, 1e-12);
  EXPECT_NEAR(cfg.rate_at(100, 101), 0.1, 1e-12);
  for (int s = 1; s < 101; ++s) EXPECT_LE(cfg.rate_at(s, 101), cfg.rate_at(s - 1, 101));
  cfg.final_lr_fraction = 1.0;
  EXPECT_EQ(cfg.rate_at(77, 101), 1.0);
}

TEST(Checkpoint, RoundTripExact) {
  TempDir dir;
  Rng rng(6);
  ParameterStore p;
  p.add("enc.w", random_matrix(3, 4, rng));
  p.add("enc.b", random_matrix(1, 4, rng));
  save_checkpoint(dir.path() / "m.ckpt", p, {{"seed", 6}, {"arch", "test"}});
  const Checkpoint c = load_checkpoint(dir.path() / "m.ckpt");
  EXPECT_EQ(c.params, p);
  EXPECT_EQ(c.meta["seed"], 6);
  EXPECT_EQ(c.params.hash(), p.hash());
}

TEST(Checkpoint, RejectsGarbageAndMissing) {
  TempDir dir;
  {
    std::ofstream out(dir.path() / "bad.ckpt");
    out << "NOTACKPT-and-more-bytes";
  }
  EXPECT_THROW(load_checkpoint(dir.path() / "bad.ckpt"), Error);
  EXPECT_THROW(load_checkpoint(dir.path() / "none.ckpt"), IoError);
}

TEST(Transfer, ReportsEveryTensor) {
  ParameterStore dst;
  dst.add("in.w", Matrix::Zero(80, 8));
  dst.add("core.w", Matrix::Zero(8, 8));
  dst.add("head.w", Matrix::Zero(8, 2));
  ParameterStore src;
  src.add("in.w", Matrix::Ones(40, 8));  // text-embedding shaped
  src.add("core.w", Matrix::Ones(8, 8));
  const TransferReport r = transfer_parameters(dst, src);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].action, "skipped_shape");
  EXPECT_EQ(r[1].action, "copied");
  EXPECT_EQ(r[2].action, "skipped_missing");
  EXPECT_EQ(dst.at("core.w"), Matrix::Ones(8, 8));
  EXPECT_EQ(dst.at("in.w"), Matrix::Zero(80, 8));
  const nlohmann::json j = to_json(r);
  EXPECT_EQ(j[0]["name"], "in.w");
  EXPECT_EQ(j[0]["action"], "skipped_shape");
}

TEST(Transfer, EmptySourceLeavesModelUnchanged) {
  ParameterStore dst;
  dst.add("a", Matrix::Constant(2, 2, 3.0));
  const ParameterStore before = dst;
  const TransferReport r = transfer_parameters(dst, ParameterStore{});
  EXPECT_EQ(dst, before);
  for (const auto& e : r) EXPECT_EQ(e.action, "skipped_missing");
}

}  // namespace
}  // namespace fac::nn
