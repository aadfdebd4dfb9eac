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

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "fac/pipelines.hpp"
#include "fac/subprocess.hpp"
#include "fac/toy_corpus.hpp"

namespace fac {
namespace {

namespace fs = std::filesystem;

using Kinds = std::vector<StageKind>;

// ---------------------------------------------------------------------------
// Graphs

Stage st(StageKind k, const std::string& in, const std::string& out) { return {k, "m", in, out}; }

TEST(Graph, ExpectedStageOrders) {
  EXPECT_EQ(expected_stages(Method::kCascade),
            (Kinds{StageKind::kSeq2seq, StageKind::kExtractor, StageKind::kFrameDecoder, StageKind::kVocoder}));
  EXPECT_EQ(expected_stages(Method::kStg), (Kinds{StageKind::kSeq2seq, StageKind::kVocoder}));
  EXPECT_EQ(expected_stages(Method::kLsc),
            (Kinds{StageKind::kExtractor, StageKind::kSeq2seq, StageKind::kFrameDecoder, StageKind::kVocoder}));
}

TEST(Graph, ValidationRejectsWrongOrderAndSpaces) {
  ConversionGraph stg{Method::kStg,
                      {st(StageKind::kSeq2seq, "mel:80", "mel:80"), st(StageKind::kVocoder, "mel:80", "wave")}};
  EXPECT_NO_THROW(stg.validate());
  ConversionGraph swapped = stg;
  std::swap(swapped.stages[0], swapped.stages[1]);
  EXPECT_THROW(swapped.validate(), Error);
  ConversionGraph bad_space = stg;
  bad_space.stages[1].input_space = "mel:40";
  EXPECT_THROW(bad_space.validate(), Error);
  ConversionGraph wrong_method = stg;
  wrong_method.method = Method::kLsc;
  EXPECT_THROW(wrong_method.validate(), Error);
}

TEST(Graph, MelMayFeedWaveformInput) {
  ConversionGraph g{Method::kCascade,
                    {st(StageKind::kSeq2seq, "mel:80", "mel:80"), st(StageKind::kExtractor, "wave", "latent:x:7"),
                     st(StageKind::kFrameDecoder, "latent:x:7", "mel:80"), st(StageKind::kVocoder, "mel:80", "wave")}};
  EXPECT_NO_THROW(g.validate());
  g.stages[2].input_space = "latent:x:8";
  EXPECT_THROW(g.validate(), Error);
}

TEST(Graph, JsonRoundTrip) {
  const ConversionGraph g{Method::kStg,
                          {st(StageKind::kSeq2seq, "mel:80", "mel:80"), st(StageKind::kVocoder, "mel:80", "wave")}};
  EXPECT_EQ(conversion_graph_from_json(to_json(g)), g);
  EXPECT_EQ(parse_method("lsc"), Method::kLsc);
  EXPECT_THROW(parse_method("vc"), Error);
}

TEST(Config, JsonRoundTrip) {
  PipelineConfig c = toy_pipeline_config();
  c.train.steps = 17;
  c.seq2seq.model_dim = 40;
  c.vocoder_id = "ext";
  const PipelineConfig back = pipeline_config_from_json(to_json(c));
  EXPECT_EQ(back.seq2seq, c.seq2seq);
  EXPECT_EQ(back.train.steps, 17);
  EXPECT_EQ(back.vocoder_id, "ext");
}

TEST(FeatureNormTest, StandardizesAndInverts) {
  Rng rng(3);
  std::vector<TrainingPair> pairs(2);
  for (auto& p : pairs) {
    p.input = Matrix(6, 3);
    p.target = Matrix(5, 2);
    for (Eigen::Index i = 0; i < p.input.size(); ++i) p.input(i) = 4.0 + 2.0 * rng.normal();
    for (Eigen::Index i = 0; i < p.target.size(); ++i) p.target(i) = -1.0 + 0.5 * rng.normal();
  }
  const FeatureNorm n = fit_feature_norm(pairs);
  Matrix all(12, 3);
  all << n.input(pairs[0].input), n.input(pairs[1].input);
  EXPECT_LT(all.colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((n.output(n.target(pairs[0].target)) - pairs[0].target).cwiseAbs().maxCoeff(), 1e-12);
  const FeatureNorm back = feature_norm_from_json(to_json(n));
  EXPECT_LT((back.input(pairs[1].input) - n.input(pairs[1].input)).cwiseAbs().maxCoeff(), 1e-6);
}

// ---------------------------------------------------------------------------
// Toy runs

ToyCorpus small_corpus() {
  ToyCorpusConfig tc;
  tc.n_prompts = 8;
  tc.splits = {4, 2, 2};
  return generate_toy_corpus(tc);
}

std::vector<Utterance> sources(const ParallelCorpus& c, Split s) {
  std::vector<Utterance> out;
  for (const auto* p : c.pairs_in(s)) out.push_back(p->source);
  return out;
}

PipelineConfig overfit_config() {
  PipelineConfig c = toy_pipeline_config();
  c.seq2seq.model_dim = 48;
  c.seq2seq.ffn_dim = 96;
  c.seq2seq.prenet_dim = 48;
  c.train.steps = 3000;
  c.train.batch_size = 4;
  return c;
}

double common_l1(const Matrix& a, const Matrix& b) {
  const Eigen::Index n = std::min(a.rows(), b.rows());
  return (a.topRows(n) - b.topRows(n)).cwiseAbs().mean();
}

Matrix stage1(const MethodBundle& b, const Matrix& input) {
  const int cap = static_cast<int>(std::ceil(b.max_frames_factor * input.rows()));
  return b.norm.output(b.seq2seq->infer(b.norm.input(input), cap, b.stop_threshold).output);
}

class ToyMethods : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    toy_ = new ToyCorpus(small_corpus());
    const ToyCorpus full = generate_toy_corpus();
    ppg_ = train_toy_ppg(full.corpus, full.segments, full.n_phones);
    reg_ = new ExtractorRegistry;
    reg_->add(ppg_);
    FrameVCConfig fc;
    fc.steps = 300;
    frame_vc_ = new FrameVCModel(train_frame_decoder(sources(toy_->corpus, Split::kTrain), *ppg_, fc));
    hash0_ = new std::string(frame_vc_->parameter_hash());
    const PipelineConfig cfg = overfit_config();
    cascade_ = new MethodBundle(train_cascade(toy_->corpus, *frame_vc_, cfg));
    hashes_.push_back(frame_vc_->parameter_hash());
    stg_ = new MethodBundle(train_stg(toy_->corpus, *frame_vc_, *reg_, cfg));
    hashes_.push_back(frame_vc_->parameter_hash());
    lsc_ = new MethodBundle(train_lsc(toy_->corpus, *frame_vc_, *reg_, cfg));
    hashes_.push_back(frame_vc_->parameter_hash());
  }
  static void TearDownTestSuite() {
    delete lsc_;
    delete stg_;
    delete cascade_;
    delete hash0_;
    delete frame_vc_;
    delete reg_;
    ppg_.reset();
    delete toy_;
  }

  static inline ToyCorpus* toy_ = nullptr;
  static inline std::shared_ptr<ToyPpgExtractor> ppg_;
  static inline ExtractorRegistry* reg_ = nullptr;
  static inline FrameVCModel* frame_vc_ = nullptr;
  static inline std::string* hash0_ = nullptr;
  static inline std::vector<std::string> hashes_;
  static inline MethodBundle* cascade_ = nullptr;
  static inline MethodBundle* stg_ = nullptr;
  static inline MethodBundle* lsc_ = nullptr;
  GriffinLimVocoder vocoder_;
};

TEST_F(ToyMethods, BundleShapes) {
  EXPECT_EQ(cascade_->seq2seq->config().input_dim, 80);
  EXPECT_EQ(cascade_->seq2seq->config().output_dim, 80);
  EXPECT_EQ(stg_->seq2seq->config().output_dim, 80);
  EXPECT_EQ(stg_->graph.stages.size(), 2u);
  EXPECT_EQ(lsc_->seq2seq->config().input_dim, ppg_->dim());
  EXPECT_EQ(lsc_->seq2seq->config().output_dim, ppg_->dim());
  EXPECT_TRUE(lsc_->renormalize_posteriors);
  for (const MethodBundle* b : {cascade_, stg_, lsc_}) {
    EXPECT_EQ(b->graph.kinds(), expected_stages(b->method));
    EXPECT_NO_THROW(b->graph.validate());
  }
}

TEST_F(ToyMethods, ProvenanceAndBundleId) {
  for (const MethodBundle* b : {cascade_, stg_, lsc_}) {
    EXPECT_EQ(b->provenance.at("corpus_hash"), toy_->corpus.content_hash());
    EXPECT_EQ(b->provenance.at("frame_vc_hash"), *hash0_);
    EXPECT_EQ(b->provenance.at("steps"), 3000);
    EXPECT_TRUE(b->provenance.contains("seq2seq_seed"));
    EXPECT_TRUE(b->provenance.contains("train_seed"));
  }
  EXPECT_NE(cascade_->bundle_id(), stg_->bundle_id());
  PipelineConfig quick = overfit_config();
  quick.train.steps = 3;
  const MethodBundle a = train_cascade(toy_->corpus, *frame_vc_, quick);
  const MethodBundle b = train_cascade(toy_->corpus, *frame_vc_, quick);
  EXPECT_EQ(a.bundle_id(), b.bundle_id());
  quick.train.seed = 9;
  EXPECT_NE(train_cascade(toy_->corpus, *frame_vc_, quick).bundle_id(), a.bundle_id());
}

TEST_F(ToyMethods, FrameVcFrozen) {
  ASSERT_EQ(hashes_.size(), 3u);
  for (const auto& h : hashes_) EXPECT_EQ(h, *hash0_);
}

TEST_F(ToyMethods, CascadeOverfitStageOne) {
  for (const auto* p : toy_->corpus.pairs_in(Split::kTrain)) {
    const Matrix out = stage1(*cascade_, mel_analyze(p->source).values);
    const Matrix ref = mel_analyze(p->reference).values;
    EXPECT_LE(std::abs(out.rows() - ref.rows()), 2);
    EXPECT_LT(common_l1(out, ref), 0.15) << p->source.prompt_id;
  }
}

TEST_F(ToyMethods, StgOverfitNearSyntheticTarget) {
  const auto pairs = stg_pairs(toy_->corpus, *frame_vc_, *reg_);
  const auto train = toy_->corpus.pairs_in(Split::kTrain);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const ConversionResult r = convert_stg(*stg_, train[i]->source, vocoder_);
    EXPECT_TRUE(r.stopped_naturally);
    EXPECT_LT(common_l1(r.mel.values, pairs[i].target), 0.15) << train[i]->source.prompt_id;
  }
}

TEST_F(ToyMethods, LscOverfitLoss) {
  const double l0 = lsc_->provenance.at("initial_l1").get<double>();
  const double l1 = lsc_->provenance.at("final_l1").get<double>();
  EXPECT_LT(l1, 0.1 * l0);
}

TEST_F(ToyMethods, LscRowsRenormalized) {
  TempDir dir;
  ConvertOptions opts;
  opts.dump_dir = dir.path();
  convert_lsc(*lsc_, *frame_vc_, *reg_, toy_->corpus.pairs_in(Split::kDev)[0]->source, vocoder_, opts);
  const MatrixDump d = read_matrix_dump(dir.path() / "01_converted_latents");
  ASSERT_EQ(d.values.cols(), 7);
  EXPECT_TRUE((d.values.array() >= 0.0).all());
  for (Eigen::Index r = 0; r < d.values.rows(); ++r) ASSERT_NEAR(d.values.row(r).sum(), 1.0, 1e-5);
}

TEST_F(ToyMethods, TracesFollowGraphs) {
  const Utterance& u = toy_->corpus.pairs_in(Split::kDev)[0]->source;
  EXPECT_EQ(convert_cascade(*cascade_, *frame_vc_, *reg_, u, vocoder_).trace,
            (std::vector<std::string>{"seq2seq", "extractor", "frame_decoder", "vocoder"}));
  EXPECT_EQ(convert_stg(*stg_, u, vocoder_).trace, (std::vector<std::string>{"seq2seq", "vocoder"}));
  EXPECT_EQ(convert_lsc(*lsc_, *frame_vc_, *reg_, u, vocoder_).trace,
            (std::vector<std::string>{"extractor", "seq2seq", "frame_decoder", "vocoder"}));
  EXPECT_THROW(convert_stg(*cascade_, u, vocoder_), Error);
}

TEST_F(ToyMethods, BundleDirectoriesLoadOnlyWhatTheGraphNeeds) {
  TempDir dir;
  save_bundle(*cascade_, dir.path() / "cascade", frame_vc_, ppg_.get());
  save_bundle(*stg_, dir.path() / "stg", nullptr, nullptr);
  save_bundle(*lsc_, dir.path() / "lsc", frame_vc_, ppg_.get());
  EXPECT_THROW(save_bundle(*lsc_, dir.path() / "bad", nullptr, nullptr), Error);
  EXPECT_FALSE(fs::exists(dir.path() / "stg" / "frame_vc.ckpt"));

  const VocoderRegistry vocoders = VocoderRegistry::with_defaults();
  const Utterance& u = toy_->corpus.pairs_in(Split::kDev)[0]->source;
  const auto has = [](const std::vector<std::string>& t, const std::string& s) {
    return std::find(t.begin(), t.end(), s) != t.end();
  };
  const ConversionResult s = convert_bundle(dir.path() / "stg", u, vocoders);
  EXPECT_FALSE(has(s.trace, "load:frame_vc"));
  EXPECT_FALSE(has(s.trace, "frame_decoder"));
  const ConversionResult c = convert_bundle(dir.path() / "cascade", u, vocoders);
  const ConversionResult l = convert_bundle(dir.path() / "lsc", u, vocoders);
  EXPECT_TRUE(has(c.trace, "load:frame_vc"));
  EXPECT_TRUE(has(l.trace, "load:frame_vc"));

  // Reloaded bundles convert bit-identically to the in-memory ones.
  EXPECT_EQ(s.output.samples, convert_stg(*stg_, u, vocoder_).output.samples);
  EXPECT_EQ(c.output.samples, convert_cascade(*cascade_, *frame_vc_, *reg_, u, vocoder_).output.samples);
  EXPECT_EQ(l.output.samples, convert_lsc(*lsc_, *frame_vc_, *reg_, u, vocoder_).output.samples);
  EXPECT_EQ(load_bundle(dir.path() / "lsc").bundle_id(), lsc_->bundle_id());
}

TEST_F(ToyMethods, OutputsReproducibleAndInsideEnvelope) {
  for (const auto* p : toy_->corpus.pairs_in(Split::kDev)) {
    const Utterance& u = p->source;
    const ConversionResult results[] = {convert_cascade(*cascade_, *frame_vc_, *reg_, u, vocoder_),
                                        convert_stg(*stg_, u, vocoder_),
                                        convert_lsc(*lsc_, *frame_vc_, *reg_, u, vocoder_)};
    EXPECT_EQ(results[0].output.samples, convert_cascade(*cascade_, *frame_vc_, *reg_, u, vocoder_).output.samples);
    EXPECT_EQ(results[1].output.samples, convert_stg(*stg_, u, vocoder_).output.samples);
    EXPECT_EQ(results[2].output.samples, convert_lsc(*lsc_, *frame_vc_, *reg_, u, vocoder_).output.samples);
    for (const auto& r : results) {
      const double ratio = static_cast<double>(r.output.samples.size()) / u.samples.size();
      EXPECT_GE(ratio, 0.3) << p->source.prompt_id;
      EXPECT_LE(ratio, 3.0) << p->source.prompt_id;
      EXPECT_TRUE(std::all_of(r.output.samples.begin(), r.output.samples.end(),
                              [](double v) { return std::isfinite(v); }));
      EXPECT_EQ(r.output.speaker_id, u.speaker_id);
    }
  }
}

TEST_F(ToyMethods, DumpIntermediates) {
  TempDir dir;
  ConvertOptions opts;
  opts.dump_dir = dir.path();
  const Utterance& u = toy_->corpus.pairs_in(Split::kDev)[0]->source;
  convert_cascade(*cascade_, *frame_vc_, *reg_, u, vocoder_, opts);
  for (const char* stem : {"00_input_mel", "01_seq2seq_mel", "02_latents", "03_frame_decoder_mel"}) {
    EXPECT_TRUE(fs::exists(dir.path() / (std::string(stem) + ".bin"))) << stem;
    EXPECT_TRUE(fs::exists(dir.path() / (std::string(stem) + ".json"))) << stem;
  }
  EXPECT_TRUE(fs::exists(dir.path() / "04_output.wav"));
}

TEST_F(ToyMethods, SyntheticTargetsPreserveCount) {
  std::vector<Utterance> native;
  for (const auto& [id, pair] : toy_->corpus.pairs) native.push_back(pair.reference);
  const auto targets = generate_synthetic_targets(*frame_vc_, *reg_, native);
  ASSERT_EQ(targets.size(), native.size());
  for (std::size_t i = 0; i < native.size(); ++i) {
    EXPECT_LE(std::abs(targets[i].frames() - mel_analyze(native[i]).frames()), 1);
  }
  EXPECT_TRUE(generate_synthetic_targets(*frame_vc_, *reg_, {}).empty());
}

TEST_F(ToyMethods, CascadeWithCopyDecoderKeepsStageOne) {
  ExtractorRegistry reg;
  auto id = std::make_shared<IdentityExtractor>();
  reg.add(id);
  // Copy-trained on the speaker that stage one imitates.
  std::vector<Utterance> native;
  for (const auto& [id, pair] : generate_toy_corpus().corpus.pairs) {
    if (native.size() < 20) native.push_back(pair.reference);
  }
  FrameVCConfig fc;
  fc.steps = 1500;
  const FrameVCModel copy = train_frame_decoder(native, *id, fc);
  for (const auto* p : toy_->corpus.pairs_in(Split::kTrain)) {
    const ConversionResult r = convert_cascade(*cascade_, copy, reg, p->source, vocoder_);
    const Matrix s1 = stage1(*cascade_, mel_analyze(p->source).values);
    ASSERT_EQ(r.mel.frames(), s1.rows());
    EXPECT_LT((r.mel.values - s1).cwiseAbs().mean(), 0.1) << p->source.prompt_id;
  }
}

TEST_F(ToyMethods, StageErrorsNameTheStage) {
  const ExtractorRegistry empty;
  try {
    convert_cascade(*cascade_, *frame_vc_, empty, toy_->corpus.pairs_in(Split::kDev)[0]->source, vocoder_);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("extractor"), std::string::npos);
  }
}

TEST(Training, EmptyTrainSplitIsAnError) {
  ToyCorpus toy = small_corpus();
  toy.corpus.splits.train.clear();
  FrameVCConfig fc;
  fc.steps = 0;
  const IdentityExtractor id;
  const FrameVCModel f = train_frame_decoder(sources(small_corpus().corpus, Split::kTrain), id, fc);
  EXPECT_THROW(train_cascade(toy.corpus, f, overfit_config()), Error);
}

}  // namespace
}  // namespace fac
