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

// Training recipes and conversion graphs for the three accent conversion
// methods:
//   cascade  seq2seq(mel -> mel), extractor, frame decoder, vocoder
//   stg      seq2seq(mel -> synthetic mel), vocoder
//   lsc      extractor, seq2seq(latent -> latent), frame decoder, vocoder
// The frame-based any-to-one model is shared by all three and never updated
// here.

#ifndef FAC_PIPELINES_HPP_
#define FAC_PIPELINES_HPP_

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fac/corpus.hpp"
#include "fac/extractors.hpp"
#include "fac/frame_vc.hpp"
#include "fac/seq2seq.hpp"
#include "fac/vocoder.hpp"

namespace fac {

enum class Method { kCascade, kStg, kLsc };

const char* method_name(Method m);
Method parse_method(const std::string& name);

enum class StageKind { kSeq2seq, kExtractor, kFrameDecoder, kVocoder };

const char* stage_name(StageKind k);

// Feature spaces are labelled "wave", "mel:<n>" or "latent:<id>:<dim>".
struct Stage {
  StageKind kind;
  std::string model;  // checkpoint file, extractor id or vocoder id
  std::string input_space;
  std::string output_space;
  bool operator==(const Stage&) const = default;
};

struct ConversionGraph {
  Method method = Method::kCascade;
  std::vector<Stage> stages;

  std::vector<StageKind> kinds() const;
  // Throws fac::Error when the stage order differs from the method's graph
  // or adjacent stages disagree on their feature space. A mel output may
  // feed a waveform input (the mel is rendered or analysed directly).
  void validate() const;
  bool operator==(const ConversionGraph&) const = default;
};

nlohmann::json to_json(const ConversionGraph& g);
ConversionGraph conversion_graph_from_json(const nlohmann::json& j);

std::vector<StageKind> expected_stages(Method m);

// Per-dimension standardization applied around the seq2seq model.
struct FeatureNorm {
  bool enabled = false;
  RowVector in_mean, in_std, out_mean, out_std;

  Matrix input(const Matrix& m) const;
  Matrix output(const Matrix& normalized) const;  // back to raw units
  Matrix target(const Matrix& m) const;
};

FeatureNorm fit_feature_norm(const std::vector<TrainingPair>& raw_pairs);
nlohmann::json to_json(const FeatureNorm& n);
FeatureNorm feature_norm_from_json(const nlohmann::json& j);

struct PipelineConfig {
  Seq2seqConfig seq2seq;  // input/output dims are taken from the data
  Seq2seqTrainConfig train;
  bool normalize = true;  // ignored for identity-initialized models
  double max_frames_factor = 4.0;
  double stop_threshold = 0.5;
  std::string vocoder_id = "griffin-lim";
};

// Settings sized for the generated toy corpus on one CPU core.
PipelineConfig toy_pipeline_config();

nlohmann::json to_json(const PipelineConfig& c);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

struct MethodBundle {
  Method method = Method::kCascade;
  ConversionGraph graph;
  std::shared_ptr<const Seq2seqModel> seq2seq;
  FeatureNorm norm;
  std::string extractor_id;  // empty for stg
  AnalysisConfig analysis;
  bool renormalize_posteriors = false;
  double max_frames_factor = 4.0;
  double stop_threshold = 0.5;
  std::string vocoder_id = "griffin-lim";
  // corpus_hash, seeds, step counts, frame_vc_hash, transfer summary,
  // initial/final teacher-forced L1.
  nlohmann::json provenance = nlohmann::json::object();
  Seq2seqTrainLog log;  // not persisted

  std::string bundle_id() const;
};

// Raw (unnormalized) seq2seq training pairs per method, in train-split order.
std::vector<TrainingPair> cascade_pairs(const ParallelCorpus& corpus, const AnalysisConfig& analysis);
std::vector<TrainingPair> stg_pairs(const ParallelCorpus& corpus, const FrameVCModel& frame_vc,
                                    const ExtractorRegistry& extractors);
std::vector<TrainingPair> lsc_pairs(const ParallelCorpus& corpus, const ExtractorBackend& extractor);

// One synthetic mel per native utterance, same order.
std::vector<MelSpectrogram> generate_synthetic_targets(const FrameVCModel& frame_vc,
                                                       const ExtractorRegistry& extractors,
                                                       const std::vector<Utterance>& native);

MethodBundle train_cascade(const ParallelCorpus& corpus, const FrameVCModel& frame_vc,
                           const PipelineConfig& cfg, const nn::Checkpoint* pretrained = nullptr);
MethodBundle train_stg(const ParallelCorpus& corpus, const FrameVCModel& frame_vc,
                       const ExtractorRegistry& extractors, const PipelineConfig& cfg,
                       const nn::Checkpoint* pretrained = nullptr);
MethodBundle train_lsc(const ParallelCorpus& corpus, const FrameVCModel& frame_vc,
                       const ExtractorRegistry& extractors, const PipelineConfig& cfg,
                       const nn::Checkpoint* pretrained = nullptr);

struct ConvertOptions {
  std::filesystem::path dump_dir;  // empty disables intermediate dumps
};

struct ConversionResult {
  Utterance output;
  MelSpectrogram mel;                  // mel passed to the vocoder
  std::vector<std::string> trace;      // executed stages and model loads
  bool stopped_naturally = true;
};

ConversionResult convert_cascade(const MethodBundle& bundle, const FrameVCModel& frame_vc,
                                 const ExtractorRegistry& extractors, const Utterance& u,
                                 const VocoderBackend& vocoder, const ConvertOptions& opts = {});
ConversionResult convert_stg(const MethodBundle& bundle, const Utterance& u,
                             const VocoderBackend& vocoder, const ConvertOptions& opts = {});
ConversionResult convert_lsc(const MethodBundle& bundle, const FrameVCModel& frame_vc,
                             const ExtractorRegistry& extractors, const Utterance& u,
                             const VocoderBackend& vocoder, const ConvertOptions& opts = {});

// Bundle directory: method.json, seq2seq.ckpt and, for cascade and lsc,
// frame_vc.ckpt plus extractor.ckpt.
void save_bundle(const MethodBundle& bundle, const std::filesystem::path& dir,
                 const FrameVCModel* frame_vc, const ExtractorBackend* extractor);
MethodBundle load_bundle(const std::filesystem::path& dir);

// Loads only what the method's graph needs; loads appear in the trace as
// "load:<component>".
ConversionResult convert_bundle(const std::filesystem::path& dir, const Utterance& u,
                                const VocoderRegistry& vocoders, const ConvertOptions& opts = {});

}  // namespace fac

#endif  // FAC_PIPELINES_HPP_
