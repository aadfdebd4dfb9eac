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

// Content-feature extractors behind one interface: identity (the mel
// itself), a toy phone classifier producing posteriorgrams, a toy k-means
// quantizer, and an adapter for external extractor commands.

#ifndef FAC_EXTRACTORS_HPP_
#define FAC_EXTRACTORS_HPP_

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fac/features.hpp"
#include "fac/nn.hpp"

namespace fac {

struct LatentSequence {
  Matrix values;  // frames x dim
  std::string extractor_id;
  double frame_period_ms = 0.0;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
};

class ExtractorBackend {
 public:
  virtual ~ExtractorBackend() = default;

  virtual std::string extractor_id() const = 0;
  virtual int dim() const = 0;
  virtual double frame_period_ms() const = 0;
  // Rows are probability vectors.
  virtual bool produces_posteriors() const { return false; }

  // Mel-native backends compute latents from a mel spectrogram with the
  // analysis settings below and accept mel input directly.
  virtual bool mel_native() const { return false; }
  virtual const AnalysisConfig& analysis() const;
  virtual Matrix extract_from_mel(const MelSpectrogram& m) const;

  // Throws fac::Error when the utterance is shorter than one frame.
  virtual LatentSequence extract(const Utterance& u) const;

  // Serializes the backend (type, id, parameters) as a checkpoint.
  virtual nn::Checkpoint to_checkpoint() const = 0;

 protected:
  LatentSequence wrap(Matrix values) const;
};

using ExtractorPtr = std::shared_ptr<const ExtractorBackend>;

class IdentityExtractor : public ExtractorBackend {
 public:
  explicit IdentityExtractor(AnalysisConfig analysis = {}) : analysis_(analysis) {}
  std::string extractor_id() const override { return "identity"; }
  int dim() const override { return analysis_.n_mels; }
  double frame_period_ms() const override { return analysis_.frame_period_ms(); }
  bool mel_native() const override { return true; }
  const AnalysisConfig& analysis() const override { return analysis_; }
  Matrix extract_from_mel(const MelSpectrogram& m) const override;
  nn::Checkpoint to_checkpoint() const override;

 private:
  AnalysisConfig analysis_;
};

// Frame classifier over normalized log-mel frames: one tanh hidden layer and
// a softmax over phones.
class ToyPpgExtractor : public ExtractorBackend {
 public:
  ToyPpgExtractor(std::string id, AnalysisConfig analysis, nn::ParameterStore params);
  std::string extractor_id() const override { return id_; }
  int dim() const override;
  double frame_period_ms() const override { return analysis_.frame_period_ms(); }
  bool produces_posteriors() const override { return true; }
  bool mel_native() const override { return true; }
  const AnalysisConfig& analysis() const override { return analysis_; }
  Matrix extract_from_mel(const MelSpectrogram& m) const override;
  nn::Checkpoint to_checkpoint() const override;

  const nn::ParameterStore& params() const { return params_; }
  // Logits for raw log-mel rows.
  Matrix logits(const Matrix& mel_rows) const;

 private:
  std::string id_;
  AnalysisConfig analysis_;
  nn::ParameterStore params_;
};

// Nearest-centroid quantizer; each output row is a codebook vector.
class ToyQuantizedExtractor : public ExtractorBackend {
 public:
  ToyQuantizedExtractor(std::string id, AnalysisConfig analysis, Matrix codebook);
  std::string extractor_id() const override { return id_; }
  int dim() const override { return static_cast<int>(codebook_.cols()); }
  double frame_period_ms() const override { return analysis_.frame_period_ms(); }
  bool mel_native() const override { return true; }
  const AnalysisConfig& analysis() const override { return analysis_; }
  Matrix extract_from_mel(const MelSpectrogram& m) const override;
  nn::Checkpoint to_checkpoint() const override;

  const Matrix& codebook() const { return codebook_; }
  std::vector<int> assign(const Matrix& rows) const;

 private:
  std::string id_;
  AnalysisConfig analysis_;
  Matrix codebook_;
};

// Runs `command` with {wav} (input WAV path) and {out} (output dump stem)
// substituted; the command writes a matrix dump of shape frames x dim.
class ExternalExtractor : public ExtractorBackend {
 public:
  ExternalExtractor(std::string id, std::string command, int dim, double frame_period_ms);
  std::string extractor_id() const override { return id_; }
  int dim() const override { return dim_; }
  double frame_period_ms() const override { return period_ms_; }
  bool produces_posteriors() const override { return posteriors_; }
  void set_produces_posteriors(bool p) { posteriors_ = p; }
  LatentSequence extract(const Utterance& u) const override;
  nn::Checkpoint to_checkpoint() const override;

 private:
  std::string id_;
  std::string command_;
  int dim_;
  double period_ms_;
  bool posteriors_ = false;
};

struct ToyPpgConfig {
  int hidden = 32;
  int steps = 400;
  double learning_rate = 0.5;  // plain gradient descent
  std::uint64_t seed = 1;
  std::string extractor_id = "toy-ppg";
};

// `frames` are raw log-mel rows, `labels` their phone ids in [0, n_phones).
std::shared_ptr<ToyPpgExtractor> train_toy_ppg(const Matrix& frames, const std::vector<int>& labels,
                                               int n_phones, const AnalysisConfig& analysis,
                                               const ToyPpgConfig& cfg = {});

struct ToyQuantizedConfig {
  int max_iterations = 100;
  std::string extractor_id = "toy-vq";
};

// k-means with k-means++ seeding over all frames of `mels`.
std::shared_ptr<ToyQuantizedExtractor> train_toy_quantized(const std::vector<MelSpectrogram>& mels,
                                                           int k, std::uint64_t seed,
                                                           const ToyQuantizedConfig& cfg = {});

void save_extractor(const ExtractorBackend& backend, const std::filesystem::path& path);
ExtractorPtr load_extractor(const std::filesystem::path& path);
ExtractorPtr extractor_from_checkpoint(const nn::Checkpoint& ckpt);

class ExtractorRegistry {
 public:
  void add(ExtractorPtr backend);
  bool contains(const std::string& id) const { return backends_.contains(id); }
  // Throws fac::Error listing the registered ids when `id` is unknown.
  const ExtractorBackend& get(const std::string& id) const;
  ExtractorPtr get_ptr(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, ExtractorPtr> backends_;
};

// Nearest-frame resampling of `l` onto a grid with period `target_period_ms`.
// `target_frames` < 0 derives the count from the sequence duration.
Matrix align_to_grid(const LatentSequence& l, double target_period_ms, Eigen::Index target_frames = -1);

// Clamps to >= 0 and renormalizes each row to sum 1. All-zero rows become
// uniform.
Matrix renormalize_rows(const Matrix& m);

}  // namespace fac

#endif  // FAC_EXTRACTORS_HPP_
