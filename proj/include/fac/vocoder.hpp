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

#ifndef FAC_VOCODER_HPP_
#define FAC_VOCODER_HPP_

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fac/features.hpp"

namespace fac {

class VocoderBackend {
 public:
  virtual ~VocoderBackend() = default;
  virtual std::string backend_id() const = 0;
  // Waveform at m.sample_rate(), length within one hop of frames * hop.
  virtual std::vector<double> synth(const MelSpectrogram& m) const = 0;
};

class GriffinLimVocoder : public VocoderBackend {
 public:
  explicit GriffinLimVocoder(GriffinLimOptions opts = {}) : opts_(opts) {}
  std::string backend_id() const override { return "griffin-lim"; }
  std::vector<double> synth(const MelSpectrogram& m) const override;

 private:
  GriffinLimOptions opts_;
};

// Writes the mel as a feature dump, runs `command` with {mel} (dump stem) and
// {wav} (expected output path) substituted, and reads the WAV back.
class CommandVocoder : public VocoderBackend {
 public:
  CommandVocoder(std::string id, std::string command)
      : id_(std::move(id)), command_(std::move(command)) {}
  std::string backend_id() const override { return id_; }
  std::vector<double> synth(const MelSpectrogram& m) const override;

 private:
  std::string id_;
  std::string command_;
};

class VocoderRegistry {
 public:
  // Holds "griffin-lim" with default options.
  static VocoderRegistry with_defaults();

  void add(std::shared_ptr<const VocoderBackend> backend);
  // Throws fac::Error listing the registered ids when `id` is unknown.
  const VocoderBackend& get(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, std::shared_ptr<const VocoderBackend>> backends_;
};

Utterance vocode(const MelSpectrogram& m, const VocoderBackend& backend);
Utterance vocode(const MelSpectrogram& m, const VocoderRegistry& registry, const std::string& id);

}  // namespace fac

#endif  // FAC_VOCODER_HPP_
