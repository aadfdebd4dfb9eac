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

#include "fac/vocoder.hpp"

#include "fac/corpus.hpp"
#include "fac/subprocess.hpp"

namespace fac {

std::vector<double> GriffinLimVocoder::synth(const MelSpectrogram& m) const {
  return griffin_lim(m, opts_);
}

std::vector<double> CommandVocoder::synth(const MelSpectrogram& m) const {
  TempDir tmp;
  const auto stem = tmp.path() / "mel";
  const auto wav = tmp.path() / "out.wav";
  write_mel_dump(stem, m);
  const std::string cmd = expand_command(command_, {{"mel", stem.string()}, {"wav", wav.string()}});
  const CommandResult r = run_command(cmd);
  if (r.exit_code != 0) {
    throw Error("vocoder '" + id_ + "' command failed with exit code " +
                std::to_string(r.exit_code));
  }
  WavData data = read_wav(wav);
  if (data.sample_rate != m.sample_rate()) {
    Utterance u;
    u.sample_rate = data.sample_rate;
    u.samples = std::move(data.samples);
    return resample(u, m.sample_rate()).samples;
  }
  return data.samples;
}

VocoderRegistry VocoderRegistry::with_defaults() {
  VocoderRegistry r;
  r.add(std::make_shared<GriffinLimVocoder>());
  return r;
}

void VocoderRegistry::add(std::shared_ptr<const VocoderBackend> backend) {
  if (!backend) throw Error("cannot register a null vocoder");
  backends_[backend->backend_id()] = std::move(backend);
}

const VocoderBackend& VocoderRegistry::get(const std::string& id) const {
  auto it = backends_.find(id);
  if (it == backends_.end()) {
    std::string known;
    for (const auto& [k, _] : backends_) known += (known.empty() ? "" : ", ") + k;
    throw Error("unknown vocoder backend '" + id + "'; registered: " + known);
  }
  return *it->second;
}

std::vector<std::string> VocoderRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : backends_) out.push_back(k);
  return out;
}

Utterance vocode(const MelSpectrogram& m, const VocoderBackend& backend) {
  Utterance u;
  u.sample_rate = m.sample_rate();
  u.samples = backend.synth(m);
  return u;
}

Utterance vocode(const MelSpectrogram& m, const VocoderRegistry& registry, const std::string& id) {
  return vocode(m, registry.get(id));
}

}  // namespace fac
