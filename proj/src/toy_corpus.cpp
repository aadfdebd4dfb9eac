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

#include "fac/toy_corpus.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "json.hpp"

namespace fac {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct PhonePattern {
  const char* name;
  double f1;
  double f2;
};

constexpr PhonePattern kPhones[kToyPhoneTypes] = {
    {"BA", 300.0, 2200.0}, {"DI", 450.0, 1100.0}, {"GU", 600.0, 1900.0},
    {"KO", 800.0, 2600.0}, {"ME", 1000.0, 1500.0}, {"SA", 1300.0, 3000.0},
};

struct PromptPlan {
  std::vector<int> phones;        // 1-based phone ids
  std::vector<double> durations;  // relative duration per phone
};

Utterance render(const PromptPlan& plan, const ToyCorpusConfig& cfg, double stretch, double freq_scale,
                 std::vector<PhoneSegment>& segments) {
  const double sr = cfg.sample_rate;
  const auto edge = static_cast<std::size_t>(std::lround(cfg.edge_silence_ms * sr / 1000.0));
  const auto fade = static_cast<std::size_t>(std::lround(0.005 * sr));
  std::vector<double> samples(edge, 0.0);
  segments.clear();
  segments.push_back({0, edge, 0});
  double phase1 = 0.0, phase2 = 0.0;
  for (std::size_t i = 0; i < plan.phones.size(); ++i) {
    const PhonePattern& p = kPhones[plan.phones[i] - 1];
    const auto len = static_cast<std::size_t>(
        std::lround(cfg.phone_ms * plan.durations[i] * stretch * sr / 1000.0));
    const std::size_t begin = samples.size();
    const double w1 = 2.0 * std::numbers::pi * p.f1 * freq_scale / sr;
    const double w2 = 2.0 * std::numbers::pi * p.f2 * freq_scale / sr;
    for (std::size_t n = 0; n < len; ++n) {
      double env = 1.0;
      if (n < fade) env = 0.5 - 0.5 * std::cos(std::numbers::pi * n / fade);
      if (len - 1 - n < fade) env = std::min(env, 0.5 - 0.5 * std::cos(std::numbers::pi * (len - 1 - n) / fade));
      samples.push_back(cfg.amplitude * env * (0.6 * std::sin(phase1) + 0.4 * std::sin(phase2)));
      phase1 += w1;
      phase2 += w2;
    }
    segments.push_back({begin, samples.size(), plan.phones[i]});
  }
  const std::size_t tail = samples.size();
  samples.resize(tail + edge, 0.0);
  segments.push_back({tail, samples.size(), 0});
  Utterance u;
  u.sample_rate = cfg.sample_rate;
  u.samples = std::move(samples);
  return u;
}

}  // namespace

std::vector<int> frame_labels_from_segments(const std::vector<PhoneSegment>& segments, int hop,
                                            Eigen::Index frames) {
  std::vector<int> out(static_cast<std::size_t>(frames), 0);
  for (Eigen::Index t = 0; t < frames; ++t) {
    const std::size_t center = static_cast<std::size_t>(t) * static_cast<std::size_t>(hop);
    for (const auto& s : segments) {
      if (center >= s.begin && center < s.end) {
        out[static_cast<std::size_t>(t)] = s.phone;
        break;
      }
    }
  }
  return out;
}

std::vector<int> ToyCorpus::frame_labels(const std::string& utterance_id, int hop, Eigen::Index frames) const {
  auto it = segments.find(utterance_id);
  if (it == segments.end()) throw Error("no phone segments for '" + utterance_id + "'");
  return frame_labels_from_segments(it->second, hop, frames);
}

ToyCorpus generate_toy_corpus(const ToyCorpusConfig& cfg) {
  if (cfg.n_prompts < 1 || cfg.min_phones < 1 || cfg.max_phones < cfg.min_phones) {
    throw Error("toy corpus: invalid prompt or phone counts");
  }
  Rng rng(cfg.seed);
  ToyCorpus toy;
  toy.n_phones = kToyPhoneTypes + 1;
  for (int i = 0; i < cfg.n_prompts; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "toy_%04d", i + 1);
    const std::string prompt = buf;
    PromptPlan plan;
    const int n = cfg.min_phones + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.max_phones - cfg.min_phones + 1)));
    std::string transcript;
    for (int k = 0; k < n; ++k) {
      int ph = 1 + static_cast<int>(rng.below(kToyPhoneTypes));
      if (!plan.phones.empty() && ph == plan.phones.back()) ph = ph % kToyPhoneTypes + 1;
      plan.phones.push_back(ph);
      plan.durations.push_back(rng.uniform(0.8, 1.2));
      transcript += (transcript.empty() ? "" : " ") + std::string(kPhones[ph - 1].name);
    }
    UtterancePair pair;
    std::vector<PhoneSegment> seg;
    pair.source = render(plan, cfg, cfg.source_stretch, cfg.source_freq_scale, seg);
    pair.source.speaker_id = cfg.source_speaker;
    pair.source.prompt_id = prompt;
    pair.source.utterance_id = cfg.source_speaker + "_" + prompt;
    pair.source.transcript = transcript;
    toy.segments[pair.source.utterance_id] = seg;
    pair.reference = render(plan, cfg, 1.0, 1.0, seg);
    pair.reference.speaker_id = cfg.reference_speaker;
    pair.reference.prompt_id = prompt;
    pair.reference.utterance_id = cfg.reference_speaker + "_" + prompt;
    pair.reference.transcript = transcript;
    toy.segments[pair.reference.utterance_id] = seg;
    toy.corpus.pairs.emplace(prompt, std::move(pair));
  }
  const std::size_t wanted = cfg.splits.train + cfg.splits.dev + cfg.splits.test;
  if (wanted > 0) toy.corpus = split_corpus(toy.corpus, cfg.splits, cfg.seed);
  toy.corpus.validate();
  return toy;
}

void write_toy_corpus(const ToyCorpus& toy, const fs::path& dir) {
  const std::string src = toy.corpus.source_speaker();
  const std::string ref = toy.corpus.reference_speaker();
  fs::create_directories(dir / src);
  fs::create_directories(dir / ref);
  std::ofstream tsv(dir / "transcripts.tsv");
  std::ofstream seg(dir / "segments.jsonl");
  if (!tsv || !seg) throw IoError("cannot write toy corpus under " + dir.string());
  for (const auto& [prompt, pair] : toy.corpus.pairs) {
    write_wav(dir / src / (prompt + ".wav"), pair.source.samples, pair.source.sample_rate);
    write_wav(dir / ref / (prompt + ".wav"), pair.reference.samples, pair.reference.sample_rate);
    tsv << prompt << '\t' << pair.source.transcript << '\n';
    for (const Utterance* u : {&pair.source, &pair.reference}) {
      json rows = json::array();
      for (const auto& s : toy.segments.at(u->utterance_id)) rows.push_back({s.begin, s.end, s.phone});
      seg << json{{"utterance_id", u->utterance_id}, {"segments", rows}}.dump() << '\n';
    }
  }
}

std::map<std::string, std::vector<PhoneSegment>> read_segments(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read segments file " + path.string());
  std::map<std::string, std::vector<PhoneSegment>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      auto& segs = out[j.at("utterance_id").get<std::string>()];
      for (const auto& r : j.at("segments")) {
        segs.push_back({r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>(), r.at(2).get<int>()});
      }
    } catch (const json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

LabelledFrames labelled_frames(const ParallelCorpus& corpus,
                               const std::map<std::string, std::vector<PhoneSegment>>& segments,
                               const AnalysisConfig& analysis) {
  std::vector<Matrix> mels;
  LabelledFrames out;
  Eigen::Index rows = 0;
  for (const auto& [prompt, pair] : corpus.pairs) {
    for (const Utterance* u : {&pair.source, &pair.reference}) {
      const auto seg = segments.find(u->utterance_id);
      if (seg == segments.end()) throw Error("no phone segments for utterance '" + u->utterance_id + "'");
      MelSpectrogram m = mel_analyze(*u, analysis);
      const auto labels = frame_labels_from_segments(seg->second, analysis.hop_size, m.frames());
      out.labels.insert(out.labels.end(), labels.begin(), labels.end());
      rows += m.frames();
      mels.push_back(std::move(m.values));
    }
  }
  out.frames.resize(rows, analysis.n_mels);
  Eigen::Index at = 0;
  for (const auto& m : mels) {
    out.frames.middleRows(at, m.rows()) = m;
    at += m.rows();
  }
  return out;
}

std::shared_ptr<ToyPpgExtractor> train_toy_ppg(const ParallelCorpus& corpus,
                                               const std::map<std::string, std::vector<PhoneSegment>>& segments,
                                               int n_phones, const AnalysisConfig& analysis,
                                               const ToyPpgConfig& cfg) {
  const LabelledFrames lf = labelled_frames(corpus, segments, analysis);
  return train_toy_ppg(lf.frames, lf.labels, n_phones, analysis, cfg);
}

std::shared_ptr<ToyQuantizedExtractor> train_toy_quantized(const ParallelCorpus& corpus, int k,
                                                           std::uint64_t seed, const AnalysisConfig& analysis,
                                                           const ToyQuantizedConfig& cfg) {
  std::vector<MelSpectrogram> mels;
  for (const auto& [prompt, pair] : corpus.pairs) {
    mels.push_back(mel_analyze(pair.source, analysis));
    mels.push_back(mel_analyze(pair.reference, analysis));
  }
  return train_toy_quantized(mels, k, seed, cfg);
}

}  // namespace fac
