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
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include <gtest/gtest.h>
#include <unsupported/Eigen/FFT>

#include "fac/audio.hpp"
#include "fac/common.hpp"
#include "fac/corpus.hpp"
#include "fac/subprocess.hpp"
#include "fac/toy_corpus.hpp"

namespace fac {
namespace {

namespace fs = std::filesystem;

std::vector<double> sine(double hz, int rate, std::size_t n, double amp = 0.5) {
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = amp * std::sin(2.0 * std::numbers::pi * hz * i / rate);
  return s;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// <root>/<speaker>/<prompt>.wav for the listed prompts.
void write_speaker(const fs::path& root, const std::string& speaker, const std::vector<std::string>& prompts,
                   int rate = kDefaultSampleRate) {
  fs::create_directories(root / speaker);
  double hz = 200;
  for (const auto& p : prompts) {
    write_wav(root / speaker / (p + ".wav"), sine(hz, rate, 1600), rate);
    hz += 50;
  }
}

TEST(Wav, RoundTripWithinQuantization) {
  TempDir dir;
  const auto s = sine(440, 16000, 1000);
  write_wav(dir.path() / "a.wav", s, 16000);
  const WavData d = read_wav(dir.path() / "a.wav");
  ASSERT_EQ(d.sample_rate, 16000);
  ASSERT_EQ(d.samples.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(d.samples[i], s[i], 1.0 / 32767);
}

TEST(Wav, RejectsStereo) {
  std::string bytes = encode_wav({0.1, 0.2, 0.3, 0.4}, 16000);
  // fmt chunk: channels at byte 22, block align at 32.
  bytes[22] = 2;
  bytes[32] = 4;
  EXPECT_THROW(
      {
        try {
          decode_wav(bytes);
        } catch (const Error& e) {
          EXPECT_NE(std::string(e.what()).find("mono"), std::string::npos);
          throw;
        }
      },
      Error);
}

TEST(Wav, RejectsGarbageAndMissingFile) {
  EXPECT_THROW(decode_wav("not a wav"), Error);
  EXPECT_THROW(read_wav("/nonexistent/file.wav"), IoError);
}

TEST(Utterance, ValidateSamples) {
  Utterance u;
  EXPECT_THROW(validate_samples(u), Error);
  u.samples = {0.0, 1.5};
  EXPECT_THROW(validate_samples(u), Error);
  u.samples = {0.0, NAN};
  EXPECT_THROW(validate_samples(u), Error);
  u.samples = {0.0, -1.0, 1.0};
  EXPECT_NO_THROW(validate_samples(u));
}

class IngestTest : public ::testing::Test {
 protected:
  TempDir dir;
  fs::path transcripts() const { return dir.path() / "t.tsv"; }
};

TEST_F(IngestTest, CompletePairing) {
  write_speaker(dir.path(), "spk_a", {"p1", "p2", "p3"});
  write_speaker(dir.path(), "spk_b", {"p1", "p2", "p3"});
  write_text(transcripts(), "# comment\np1\tHello there.\np2\tsecond one\n\np3\tthird\n");
  IngestReport report;
  const ParallelCorpus c = ingest_corpus(dir.path() / "spk_a", dir.path() / "spk_b", transcripts(), &report);
  EXPECT_EQ(c.pairs.size(), 3u);
  EXPECT_TRUE(report.excluded.empty());
  EXPECT_EQ(c.source_speaker(), "spk_a");
  EXPECT_EQ(c.reference_speaker(), "spk_b");
  EXPECT_EQ(c.pairs.at("p1").source.utterance_id, "spk_a_p1");
  EXPECT_EQ(c.pairs.at("p1").source.transcript, "Hello there.");
  EXPECT_EQ(report.audio_paths.size(), 6u);
}

TEST_F(IngestTest, UnpairedPromptExcluded) {
  write_speaker(dir.path(), "spk_a", {"p1", "p2", "p3"});
  write_speaker(dir.path(), "spk_b", {"p1", "p2"});
  write_text(transcripts(), "p1\tone\np2\ttwo\np3\tthree\n");
  IngestReport report;
  const ParallelCorpus c = ingest_corpus(dir.path() / "spk_a", dir.path() / "spk_b", transcripts(), &report);
  EXPECT_EQ(c.pairs.size(), 2u);
  ASSERT_EQ(report.excluded.size(), 1u);
  EXPECT_EQ(report.excluded[0].prompt_id, "p3");
}

TEST_F(IngestTest, MissingTranscriptIsError) {
  write_speaker(dir.path(), "spk_a", {"p1", "p2"});
  write_speaker(dir.path(), "spk_b", {"p1", "p2"});
  write_text(transcripts(), "p1\tone\n");
  EXPECT_THROW(ingest_corpus(dir.path() / "spk_a", dir.path() / "spk_b", transcripts()), Error);
}

TEST_F(IngestTest, TranscriptMismatchNamesPrompt) {
  write_speaker(dir.path(), "spk_a", {"p1"});
  write_speaker(dir.path(), "spk_b", {"p1"});
  write_text(transcripts(), "spk_a\tp1\tthe cat\nspk_b\tp1\tthe dog\n");
  try {
    ingest_corpus(dir.path() / "spk_a", dir.path() / "spk_b", transcripts());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("p1"), std::string::npos);
  }
}

TEST_F(IngestTest, PerSpeakerTranscriptsEqualAfterNormalization) {
  write_speaker(dir.path(), "spk_a", {"p1"});
  write_speaker(dir.path(), "spk_b", {"p1"});
  write_text(transcripts(), "spk_a\tp1\tThe cat.\nspk_b\tp1\tthe  CAT\n");
  EXPECT_EQ(ingest_corpus(dir.path() / "spk_a", dir.path() / "spk_b", transcripts()).pairs.size(), 1u);
}

TEST_F(IngestTest, ResamplesNon16kAudio) {
  write_speaker(dir.path(), "spk_a", {"p1"}, 32000);
  write_speaker(dir.path(), "spk_b", {"p1"});
  write_text(transcripts(), "p1\tone\n");
  const ParallelCorpus c = ingest_corpus(dir.path() / "spk_a", dir.path() / "spk_b", transcripts());
  EXPECT_EQ(c.pairs.at("p1").source.sample_rate, 16000);
  EXPECT_EQ(c.pairs.at("p1").source.samples.size(), 800u);
}

TEST_F(IngestTest, FullSizeLayoutPairsEveryPrompt) {
  std::vector<std::string> prompts;
  std::string table;
  for (int i = 1; i <= 1132; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "arctic_%04d", i);
    prompts.push_back(id);
    table += std::string(id) + "\tprompt " + std::to_string(i) + "\n";
  }
  for (const char* spk : {"nonnative", "native"}) {
    fs::create_directories(dir.path() / spk);
    for (const auto& p : prompts) write_wav(dir.path() / spk / (p + ".wav"), {0.1, -0.1, 0.05}, 16000);
  }
  write_text(transcripts(), table);
  const ParallelCorpus c = ingest_corpus(dir.path() / "nonnative", dir.path() / "native", transcripts());
  EXPECT_EQ(c.pairs.size(), 1132u);
  const ParallelCorpus s = split_corpus(c, SplitSizes{}, 0);
  EXPECT_EQ(s.splits.train.size(), 1032u);
  EXPECT_EQ(s.splits.dev.size(), 50u);
  EXPECT_EQ(s.splits.test.size(), 50u);
  EXPECT_NO_THROW(s.validate());
}

Utterance tone_utterance(double hz, int rate, std::size_t n) {
  Utterance u;
  u.utterance_id = "u";
  u.sample_rate = rate;
  u.samples = sine(hz, rate, n);
  return u;
}

TEST(Resample, SameRateIsIdentity) {
  const Utterance u = tone_utterance(300, 16000, 1234);
  EXPECT_EQ(resample(u, 16000), u);
}

TEST(Resample, LengthFollowsRatio) {
  EXPECT_EQ(resample(tone_utterance(300, 32000, 32000), 16000).samples.size(), 16000u);
  EXPECT_EQ(resample(tone_utterance(300, 22050, 1001), 16000).samples.size(),
            static_cast<std::size_t>(std::llround(1001 * 16000.0 / 22050)));
}

TEST(Resample, Errors) {
  const Utterance u = tone_utterance(300, 16000, 100);
  EXPECT_THROW(resample(u, 0), Error);
  EXPECT_THROW(resample(u, -8000), Error);
  EXPECT_THROW(resample(tone_utterance(300, 4000, 100), 16000), Error);
}

TEST(Resample, PeakStaysAt440Hz) {
  const Utterance out = resample(tone_utterance(440, 48000, 48000), 16000);
  ASSERT_EQ(out.samples.size(), 16000u);
  // 1 s at 16 kHz gives 1 Hz bins; zero-pad to 4x for a finer grid.
  std::vector<double> padded(out.samples);
  padded.resize(4 * padded.size(), 0.0);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  std::size_t best = 1;
  for (std::size_t k = 1; k < padded.size() / 2; ++k) {
    if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
  }
  const double hz = static_cast<double>(best) * 16000.0 / static_cast<double>(padded.size());
  EXPECT_NEAR(hz, 440.0, 2.0);
}

TEST(Resample, IdempotentAtTargetRate) {
  const Utterance once = resample(tone_utterance(440, 44100, 4410), 16000);
  EXPECT_EQ(resample(once, 16000), once);
}

ParallelCorpus tiny_corpus(int n) {
  ParallelCorpus c;
  for (int i = 0; i < n; ++i) {
    const std::string p = "p" + std::to_string(100 + i);
    UtterancePair pair;
    pair.source = {"a_" + p, "a", p, 16000, {0.1, 0.2}, "text " + p};
    pair.reference = {"b_" + p, "b", p, 16000, {0.3, 0.4}, "text " + p};
    c.pairs.emplace(p, pair);
  }
  return c;
}

TEST(Split, DeterministicPartition) {
  const ParallelCorpus c = tiny_corpus(10);
  const ParallelCorpus a = split_corpus(c, {8, 1, 1}, 11);
  const ParallelCorpus b = split_corpus(c, {8, 1, 1}, 11);
  EXPECT_EQ(a.splits, b.splits);
  std::set<std::string> all;
  for (Split s : {Split::kTrain, Split::kDev, Split::kTest}) {
    for (const auto& id : a.splits.get(s)) EXPECT_TRUE(all.insert(id).second) << id;
  }
  EXPECT_EQ(all.size(), 10u);
  EXPECT_NO_THROW(a.validate());
}

TEST(Split, PureFunctionOfIdsSizesSeed) {
  // Same id set built in a different order and with different audio.
  ParallelCorpus c = tiny_corpus(12);
  ParallelCorpus d = tiny_corpus(12);
  for (auto& [_, pair] : d.pairs) pair.source.samples = {0.5};
  EXPECT_EQ(split_corpus(c, {6, 3, 3}, 2).splits, split_corpus(d, {6, 3, 3}, 2).splits);
  EXPECT_NE(split_corpus(c, {6, 3, 3}, 2).splits, split_corpus(c, {6, 3, 3}, 3).splits);
}

TEST(Split, OversizedRequestIsError) {
  EXPECT_THROW(split_corpus(tiny_corpus(5), {4, 1, 1}, 0), Error);
}

TEST(Split, UnassignedPairsDropped) {
  const ParallelCorpus s = split_corpus(tiny_corpus(10), {5, 1, 1}, 0);
  EXPECT_EQ(s.pairs.size(), 7u);
}

TEST(Corpus, ValidateRejectsBrokenInvariants) {
  ParallelCorpus c = split_corpus(tiny_corpus(4), {2, 1, 1}, 0);
  ParallelCorpus same_speaker = c;
  for (auto& [_, pair] : same_speaker.pairs) pair.reference.speaker_id = "a";
  EXPECT_THROW(same_speaker.validate(), Error);
  ParallelCorpus overlap = c;
  overlap.splits.dev.push_back(overlap.splits.train.front());
  EXPECT_THROW(overlap.validate(), Error);
  ParallelCorpus mismatch = c;
  mismatch.pairs.begin()->second.reference.transcript = "other words";
  EXPECT_THROW(mismatch.validate(), Error);
}

TEST(Manifest, ExportReadRoundTrip) {
  ToyCorpusConfig cfg;
  cfg.n_prompts = 6;
  cfg.splits = {4, 1, 1};
  const ParallelCorpus c = generate_toy_corpus(cfg).corpus;
  TempDir dir;
  const ParallelCorpus once = read_manifest(export_corpus(c, dir.path() / "one"));
  EXPECT_EQ(once.splits, c.splits);
  ASSERT_EQ(once.pairs.size(), c.pairs.size());
  for (const auto& [prompt, pair] : c.pairs) {
    const UtterancePair& r = once.pairs.at(prompt);
    EXPECT_EQ(r.source.utterance_id, pair.source.utterance_id);
    EXPECT_EQ(r.reference.transcript, pair.reference.transcript);
    ASSERT_EQ(r.source.samples.size(), pair.source.samples.size());
    for (std::size_t i = 0; i < pair.source.samples.size(); ++i) {
      ASSERT_NEAR(r.source.samples[i], pair.source.samples[i], 1.0 / 32767);
    }
  }
  // Once quantized, the round trip is exact.
  const ParallelCorpus twice = read_manifest(export_corpus(once, dir.path() / "two"));
  EXPECT_EQ(twice, once);
  EXPECT_EQ(twice.content_hash(), once.content_hash());
}

TEST(Manifest, LinesCarryRequiredKeys) {
  ToyCorpusConfig cfg;
  cfg.n_prompts = 3;
  cfg.splits = {1, 1, 1};
  TempDir dir;
  const fs::path m = export_corpus(generate_toy_corpus(cfg).corpus, dir.path());
  std::ifstream in(m);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    for (const char* key : {"utterance_id", "speaker_id", "prompt_id", "path", "transcript", "split"}) {
      EXPECT_NE(line.find(std::string("\"") + key + "\""), std::string::npos) << key;
    }
  }
  EXPECT_EQ(n, 6);
}

TEST(ToyCorpus, DeterministicAndSplit) {
  ToyCorpusConfig cfg;
  cfg.n_prompts = 8;
  cfg.splits = {6, 1, 1};
  const ToyCorpus a = generate_toy_corpus(cfg);
  const ToyCorpus b = generate_toy_corpus(cfg);
  EXPECT_EQ(a.corpus, b.corpus);
  EXPECT_EQ(a.corpus.splits.train.size(), 6u);
  const auto& pair = a.corpus.pairs.begin()->second;
  // The non-native side is stretched in time.
  EXPECT_GT(pair.source.samples.size(), pair.reference.samples.size());
  EXPECT_EQ(a.segments.size(), 16u);
}

}  // namespace
}  // namespace fac
