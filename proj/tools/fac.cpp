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


// fac: command-line entry point.
//   prepare   ingest and split a parallel corpus, or generate the toy corpus
//   extract   build a latent extractor and optionally dump latents
//   train     a2o | cascade | stg | lsc
//   convert   run a trained method bundle on one WAV file
//   eval      CER/WER via an ASR adapter, rating aggregation, reports
//   sessions  build a blind sample manifest and listening sessions
//   serve     run the rating service
//   export    ratings log to CSV

#include <cstdio>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "fac/audio.hpp"
#include "fac/corpus.hpp"
#include "fac/evaluation.hpp"
#include "fac/extractors.hpp"
#include "fac/frame_vc.hpp"
#include "fac/pipelines.hpp"
#include "fac/rating_store.hpp"
#include "fac/server.hpp"
#include "fac/sessions.hpp"
#include "fac/toy_corpus.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Random seed (overrides the config)");
}

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw fac::IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw fac::Error(path.string() + ": " + e.what());
  }
}

json config_section(const Common& c, const std::string& key) {
  if (c.config.empty()) return json::object();
  const json j = load_json(c.config);
  return j.contains(key) ? j.at(key) : json::object();
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw fac::IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fac::AnalysisConfig analysis_from(const Common& c) {
  const json j = config_section(c, "analysis");
  return j.empty() ? fac::AnalysisConfig{} : fac::analysis_config_from_json(j);
}

fac::Utterance read_utterance(const fs::path& wav) {
  fac::WavData w = fac::read_wav(wav);
  fac::Utterance u;
  u.utterance_id = wav.stem().string();
  u.sample_rate = w.sample_rate;
  u.samples = std::move(w.samples);
  return u;
}

std::vector<fac::Utterance> source_utterances(const fac::ParallelCorpus& corpus, fac::Split split) {
  std::vector<fac::Utterance> out;
  for (const auto* p : corpus.pairs_in(split)) out.push_back(p->source);
  return out;
}

// ---------------------------------------------------------------------------

struct PrepareArgs {
  Common common;
  std::string source_dir, reference_dir, transcripts, out;
  bool toy = false;
  std::size_t train = 1032, dev = 50, test = 50;
};

int run_prepare(const PrepareArgs& a) {
  const fs::path out(a.out);
  fac::ParallelCorpus corpus;
  if (a.toy) {
    fac::ToyCorpusConfig cfg;
    const json j = config_section(a.common, "toy_corpus");
    cfg.n_prompts = j.value("n_prompts", cfg.n_prompts);
    cfg.source_stretch = j.value("source_stretch", cfg.source_stretch);
    cfg.source_freq_scale = j.value("source_freq_scale", cfg.source_freq_scale);
    cfg.splits = {j.value("train", cfg.splits.train), j.value("dev", cfg.splits.dev),
                  j.value("test", cfg.splits.test)};
    if (a.common.seed) cfg.seed = *a.common.seed;
    const fac::ToyCorpus toy = fac::generate_toy_corpus(cfg);
    fac::write_toy_corpus(toy, out / "raw");
    corpus = toy.corpus;
  } else {
    if (a.source_dir.empty() || a.reference_dir.empty() || a.transcripts.empty()) {
      throw fac::Error("prepare needs --source-dir, --reference-dir and --transcripts (or --toy)");
    }
    fac::IngestReport report;
    corpus = fac::ingest_corpus(a.source_dir, a.reference_dir, a.transcripts, &report);
    for (const auto& e : report.excluded) std::cerr << "excluded " << e.prompt_id << ": " << e.reason << "\n";
    corpus = fac::split_corpus(corpus, {a.train, a.dev, a.test}, a.common.seed.value_or(0));
  }
  const fs::path manifest = fac::export_corpus(corpus, out);
  std::cout << "wrote " << corpus.pairs.size() << " pairs (" << corpus.splits.train.size() << "/"
            << corpus.splits.dev.size() << "/" << corpus.splits.test.size() << ") to " << manifest.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ExtractArgs {
  Common common;
  std::string corpus, kind = "toy-ppg", segments, out, command, dump_dir, id;
  int k = 32;
  int dim = 0;
  double period_ms = 0.0;
  bool posteriors = false;
};

int run_extract(const ExtractArgs& a) {
  const fac::AnalysisConfig analysis = analysis_from(a.common);
  const std::uint64_t seed = a.common.seed.value_or(1);
  fac::ExtractorPtr ext;
  std::optional<fac::ParallelCorpus> corpus;
  if (!a.corpus.empty()) corpus = fac::read_manifest(a.corpus);
  if (a.kind == "identity") {
    ext = std::make_shared<fac::IdentityExtractor>(analysis);
  } else if (a.kind == "toy-ppg") {
    if (!corpus || a.segments.empty()) throw fac::Error("toy-ppg needs --corpus and --segments");
    const auto segments = fac::read_segments(a.segments);
    fac::ToyPpgConfig cfg;
    const json j = config_section(a.common, "toy_ppg");
    cfg.hidden = j.value("hidden", cfg.hidden);
    cfg.steps = j.value("steps", cfg.steps);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.seed = seed;
    if (!a.id.empty()) cfg.extractor_id = a.id;
    ext = fac::train_toy_ppg(*corpus, segments, fac::kToyPhoneTypes + 1, analysis, cfg);
  } else if (a.kind == "toy-vq") {
    if (!corpus) throw fac::Error("toy-vq needs --corpus");
    fac::ToyQuantizedConfig cfg;
    if (!a.id.empty()) cfg.extractor_id = a.id;
    ext = fac::train_toy_quantized(*corpus, a.k, seed, analysis, cfg);
  } else if (a.kind == "external") {
    if (a.command.empty() || a.id.empty() || a.dim < 1 || a.period_ms <= 0.0) {
      throw fac::Error("external extractor needs --id, --command, --dim and --period-ms");
    }
    auto e = std::make_shared<fac::ExternalExtractor>(a.id, a.command, a.dim, a.period_ms);
    e->set_produces_posteriors(a.posteriors);
    ext = e;
  } else {
    throw fac::Error("unknown extractor kind '" + a.kind + "' (identity, toy-ppg, toy-vq, external)");
  }
  if (!a.out.empty()) {
    fac::save_extractor(*ext, a.out);
    std::cout << "saved extractor '" << ext->extractor_id() << "' (dim " << ext->dim() << ") to " << a.out << "\n";
  }
  if (!a.dump_dir.empty()) {
    if (!corpus) throw fac::Error("--dump needs --corpus");
    fs::create_directories(a.dump_dir);
    for (const auto& [prompt, pair] : corpus->pairs) {
      for (const fac::Utterance* u : {&pair.source, &pair.reference}) {
        const fac::LatentSequence l = ext->extract(*u);
        fac::write_matrix_dump(fs::path(a.dump_dir) / u->utterance_id, l.values,
                               {{"extractor_id", l.extractor_id}, {"frame_period_ms", l.frame_period_ms}});
      }
    }
    std::cout << "dumped latents for " << 2 * corpus->pairs.size() << " utterances to " << a.dump_dir << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string method, corpus, extractor, frame_vc, out, pretrained;
};

int run_train(const TrainArgs& a) {
  const fac::ParallelCorpus corpus = fac::read_manifest(a.corpus);
  if (a.method == "a2o") {
    if (a.extractor.empty()) throw fac::Error("train a2o needs --extractor");
    const fac::ExtractorPtr ext = fac::load_extractor(a.extractor);
    fac::FrameVCConfig cfg = fac::frame_vc_config_from_json(config_section(a.common, "frame_vc"));
    if (a.common.seed) cfg.seed = *a.common.seed;
    fac::FrameVCTrainLog log;
    const auto train = source_utterances(corpus, fac::Split::kTrain);
    const fac::FrameVCModel model = fac::train_frame_decoder(train, *ext, cfg, &log);
    model.save(a.out);
    std::cout << "frame_vc: loss " << log.loss.front() << " -> " << log.loss.back() << ", hash "
              << model.parameter_hash() << ", saved to " << a.out << "\n";
    return 0;
  }

  if (a.frame_vc.empty()) throw fac::Error("train " + a.method + " needs --frame-vc");
  const fac::FrameVCModel frame_vc = fac::FrameVCModel::load(a.frame_vc);
  fac::PipelineConfig cfg = fac::pipeline_config_from_json(config_section(a.common, "pipeline"));
  if (a.common.seed) {
    cfg.seq2seq.seed = *a.common.seed;
    cfg.train.seed = *a.common.seed;
  }
  std::optional<fac::nn::Checkpoint> pretrained;
  if (!a.pretrained.empty()) pretrained = fac::nn::load_checkpoint(a.pretrained);
  const fac::nn::Checkpoint* pre = pretrained ? &*pretrained : nullptr;

  fac::ExtractorRegistry extractors;
  fac::ExtractorPtr ext;
  if (!a.extractor.empty()) {
    ext = fac::load_extractor(a.extractor);
    extractors.add(ext);
  }
  const std::string before = frame_vc.parameter_hash();
  fac::MethodBundle bundle;
  const fac::Method method = fac::parse_method(a.method);
  switch (method) {
    case fac::Method::kCascade:
      bundle = fac::train_cascade(corpus, frame_vc, cfg, pre);
      break;
    case fac::Method::kStg:
      bundle = fac::train_stg(corpus, frame_vc, extractors, cfg, pre);
      break;
    case fac::Method::kLsc:
      bundle = fac::train_lsc(corpus, frame_vc, extractors, cfg, pre);
      break;
  }
  if (frame_vc.parameter_hash() != before) throw fac::Error("frame_vc parameters changed during training");
  if (method != fac::Method::kStg && !ext) throw fac::Error("train " + a.method + " needs --extractor");
  fac::save_bundle(bundle, a.out, method == fac::Method::kStg ? nullptr : &frame_vc,
                   method == fac::Method::kStg ? nullptr : ext.get());
  std::cout << a.method << ": teacher-forced L1 " << bundle.provenance.value("initial_l1", 0.0) << " -> "
            << bundle.provenance.value("final_l1", 0.0) << ", bundle " << bundle.bundle_id() << " saved to "
            << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ConvertArgs {
  Common common;
  std::string bundle, input, output, dump_dir, vocoder_id, vocoder_command;
};

int run_convert(const ConvertArgs& a) {
  fac::VocoderRegistry vocoders = fac::VocoderRegistry::with_defaults();
  if (!a.vocoder_command.empty()) {
    if (a.vocoder_id.empty()) throw fac::Error("--vocoder-command needs --vocoder-id");
    vocoders.add(std::make_shared<fac::CommandVocoder>(a.vocoder_id, a.vocoder_command));
  }
  fac::ConvertOptions opts;
  opts.dump_dir = a.dump_dir;
  const fac::ConversionResult r = fac::convert_bundle(a.bundle, read_utterance(a.input), vocoders, opts);
  fac::write_wav(a.output, r.output.samples, r.output.sample_rate);
  for (const auto& t : r.trace) std::cout << t << "\n";
  if (!r.stopped_naturally) std::cerr << "warning: decoding hit the frame limit before the stop token\n";
  std::cout << "wrote " << r.output.samples.size() << " samples to " << a.output << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string ratings, samples, transcripts, asr_command, asr_host, asr_path = "/transcribe", out, table_out;
  int asr_port = 0;
  int parallel = 1;
  bool reference = false;
};

std::unique_ptr<fac::AsrClient> make_asr(const EvalArgs& a) {
  if (!a.asr_command.empty()) return std::make_unique<fac::CommandAsrClient>("command", a.asr_command);
  if (!a.asr_host.empty()) return std::make_unique<fac::HttpAsrClient>("http", a.asr_host, a.asr_port, a.asr_path);
  return nullptr;
}

int run_eval(const EvalArgs& a) {
  json out = json::object();
  if (a.reference) {
    const fac::ReferenceTable table = fac::load_reference_table();
    const fac::CorrelationReport c = fac::correlation_report(table);
    out["reference"] = {{"version", table.version},
                        {"accentedness_vs_cer", c.accentedness_vs_cer},
                        {"accentedness_vs_wer", c.accentedness_vs_wer},
                        {"points", c.points}};
    std::printf("reference table v%s: r(accentedness, CER) = %.3f, r(accentedness, WER) = %.3f over %zu systems\n",
                table.version.c_str(), c.accentedness_vs_cer, c.accentedness_vs_wer, c.points);
  }

  std::map<std::string, fac::SystemScore> objective;
  if (auto asr = make_asr(a)) {
    if (a.samples.empty() || a.transcripts.empty()) throw fac::Error("ASR scoring needs --samples and --transcripts");
    const fac::SampleManifest manifest = fac::load_manifest(a.samples);
    const fac::TranscriptTable table = fac::read_transcript_table(a.transcripts);
    std::map<std::string, std::vector<fac::ScoredInput>> by_system;
    for (const auto& s : manifest.samples) {
      if (!s.rateable) continue;
      const std::string* ref = table.find("", s.prompt_id);
      if (!ref) throw fac::Error("no transcript for prompt '" + s.prompt_id + "'");
      fac::Utterance u = read_utterance(s.audio);
      u.utterance_id = s.sample_id;
      by_system[s.system_id].push_back({std::move(u), *ref});
    }
    for (const auto& [system, inputs] : by_system) {
      objective[system] = fac::score_system(inputs, *asr, a.parallel);
      for (const auto& e : objective[system].exclusions) {
        std::cerr << system << ": excluded " << e.utterance_id << ": " << e.reason << "\n";
      }
    }
  }

  std::vector<fac::RatingRecord> records;
  if (!a.ratings.empty()) records = fac::read_ratings_csv(fs::path(a.ratings));
  if (!records.empty() || !objective.empty()) {
    const fac::EvalReport report = fac::build_report(records, objective);
    out["report"] = fac::to_json(report);
    const std::string table = fac::render_table(report);
    std::cout << table;
    if (!a.table_out.empty()) {
      std::ofstream t(a.table_out);
      t << table;
    }
  }
  if (!a.out.empty()) write_json(a.out, out);
  return 0;
}

// ---------------------------------------------------------------------------

struct SessionsArgs {
  Common common;
  std::vector<std::string> systems;
  std::string pair_system, samples, manifest_out, out;
  std::string axes = "naturalness";
  int listeners = 65;
  int per_listener = 20;
};

int run_sessions(const SessionsArgs& a) {
  const std::uint64_t seed = a.common.seed.value_or(0);
  fac::SampleManifest manifest;
  if (!a.systems.empty()) {
    // SYSTEM=DIR: every WAV in DIR is a sample of SYSTEM, prompt id = stem.
    std::map<std::string, std::map<std::string, std::string>> by_system_prompt;
    for (const auto& spec : a.systems) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos) throw fac::Error("--system expects SYSTEM=DIR, got '" + spec + "'");
      const std::string system = spec.substr(0, eq);
      std::vector<fs::path> wavs;
      for (const auto& e : fs::directory_iterator(spec.substr(eq + 1))) {
        if (e.path().extension() == ".wav") wavs.push_back(fs::absolute(e.path()));
      }
      std::sort(wavs.begin(), wavs.end());
      for (const auto& w : wavs) {
        fac::TestSample s;
        s.system_id = system;
        s.audio = w;
        s.prompt_id = w.stem().string();
        s.sample_id = fac::opaque_sample_id(system, w.string(), seed);
        by_system_prompt[system][s.prompt_id] = s.sample_id;
        manifest.samples.push_back(std::move(s));
      }
    }
    if (!a.pair_system.empty()) {
      const auto it = by_system_prompt.find(a.pair_system);
      if (it == by_system_prompt.end()) throw fac::Error("--pair-system '" + a.pair_system + "' not among --system");
      for (auto& s : manifest.samples) {
        if (s.system_id == a.pair_system) continue;
        if (auto p = it->second.find(s.prompt_id); p != it->second.end()) s.pair_sample_id = p->second;
      }
    }
    // Listeners never learn which file is which.
    std::sort(manifest.samples.begin(), manifest.samples.end(),
              [](const fac::TestSample& x, const fac::TestSample& y) { return x.sample_id < y.sample_id; });
    manifest.validate();
    const fs::path mpath = a.manifest_out.empty() ? fs::path(a.out).parent_path() / "samples.json" : fs::path(a.manifest_out);
    fac::save_manifest(manifest, mpath);
    std::cout << "wrote sample manifest with " << manifest.samples.size() << " samples to " << mpath.string() << "\n";
  } else if (!a.samples.empty()) {
    manifest = fac::load_manifest(a.samples);
  } else {
    throw fac::Error("sessions needs --system SYSTEM=DIR entries or --samples");
  }
  std::vector<fac::Axis> axes;
  for (const auto& name : fac::split(a.axes, ',')) axes.push_back(fac::parse_axis(name));
  const auto sessions = fac::build_sessions(manifest, a.listeners, a.per_listener, seed, axes);
  write_json(a.out, fac::to_json(sessions));
  std::cout << "wrote " << sessions.size() << " sessions to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
  Common common;
  std::string samples, sessions, store, host = "127.0.0.1", static_dir;
  int port = 8080;
};

fac::RatingServer* g_server = nullptr;

int run_serve(const ServeArgs& a) {
  fac::RatingStore store(a.store);
  fac::RatingServer server(fac::load_manifest(a.samples), fac::sessions_from_json(load_json(a.sessions)), store,
                           a.static_dir);
  const int port = server.bind(a.host, a.port);
  std::cout << "listening on http://" << a.host << ":" << port << " (" << store.size() << " ratings loaded)"
            << std::endl;
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  server.run();
  g_server = nullptr;
  return 0;
}

struct ExportArgs {
  Common common;
  std::string store, out;
};

int run_export(const ExportArgs& a) {
  if (!fs::exists(a.store)) throw fac::IoError("rating log " + a.store + " does not exist");
  const fac::RatingStore store(a.store);
  if (a.out.empty() || a.out == "-") {
    std::cout << store.export_csv();
  } else {
    std::ofstream out(a.out);
    if (!out) throw fac::IoError("cannot write " + a.out);
    out << store.export_csv();
    std::cerr << "exported " << store.size() << " ratings to " << a.out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Foreign accent conversion toolkit"};
  app.require_subcommand(1);

  PrepareArgs prepare;
  auto* p = app.add_subcommand("prepare", "Ingest and split a parallel corpus, or generate the toy corpus");
  add_common(p, prepare.common);
  p->add_option("--source-dir", prepare.source_dir, "Non-native speaker recordings");
  p->add_option("--reference-dir", prepare.reference_dir, "Native reference recordings");
  p->add_option("--transcripts", prepare.transcripts, "Transcript table (TSV)");
  p->add_flag("--toy", prepare.toy, "Generate the synthetic toy corpus instead");
  p->add_option("--train", prepare.train, "Training pairs");
  p->add_option("--dev", prepare.dev, "Development pairs");
  p->add_option("--test", prepare.test, "Test pairs");
  p->add_option("--out", prepare.out, "Output directory")->required();

  ExtractArgs extract;
  auto* e = app.add_subcommand("extract", "Build a latent extractor; optionally dump latents");
  add_common(e, extract.common);
  e->add_option("--corpus", extract.corpus, "Corpus manifest (manifest.jsonl)");
  e->add_option("--kind", extract.kind, "identity | toy-ppg | toy-vq | external");
  e->add_option("--segments", extract.segments, "Phone segments (segments.jsonl) for toy-ppg");
  e->add_option("--k", extract.k, "Codebook size for toy-vq");
  e->add_option("--id", extract.id, "Extractor id");
  e->add_option("--command", extract.command, "External command with {wav} and {out}");
  e->add_option("--dim", extract.dim, "External latent dimension");
  e->add_option("--period-ms", extract.period_ms, "External frame period");
  e->add_flag("--posteriors", extract.posteriors, "External rows are probability vectors");
  e->add_option("--out", extract.out, "Extractor checkpoint to write");
  e->add_option("--dump", extract.dump_dir, "Directory for per-utterance latent dumps");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train the frame-based model (a2o) or a conversion method");
  add_common(t, train.common);
  t->add_option("method", train.method, "a2o | cascade | stg | lsc")
      ->required()
      ->check(CLI::IsMember({"a2o", "cascade", "stg", "lsc"}));
  t->add_option("--corpus", train.corpus, "Corpus manifest")->required();
  t->add_option("--extractor", train.extractor, "Extractor checkpoint");
  t->add_option("--frame-vc", train.frame_vc, "Frame-based model checkpoint");
  t->add_option("--pretrained", train.pretrained, "Seq2seq checkpoint to initialize from");
  t->add_option("--out", train.out, "Output checkpoint (a2o) or bundle directory")->required();

  ConvertArgs convert;
  auto* c = app.add_subcommand("convert", "Convert one WAV file with a trained bundle");
  add_common(c, convert.common);
  c->add_option("--bundle", convert.bundle, "Bundle directory")->required();
  c->add_option("--input", convert.input, "Input WAV")->required()->check(CLI::ExistingFile);
  c->add_option("--output", convert.output, "Output WAV")->required();
  c->add_option("--dump-intermediates", convert.dump_dir, "Directory for per-stage dumps");
  c->add_option("--vocoder-id", convert.vocoder_id, "Id for --vocoder-command");
  c->add_option("--vocoder-command", convert.vocoder_command, "External vocoder with {mel} and {wav}");

  EvalArgs eval;
  auto* v = app.add_subcommand("eval", "Objective and subjective evaluation");
  add_common(v, eval.common);
  v->add_option("--ratings", eval.ratings, "Ratings CSV");
  v->add_option("--samples", eval.samples, "Sample manifest for ASR scoring");
  v->add_option("--transcripts", eval.transcripts, "Reference transcripts (TSV, by prompt id)");
  v->add_option("--asr-command", eval.asr_command, "ASR command with {wav}; prints the transcript");
  v->add_option("--asr-host", eval.asr_host, "ASR HTTP host");
  v->add_option("--asr-port", eval.asr_port, "ASR HTTP port");
  v->add_option("--asr-path", eval.asr_path, "ASR HTTP path");
  v->add_option("--parallel", eval.parallel, "Concurrent ASR requests");
  v->add_flag("--reference", eval.reference, "Report correlations over the bundled reference scores");
  v->add_option("--out", eval.out, "Report JSON");
  v->add_option("--table", eval.table_out, "Rendered table");

  SessionsArgs sessions;
  auto* s = app.add_subcommand("sessions", "Build a blind sample manifest and listener sessions");
  add_common(s, sessions.common);
  s->add_option("--system", sessions.systems, "SYSTEM=DIR of WAV files (repeatable)");
  s->add_option("--pair-system", sessions.pair_system, "System whose same-prompt samples pair for similarity");
  s->add_option("--samples", sessions.samples, "Existing sample manifest");
  s->add_option("--manifest-out", sessions.manifest_out, "Where to write the sample manifest");
  s->add_option("--listeners", sessions.listeners, "Number of listeners");
  s->add_option("--per-listener", sessions.per_listener, "Samples per listener and axis");
  s->add_option("--axes", sessions.axes, "Comma-separated axes");
  s->add_option("--out", sessions.out, "Sessions JSON")->required();

  ServeArgs serve;
  auto* r = app.add_subcommand("serve", "Run the rating service");
  add_common(r, serve.common);
  r->add_option("--samples", serve.samples, "Sample manifest")->required()->check(CLI::ExistingFile);
  r->add_option("--sessions", serve.sessions, "Sessions JSON")->required()->check(CLI::ExistingFile);
  r->add_option("--store", serve.store, "Rating log (JSON lines)")->required();
  r->add_option("--host", serve.host, "Bind address");
  r->add_option("--port", serve.port, "Port (0 picks a free one)");
  r->add_option("--static", serve.static_dir, "Directory served at /");

  ExportArgs exp;
  auto* x = app.add_subcommand("export", "Export the rating log as CSV");
  add_common(x, exp.common);
  x->add_option("--store", exp.store, "Rating log")->required();
  x->add_option("--out", exp.out, "CSV path (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*p) return run_prepare(prepare);
    if (*e) return run_extract(extract);
    if (*t) return run_train(train);
    if (*c) return run_convert(convert);
    if (*v) return run_eval(eval);
    if (*s) return run_sessions(sessions);
    if (*r) return run_serve(serve);
    if (*x) return run_export(exp);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
