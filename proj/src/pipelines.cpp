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

#include "fac/pipelines.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace fac {

namespace fs = std::filesystem;
using nlohmann::json;

const char* method_name(Method m) {
  switch (m) {
    case Method::kCascade: return "cascade";
    case Method::kStg: return "stg";
    case Method::kLsc: return "lsc";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  const std::string n = to_lower(name);
  if (n == "cascade") return Method::kCascade;
  if (n == "stg") return Method::kStg;
  if (n == "lsc") return Method::kLsc;
  throw Error("unknown method '" + name + "' (expected cascade, stg or lsc)");
}

const char* stage_name(StageKind k) {
  switch (k) {
    case StageKind::kSeq2seq: return "seq2seq";
    case StageKind::kExtractor: return "extractor";
    case StageKind::kFrameDecoder: return "frame_decoder";
    case StageKind::kVocoder: return "vocoder";
  }
  return "?";
}

namespace {

StageKind parse_stage(const std::string& s) {
  for (StageKind k : {StageKind::kSeq2seq, StageKind::kExtractor, StageKind::kFrameDecoder,
                      StageKind::kVocoder}) {
    if (s == stage_name(k)) return k;
  }
  throw Error("unknown stage kind '" + s + "'");
}

std::string mel_space(int n_mels) { return "mel:" + std::to_string(n_mels); }
std::string latent_space(const std::string& id, int dim) {
  return "latent:" + id + ":" + std::to_string(dim);
}
const std::string kWave = "wave";

json row_json(const RowVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

RowVector row_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  RowVector r(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) r(static_cast<Eigen::Index>(i)) = v[i];
  return r;
}

void column_stats(const std::vector<const Matrix*>& parts, RowVector& mean, RowVector& std) {
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front()->cols();
  RowVector sum = RowVector::Zero(cols);
  for (const Matrix* m : parts) {
    sum += m->colwise().sum();
    rows += m->rows();
  }
  mean = sum / static_cast<double>(rows);
  RowVector sq = RowVector::Zero(cols);
  for (const Matrix* m : parts) sq += (m->rowwise() - mean).array().square().matrix().colwise().sum();
  std = (sq / static_cast<double>(rows)).array().sqrt().matrix().cwiseMax(1e-3);
}

}  // namespace

std::vector<StageKind> expected_stages(Method m) {
  switch (m) {
    case Method::kCascade:
      return {StageKind::kSeq2seq, StageKind::kExtractor, StageKind::kFrameDecoder, StageKind::kVocoder};
    case Method::kStg:
      return {StageKind::kSeq2seq, StageKind::kVocoder};
    case Method::kLsc:
      return {StageKind::kExtractor, StageKind::kSeq2seq, StageKind::kFrameDecoder, StageKind::kVocoder};
  }
  return {};
}

std::vector<StageKind> ConversionGraph::kinds() const {
  std::vector<StageKind> out;
  for (const auto& s : stages) out.push_back(s.kind);
  return out;
}

void ConversionGraph::validate() const {
  if (kinds() != expected_stages(method)) {
    throw Error(std::string("conversion graph does not match the ") + method_name(method) + " stage order");
  }
  for (std::size_t i = 0; i + 1 < stages.size(); ++i) {
    const std::string& out = stages[i].output_space;
    const std::string& in = stages[i + 1].input_space;
    const bool ok = out == in || (in == kWave && out.rfind("mel:", 0) == 0);
    if (!ok) {
      throw Error(std::string("stage '") + stage_name(stages[i].kind) + "' produces " + out + " but '" +
                  stage_name(stages[i + 1].kind) + "' expects " + in);
    }
  }
}

json to_json(const ConversionGraph& g) {
  json stages = json::array();
  for (const auto& s : g.stages) {
    stages.push_back({{"kind", stage_name(s.kind)}, {"model", s.model}, {"input", s.input_space},
                      {"output", s.output_space}});
  }
  return {{"method", method_name(g.method)}, {"stages", stages}};
}

ConversionGraph conversion_graph_from_json(const json& j) {
  ConversionGraph g;
  g.method = parse_method(j.at("method").get<std::string>());
  for (const auto& s : j.at("stages")) {
    g.stages.push_back({parse_stage(s.at("kind").get<std::string>()), s.at("model").get<std::string>(),
                        s.at("input").get<std::string>(), s.at("output").get<std::string>()});
  }
  g.validate();
  return g;
}

// ---------------------------------------------------------------------------
// Normalization

Matrix FeatureNorm::input(const Matrix& m) const {
  if (!enabled) return m;
  return ((m.rowwise() - in_mean).array().rowwise() / in_std.array()).matrix();
}

Matrix FeatureNorm::target(const Matrix& m) const {
  if (!enabled) return m;
  return ((m.rowwise() - out_mean).array().rowwise() / out_std.array()).matrix();
}

Matrix FeatureNorm::output(const Matrix& m) const {
  if (!enabled) return m;
  return ((m.array().rowwise() * out_std.array()).rowwise() + out_mean.array()).matrix();
}

FeatureNorm fit_feature_norm(const std::vector<TrainingPair>& pairs) {
  if (pairs.empty()) throw Error("fit_feature_norm: no pairs");
  std::vector<const Matrix*> in, out;
  for (const auto& p : pairs) {
    in.push_back(&p.input);
    out.push_back(&p.target);
  }
  FeatureNorm n;
  n.enabled = true;
  column_stats(in, n.in_mean, n.in_std);
  column_stats(out, n.out_mean, n.out_std);
  return n;
}

json to_json(const FeatureNorm& n) {
  if (!n.enabled) return {{"enabled", false}};
  return {{"enabled", true},
          {"in_mean", row_json(n.in_mean)},
          {"in_std", row_json(n.in_std)},
          {"out_mean", row_json(n.out_mean)},
          {"out_std", row_json(n.out_std)}};
}

FeatureNorm feature_norm_from_json(const json& j) {
  FeatureNorm n;
  n.enabled = j.value("enabled", false);
  if (n.enabled) {
    n.in_mean = row_from_json(j.at("in_mean"));
    n.in_std = row_from_json(j.at("in_std"));
    n.out_mean = row_from_json(j.at("out_mean"));
    n.out_std = row_from_json(j.at("out_std"));
  }
  return n;
}

// ---------------------------------------------------------------------------
// Configuration

PipelineConfig toy_pipeline_config() {
  PipelineConfig c;
  c.seq2seq.model_dim = 96;
  c.seq2seq.position_dim = 16;
  c.seq2seq.ffn_dim = 192;
  c.seq2seq.prenet_dim = 96;
  c.train.steps = 2000;
  c.train.batch_size = 10;
  c.train.adam.learning_rate = 3e-3;
  c.train.adam.final_lr_fraction = 0.05;
  return c;
}

json to_json(const PipelineConfig& c) {
  return {{"seq2seq", to_json(c.seq2seq)},
          {"train",
           {{"steps", c.train.steps},
            {"batch_size", c.train.batch_size},
            {"seed", c.train.seed},
            {"learning_rate", c.train.adam.learning_rate},
            {"final_lr_fraction", c.train.adam.final_lr_fraction},
            {"clip_norm", c.train.adam.clip_norm}}},
          {"normalize", c.normalize},
          {"max_frames_factor", c.max_frames_factor},
          {"stop_threshold", c.stop_threshold},
          {"vocoder", c.vocoder_id}};
}

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c = toy_pipeline_config();
  if (j.contains("seq2seq")) {
    json merged = to_json(c.seq2seq);
    merged.update(j.at("seq2seq"));
    c.seq2seq = seq2seq_config_from_json(merged);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    c.train.steps = t.value("steps", c.train.steps);
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.seed = t.value("seed", c.train.seed);
    c.train.adam.learning_rate = t.value("learning_rate", c.train.adam.learning_rate);
    c.train.adam.final_lr_fraction = t.value("final_lr_fraction", c.train.adam.final_lr_fraction);
    c.train.adam.clip_norm = t.value("clip_norm", c.train.adam.clip_norm);
  }
  c.normalize = j.value("normalize", c.normalize);
  c.max_frames_factor = j.value("max_frames_factor", c.max_frames_factor);
  c.stop_threshold = j.value("stop_threshold", c.stop_threshold);
  c.vocoder_id = j.value("vocoder", c.vocoder_id);
  return c;
}

std::string MethodBundle::bundle_id() const {
  Fnv1a h;
  h.update(std::string(method_name(method)));
  h.update(provenance.dump());
  return h.hex();
}

// ---------------------------------------------------------------------------
// Training data

namespace {

std::vector<const UtterancePair*> train_pairs(const ParallelCorpus& corpus) {
  auto pairs = corpus.pairs_in(Split::kTrain);
  if (pairs.empty()) throw Error("the corpus train split is empty");
  return pairs;
}

}  // namespace

std::vector<TrainingPair> cascade_pairs(const ParallelCorpus& corpus, const AnalysisConfig& analysis) {
  std::vector<TrainingPair> out;
  for (const auto* p : train_pairs(corpus)) {
    out.push_back({mel_analyze(p->source, analysis).values, mel_analyze(p->reference, analysis).values});
  }
  return out;
}

std::vector<MelSpectrogram> generate_synthetic_targets(const FrameVCModel& frame_vc,
                                                       const ExtractorRegistry& extractors,
                                                       const std::vector<Utterance>& native) {
  std::vector<MelSpectrogram> out;
  out.reserve(native.size());
  for (const auto& u : native) out.push_back(convert_a2o(frame_vc, u, extractors));
  return out;
}

std::vector<TrainingPair> stg_pairs(const ParallelCorpus& corpus, const FrameVCModel& frame_vc,
                                    const ExtractorRegistry& extractors) {
  const auto pairs = train_pairs(corpus);
  std::vector<Utterance> native;
  for (const auto* p : pairs) native.push_back(p->reference);
  const auto targets = generate_synthetic_targets(frame_vc, extractors, native);
  std::vector<TrainingPair> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out.push_back({mel_analyze(pairs[i]->source, frame_vc.analysis()).values, targets[i].values});
  }
  return out;
}

std::vector<TrainingPair> lsc_pairs(const ParallelCorpus& corpus, const ExtractorBackend& extractor) {
  std::vector<TrainingPair> out;
  for (const auto* p : train_pairs(corpus)) {
    out.push_back({extractor.extract(p->source).values, extractor.extract(p->reference).values});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

MethodBundle train_common(Method method, const std::vector<TrainingPair>& raw, const PipelineConfig& cfg,
                          const nn::Checkpoint* pretrained, json provenance) {
  Seq2seqConfig s2s = cfg.seq2seq;
  s2s.input_dim = static_cast<int>(raw.front().input.cols());
  s2s.output_dim = static_cast<int>(raw.front().target.cols());

  MethodBundle b;
  b.method = method;
  b.max_frames_factor = cfg.max_frames_factor;
  b.stop_threshold = cfg.stop_threshold;
  b.vocoder_id = cfg.vocoder_id;
  if (cfg.normalize && s2s.init != Seq2seqInit::kIdentity) b.norm = fit_feature_norm(raw);

  std::vector<TrainingPair> pairs;
  pairs.reserve(raw.size());
  for (const auto& p : raw) pairs.push_back({b.norm.input(p.input), b.norm.target(p.target)});

  Seq2seqModel initial(s2s);
  if (pretrained != nullptr) load_pretrained(initial, *pretrained);
  const double initial_l1 = teacher_forced_l1(initial, pairs);

  auto model = std::make_shared<Seq2seqModel>(train_seq2seq(pairs, s2s, cfg.train, pretrained, &b.log));
  const double final_l1 = teacher_forced_l1(*model, pairs);

  provenance["seq2seq_seed"] = s2s.seed;
  provenance["train_seed"] = cfg.train.seed;
  provenance["steps"] = cfg.train.steps;
  provenance["training_pairs"] = pairs.size();
  provenance["initial_l1"] = initial_l1;
  provenance["final_l1"] = final_l1;
  provenance["seq2seq_hash"] = model->params().hash();
  if (pretrained != nullptr) {
    std::size_t copied = 0;
    for (const auto& e : b.log.transfer) copied += e.action == "copied" ? 1 : 0;
    provenance["pretrained"] = {{"copied", copied}, {"total", b.log.transfer.size()},
                                {"report", nn::to_json(b.log.transfer)}};
  } else {
    provenance["pretrained"] = nullptr;
  }
  b.provenance = std::move(provenance);
  b.seq2seq = std::move(model);
  return b;
}

Stage vocoder_stage(const std::string& id, int n_mels) {
  return {StageKind::kVocoder, id, mel_space(n_mels), kWave};
}

}  // namespace

MethodBundle train_cascade(const ParallelCorpus& corpus, const FrameVCModel& frame_vc,
                           const PipelineConfig& cfg, const nn::Checkpoint* pretrained) {
  const AnalysisConfig& a = frame_vc.analysis();
  json prov = {{"corpus_hash", corpus.content_hash()}, {"frame_vc_hash", frame_vc.parameter_hash()},
               {"extractor_id", frame_vc.extractor_id()}};
  MethodBundle b = train_common(Method::kCascade, cascade_pairs(corpus, a), cfg, pretrained, std::move(prov));
  b.extractor_id = frame_vc.extractor_id();
  b.analysis = a;
  const std::string lat = latent_space(frame_vc.extractor_id(), frame_vc.latent_dim());
  b.graph = {Method::kCascade,
             {{StageKind::kSeq2seq, "seq2seq.ckpt", mel_space(a.n_mels), mel_space(a.n_mels)},
              {StageKind::kExtractor, frame_vc.extractor_id(), kWave, lat},
              {StageKind::kFrameDecoder, "frame_vc.ckpt", lat, mel_space(a.n_mels)},
              vocoder_stage(cfg.vocoder_id, a.n_mels)}};
  b.graph.validate();
  return b;
}

MethodBundle train_stg(const ParallelCorpus& corpus, const FrameVCModel& frame_vc,
                       const ExtractorRegistry& extractors, const PipelineConfig& cfg,
                       const nn::Checkpoint* pretrained) {
  const AnalysisConfig& a = frame_vc.analysis();
  const auto pairs = stg_pairs(corpus, frame_vc, extractors);
  Fnv1a targets;
  for (const auto& p : pairs) targets.update(p.target);
  json prov = {{"corpus_hash", corpus.content_hash()}, {"frame_vc_hash", frame_vc.parameter_hash()},
               {"extractor_id", frame_vc.extractor_id()}, {"synthetic_targets_hash", targets.hex()}};
  MethodBundle b = train_common(Method::kStg, pairs, cfg, pretrained, std::move(prov));
  b.analysis = a;
  b.graph = {Method::kStg,
             {{StageKind::kSeq2seq, "seq2seq.ckpt", mel_space(a.n_mels), mel_space(a.n_mels)},
              vocoder_stage(cfg.vocoder_id, a.n_mels)}};
  b.graph.validate();
  return b;
}

MethodBundle train_lsc(const ParallelCorpus& corpus, const FrameVCModel& frame_vc,
                       const ExtractorRegistry& extractors, const PipelineConfig& cfg,
                       const nn::Checkpoint* pretrained) {
  const ExtractorBackend& e = extractors.get(frame_vc.extractor_id());
  if (e.dim() != frame_vc.latent_dim()) throw Error("extractor and frame_vc latent dims differ");
  const AnalysisConfig& a = frame_vc.analysis();
  json prov = {{"corpus_hash", corpus.content_hash()}, {"frame_vc_hash", frame_vc.parameter_hash()},
               {"extractor_id", e.extractor_id()}};
  MethodBundle b = train_common(Method::kLsc, lsc_pairs(corpus, e), cfg, pretrained, std::move(prov));
  b.extractor_id = e.extractor_id();
  b.analysis = a;
  b.renormalize_posteriors = e.produces_posteriors();
  const std::string lat = latent_space(e.extractor_id(), e.dim());
  b.graph = {Method::kLsc,
             {{StageKind::kExtractor, e.extractor_id(), kWave, lat},
              {StageKind::kSeq2seq, "seq2seq.ckpt", lat, lat},
              {StageKind::kFrameDecoder, "frame_vc.ckpt", lat, mel_space(a.n_mels)},
              vocoder_stage(cfg.vocoder_id, a.n_mels)}};
  b.graph.validate();
  return b;
}

// ---------------------------------------------------------------------------
// Conversion

namespace {

class Dumper {
 public:
  explicit Dumper(const fs::path& dir) : dir_(dir) {
    if (!dir_.empty()) fs::create_directories(dir_);
  }
  void matrix(const std::string& name, const Matrix& m, const json& meta = json::object()) {
    if (dir_.empty()) return;
    write_matrix_dump(dir_ / next(name), m, meta);
  }
  void wave(const std::string& name, const Utterance& u) {
    if (dir_.empty()) return;
    write_wav(dir_ / (next(name) + ".wav"), u.samples, u.sample_rate);
  }

 private:
  std::string next(const std::string& name) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%02d_", counter_++);
    return buf + name;
  }
  fs::path dir_;
  int counter_ = 0;
};

template <typename F>
auto run_stage(StageKind k, std::vector<std::string>& trace, F&& f) {
  trace.push_back(stage_name(k));
  try {
    return f();
  } catch (const std::exception& e) {
    throw Error(std::string("stage '") + stage_name(k) + "' failed: " + e.what());
  }
}

struct Seq2seqOutput {
  Matrix values;
  bool stopped = true;
};

Seq2seqOutput run_seq2seq(const MethodBundle& b, const Matrix& input) {
  if (!b.seq2seq) throw Error("bundle has no seq2seq model");
  const int max_frames =
      std::max(1, static_cast<int>(std::ceil(b.max_frames_factor * static_cast<double>(input.rows()))));
  const DecodeResult r = b.seq2seq->infer(b.norm.input(input), max_frames, b.stop_threshold);
  return {b.norm.output(r.output), r.stopped_naturally};
}

void check_method(const MethodBundle& b, Method m) {
  if (b.method != m) {
    throw Error(std::string("bundle is for method ") + method_name(b.method) + ", not " + method_name(m));
  }
}

Utterance finish(const MelSpectrogram& mel, const VocoderBackend& vocoder, const Utterance& u,
                 std::vector<std::string>& trace, Dumper& dump) {
  Utterance out = run_stage(StageKind::kVocoder, trace, [&] { return vocode(mel, vocoder); });
  out.speaker_id = u.speaker_id;
  out.prompt_id = u.prompt_id;
  out.utterance_id = u.utterance_id;
  out.transcript = u.transcript;
  dump.wave("output", out);
  return out;
}

}  // namespace

ConversionResult convert_cascade(const MethodBundle& bundle, const FrameVCModel& frame_vc,
                                 const ExtractorRegistry& extractors, const Utterance& u,
                                 const VocoderBackend& vocoder, const ConvertOptions& opts) {
  check_method(bundle, Method::kCascade);
  ConversionResult res;
  Dumper dump(opts.dump_dir);
  const MelSpectrogram in = mel_analyze(u, bundle.analysis);
  dump.matrix("input_mel", in.values);
  MelSpectrogram stage1;
  stage1.config = bundle.analysis;
  run_stage(StageKind::kSeq2seq, res.trace, [&] {
    const auto o = run_seq2seq(bundle, in.values);
    stage1.values = o.values;
    res.stopped_naturally = o.stopped;
    return 0;
  });
  dump.matrix("seq2seq_mel", stage1.values);
  const LatentSequence lat = run_stage(StageKind::kExtractor, res.trace, [&] {
    const ExtractorBackend& e = extractors.get(frame_vc.extractor_id());
    if (e.mel_native() && e.analysis() == stage1.config) {
      return LatentSequence{e.extract_from_mel(stage1), e.extractor_id(), e.frame_period_ms()};
    }
    Utterance rendered = vocode(stage1, vocoder);
    rendered.utterance_id = u.utterance_id;
    return e.extract(rendered);
  });
  dump.matrix("latents", lat.values, {{"extractor_id", lat.extractor_id}});
  res.mel = run_stage(StageKind::kFrameDecoder, res.trace, [&] { return decode_latents(frame_vc, lat); });
  dump.matrix("frame_decoder_mel", res.mel.values);
  res.output = finish(res.mel, vocoder, u, res.trace, dump);
  return res;
}

ConversionResult convert_stg(const MethodBundle& bundle, const Utterance& u, const VocoderBackend& vocoder,
                             const ConvertOptions& opts) {
  check_method(bundle, Method::kStg);
  ConversionResult res;
  Dumper dump(opts.dump_dir);
  const MelSpectrogram in = mel_analyze(u, bundle.analysis);
  dump.matrix("input_mel", in.values);
  res.mel.config = bundle.analysis;
  run_stage(StageKind::kSeq2seq, res.trace, [&] {
    const auto o = run_seq2seq(bundle, in.values);
    res.mel.values = o.values;
    res.stopped_naturally = o.stopped;
    return 0;
  });
  dump.matrix("seq2seq_mel", res.mel.values);
  res.output = finish(res.mel, vocoder, u, res.trace, dump);
  return res;
}

ConversionResult convert_lsc(const MethodBundle& bundle, const FrameVCModel& frame_vc,
                             const ExtractorRegistry& extractors, const Utterance& u,
                             const VocoderBackend& vocoder, const ConvertOptions& opts) {
  check_method(bundle, Method::kLsc);
  if (bundle.extractor_id != frame_vc.extractor_id()) {
    throw Error("bundle extractor '" + bundle.extractor_id + "' differs from frame_vc extractor '" +
                frame_vc.extractor_id() + "'");
  }
  ConversionResult res;
  Dumper dump(opts.dump_dir);
  const ExtractorBackend& e = extractors.get(bundle.extractor_id);
  const LatentSequence src = run_stage(StageKind::kExtractor, res.trace, [&] { return e.extract(u); });
  dump.matrix("source_latents", src.values, {{"extractor_id", src.extractor_id}});
  LatentSequence conv{Matrix(), src.extractor_id, src.frame_period_ms};
  run_stage(StageKind::kSeq2seq, res.trace, [&] {
    auto o = run_seq2seq(bundle, src.values);
    conv.values = bundle.renormalize_posteriors ? renormalize_rows(o.values) : std::move(o.values);
    res.stopped_naturally = o.stopped;
    return 0;
  });
  dump.matrix("converted_latents", conv.values, {{"extractor_id", conv.extractor_id}});
  res.mel = run_stage(StageKind::kFrameDecoder, res.trace, [&] { return decode_latents(frame_vc, conv); });
  dump.matrix("frame_decoder_mel", res.mel.values);
  res.output = finish(res.mel, vocoder, u, res.trace, dump);
  return res;
}

// ---------------------------------------------------------------------------
// Bundle directories

void save_bundle(const MethodBundle& b, const fs::path& dir, const FrameVCModel* frame_vc,
                 const ExtractorBackend* extractor) {
  if (!b.seq2seq) throw Error("bundle has no seq2seq model");
  b.graph.validate();
  const bool needs_frame_vc = b.method != Method::kStg;
  if (needs_frame_vc && (frame_vc == nullptr || extractor == nullptr)) {
    throw Error(std::string(method_name(b.method)) + " bundles need the frame_vc model and its extractor");
  }
  fs::create_directories(dir);
  json files = {{"seq2seq", "seq2seq.ckpt"}};
  b.seq2seq->save(dir / "seq2seq.ckpt", {{"method", method_name(b.method)}});
  if (needs_frame_vc) {
    if (extractor->extractor_id() != frame_vc->extractor_id()) {
      throw Error("extractor does not match the frame_vc model");
    }
    frame_vc->save(dir / "frame_vc.ckpt");
    save_extractor(*extractor, dir / "extractor.ckpt");
    files["frame_vc"] = "frame_vc.ckpt";
    files["extractor"] = "extractor.ckpt";
  }
  const json j = {{"format", "fac-bundle"},
                  {"version", 1},
                  {"method", method_name(b.method)},
                  {"bundle_id", b.bundle_id()},
                  {"graph", to_json(b.graph)},
                  {"extractor_id", b.extractor_id},
                  {"analysis", to_json(b.analysis)},
                  {"normalization", to_json(b.norm)},
                  {"renormalize_posteriors", b.renormalize_posteriors},
                  {"max_frames_factor", b.max_frames_factor},
                  {"stop_threshold", b.stop_threshold},
                  {"vocoder", b.vocoder_id},
                  {"provenance", b.provenance},
                  {"files", files}};
  std::ofstream out(dir / "method.json");
  if (!out) throw IoError("cannot write " + (dir / "method.json").string());
  out << j.dump(2) << '\n';
}

namespace {

json read_method_json(const fs::path& dir) {
  std::ifstream in(dir / "method.json");
  if (!in) throw IoError("cannot read " + (dir / "method.json").string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError((dir / "method.json").string() + ": " + e.what());
  }
  if (j.value("format", std::string()) != "fac-bundle") throw IoError("not a method bundle: " + dir.string());
  return j;
}

}  // namespace

MethodBundle load_bundle(const fs::path& dir) {
  const json j = read_method_json(dir);
  MethodBundle b;
  b.method = parse_method(j.at("method").get<std::string>());
  b.graph = conversion_graph_from_json(j.at("graph"));
  b.extractor_id = j.value("extractor_id", std::string());
  b.analysis = analysis_config_from_json(j.at("analysis"));
  b.norm = feature_norm_from_json(j.at("normalization"));
  b.renormalize_posteriors = j.value("renormalize_posteriors", false);
  b.max_frames_factor = j.value("max_frames_factor", 4.0);
  b.stop_threshold = j.value("stop_threshold", 0.5);
  b.vocoder_id = j.value("vocoder", std::string("griffin-lim"));
  b.provenance = j.value("provenance", json::object());
  b.seq2seq = std::make_shared<Seq2seqModel>(
      Seq2seqModel::load(dir / j.at("files").at("seq2seq").get<std::string>()));
  return b;
}

ConversionResult convert_bundle(const fs::path& dir, const Utterance& u, const VocoderRegistry& vocoders,
                                const ConvertOptions& opts) {
  std::vector<std::string> loads = {"load:seq2seq"};
  const MethodBundle b = load_bundle(dir);
  const VocoderBackend& vocoder = vocoders.get(b.vocoder_id);
  ConversionResult res;
  if (b.method == Method::kStg) {
    res = convert_stg(b, u, vocoder, opts);
  } else {
    const json files = read_method_json(dir).at("files");
    loads.push_back("load:frame_vc");
    const FrameVCModel frame_vc = FrameVCModel::load(dir / files.at("frame_vc").get<std::string>());
    loads.push_back("load:extractor");
    ExtractorRegistry extractors;
    extractors.add(load_extractor(dir / files.at("extractor").get<std::string>()));
    res = b.method == Method::kCascade ? convert_cascade(b, frame_vc, extractors, u, vocoder, opts)
                                       : convert_lsc(b, frame_vc, extractors, u, vocoder, opts);
  }
  res.trace.insert(res.trace.begin(), loads.begin(), loads.end());
  return res;
}

}  // namespace fac
