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

// Python bindings for the evaluation arithmetic, feature analysis and the
// toy corpus.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fac/common.hpp"
#include "fac/evaluation.hpp"
#include "fac/features.hpp"
#include "fac/toy_corpus.hpp"

namespace py = pybind11;

namespace {

py::dict interval_dict(const fac::Interval& i) {
  py::dict d;
  d["mean"] = i.mean;
  d["half_width"] = i.defined ? py::object(py::float_(i.half_width)) : py::object(py::none());
  d["n"] = i.n;
  d["text"] = fac::format_interval(i);
  return d;
}

}  // namespace

PYBIND11_MODULE(_fac, m) {
  m.doc() = "Foreign accent conversion toolkit: evaluation and feature helpers";

  py::register_exception<fac::IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<fac::Error>(m, "Error", PyExc_ValueError);

  m.def("normalize_transcript", [](const std::string& t) { return fac::normalize_transcript(t); });

  m.def(
      "edit_distance",
      [](const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
        const fac::EditOps ops = fac::edit_distance(ref, hyp);
        return py::dict(py::arg("substitutions") = ops.substitutions, py::arg("deletions") = ops.deletions,
                        py::arg("insertions") = ops.insertions, py::arg("total") = ops.total());
      },
      py::arg("ref"), py::arg("hyp"));

  m.def(
      "cer_wer",
      [](const std::string& ref, const std::string& hyp) {
        const fac::ErrorRates r = fac::cer_wer(ref, hyp);
        return py::make_tuple(r.cer, r.wer);
      },
      py::arg("reference"), py::arg("hypothesis"), "Character and word error rates as fractions.");

  m.def("pearson", &fac::pearson, py::arg("x"), py::arg("y"));

  m.def(
      "mean_interval", [](const std::vector<double>& v) { return interval_dict(fac::mean_interval(v)); },
      py::arg("values"), "Mean with a Student-t 95% half-width (None for a single value).");

  m.def(
      "wilson_interval",
      [](std::size_t successes, std::size_t n) {
        const fac::Interval i = fac::wilson_interval(successes, n);
        return py::make_tuple(i.mean, i.half_width);
      },
      py::arg("successes"), py::arg("n"), "Proportion and Wilson 95% half-width, both as fractions.");

  m.def(
      "mel_analyze",
      [](const std::vector<double>& samples, int sample_rate, int n_mels) {
        fac::AnalysisConfig cfg;
        cfg.sample_rate = sample_rate;
        cfg.n_mels = n_mels;
        return fac::mel_analyze(samples, cfg).values;
      },
      py::arg("samples"), py::arg("sample_rate") = fac::kDefaultSampleRate, py::arg("n_mels") = 80,
      "Natural-log mel spectrogram, frames x n_mels.");

  m.def(
      "toy_corpus_summary",
      [](int n_prompts, std::uint64_t seed) {
        fac::ToyCorpusConfig cfg;
        cfg.n_prompts = n_prompts;
        cfg.seed = seed;
        cfg.splits = {static_cast<std::size_t>(n_prompts), 0, 0};
        const fac::ToyCorpus toy = fac::generate_toy_corpus(cfg);
        py::list prompts;
        for (const auto& [id, pair] : toy.corpus.pairs) {
          prompts.append(py::dict(py::arg("prompt_id") = id, py::arg("transcript") = pair.source.transcript,
                                  py::arg("source_samples") = pair.source.samples.size(),
                                  py::arg("reference_samples") = pair.reference.samples.size()));
        }
        return py::dict(py::arg("source_speaker") = toy.corpus.source_speaker(),
                        py::arg("reference_speaker") = toy.corpus.reference_speaker(),
                        py::arg("n_phones") = toy.n_phones, py::arg("content_hash") = toy.corpus.content_hash(),
                        py::arg("prompts") = prompts);
      },
      py::arg("n_prompts") = 10, py::arg("seed") = 7);

  m.def(
      "reference_correlations",
      [](const std::string& path) {
        const fac::ReferenceTable t =
            fac::load_reference_table(path.empty() ? fac::default_reference_table_path() : std::filesystem::path(path));
        const fac::CorrelationReport c = fac::correlation_report(t);
        py::list systems;
        for (const auto& r : t.rows) systems.append(r.system);
        return py::dict(py::arg("version") = t.version, py::arg("systems") = systems,
                        py::arg("accentedness_vs_cer") = c.accentedness_vs_cer,
                        py::arg("accentedness_vs_wer") = c.accentedness_vs_wer, py::arg("points") = c.points);
      },
      py::arg("path") = "", "Correlations of the bundled (or given) reference score table.");
}
