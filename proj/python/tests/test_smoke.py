# Copyright 2026 The FAC Toolkit Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import numpy as np
import pytest

import fac


def test_edit_distance_and_rates():
    ops = fac.edit_distance(["a", "b", "c"], ["a", "x", "c", "d"])
    assert ops["substitutions"] == 1
    assert ops["insertions"] == 1
    assert ops["total"] == 2
    cer, wer = fac.cer_wer("the cat sat", "the cat sat")
    assert cer == 0.0 and wer == 0.0
    cer, wer = fac.cer_wer("a b", "a c")
    assert wer == pytest.approx(0.5)
    assert cer == pytest.approx(0.5)
    assert fac.normalize_transcript("  Hello,   WORLD! ") == "HELLO WORLD"


def test_intervals():
    t = fac.mean_interval([3.0, 4.0, 5.0])
    assert t["mean"] == pytest.approx(4.0)
    assert t["half_width"] == pytest.approx(4.302652729911275 / math.sqrt(3.0))
    assert t["text"] == "4.00±2.48"
    single = fac.mean_interval([3.0])
    assert single["half_width"] is None
    p, hw = fac.wilson_interval(37, 100)
    assert p == pytest.approx(0.37)
    assert 0.09 < hw < 0.1
    with pytest.raises(fac.Error):
        fac.mean_interval([])


def test_pearson_matches_numpy():
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=20), rng.normal(size=20)
    assert fac.pearson(list(x), list(y)) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)
    with pytest.raises(fac.Error):
        fac.pearson([1.0, 2.0], [2.0, 3.0])


def test_mel_analyze_shape_and_values():
    t = np.arange(16000) / 16000.0
    mel = fac.mel_analyze(0.3 * np.sin(2 * np.pi * 440.0 * t))
    assert mel.shape == (63, 80)
    assert np.isfinite(mel).all()
    silence = fac.mel_analyze(np.zeros(4096))
    assert np.allclose(silence, math.log(1e-10))


def test_toy_corpus_and_reference_table():
    toy = fac.toy_corpus_summary(4, 7)
    assert len(toy["prompts"]) == 4
    assert toy["source_speaker"] != toy["reference_speaker"]
    assert toy == fac.toy_corpus_summary(4, 7)
    ref = fac.reference_correlations()
    assert ref["points"] == 8
    assert ref["accentedness_vs_cer"] == pytest.approx(0.413, abs=0.005)
    assert ref["accentedness_vs_wer"] == pytest.approx(0.442, abs=0.005)
    with pytest.raises((fac.Error, fac.IoError)):
        fac.reference_correlations("/nonexistent/table.json")
