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

"""Foreign accent conversion toolkit: evaluation and feature helpers."""

from pathlib import Path

from ._fac import (
    Error,
    IoError,
    cer_wer,
    edit_distance,
    mean_interval,
    mel_analyze,
    normalize_transcript,
    pearson,
    toy_corpus_summary,
    wilson_interval,
)
from ._fac import reference_correlations as _reference_correlations

_PACKAGED_REFERENCE = Path(__file__).with_name("reference_scores.json")


def reference_correlations(path=None):
    """Pearson r of accentedness against CER and WER over a reference table."""
    if path is None and _PACKAGED_REFERENCE.exists():
        path = _PACKAGED_REFERENCE
    return _reference_correlations("" if path is None else str(path))


__all__ = [
    "Error",
    "IoError",
    "cer_wer",
    "edit_distance",
    "mean_interval",
    "mel_analyze",
    "normalize_transcript",
    "pearson",
    "reference_correlations",
    "toy_corpus_summary",
    "wilson_interval",
]
