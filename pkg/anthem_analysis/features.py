#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Anthem feature extraction
-------------------------
Eight scalar features per anthem, aggregated as:
- mean:   melodic contour, note duration, beats (onset density)
- median: note velocity, rest duration
- mode:   pitch
- plus the estimated tempo and the number of time signature changes

Durations and rests are in beats (quarter notes) so they do not move when
only the tempo changes.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Iterable, List

import numpy as np
import pandas as pd

from .errors import DegeneratePerformanceError
from .score_model import Performance, merged_sounding_intervals

logger = logging.getLogger(__name__)

FEATURE_COLUMNS = (
    "melodic_contour_mean",
    "pitch_mode",
    "beat_onset_density",
    "tempo_bpm",
    "velocity_median",
    "note_duration_mean",
    "rest_duration_median",
    "time_signature_changes",
)

FEATURE_LABELS = {
    "melodic_contour_mean": "Melodic Contour",
    "pitch_mode": "Pitch",
    "beat_onset_density": "Beat",
    "tempo_bpm": "Tempo",
    "velocity_median": "Note Velocity",
    "note_duration_mean": "Note Duration",
    "rest_duration_median": "Rest Duration",
    "time_signature_changes": "Time Signature Changes",
}


@dataclass(frozen=True)
class FeatureVector:
    country: str
    melodic_contour_mean: float
    pitch_mode: int
    beat_onset_density: float
    tempo_bpm: float
    velocity_median: float
    note_duration_mean: float
    rest_duration_median: float
    time_signature_changes: int

    def __post_init__(self):
        values = [getattr(self, name) for name in FEATURE_COLUMNS]
        if not all(math.isfinite(v) for v in values):
            raise DegeneratePerformanceError(f"{self.country}: non-finite feature value")
        if not 0 < self.tempo_bpm < 1000:
            raise DegeneratePerformanceError(f"{self.country}: tempo {self.tempo_bpm:.1f} BPM out of range")
        if not 1 <= self.velocity_median <= 127:
            raise DegeneratePerformanceError(f"{self.country}: velocity median {self.velocity_median} out of range")
        if not 0 <= self.pitch_mode <= 127:
            raise DegeneratePerformanceError(f"{self.country}: pitch mode {self.pitch_mode} out of range")

    def to_row(self) -> dict:
        return asdict(self)


def melodic_contour_mean(perf: Performance) -> float:
    """Mean signed semitone step of the top voice (highest pitch per onset)."""
    frame = pd.DataFrame({"onset": [n.onset_tick for n in perf.notes],
                          "pitch": [n.pitch for n in perf.notes]})
    melody = frame.groupby("onset", sort=True)["pitch"].max().to_numpy()
    if len(melody) < 2:
        return 0.0
    return float(np.diff(melody).mean())


def pitch_mode(perf: Performance) -> int:
    """Most frequent pitch; ties go to the lowest pitch."""
    counts = np.bincount([n.pitch for n in perf.notes], minlength=128)
    return int(counts.argmax())


def beat_onset_density(perf: Performance) -> float:
    """Distinct onset ticks per beat of span (span floored at one beat)."""
    span = perf.length_beats
    if span <= 0:
        raise DegeneratePerformanceError("degenerate performance: zero-length span")
    onsets = len({n.onset_tick for n in perf.notes})
    return onsets / max(span, 1.0)


def estimate_tempo(perf: Performance) -> float:
    """Tempo segment BPMs weighted by the seconds each is active over the note span."""
    tempo_map = perf.tempo_map
    first = min(n.onset_tick for n in perf.notes)
    last = max(n.offset_tick for n in perf.notes)

    bounds = [start for start, _ in tempo_map.segments[1:]] + [math.inf]
    bpms, weights = [], []
    for (start, tempo), end in zip(tempo_map.segments, bounds):
        lo, hi = max(start, first), min(end, last)
        if hi > lo:
            bpms.append(60_000_000 / tempo)
            weights.append((hi - lo) / tempo_map.division * tempo / 1e6)

    if not bpms:
        return tempo_map.bpm_at(first)
    if len(bpms) == 1:
        return bpms[0]
    return float(np.average(bpms, weights=weights))


def velocity_median(perf: Performance) -> float:
    return float(np.median([n.velocity for n in perf.notes]))


def note_duration_mean(perf: Performance) -> float:
    return float(np.mean([n.duration_beats for n in perf.notes]))


def rest_duration_median(perf: Performance) -> float:
    """Median gap between merged sounding intervals; 0.0 for legato pieces."""
    intervals = merged_sounding_intervals(perf.notes)
    gaps = [b[0] - a[1] for a, b in zip(intervals, intervals[1:])]
    if not gaps:
        return 0.0
    return float(np.median(gaps))


def time_signature_change_count(perf: Performance) -> int:
    changes = 0
    current = None
    for _, numerator, denominator in perf.time_signatures:
        signature = (numerator, denominator)
        if current is not None and signature != current:
            changes += 1
        current = signature
    return changes


def extract_feature_vector(perf: Performance, country: str) -> FeatureVector:
    if not perf.notes:
        raise DegeneratePerformanceError(f"{country}: performance has no notes")
    return FeatureVector(
        country=country,
        melodic_contour_mean=melodic_contour_mean(perf),
        pitch_mode=pitch_mode(perf),
        beat_onset_density=beat_onset_density(perf),
        tempo_bpm=estimate_tempo(perf),
        velocity_median=velocity_median(perf),
        note_duration_mean=note_duration_mean(perf),
        rest_duration_median=rest_duration_median(perf),
        time_signature_changes=time_signature_change_count(perf),
    )


def feature_frame(vectors: Iterable[FeatureVector]) -> pd.DataFrame:
    """Feature store table: one row per anthem, sorted by country."""
    rows: List[dict] = [v.to_row() for v in vectors]
    frame = pd.DataFrame(rows, columns=["country", *FEATURE_COLUMNS])
    return frame.sort_values("country", kind="mergesort").reset_index(drop=True)
