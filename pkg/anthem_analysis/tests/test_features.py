import dataclasses
import math

import pytest
from hypothesis import given, settings, strategies as st

from anthem_analysis.errors import DegeneratePerformanceError
from anthem_analysis.features import (FEATURE_COLUMNS, FeatureVector, beat_onset_density, estimate_tempo,
                                      extract_feature_vector, feature_frame, melodic_contour_mean, note_duration_mean,
                                      pitch_mode, rest_duration_median, time_signature_change_count, velocity_median)

from .helpers import perf_from_notes


def sequence(pitches, step=1.0, velocity=90):
    """One note per beat, back to back."""
    return [(i * step, step, p, velocity) for i, p in enumerate(pitches)]


# ---------------------
# Golden fixture
# ---------------------
def test_anthem_a_matches_golden(anthem_a_perf, golden_anthem_a):
    row = extract_feature_vector(anthem_a_perf, "anthem_A").to_row()
    assert set(row) == set(golden_anthem_a)
    assert row["country"] == golden_anthem_a["country"]
    for column in FEATURE_COLUMNS:
        assert row[column] == pytest.approx(golden_anthem_a[column], abs=1e-12), column


def test_extraction_is_bit_identical(anthem_a_perf):
    assert extract_feature_vector(anthem_a_perf, "x") == extract_feature_vector(anthem_a_perf, "x")


def test_single_note_file():
    vector = extract_feature_vector(perf_from_notes([(0, 0.5, 60, 90)]), "Solo")
    assert vector.melodic_contour_mean == 0.0
    assert vector.beat_onset_density == 1.0
    assert vector.time_signature_changes == 0
    assert vector.rest_duration_median == 0.0


# ---------------------
# Single features
# ---------------------
@pytest.mark.parametrize("notes, expected", [
    (sequence([60, 62, 64]), 2.0),
    (sequence([60, 67, 60]), 0.0),
    ([(0, 1, 60, 90), (0, 1, 64, 90), (0, 1, 67, 90), (1, 1, 65, 90)], -2.0),
])
def test_melodic_contour_mean(notes, expected):
    assert melodic_contour_mean(perf_from_notes(notes)) == expected


@pytest.mark.parametrize("pitches, expected", [
    ([60, 60, 62], 60),
    ([60, 62], 60),
    ([62, 62, 60, 60, 64], 60),
])
def test_pitch_mode(pitches, expected):
    assert pitch_mode(perf_from_notes(sequence(pitches))) == expected


def test_beat_onset_density_examples():
    assert beat_onset_density(perf_from_notes(sequence([60] * 8, step=0.5))) == 2.0
    assert beat_onset_density(perf_from_notes([(0, 0.25, 60, 90)])) == 1.0
    chord_then_note = [(0, 1, 60, 90), (0, 1, 64, 90), (0, 1, 67, 90), (1, 1, 65, 90)]
    assert beat_onset_density(perf_from_notes(chord_then_note)) == 1.0


def test_beat_onset_density_zero_span():
    perf = dataclasses.replace(perf_from_notes(sequence([60])), span_beats=(1.0, 1.0))
    with pytest.raises(DegeneratePerformanceError, match="degenerate performance"):
        beat_onset_density(perf)


def test_tempo_single_segment():
    assert estimate_tempo(perf_from_notes(sequence([60, 62]))) == 120.0


def test_tempo_equal_time_halves():
    # 120 beats at 120 BPM (60 s), then 60 beats at 60 BPM (60 s)
    notes = [(0, 1, 60, 90), (179, 1, 62, 90)]
    perf = perf_from_notes(notes, tempos=[(0, 500000), (120, 1000000)])
    assert estimate_tempo(perf) == pytest.approx(90.0)


def test_tempo_weighted_by_seconds():
    # 60 beats at 120 BPM (30 s), then 90 beats at 60 BPM (90 s)
    notes = [(0, 1, 60, 90), (149, 1, 62, 90)]
    perf = perf_from_notes(notes, tempos=[(0, 500000), (60, 1000000)])
    assert estimate_tempo(perf) == pytest.approx(75.0)


def test_tempo_ignores_segments_outside_note_span():
    notes = [(4, 1, 60, 90), (5, 1, 62, 90)]
    perf = perf_from_notes(notes, tempos=[(0, 1000000), (4, 500000), (6, 250000)])
    assert estimate_tempo(perf) == 120.0


@pytest.mark.parametrize("velocities, expected", [
    ([90], 90.0),
    ([64, 80], 72.0),
    ([10, 90, 90, 100, 127], 90.0),
])
def test_velocity_median(velocities, expected):
    notes = [(i, 1, 60, v) for i, v in enumerate(velocities)]
    assert velocity_median(perf_from_notes(notes)) == expected


@pytest.mark.parametrize("durations, expected", [
    ([1.0, 2.0], 1.5),
    ([0.25], 0.25),
    ([0.5, 0.5, 2.0], 1.0),
])
def test_note_duration_mean(durations, expected):
    notes = [(4 * i, d, 60, 90) for i, d in enumerate(durations)]
    assert note_duration_mean(perf_from_notes(notes)) == expected


def test_rest_duration_median_examples():
    assert rest_duration_median(perf_from_notes([(0, 1, 60, 90), (2, 1, 62, 90)])) == 1.0
    assert rest_duration_median(perf_from_notes(sequence([60, 62, 64, 65]))) == 0.0
    gaps = [(0, 1, 60, 90), (1.5, 1, 62, 90), (3.5, 1, 64, 90), (6.5, 1, 65, 90)]
    assert rest_duration_median(perf_from_notes(gaps)) == 1.0


def test_rests_ignore_leading_silence():
    assert rest_duration_median(perf_from_notes([(10, 1, 60, 90), (12, 1, 62, 90)])) == 1.0


@pytest.mark.parametrize("signatures, expected", [
    ([(0, 4, 4)], 0),
    ([(0, 4, 4), (4, 3, 4)], 1),
    ([(0, 4, 4), (4, 4, 4), (8, 3, 4), (12, 3, 4), (16, 4, 4)], 2),
])
def test_time_signature_change_count(signatures, expected):
    perf = perf_from_notes(sequence([60] * 20), time_signatures=signatures)
    assert time_signature_change_count(perf) == expected


# ---------------------
# Feature vector
# ---------------------
def test_feature_vector_rejects_non_finite():
    row = extract_feature_vector(perf_from_notes(sequence([60, 62])), "X").to_row()
    row["melodic_contour_mean"] = math.nan
    with pytest.raises(DegeneratePerformanceError, match="non-finite"):
        FeatureVector(**row)


@pytest.mark.parametrize("column, value", [("tempo_bpm", 0.0), ("tempo_bpm", 1000.0), ("velocity_median", 0.0),
                                           ("pitch_mode", 128)])
def test_feature_vector_rejects_out_of_range(column, value):
    row = extract_feature_vector(perf_from_notes(sequence([60, 62])), "X").to_row()
    row[column] = value
    with pytest.raises(DegeneratePerformanceError):
        FeatureVector(**row)


def test_feature_frame_sorted_by_country(anthem_a_perf):
    frame = feature_frame([extract_feature_vector(anthem_a_perf, name) for name in ("Norway", "Chile", "Japan")])
    assert list(frame.columns) == ["country", *FEATURE_COLUMNS]
    assert list(frame["country"]) == ["Chile", "Japan", "Norway"]


# ---------------------
# Properties
# ---------------------
melodies = st.lists(
    st.tuples(st.sampled_from([0.5, 1.0, 1.5, 2.0]), st.sampled_from([0.0, 0.0, 0.5, 1.0]),
              st.integers(24, 100), st.integers(1, 127)),
    min_size=1, max_size=24,
)


def lay_out(melody):
    """(duration, rest_after, pitch, velocity) tuples -> note tuples, monophonic."""
    notes, beat = [], 0.0
    for duration, rest, pitch, velocity in melody:
        notes.append((beat, duration, pitch, velocity))
        beat += duration + rest
    return notes


@settings(max_examples=1000)
@given(melodies, st.integers(-24, 27))
def test_transposition_shifts_pitch_mode_only(melody, shift):
    notes = lay_out(melody)
    original = extract_feature_vector(perf_from_notes(notes), "X")
    shifted = extract_feature_vector(perf_from_notes([(b, d, p + shift, v) for b, d, p, v in notes]), "X")
    assert shifted.pitch_mode == original.pitch_mode + shift
    assert shifted.melodic_contour_mean == original.melodic_contour_mean
    assert dataclasses.replace(shifted, pitch_mode=original.pitch_mode) == original


@settings(max_examples=1000)
@given(melodies, st.integers(200000, 2000000))
def test_tempo_rescale_keeps_beat_features(melody, tempo):
    notes = lay_out(melody)
    original = extract_feature_vector(perf_from_notes(notes), "X")
    rescaled = extract_feature_vector(perf_from_notes(notes, tempos=[(0, tempo)]), "X")
    assert rescaled.tempo_bpm == pytest.approx(60_000_000 / tempo)
    assert rescaled.note_duration_mean == original.note_duration_mean
    assert rescaled.rest_duration_median == original.rest_duration_median
    assert rescaled.beat_onset_density == original.beat_onset_density


@settings(max_examples=1000)
@given(st.lists(st.integers(24, 100), min_size=2, max_size=30))
def test_reversal_negates_contour(pitches):
    forward = melodic_contour_mean(perf_from_notes(sequence(pitches)))
    backward = melodic_contour_mean(perf_from_notes(sequence(pitches[::-1])))
    assert backward == -forward


@settings(max_examples=1000)
@given(melodies, st.randoms(use_true_random=False))
def test_order_statistics_ignore_input_order(melody, random):
    notes = lay_out(melody)
    shuffled = list(notes)
    random.shuffle(shuffled)
    original, permuted = perf_from_notes(notes), perf_from_notes(shuffled)
    assert velocity_median(permuted) == velocity_median(original)
    assert rest_duration_median(permuted) == rest_duration_median(original)
