"""
Score model: turns a parsed SmfFile into a timed Performance.

All tracks are merged into one timeline. Percussion (zero-indexed channel 9)
is kept by extract_notes but removed from the Performance note list.
"""

import logging
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyPerformanceError
from .smf import DEFAULT_TEMPO, NoteOff, NoteOn, SmfFile, TempoMeta, TimeSignatureMeta

logger = logging.getLogger(__name__)

PERCUSSION_CHANNEL = 9


@dataclass(frozen=True)
class TempoMap:
    segments: Tuple[Tuple[int, int], ...]   # (start_tick, µs per quarter note)
    division: int

    def __post_init__(self):
        if self.division <= 0:
            raise ValueError("division must be positive")
        if not self.segments or self.segments[0][0] != 0:
            raise ValueError("tempo map must start at tick 0")
        starts = [start for start, _ in self.segments]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("tempo segment starts must be strictly increasing")
        if any(tempo < 1 for _, tempo in self.segments):
            raise ValueError("tempo values must be >= 1")

    def bpm_at(self, tick: int) -> float:
        index = int(np.searchsorted(self._starts, tick, side="right")) - 1
        return 60_000_000 / self.segments[index][1]

    @property
    def _starts(self) -> np.ndarray:
        return np.array([start for start, _ in self.segments], dtype=float)

    def seconds_at(self, ticks) -> np.ndarray:
        """Vectorised tick -> seconds over the piecewise-constant tempo."""
        ticks = np.asarray(ticks, dtype=float)
        if np.any(ticks < 0):
            raise ValueError("ticks must be non-negative")
        starts = self._starts
        seconds_per_beat = np.array([tempo for _, tempo in self.segments], dtype=float) / 1e6
        segment_seconds = (np.diff(starts) / self.division) * seconds_per_beat[:-1]
        cumulative = np.concatenate([[0.0], np.cumsum(segment_seconds)])
        index = np.searchsorted(starts, ticks, side="right") - 1
        return cumulative[index] + ((ticks - starts[index]) / self.division) * seconds_per_beat[index]


@dataclass(frozen=True)
class Note:
    channel: int
    pitch: int
    velocity: int
    onset_tick: int
    offset_tick: int
    onset_beats: float
    offset_beats: float
    duration_beats: float
    onset_seconds: float
    duration_seconds: float

    @property
    def is_percussion(self) -> bool:
        return self.channel == PERCUSSION_CHANNEL


@dataclass(frozen=True)
class Performance:
    notes: Tuple[Note, ...]
    tempo_map: TempoMap
    time_signatures: Tuple[Tuple[int, int, int], ...]   # (tick, numerator, denominator)
    beat_grid: Tuple[float, ...]
    span_beats: Tuple[float, float]
    span_seconds: Tuple[float, float]
    repairs: Tuple[str, ...] = field(default=(), compare=False)
    percussion_dropped: int = field(default=0, compare=False)

    @property
    def division(self) -> int:
        return self.tempo_map.division

    @property
    def length_beats(self) -> float:
        return self.span_beats[1] - self.span_beats[0]


def build_tempo_map(smf: SmfFile) -> TempoMap:
    """Merge tempo events of all tracks; same-tick duplicates resolve last-wins."""
    events = []
    for track_index, track in enumerate(smf.tracks):
        for order, (tick, body) in enumerate(track.absolute_events()):
            if isinstance(body, TempoMeta):
                events.append((tick, track_index, order, body.microseconds_per_quarter))
    events.sort()

    by_tick: Dict[int, int] = {}
    for tick, _, _, tempo in events:
        by_tick[tick] = tempo
    if 0 not in by_tick:
        by_tick[0] = DEFAULT_TEMPO
    return TempoMap(tuple(sorted(by_tick.items())), smf.division)


def ticks_to_seconds(tempo_map: TempoMap, tick: int) -> float:
    return float(tempo_map.seconds_at([tick])[0])


def extract_notes(smf: SmfFile, tempo_map: Optional[TempoMap] = None,
                  repair_log: Optional[List[str]] = None) -> List[Note]:
    """Pair note-on/note-off events per (track, channel, pitch), FIFO.

    NoteOn with velocity 0 closes a note. Notes still open at End-of-Track
    are closed there; zero-length notes are dropped. Both repairs are
    appended to repair_log when one is given.
    """
    tempo_map = tempo_map or build_tempo_map(smf)
    repairs = repair_log if repair_log is not None else []
    raw: List[Tuple[int, int, int, int, int]] = []  # onset, offset, channel, pitch, velocity

    for track_index, track in enumerate(smf.tracks):
        pending: Dict[Tuple[int, int], Deque[Tuple[int, int]]] = defaultdict(deque)
        end_tick = 0
        for tick, body in track.absolute_events():
            end_tick = tick
            if isinstance(body, NoteOn) and body.velocity > 0:
                pending[(body.channel, body.pitch)].append((tick, body.velocity))
            elif isinstance(body, (NoteOn, NoteOff)):
                queue = pending.get((body.channel, body.pitch))
                if queue:
                    onset, velocity = queue.popleft()
                    raw.append((onset, tick, body.channel, body.pitch, velocity))
                else:
                    repairs.append(f"track {track_index}: unmatched note-off ch{body.channel} "
                                   f"pitch {body.pitch} at tick {tick} ignored")

        for (channel, pitch), queue in sorted(pending.items()):
            for onset, velocity in queue:
                repairs.append(f"track {track_index}: note ch{channel} pitch {pitch} from tick {onset} "
                               f"closed at End-of-Track (tick {end_tick})")
                raw.append((onset, end_tick, channel, pitch, velocity))

    kept = []
    for item in raw:
        if item[1] <= item[0]:
            repairs.append(f"zero-length note ch{item[2]} pitch {item[3]} at tick {item[0]} dropped")
        else:
            kept.append(item)
    kept.sort(key=lambda n: (n[0], n[3], n[2], n[1], n[4]))
    if not kept:
        return []

    onsets = np.array([n[0] for n in kept], dtype=float)
    offsets = np.array([n[1] for n in kept], dtype=float)
    onset_seconds = tempo_map.seconds_at(onsets)
    offset_seconds = tempo_map.seconds_at(offsets)
    division = tempo_map.division

    return [
        Note(channel=channel, pitch=pitch, velocity=velocity,
             onset_tick=onset, offset_tick=offset,
             onset_beats=onset / division, offset_beats=offset / division,
             duration_beats=(offset - onset) / division,
             onset_seconds=float(on_s), duration_seconds=float(off_s - on_s))
        for (onset, offset, channel, pitch, velocity), on_s, off_s
        in zip(kept, onset_seconds, offset_seconds)
    ]


def build_beat_grid(span_beats: float, tempo_map: TempoMap) -> Tuple[float, ...]:
    """One grid point per quarter note, beat 0 up to (excluding) ceil(span)."""
    if span_beats < 0:
        raise ValueError("span must be non-negative")
    count = max(1, math.ceil(span_beats))
    ticks = np.arange(count, dtype=float) * tempo_map.division
    return tuple(float(s) for s in tempo_map.seconds_at(ticks))


def merged_sounding_intervals(notes: Sequence[Note]) -> List[Tuple[float, float]]:
    """Union of non-percussion [onset, offset) intervals in beats; touching intervals merge."""
    spans = sorted((n.onset_beats, n.offset_beats) for n in notes if not n.is_percussion)
    merged: List[Tuple[float, float]] = []
    for start, end in spans:
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def collect_time_signatures(smf: SmfFile) -> Tuple[Tuple[int, int, int], ...]:
    events = []
    for track_index, track in enumerate(smf.tracks):
        for order, (tick, body) in enumerate(track.absolute_events()):
            if isinstance(body, TimeSignatureMeta):
                events.append((tick, track_index, order, body.numerator, body.denominator))
    events.sort()
    return tuple((tick, num, den) for tick, _, _, num, den in events)


def build_performance(smf: SmfFile) -> Performance:
    """Full score-model pass; raises EmptyPerformanceError when no pitched note survives."""
    tempo_map = build_tempo_map(smf)
    repairs: List[str] = list(smf.warnings)
    all_notes = extract_notes(smf, tempo_map, repairs)

    notes = tuple(n for n in all_notes if not n.is_percussion)
    percussion = len(all_notes) - len(notes)
    if percussion:
        logger.info(f"Excluded {percussion} percussion notes")
    if not notes:
        raise EmptyPerformanceError("no pitched notes")

    first_onset = min(n.onset_tick for n in notes)
    last_offset = max(n.offset_tick for n in notes)
    span_seconds = tempo_map.seconds_at([first_onset, last_offset])
    span_beats = (first_onset / smf.division, last_offset / smf.division)

    return Performance(
        notes=notes,
        tempo_map=tempo_map,
        time_signatures=collect_time_signatures(smf),
        beat_grid=build_beat_grid(span_beats[1], tempo_map),
        span_beats=span_beats,
        span_seconds=(float(span_seconds[0]), float(span_seconds[1])),
        repairs=tuple(repairs),
        percussion_dropped=percussion,
    )
