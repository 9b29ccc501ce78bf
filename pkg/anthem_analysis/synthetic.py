"""
Synthetic anthem corpora assembled from note lists.

- anthem_a(): the hand-checked golden fixture used by the feature tests
- write_demo_corpus(): six anthems with planted tempos, a tempo-monotone
  index, a noise index and a ready-to-run config
- write_scale_corpus(): N generated anthems for timing the full pipeline
"""

import itertools
import json
import logging
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .score_model import PERCUSSION_CHANNEL
from .smf import (EndOfTrack, NoteOff, NoteOn, SmfFile, TempoMeta, TimedEvent, TimeSignatureMeta, TrackChunk,
                  serialize_smf)

logger = logging.getLogger(__name__)

DEMO_COUNTRIES = ("Brazil", "Finland", "Japan", "Kenya", "Norway", "United States")
CORRUPT_BYTES = b"RIFF\x00\x00\x00\x04RMID"


@dataclass(frozen=True)
class NoteSpec:
    beat: float
    duration: float
    pitch: int
    velocity: int
    channel: int = 0


@dataclass
class AnthemSpec:
    name: str
    notes: List[NoteSpec]
    tempos: List[Tuple[float, int]] = field(default_factory=lambda: [(0.0, 500000)])  # (beat, µs per quarter)
    time_signatures: List[Tuple[float, int, int]] = field(default_factory=lambda: [(0.0, 4, 4)])
    division: int = 480

    def _tick(self, beat: float) -> int:
        return int(round(beat * self.division))

    def _track(self, timed: List[Tuple[int, int, object]]) -> TrackChunk:
        # (tick, order, body); order puts note-offs before note-ons on the same tick
        events, previous = [], 0
        for tick, _, body in sorted(timed, key=lambda e: (e[0], e[1])):
            events.append(TimedEvent(tick - previous, body))
            previous = tick
        events.append(TimedEvent(0, EndOfTrack()))
        return TrackChunk(tuple(events))

    def to_smf(self) -> SmfFile:
        meta = [(self._tick(b), 0, TempoMeta(t)) for b, t in self.tempos]
        meta += [(self._tick(b), 1, TimeSignatureMeta(n, d)) for b, n, d in self.time_signatures]
        tracks = [self._track(meta)]

        for channel in sorted({n.channel for n in self.notes}):
            timed = []
            for i, note in enumerate(n for n in self.notes if n.channel == channel):
                timed.append((self._tick(note.beat), 2 * i + 1, NoteOn(channel, note.pitch, note.velocity)))
                timed.append((self._tick(note.beat + note.duration), 0, NoteOff(channel, note.pitch)))
            tracks.append(self._track(timed))
        return SmfFile(format=1, division=self.division, tracks=tuple(tracks))

    def to_bytes(self) -> bytes:
        return serialize_smf(self.to_smf())


def anthem_a() -> AnthemSpec:
    """Golden fixture: 4/4 -> 3/4 at beat 8 -> 4/4 at beat 11, one chord, one drum hit."""
    melody = [
        (0, 1, 60, 80), (1, 1, 62, 90), (2, 0.5, 64, 100), (3, 1, 65, 90),
        (4, 2, 60, 70), (4, 2, 64, 80), (4, 2, 67, 90),
        (7, 1, 65, 90), (8, 3, 64, 110), (13, 1, 57, 90),
    ]
    notes = [NoteSpec(*n) for n in melody]
    notes.append(NoteSpec(2.5, 0.5, 36, 100, channel=PERCUSSION_CHANNEL))
    return AnthemSpec(
        name="anthem_A",
        notes=notes,
        tempos=[(0.0, 500000)],
        time_signatures=[(0.0, 4, 4), (8.0, 3, 4), (11.0, 4, 4)],
    )


def random_anthem(name: str, bpm: float, rng: np.random.Generator, note_count: int = 32,
                  signature_changes: int = 0, base_pitch: int = 60) -> AnthemSpec:
    """Random-walk melody with occasional rests at a fixed tempo."""
    notes, beat, pitch = [], 0.0, base_pitch
    for _ in range(note_count):
        duration = float(rng.choice([0.5, 1.0, 1.0, 1.5, 2.0]))
        pitch = int(np.clip(pitch + rng.integers(-3, 4), 36, 96))
        notes.append(NoteSpec(beat, duration, pitch, int(rng.integers(50, 121))))
        beat += duration
        if rng.random() < 0.2:
            beat += float(rng.choice([0.5, 1.0]))

    signatures = [(0.0, 4, 4)]
    for i in range(signature_changes):
        numerator = 3 if i % 2 == 0 else 4
        signatures.append((8.0 * (i + 1), numerator, 4))
    return AnthemSpec(name=name, notes=notes, tempos=[(0.0, int(round(60_000_000 / bpm)))],
                      time_signatures=signatures)


def _write(path: Path, data: bytes) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    return path


def _write_config(out: Path, corpus: Path, indices: List[dict], seed: int, k_max: int = 10) -> Path:
    config = {
        "corpus_dir": corpus.name,
        "indices": indices,
        "output_dir": "analysis",
        "seed": seed,
        "k_max": k_max,
    }
    path = out / "anthem_config.json"
    path.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    return path


def write_demo_corpus(out_dir: str, seed: int = 7, corrupt: bool = False) -> Dict[str, Path]:
    """Six anthems, tempo 70..130 BPM, plus a tempo-monotone index and a noise index.

    The tempo index spells one country with an alias ("USA") and lists one
    country with no anthem, so the join has something to reconcile and drop.
    """
    out = Path(out_dir)
    corpus = out / "corpus"
    rng = np.random.default_rng(seed)
    tempos = {}
    for i, country in enumerate(DEMO_COUNTRIES):
        bpm = 70.0 + 12.0 * i
        spec = random_anthem(country, bpm, np.random.default_rng(seed + i), note_count=24 + 4 * i,
                             signature_changes=i % 3, base_pitch=55 + 2 * i)
        _write(corpus / f"{country.replace(' ', '_')}.mid", spec.to_bytes())
        tempos[country] = bpm
    if corrupt:
        _write(corpus / "Atlantis.mid", CORRUPT_BYTES)

    tempo_rows = sorted(((2.0 * bpm + 5.0, "USA" if c == "United States" else c) for c, bpm in tempos.items()),
                        reverse=True)
    tempo_rows.append((1.0, "Peru"))
    tempo_index = pd.DataFrame({
        "Rank": range(1, len(tempo_rows) + 1),
        "Country": [c for _, c in tempo_rows],
        "Score": [s for s, _ in tempo_rows],
    })
    noise_index = pd.DataFrame({
        "country": list(DEMO_COUNTRIES) + ["Chile"],
        "value": np.round(rng.uniform(0, 10, len(DEMO_COUNTRIES) + 1), 3),
    })
    paths = {
        "corpus": corpus,
        "tempo_index": out / "indices" / "tempo_index.csv",
        "noise_index": out / "indices" / "noise_index.csv",
    }
    paths["tempo_index"].parent.mkdir(parents=True, exist_ok=True)
    tempo_index.to_csv(paths["tempo_index"], index=False, lineterminator="\n")
    noise_index.to_csv(paths["noise_index"], index=False, lineterminator="\n")

    paths["config"] = _write_config(out, corpus, [
        {"name": "tempo_index", "path": "indices/tempo_index.csv", "direction": "higher_is_better",
         "country_column": "Country", "score_column": "Score", "rank_column": "Rank"},
        {"name": "noise_index", "path": "indices/noise_index.csv", "direction": "higher_is_worse"},
    ], seed)
    logger.info(f"Demo corpus written to {out} ({len(DEMO_COUNTRIES)} anthems)")
    return paths


def scale_country_names(count: int) -> List[str]:
    letters = ("".join(p) for p in itertools.product(string.ascii_uppercase, repeat=2))
    return [f"Nation {code}" for code in itertools.islice(letters, count)]


def write_scale_corpus(out_dir: str, count: int = 166, seed: int = 11,
                       countries: Optional[Sequence[str]] = None) -> Dict[str, Path]:
    """`count` generated anthems with a tempo-planted index over all of them."""
    out = Path(out_dir)
    corpus = out / "corpus"
    names = list(countries) if countries is not None else scale_country_names(count)
    rng = np.random.default_rng(seed)
    rows = []
    for i, country in enumerate(names):
        bpm = float(rng.uniform(60, 140))
        spec = random_anthem(country, bpm, np.random.default_rng([seed, i]), note_count=int(rng.integers(24, 80)),
                             signature_changes=int(rng.integers(0, 3)), base_pitch=int(rng.integers(50, 70)))
        _write(corpus / f"{country.replace(' ', '_')}.mid", spec.to_bytes())
        rows.append({"country": country, "score": round(bpm / 10.0, 4)})

    index_path = out / "indices" / "scale_tempo_index.csv"
    index_path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows).to_csv(index_path, index=False, lineterminator="\n")
    config = _write_config(out, corpus, [
        {"name": "scale_tempo_index", "path": "indices/scale_tempo_index.csv", "direction": "higher_is_better"},
    ], seed)
    logger.info(f"Scale corpus written to {out} ({len(names)} anthems)")
    return {"corpus": corpus, "index": index_path, "config": config}
