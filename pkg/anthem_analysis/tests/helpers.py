"""Byte fixtures and builders shared by the test modules."""

from anthem_analysis.score_model import build_performance
from anthem_analysis.synthetic import AnthemSpec, NoteSpec

# MThd, format 0, 1 track, division 480
HEADER = b"MThd\x00\x00\x00\x06\x00\x00\x00\x01\x01\xe0"


def track(body: bytes) -> bytes:
    return b"MTrk" + len(body).to_bytes(4, "big") + body


def header(fmt: int = 0, tracks: int = 1, division: int = 480) -> bytes:
    return b"MThd" + (6).to_bytes(4, "big") + fmt.to_bytes(2, "big") + tracks.to_bytes(2, "big") \
        + division.to_bytes(2, "big")


# NoteOn(ch0, 60, 90) @0, NoteOff(ch0, 60, 0) @480, End-of-Track
MINIMAL_TRACK = b"\x00\x90\x3c\x5a" + b"\x83\x60\x80\x3c\x00" + b"\x00\xff\x2f\x00"
MINIMAL_SMF = HEADER + track(MINIMAL_TRACK)


def spec_from_notes(notes, tempos=None, time_signatures=None, division=480) -> AnthemSpec:
    specs = [n if isinstance(n, NoteSpec) else NoteSpec(*n) for n in notes]
    return AnthemSpec(name="test", notes=specs, division=division,
                      tempos=tempos or [(0.0, 500000)],
                      time_signatures=time_signatures or [(0.0, 4, 4)])


def perf_from_notes(notes, tempos=None, time_signatures=None, division=480):
    """Performance built from (beat, duration, pitch, velocity) tuples or NoteSpecs."""
    return build_performance(spec_from_notes(notes, tempos, time_signatures, division).to_smf())
