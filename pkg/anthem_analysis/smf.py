#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Standard MIDI File (SMF 1.0) reader
-----------------------------------
Parses raw SMF bytes into chunk / event records:

- MThd header (format 0/1/2, PPQ division; SMPTE division rejected)
- MTrk chunks of delta-timed events, running status resolved
- NoteOn / NoteOff, tempo (0x51), time signature (0x58), End-of-Track (0x2F)
- every other meta, sysex and channel message kept as OtherEvent with its
  exact payload so the parser stays aligned

Tolerated defects (logged and collected in SmfFile.warnings):
- header length > 6, unknown chunk ids, trailing bytes after the last track
- missing End-of-Track (appended, track flagged as repaired)

The writer half (write_vlq / serialize_smf) only exists for round-trip
checks and synthetic corpora.
"""

import logging
import struct
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Tuple, Union

from .errors import SmfError, UnsupportedSmfError

logger = logging.getLogger(__name__)

MAX_VLQ = 0x0FFFFFFF
DEFAULT_TEMPO = 500000  # µs per quarter note (120 BPM)

META_END_OF_TRACK = 0x2F
META_TEMPO = 0x51
META_TIME_SIGNATURE = 0x58


# ---------------------
# Event records
# ---------------------
def _check_7bit(name: str, value: int) -> None:
    if not 0 <= value <= 127:
        raise SmfError(f"{name} {value} outside 0-127")


def _check_channel(channel: int) -> None:
    if not 0 <= channel <= 15:
        raise SmfError(f"channel {channel} outside 0-15")


@dataclass(frozen=True)
class NoteOn:
    channel: int
    pitch: int
    velocity: int

    def __post_init__(self):
        _check_channel(self.channel)
        _check_7bit("pitch", self.pitch)
        _check_7bit("velocity", self.velocity)


@dataclass(frozen=True)
class NoteOff:
    channel: int
    pitch: int
    velocity: int = 0

    def __post_init__(self):
        _check_channel(self.channel)
        _check_7bit("pitch", self.pitch)
        _check_7bit("velocity", self.velocity)


@dataclass(frozen=True)
class TempoMeta:
    microseconds_per_quarter: int

    def __post_init__(self):
        if not 1 <= self.microseconds_per_quarter <= 0xFFFFFF:
            raise SmfError(f"tempo {self.microseconds_per_quarter} does not fit 1..2^24-1")

    @property
    def bpm(self) -> float:
        return 60_000_000 / self.microseconds_per_quarter


@dataclass(frozen=True)
class TimeSignatureMeta:
    numerator: int
    denominator: int
    clocks_per_click: int = 24
    notated_32nds: int = 8

    def __post_init__(self):
        if self.numerator < 1:
            raise SmfError(f"time signature numerator {self.numerator} < 1")
        if self.denominator < 1 or self.denominator & (self.denominator - 1):
            raise SmfError(f"time signature denominator {self.denominator} is not a power of two")


@dataclass(frozen=True)
class EndOfTrack:
    pass


@dataclass(frozen=True)
class OtherEvent:
    """Opaque event. kind is 'meta', 'sysex' or 'channel'."""
    kind: str
    status: int
    data: bytes
    meta_type: Optional[int] = None


EventBody = Union[NoteOn, NoteOff, TempoMeta, TimeSignatureMeta, EndOfTrack, OtherEvent]


@dataclass(frozen=True)
class TimedEvent:
    delta_ticks: int
    body: EventBody

    def __post_init__(self):
        if self.delta_ticks < 0:
            raise SmfError(f"negative delta-time {self.delta_ticks}")


@dataclass(frozen=True)
class TrackChunk:
    events: Tuple[TimedEvent, ...]
    repaired: bool = field(default=False, compare=False)

    def absolute_events(self) -> Iterator[Tuple[int, EventBody]]:
        """Yield (absolute_tick, body) in file order."""
        tick = 0
        for event in self.events:
            tick += event.delta_ticks
            yield tick, event.body


@dataclass(frozen=True)
class SmfFile:
    format: int
    division: int
    tracks: Tuple[TrackChunk, ...]
    warnings: Tuple[str, ...] = field(default=(), compare=False)
    byte_length: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.format not in (0, 1, 2):
            raise SmfError(f"unsupported SMF format {self.format}")
        if self.division <= 0:
            raise SmfError("division must be positive")
        if self.format == 0 and len(self.tracks) != 1:
            raise SmfError(f"format 0 file must hold exactly one track, has {len(self.tracks)}")


# ---------------------
# Variable-length quantities
# ---------------------
def read_vlq(data: bytes, offset: int, end: Optional[int] = None) -> Tuple[int, int]:
    """Decode a variable-length quantity.

    Returns (value, bytes_consumed). At most 4 bytes are read; a set
    continuation bit on the 4th byte is an overlong encoding.
    """
    limit = len(data) if end is None else min(end, len(data))
    if offset < 0 or offset >= limit:
        raise SmfError("variable-length quantity starts out of bounds", offset)

    value = 0
    for i in range(4):
        pos = offset + i
        if pos >= limit:
            raise SmfError("truncated variable-length quantity", pos)
        byte = data[pos]
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, i + 1
    raise SmfError("overlong variable-length quantity (5th byte)", offset + 4)


def write_vlq(value: int) -> bytes:
    if not 0 <= value <= MAX_VLQ:
        raise ValueError(f"VLQ value {value} outside 0..{MAX_VLQ}")
    groups = [value & 0x7F]
    value >>= 7
    while value:
        groups.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(groups))


# ---------------------
# Parsing
# ---------------------
def _take(data: bytes, pos: int, length: int, end: int) -> bytes:
    if pos + length > end:
        raise SmfError(f"truncated event: need {length} bytes, {max(0, end - pos)} left in chunk", pos)
    return data[pos:pos + length]


def _meta_event(meta_type: int, payload: bytes, offset: int, warn: Callable[[str], None]) -> EventBody:
    if meta_type == META_END_OF_TRACK:
        if payload:
            warn(f"End-of-Track with {len(payload)} payload bytes at offset {offset}")
        return EndOfTrack()

    if meta_type == META_TEMPO:
        value = int.from_bytes(payload, "big") if len(payload) == 3 else 0
        if value >= 1:
            return TempoMeta(value)
        warn(f"invalid tempo meta at offset {offset} kept as opaque event")

    elif meta_type == META_TIME_SIGNATURE:
        if len(payload) == 4 and payload[0] >= 1 and payload[1] <= 31:
            return TimeSignatureMeta(payload[0], 2 ** payload[1], payload[2], payload[3])
        warn(f"invalid time signature meta at offset {offset} kept as opaque event")

    return OtherEvent("meta", 0xFF, payload, meta_type)


def _channel_event(status: int, payload: bytes) -> EventBody:
    kind = status & 0xF0
    channel = status & 0x0F
    if kind == 0x90:
        return NoteOn(channel, payload[0], payload[1])
    if kind == 0x80:
        return NoteOff(channel, payload[0], payload[1])
    return OtherEvent("channel", status, payload)


def _parse_track(data: bytes, start: int, end: int, index: int,
                 warn: Callable[[str], None]) -> TrackChunk:
    events: List[TimedEvent] = []
    pos = start
    running_status: Optional[int] = None

    while pos < end:
        delta, consumed = read_vlq(data, pos, end)
        pos += consumed
        if pos >= end:
            raise SmfError(f"track {index}: truncated event after delta-time", pos)

        status = data[pos]
        if status < 0x80:
            if running_status is None:
                raise SmfError(f"track {index}: data byte in status position without running status", pos)
            status = running_status
        else:
            pos += 1

        if status == 0xFF:
            meta_offset = pos - 1
            meta_type = _take(data, pos, 1, end)[0]
            pos += 1
            length, consumed = read_vlq(data, pos, end)
            pos += consumed
            payload = _take(data, pos, length, end)
            pos += length
            body = _meta_event(meta_type, payload, meta_offset, warn)
        elif status in (0xF0, 0xF7):
            length, consumed = read_vlq(data, pos, end)
            pos += consumed
            payload = _take(data, pos, length, end)
            pos += length
            body = OtherEvent("sysex", status, payload)
        elif status > 0xF0:
            raise SmfError(f"track {index}: unexpected system status byte 0x{status:02X}", pos - 1)
        else:
            running_status = status
            size = 1 if status & 0xF0 in (0xC0, 0xD0) else 2
            payload = _take(data, pos, size, end)
            if any(b & 0x80 for b in payload):
                raise SmfError(f"track {index}: channel data byte has the high bit set", pos)
            pos += size
            body = _channel_event(status, payload)

        events.append(TimedEvent(delta, body))
        if isinstance(body, EndOfTrack):
            if pos < end:
                warn(f"track {index}: ignoring {end - pos} bytes after End-of-Track")
            return TrackChunk(tuple(events))

    warn(f"track {index}: missing End-of-Track, appended")
    events.append(TimedEvent(0, EndOfTrack()))
    return TrackChunk(tuple(events), repaired=True)


def parse_smf(data: bytes) -> SmfFile:
    """Parse a complete Standard MIDI File.

    Raises SmfError (UnsupportedSmfError for SMPTE division) on malformed
    input; never any other exception type for bytes input.
    """
    data = bytes(data)
    warnings: List[str] = []

    def warn(message: str) -> None:
        logger.warning(message)
        warnings.append(message)

    if data[:4] != b"MThd":
        raise SmfError("not an SMF file", 0)
    if len(data) < 14:
        raise SmfError("truncated header chunk", len(data))

    header_length = struct.unpack_from(">I", data, 4)[0]
    if header_length < 6:
        raise SmfError(f"header length {header_length} is shorter than 6", 4)
    if 8 + header_length > len(data):
        raise SmfError(f"truncated header chunk: declares {header_length} bytes", 4)
    if header_length > 6:
        warn(f"header declares {header_length} bytes; skipping {header_length - 6} extra bytes")

    fmt, track_count, division = struct.unpack_from(">HHH", data, 8)
    if fmt not in (0, 1, 2):
        raise SmfError(f"unsupported SMF format {fmt}", 8)
    if division & 0x8000:
        raise UnsupportedSmfError("SMPTE time division is not supported", 12)
    if division == 0:
        raise SmfError("division must be positive", 12)
    if fmt == 0 and track_count != 1:
        raise SmfError(f"format 0 file declares {track_count} tracks", 10)

    offset = 8 + header_length
    tracks: List[TrackChunk] = []
    while len(tracks) < track_count:
        if offset + 8 > len(data):
            raise SmfError(f"truncated file: expected {track_count} tracks, found {len(tracks)}", offset)
        chunk_id = data[offset:offset + 4]
        length = struct.unpack_from(">I", data, offset + 4)[0]
        body_start = offset + 8
        body_end = body_start + length
        if body_end > len(data):
            raise SmfError(
                f"truncated chunk {chunk_id.decode('latin-1')!r}: declares {length} bytes, "
                f"{len(data) - body_start} available", offset)

        if chunk_id == b"MTrk":
            tracks.append(_parse_track(data, body_start, body_end, len(tracks), warn))
        else:
            warn(f"skipping unknown chunk {chunk_id.decode('latin-1')!r} at offset {offset}")
        offset = body_end

    if offset < len(data):
        warn(f"ignoring {len(data) - offset} trailing bytes after the final track")
        offset = len(data)

    return SmfFile(fmt, division, tuple(tracks), tuple(warnings), offset)


# ---------------------
# Writing (round-trip support)
# ---------------------
def _encode_body(body: EventBody) -> bytes:
    if isinstance(body, NoteOn):
        return bytes([0x90 | body.channel, body.pitch, body.velocity])
    if isinstance(body, NoteOff):
        return bytes([0x80 | body.channel, body.pitch, body.velocity])
    if isinstance(body, TempoMeta):
        return bytes([0xFF, META_TEMPO, 3]) + body.microseconds_per_quarter.to_bytes(3, "big")
    if isinstance(body, TimeSignatureMeta):
        exponent = body.denominator.bit_length() - 1
        return bytes([0xFF, META_TIME_SIGNATURE, 4, body.numerator, exponent,
                      body.clocks_per_click, body.notated_32nds])
    if isinstance(body, EndOfTrack):
        return bytes([0xFF, META_END_OF_TRACK, 0])
    if body.kind == "meta":
        return bytes([0xFF, body.meta_type]) + write_vlq(len(body.data)) + body.data
    if body.kind == "sysex":
        return bytes([body.status]) + write_vlq(len(body.data)) + body.data
    return bytes([body.status]) + body.data


def serialize_smf(smf: SmfFile) -> bytes:
    """Encode an SmfFile with explicit status bytes on every event."""
    chunks = [b"MThd" + struct.pack(">IHHH", 6, smf.format, len(smf.tracks), smf.division)]
    for track in smf.tracks:
        body = b"".join(write_vlq(ev.delta_ticks) + _encode_body(ev.body) for ev in track.events)
        chunks.append(b"MTrk" + struct.pack(">I", len(body)) + body)
    return b"".join(chunks)
