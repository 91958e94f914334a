"""Standard MIDI File export/import with quarter tones as pitch bends.

Export writes format 0, one track, strictly sequential notes. Every note
is preceded by a pitch-bend event: centre (8192) for plain notes, centre
+ 2048 for koron/sori, i.e. +1/4 tone under the default +-2 semitone
bend range.
"""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field

from .corpus import DEFAULT_MAIN_OCTAVE, DURATIONS, MICROTONE_BEND, Note, Tune, midi_to_note_name, quarter_pitch
from .errors import FormatError, UnsupportedMidiError

BEND_CENTER = 8192
BEND_TOLERANCE = 64


@dataclass(frozen=True)
class MidiConfig:
    ticks_per_quarter: int = 480
    tempo_bpm: float = 120.0
    channel: int = 0
    velocity: int = 80

    def __post_init__(self):
        if self.ticks_per_quarter % 4 or not 0 < self.ticks_per_quarter < 0x8000:
            raise ValueError("ticks_per_quarter must be a positive multiple of 4 below 32768")
        if not 0 <= self.channel < 16:
            raise ValueError("channel must be 0..15")

    def ticks(self, duration: int) -> int:
        """Sixteenth, eighth, quarter, half for duration classes 1, 2, 4, 8."""
        return self.ticks_per_quarter * duration // 4


def _vlq(n: int) -> bytes:
    out = [n & 0x7F]
    n >>= 7
    while n:
        out.append(0x80 | (n & 0x7F))
        n >>= 7
    return bytes(reversed(out))


def _bend_bytes(channel: int, value: int) -> bytes:
    return bytes((0xE0 | channel, value & 0x7F, (value >> 7) & 0x7F))


def export_midi(tune: Tune, cfg: MidiConfig = MidiConfig()) -> bytes:
    ch = cfg.channel
    tempo = round(60_000_000 / cfg.tempo_bpm)
    track = bytearray()
    track += _vlq(0) + b"\xff\x51\x03" + tempo.to_bytes(3, "big")
    for note in tune.notes:
        if note.duration not in DURATIONS:
            raise ValueError(f"duration {note.duration} not in {DURATIONS}")
        bend = BEND_CENTER + (MICROTONE_BEND if note.bend == MICROTONE_BEND else 0)
        track += _vlq(0) + _bend_bytes(ch, bend)
        track += _vlq(0) + bytes((0x90 | ch, note.midi, cfg.velocity))
        track += _vlq(cfg.ticks(note.duration)) + bytes((0x80 | ch, note.midi, 0))
    track += _vlq(0) + b"\xff\x2f\x00"
    header = b"MThd" + struct.pack(">IHHH", 6, 0, 1, cfg.ticks_per_quarter)
    return header + b"MTrk" + struct.pack(">I", len(track)) + bytes(track)


# ------------------------------------------------------------------ import

@dataclass
class MidiImport:
    tune: Tune
    ticks_per_quarter: int
    bend_conventions: set[str] = field(default_factory=set)
    warnings: list[str] = field(default_factory=list)


def _read_vlq(data: bytes, pos: int) -> tuple[int, int]:
    value = 0
    for _ in range(4):
        if pos >= len(data):
            raise FormatError("truncated variable-length quantity", position=pos)
        b = data[pos]
        pos += 1
        value = (value << 7) | (b & 0x7F)
        if not b & 0x80:
            return value, pos
    raise FormatError("variable-length quantity longer than 4 bytes", position=pos)


_DATA_LEN = {0x80: 2, 0x90: 2, 0xA0: 2, 0xB0: 2, 0xC0: 1, 0xD0: 1, 0xE0: 2}


def _parse_track(data: bytes, start: int, end: int, track_no: int):
    """Yield (tick, priority, track, seq, kind, channel, a, b) channel events."""
    pos = start
    tick = 0
    status = None
    seq = 0
    events = []
    while pos < end:
        delta, pos = _read_vlq(data, pos)
        tick += delta
        if pos >= end:
            raise FormatError("event truncated", position=pos)
        b = data[pos]
        if b == 0xFF:
            if pos + 1 >= end:
                raise FormatError("meta event truncated", position=pos)
            mtype = data[pos + 1]
            length, pos = _read_vlq(data, pos + 2)
            pos += length
            if mtype == 0x2F:
                break
            continue
        if b in (0xF0, 0xF7):
            length, pos = _read_vlq(data, pos + 1)
            pos += length
            continue
        if b & 0x80:
            status = b
            pos += 1
        elif status is None:
            raise FormatError("running status without a previous status byte", position=pos)
        kind = status & 0xF0
        n = _DATA_LEN.get(kind)
        if n is None:
            raise FormatError(f"unexpected status byte 0x{status:02x}", position=pos)
        args = data[pos:pos + n]
        if len(args) != n:
            raise FormatError("channel event truncated", position=pos)
        pos += n
        a = args[0]
        bb = args[1] if n == 2 else 0
        if kind == 0x90 and bb == 0:
            kind = 0x80
        priority = {0x80: 0, 0xE0: 1, 0x90: 2}.get(kind)
        if priority is not None:
            events.append((tick, priority, track_no, seq, kind, status & 0x0F, a, bb))
            seq += 1
    return events


def _classify_bend(value: int):
    """(bend, convention) for a raw 14-bit bend value, or (None, None)."""
    if abs(value - BEND_CENTER) <= BEND_TOLERANCE:
        return 0, None
    if abs(value - BEND_CENTER - MICROTONE_BEND) <= BEND_TOLERANCE:
        return MICROTONE_BEND, "offset"
    if abs(value - MICROTONE_BEND) <= BEND_TOLERANCE:
        return MICROTONE_BEND, "absolute"
    if value <= BEND_TOLERANCE:
        return 0, "absolute"
    return None, None


def _duration_class(ticks: int, tpq: int) -> int:
    if ticks <= 0:
        return DURATIONS[0]
    return min(DURATIONS, key=lambda d: abs(math.log2(ticks / (tpq * d / 4))))


def read_midi(data: bytes, tune_id: str = "midi", main_octave_start=DEFAULT_MAIN_OCTAVE) -> MidiImport:
    """Parse a monophonic SMF into a Tune plus import diagnostics."""
    if data[:4] != b"MThd" or len(data) < 14:
        raise FormatError("not a standard MIDI file", position=0)
    hlen, fmt, ntrks, division = struct.unpack(">IHHH", data[4:14])
    if division & 0x8000:
        raise UnsupportedMidiError("SMPTE time division is not supported")
    if fmt not in (0, 1):
        raise UnsupportedMidiError(f"MIDI format {fmt} is not supported")
    tpq = division
    pos = 8 + hlen
    events = []
    track_no = 0
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (clen,) = struct.unpack(">I", data[pos + 4:pos + 8])
        body = pos + 8
        if body + clen > len(data):
            raise FormatError("chunk runs past end of file", position=pos)
        if cid == b"MTrk":
            events.extend(_parse_track(data, body, body + clen, track_no))
            track_no += 1
        pos = body + clen
    events.sort()

    result_warnings = []
    conventions = set()
    bend = {}  # channel -> raw value
    sounding = None  # (channel, pitch, start, bend)
    raw_notes = []
    for tick, _, _, _, kind, ch, a, b in events:
        if kind == 0xE0:
            bend[ch] = a | (b << 7)
        elif kind == 0x90:
            if sounding is not None:
                raise UnsupportedMidiError(f"overlapping notes at tick {tick} (polyphony)")
            sounding = (ch, a, tick, bend.get(ch, BEND_CENTER))
        elif kind == 0x80 and sounding is not None and (ch, a) == sounding[:2]:
            raw_notes.append((sounding[1], sounding[2], tick, sounding[3]))
            sounding = None
    if sounding is not None:
        raise FormatError(f"note {sounding[1]} never released")
    if not raw_notes:
        raise FormatError("no notes found")

    notes = []
    prev = None
    for pitch, start, end, raw in raw_notes:
        value, conv = _classify_bend(raw)
        if conv:
            conventions.add(conv)
        if value is None:
            msg = f"bend {raw} at tick {start} is neither plain nor a quarter tone; treated as plain"
            warnings.warn(msg)
            result_warnings.append(msg)
            value = 0
        qp = quarter_pitch(pitch, value)
        notes.append(Note(midi_to_note_name(pitch, value, main_octave_start), pitch, value,
                          _duration_class(end - start, tpq), 0 if prev is None else qp - prev))
        prev = qp
    return MidiImport(Tune(tune_id, tuple(notes)), tpq, conventions, result_warnings)


def import_midi(data: bytes, tune_id: str = "midi", main_octave_start=DEFAULT_MAIN_OCTAVE) -> Tune:
    return read_midi(data, tune_id, main_octave_start).tune


def triples(tune: Tune) -> list[tuple[int, int, int]]:
    """(midi, bend, duration) per note: what a MIDI round trip preserves."""
    return [(n.midi, n.bend, n.duration) for n in tune.notes]
