"""Corpus data model and file formats.

A tune is stored as a CSV data sheet with the header
``Note,Duration,MIDI,Interval,Bend``, one row per note in playing order.
Quarter tones use the natural/flat MIDI number plus a pitch bend of 2048:
koron sits on the MIDI number of the flattened natural, sori on the
natural itself.

Optional sidecars:

* ``<id>.structure`` -- bracket hierarchy such as ``[12 [5] [7]]``.
* ``manifest.csv`` -- ``id,main_octave_start,order`` for the whole corpus.
"""
from __future__ import annotations

import csv
import enum
import io
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError, ValidationError

DATASHEET_HEADER = ("Note", "Duration", "MIDI", "Interval", "Bend")
MANIFEST_HEADER = ("id", "main_octave_start", "order")
MANIFEST_NAME = "manifest.csv"
STRUCTURE_SUFFIX = ".structure"

MICROTONE_BEND = 2048
DURATIONS = (1, 2, 4, 8)
DEFAULT_MAIN_OCTAVE = "F3"

# semitone position of each natural within the octave, C = 0
NATURAL_PC = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
LETTERS = "CDEFGAB"


class Accidental(enum.Enum):
    NATURAL = ""
    FLAT = "b"
    KORON = "k"
    SORI = "s"
    SHARP = "#"

    @property
    def semitones(self) -> int:
        """Offset of the MIDI number from the natural."""
        return {"": 0, "b": -1, "k": -1, "s": 0, "#": 1}[self.value]

    @property
    def microtonal(self) -> bool:
        return self in (Accidental.KORON, Accidental.SORI)


_NAME_RE = re.compile(r"^([A-G])([bks#]?)(?:([+-])(\d+))?$")


@dataclass(frozen=True)
class NoteName:
    letter: str
    accidental: Accidental = Accidental.NATURAL
    octave_offset: int = 0

    def __post_init__(self):
        if self.letter not in NATURAL_PC:
            raise ValueError(f"bad note letter {self.letter!r}")

    @classmethod
    def parse(cls, text: str) -> "NoteName":
        m = _NAME_RE.match(text.strip())
        if not m:
            raise ValueError(f"cannot parse note name {text!r}")
        letter, acc, sign, num = m.groups()
        offset = 0
        if sign:
            offset = int(num) if sign == "+" else -int(num)
        return cls(letter, Accidental(acc), offset)

    def __str__(self) -> str:
        s = self.letter + self.accidental.value
        if self.octave_offset:
            s += f"{self.octave_offset:+d}"
        return s


# The 18 pitch classes playable on traditional instruments, low to high.
CHROMATIC_SCALE = tuple(
    NoteName.parse(n)
    for n in "C Db Dk D Eb Ek E F Fs F# Gk G Ab Ak A Bb Bk B".split()
)


def quarter_pitch(midi: int, bend: int) -> int:
    """Pitch in quarter-tone units: 2*midi, plus one for a microtonal bend."""
    return 2 * midi + (1 if bend == MICROTONE_BEND else 0)


def scale_gaps() -> list[int]:
    """Quarter-tone gaps between adjacent members of CHROMATIC_SCALE."""
    qps = [quarter_pitch(*note_name_to_midi(n, 60)) for n in CHROMATIC_SCALE]
    return [b - a for a, b in zip(qps, qps[1:])]


_PITCH_RE = re.compile(r"^([A-G])([b#]?)(-?\d+)$")


def parse_pitch(text: str | int) -> int:
    """Scientific pitch (``F3``, ``Bb4``) or a bare MIDI number to MIDI."""
    if isinstance(text, int):
        return text
    text = text.strip()
    if text.lstrip("-").isdigit():
        return int(text)
    m = _PITCH_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse pitch {text!r}")
    letter, acc, octave = m.groups()
    shift = {"": 0, "b": -1, "#": 1}[acc]
    return 12 * (int(octave) + 1) + NATURAL_PC[letter] + shift


def note_name_to_midi(name: NoteName, main_octave_start: int | str = DEFAULT_MAIN_OCTAVE) -> tuple[int, int]:
    """Map a corpus note name to ``(midi, bend)``.

    Letters are placed in the octave that starts at ``main_octave_start``
    (a MIDI number or scientific pitch), then the accidental and the
    octave offset are applied.
    """
    start = parse_pitch(main_octave_start)
    natural = start + (NATURAL_PC[name.letter] - start) % 12
    midi = natural + name.accidental.semitones + 12 * name.octave_offset
    bend = MICROTONE_BEND if name.accidental.microtonal else 0
    return midi, bend


# spellings used when only a MIDI number is known
_PLAIN_SPELLING = {
    0: ("C", ""), 1: ("D", "b"), 2: ("D", ""), 3: ("E", "b"), 4: ("E", ""),
    5: ("F", ""), 6: ("F", "#"), 7: ("G", ""), 8: ("A", "b"), 9: ("A", ""),
    10: ("B", "b"), 11: ("B", ""),
}


def midi_to_note_name(midi: int, bend: int = 0, main_octave_start: int | str = DEFAULT_MAIN_OCTAVE) -> NoteName:
    """Spell ``(midi, bend)`` as a corpus note name; inverse of note_name_to_midi.

    Microtones are spelled koron when the next semitone is a natural
    (Eb+bend -> Ek), otherwise sori of the natural (F+bend -> Fs).
    """
    start = parse_pitch(main_octave_start)
    if bend == MICROTONE_BEND:
        if (midi + 1) % 12 in NATURAL_PC.values():
            letter, acc, natural = _PLAIN_SPELLING[(midi + 1) % 12][0], Accidental.KORON, midi + 1
        else:
            letter, acc, natural = _PLAIN_SPELLING[midi % 12][0], Accidental.SORI, midi
    else:
        letter, suffix = _PLAIN_SPELLING[midi % 12]
        acc = Accidental(suffix)
        natural = midi - acc.semitones
    base = start + (NATURAL_PC[letter] - start) % 12
    return NoteName(letter, acc, (natural - base) // 12)


@dataclass(frozen=True)
class Note:
    name: NoteName
    midi: int
    bend: int = 0
    duration: int = 2
    interval_qt: int = 0

    @property
    def quarter_pitch(self) -> int:
        return quarter_pitch(self.midi, self.bend)


@dataclass(frozen=True)
class StructureTree:
    """Node of the bracket hierarchy; ``span`` is a half-open note range or None."""

    children: tuple["StructureTree", ...] = ()
    span: tuple[int, int] | None = None

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass(frozen=True)
class Tune:
    id: str
    notes: tuple[Note, ...]
    structure: StructureTree | None = field(default=None, compare=True)

    def __post_init__(self):
        if not self.notes:
            raise ValueError("a tune needs at least one note")
        object.__setattr__(self, "notes", tuple(self.notes))

    def __len__(self):
        return len(self.notes)

    @property
    def pitches(self) -> list[int]:
        return [n.midi for n in self.notes]

    def pairs(self) -> list[tuple[int, int]]:
        """(midi, duration) per note."""
        return [(n.midi, n.duration) for n in self.notes]


def make_tune(tune_id: str, pairs, source: Tune | None = None,
              main_octave_start: int | str = DEFAULT_MAIN_OCTAVE) -> Tune:
    """Build a Tune from (midi, duration) pairs; intervals are recomputed.

    Pitches that occur in ``source`` reuse its spelling and bend (a tune
    never holds two alterations of one degree, so MIDI -> name is unique);
    other pitches get a plain spelling and bend 0.
    """
    spelled = {n.midi: (n.name, n.bend) for n in source.notes} if source is not None else {}
    notes = []
    prev = None
    for midi, dur in pairs:
        name, bend = spelled.get(midi) or (midi_to_note_name(midi, 0, main_octave_start), 0)
        qp = quarter_pitch(midi, bend)
        notes.append(Note(name, midi, bend, dur, 0 if prev is None else qp - prev))
        prev = qp
    return Tune(tune_id, tuple(notes))


# ---------------------------------------------------------------- data sheets

def _int_field(value: str, column: str, row: int) -> int:
    try:
        return int(value.strip())
    except ValueError:
        raise FormatError(f"{column} is not an integer: {value!r}", row=row) from None


def parse_datasheet(text: str, tune_id: str = "tune") -> Tune:
    """Parse a CSV data sheet into a Tune."""
    reader = csv.reader(io.StringIO(text.lstrip("﻿")))
    header = None
    notes = []
    row_no = 0
    for record in reader:
        if not record or all(not c.strip() for c in record):
            continue
        if header is None:
            header = tuple(c.strip() for c in record)
            if header != DATASHEET_HEADER:
                raise FormatError(f"expected header {','.join(DATASHEET_HEADER)}, got {','.join(header)}", row=0)
            continue
        row_no += 1
        if len(record) != len(DATASHEET_HEADER):
            raise FormatError(f"expected {len(DATASHEET_HEADER)} fields, got {len(record)}", row=row_no)
        name_s, dur_s, midi_s, int_s, bend_s = record
        try:
            name = NoteName.parse(name_s)
        except ValueError as e:
            raise FormatError(str(e), row=row_no) from None
        duration = _int_field(dur_s, "Duration", row_no)
        midi = _int_field(midi_s, "MIDI", row_no)
        bend = _int_field(bend_s, "Bend", row_no)
        if row_no == 1 and not int_s.strip():
            interval = 0
        else:
            interval = _int_field(int_s, "Interval", row_no)
        if duration not in DURATIONS:
            raise ValidationError(f"duration {duration} not in {DURATIONS}", row=row_no)
        if bend not in (0, MICROTONE_BEND):
            raise ValidationError(f"bend {bend} not in (0, {MICROTONE_BEND})", row=row_no)
        if not 0 <= midi <= 127:
            raise ValidationError(f"MIDI number {midi} out of range", row=row_no)
        if row_no == 1 and interval != 0:
            raise ValidationError(f"first note must have interval 0, got {interval}", row=row_no)
        notes.append(Note(name, midi, bend, duration, interval))
    if header is None:
        raise FormatError("empty data sheet")
    if not notes:
        raise FormatError("data sheet has no notes")
    return Tune(tune_id, tuple(notes))


def serialize_datasheet(tune: Tune) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DATASHEET_HEADER)
    for n in tune.notes:
        w.writerow([str(n.name), n.duration, n.midi, n.interval_qt, n.bend])
    return buf.getvalue()


def validate_tune(tune: Tune, main_octave_start: int | str | None = None) -> list[str]:
    """Return human-readable violations; empty when the tune is consistent.

    With ``main_octave_start`` the note names are also checked against the
    MIDI and bend columns.
    """
    problems = []
    prev = None
    for i, n in enumerate(tune.notes, start=1):
        if n.duration not in DURATIONS:
            problems.append(f"row {i}: duration {n.duration} not in {DURATIONS}")
        if n.bend not in (0, MICROTONE_BEND):
            problems.append(f"row {i}: bend {n.bend} not in (0, {MICROTONE_BEND})")
        elif (n.bend == MICROTONE_BEND) != n.name.accidental.microtonal:
            problems.append(f"row {i}: bend {n.bend} does not match accidental of {n.name}")
        if main_octave_start is not None:
            expected = note_name_to_midi(n.name, main_octave_start)
            if expected != (n.midi, n.bend):
                problems.append(f"row {i}: {n.name} maps to {expected}, sheet has {(n.midi, n.bend)}")
        qp = n.quarter_pitch
        computed = 0 if prev is None else qp - prev
        if n.interval_qt != computed:
            problems.append(f"row {i}: interval {n.interval_qt} but pitches differ by {computed} quarter tones")
        prev = qp
    if tune.structure is not None:
        problems.extend(_structure_problems(tune.structure, len(tune)))
    return problems


# ----------------------------------------------------------------- structure

_STRUCT_TOKEN = re.compile(r"\s*(?:(\[)|(\])|(\d+)(?:@(\d+))?|(\S))")


def parse_structure(text: str, n_notes: int | None = None) -> StructureTree:
    """Parse a bracket hierarchy such as ``[ [ ] [ ] [ [ ] ] ]`` or ``[12 [5] [7]]``.

    Each ``[`` may be followed by a note count, optionally with ``@k`` to
    place the node ``k`` notes after its parent's start (default: right
    after the previous sibling). Counts are all-or-nothing: with them,
    spans are resolved and checked; without them, spans are None. If
    ``n_notes`` is given, the root covers ``[0, n_notes)``.
    """
    # nodes as [count, offset, children, position]
    stack: list[list] = []
    root = None
    pos = 0
    expect_header = False
    while pos < len(text):
        m = _STRUCT_TOKEN.match(text, pos)
        if m is None:  # trailing whitespace
            break
        start = m.start() + len(m.group(0)) - len(m.group(0).lstrip())
        pos = m.end()
        opening, closing, count, offset, junk = m.groups()
        if junk is not None:
            raise FormatError(f"unexpected character {junk!r}", position=start)
        if count is not None:
            if not expect_header:
                raise FormatError("note count must directly follow '['", position=start)
            stack[-1][0] = int(count)
            stack[-1][1] = int(offset) if offset is not None else None
            expect_header = False
            continue
        expect_header = False
        if opening:
            if root is not None and not stack:
                raise FormatError("text after the root node", position=start)
            node = [None, None, [], start]
            if stack:
                stack[-1][2].append(node)
            else:
                root = node
            stack.append(node)
            expect_header = True
        else:
            if not stack:
                raise FormatError("unmatched ']'", position=start)
            stack.pop()
    if root is None:
        raise FormatError("no '[' found", position=len(text))
    if stack:
        raise FormatError("unclosed '['", position=len(text))

    nodes = []

    def collect(n):
        nodes.append(n)
        for c in n[2]:
            collect(c)

    collect(root)
    if root[1] is not None:
        raise FormatError("the root node cannot carry an offset", position=root[3])
    if n_notes is not None:
        if root[0] is None:
            root[0] = n_notes
        elif root[0] != n_notes:
            raise ValidationError(f"root count {root[0]} does not match tune length {n_notes}")
    with_count = sum(1 for n in nodes if n[0] is not None)
    if with_count == 0:
        def bare(n):
            return StructureTree(tuple(bare(c) for c in n[2]))
        return bare(root)
    if with_count != len(nodes):
        missing = next(n for n in nodes if n[0] is None)
        raise FormatError("either every node or no node carries a note count", position=missing[3])

    def build(n, begin):
        span = (begin, begin + n[0])
        cursor = begin
        kids = []
        for c in n[2]:
            cstart = begin + c[1] if c[1] is not None else cursor
            if cstart < cursor or cstart + c[0] > span[1]:
                raise ValidationError(f"node at position {c[3]} overlaps a sibling or leaves its parent")
            kids.append(build(c, cstart))
            cursor = cstart + c[0]
        return StructureTree(tuple(kids), span)

    return build(root, 0)


def render_structure(tree: StructureTree) -> str:
    def render(node, parent_start, prev_end):
        head = "["
        if node.span is not None:
            head += str(node.span[1] - node.span[0])
            if parent_start is not None and node.span[0] != prev_end:
                head += f"@{node.span[0] - parent_start}"
        parts = [head]
        cursor = node.span[0] if node.span else None
        for c in node.children:
            parts.append(render(c, node.span[0] if node.span else None, cursor))
            cursor = c.span[1] if c.span else None
        return " ".join(parts) + "]"

    return render(tree, None, None)


def _structure_problems(tree: StructureTree, n_notes: int) -> list[str]:
    if tree.span is None:
        return []
    problems = []
    if tree.span != (0, n_notes):
        problems.append(f"structure root spans {tree.span}, tune has {n_notes} notes")
    for node in tree.walk():
        cursor = node.span[0]
        for c in node.children:
            if c.span[0] < cursor or c.span[1] > node.span[1] or c.span[0] > c.span[1]:
                problems.append(f"structure node {c.span} escapes or overlaps within {node.span}")
            cursor = c.span[1]
    return problems


def attach_structure(tune: Tune, tree: StructureTree) -> Tune:
    if tree.span is not None and tree.span != (0, len(tune)):
        raise ValidationError(f"structure covers {tree.span}, tune has {len(tune)} notes")
    return Tune(tune.id, tune.notes, tree)


# ------------------------------------------------------------------ manifest

@dataclass(frozen=True)
class ManifestEntry:
    id: str
    main_octave_start: str
    order: int


def parse_manifest(text: str) -> list[ManifestEntry]:
    reader = csv.reader(io.StringIO(text.lstrip("﻿")))
    rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows or tuple(c.strip() for c in rows[0]) != MANIFEST_HEADER:
        raise FormatError(f"manifest header must be {','.join(MANIFEST_HEADER)}", row=0)
    entries = []
    for i, r in enumerate(rows[1:], start=1):
        if len(r) != 3:
            raise FormatError(f"expected 3 fields, got {len(r)}", row=i)
        tune_id, start, order = (c.strip() for c in r)
        try:
            parse_pitch(start)
        except ValueError as e:
            raise FormatError(str(e), row=i) from None
        entries.append(ManifestEntry(tune_id, start, _int_field(order, "order", i)))
    return sorted(entries, key=lambda e: e.order)


def serialize_manifest(entries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MANIFEST_HEADER)
    for e in entries:
        w.writerow([e.id, e.main_octave_start, e.order])
    return buf.getvalue()


def load_tune(path: str | Path) -> Tune:
    """Read a data sheet and its structure sidecar, if one exists."""
    path = Path(path)
    tune = parse_datasheet(path.read_text(encoding="utf-8"), tune_id=path.stem)
    sidecar = path.with_suffix(STRUCTURE_SUFFIX)
    if sidecar.exists():
        tune = attach_structure(tune, parse_structure(sidecar.read_text(encoding="utf-8"), len(tune)))
    return tune


def read_manifest(directory: str | Path) -> list[ManifestEntry]:
    """Manifest entries of a corpus directory.

    Without ``manifest.csv`` every data sheet is listed in file-name order
    with the default main octave.
    """
    directory = Path(directory)
    manifest = directory / MANIFEST_NAME
    if manifest.exists():
        return parse_manifest(manifest.read_text(encoding="utf-8"))
    sheets = sorted(p for p in directory.glob("*.csv") if p.name != MANIFEST_NAME)
    return [ManifestEntry(p.stem, DEFAULT_MAIN_OCTAVE, i) for i, p in enumerate(sheets)]


def load_corpus(directory: str | Path) -> list[Tune]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {directory}")
    return [load_tune(directory / f"{e.id}.csv") for e in read_manifest(directory)]
