"""Tune <-> token conversion across the representation axes.

A setup picks one option on each axis:

* basis -- absolute MIDI pitches or intervals between consecutive notes
* scale -- intervals in semitones (chromatic) or in degrees of the tune's
  modal framework (diatonic)
* direction -- read the tune forward, or reversed so the last note anchors
* shape -- (value, duration) tuples or bare integers
* repair -- how out-of-framework values are pulled back (see mutation)
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass
from enum import Enum

from .corpus import DURATIONS, Tune


class Basis(str, Enum):
    PITCH = "pitch"
    INTERVAL = "interval"


class Scale(str, Enum):
    CHROMATIC = "chromatic"
    DIATONIC = "diatonic"


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class Shape(str, Enum):
    INTEGER = "integer"
    TUPLE = "tuple"


class Repair(str, Enum):
    NONE = "none"
    CLAMP = "clamp"
    MIRROR = "mirror"


@dataclass(frozen=True)
class SetupConfig:
    basis: Basis = Basis.PITCH
    scale: Scale = Scale.CHROMATIC
    direction: Direction = Direction.FORWARD
    shape: Shape = Shape.TUPLE
    repair: Repair = Repair.NONE

    def __post_init__(self):
        for name, kind in (("basis", Basis), ("scale", Scale), ("direction", Direction),
                           ("shape", Shape), ("repair", Repair)):
            object.__setattr__(self, name, kind(getattr(self, name)))
        if self.repair is Repair.NONE and self.basis is not Basis.PITCH:
            raise ValueError("interval setups need a repair strategy (clamp or mirror)")
        if self.scale is Scale.DIATONIC and self.basis is not Basis.INTERVAL:
            raise ValueError("the diatonic scale is only defined for interval setups")

    @property
    def label(self) -> str:
        return "-".join(v.value for v in (self.basis, self.scale, self.direction, self.shape, self.repair))


SETUPS = {
    "setup_1": SetupConfig("pitch", "chromatic", "forward", "tuple", "none"),
    "setup_2": SetupConfig("interval", "chromatic", "forward", "tuple", "clamp"),
    "setup_3": SetupConfig("interval", "chromatic", "backward", "tuple", "clamp"),
    "setup_4": SetupConfig("interval", "diatonic", "backward", "tuple", "clamp"),
    "setup_5": SetupConfig("interval", "diatonic", "backward", "tuple", "mirror"),
}


def setup_name(cfg: SetupConfig) -> str:
    for name, c in SETUPS.items():
        if c == cfg:
            return name
    return cfg.label


@dataclass(frozen=True)
class Token:
    """Terminal symbol: pitch/interval value plus duration (None in integer shape)."""

    value: int
    duration: int | None = None

    def __str__(self):
        if self.duration is None:
            return str(self.value)
        return f"({self.value},{self.duration})"

    def to_json(self):
        return self.value if self.duration is None else [self.value, self.duration]

    @classmethod
    def from_json(cls, data):
        if isinstance(data, list):
            return cls(data[0], data[1])
        return cls(data)


@dataclass(frozen=True)
class ModalFramework:
    """Distinct pitches of a tune, ascending; degrees are 1-based."""

    pitches: tuple[int, ...]

    def __post_init__(self):
        ps = tuple(self.pitches)
        if not ps:
            raise ValueError("empty modal framework")
        if any(a >= b for a, b in zip(ps, ps[1:])):
            raise ValueError("framework pitches must be strictly ascending")
        object.__setattr__(self, "pitches", ps)

    def __len__(self):
        return len(self.pitches)

    def __contains__(self, pitch):
        i = bisect.bisect_left(self.pitches, pitch)
        return i < len(self.pitches) and self.pitches[i] == pitch

    def degree_of(self, pitch: int) -> int:
        i = bisect.bisect_left(self.pitches, pitch)
        if i == len(self.pitches) or self.pitches[i] != pitch:
            raise KeyError(pitch)
        return i + 1

    def pitch_of(self, degree: int) -> int:
        if not 1 <= degree <= len(self.pitches):
            raise IndexError(f"degree {degree} outside 1..{len(self.pitches)}")
        return self.pitches[degree - 1]

    @property
    def lowest(self):
        return self.pitches[0]

    @property
    def highest(self):
        return self.pitches[-1]


def build_modal_framework(tune: Tune) -> ModalFramework:
    return ModalFramework(tuple(sorted(set(tune.pitches))))


def _ordered_pairs(pairs, cfg):
    pairs = list(pairs)
    if cfg.direction is Direction.BACKWARD:
        pairs.reverse()
    return pairs


def to_tokens(tune: Tune, cfg: SetupConfig, fw: ModalFramework | None = None) -> list[Token]:
    """Tokenize a tune. ``fw`` overrides the tune's own framework (diatonic only)."""
    pairs = _ordered_pairs(tune.pairs(), cfg)
    if cfg.basis is Basis.PITCH:
        values = [p for p, _ in pairs]
    else:
        if cfg.scale is Scale.DIATONIC:
            fw = fw or build_modal_framework(tune)
            steps = [fw.degree_of(p) for p, _ in pairs]
        else:
            steps = [p for p, _ in pairs]
        values = [0] + [b - a for a, b in zip(steps, steps[1:])]
    if cfg.shape is Shape.INTEGER:
        return [Token(v) for v in values]
    return [Token(v, d) for v, (_, d) in zip(values, pairs)]


def from_tokens(tokens, cfg: SetupConfig, anchor: int | None = None, fw: ModalFramework | None = None,
                durations_fallback: int = 2) -> list[tuple[int, int]]:
    """Rebuild (midi, duration) pairs in playing order.

    Interval setups start at ``anchor`` (the original first pitch when
    forward, the last when backward) and accumulate intervals; every
    intermediate value outside the framework is repaired before the next
    step. The first token's value is ignored, only its duration is used.
    """
    from .mutation import repair_value  # deferred: mutation imports this module

    tokens = list(tokens)
    if not tokens:
        return []
    durations = [t.duration if t.duration is not None else durations_fallback for t in tokens]
    if any(d not in DURATIONS for d in durations):
        raise ValueError(f"token durations must be in {DURATIONS}")
    if cfg.basis is Basis.PITCH:
        pitches = [t.value for t in tokens]
        if cfg.repair is not Repair.NONE:
            if fw is None:
                raise ValueError("pitch repair needs a modal framework")
            pitches = [repair_value(p, fw, Scale.CHROMATIC, cfg.repair) for p in pitches]
    else:
        if anchor is None:
            raise ValueError("interval reconstruction needs an anchor pitch")
        if fw is None:
            raise ValueError("interval reconstruction needs the modal framework")
        if cfg.scale is Scale.DIATONIC:
            pos = fw.degree_of(anchor)
            degrees = [pos]
            for t in tokens[1:]:
                pos = repair_value(pos + t.value, fw, Scale.DIATONIC, cfg.repair)
                degrees.append(pos)
            pitches = [fw.pitch_of(d) for d in degrees]
        else:
            pos = anchor
            pitches = [pos]
            for t in tokens[1:]:
                pos = repair_value(pos + t.value, fw, Scale.CHROMATIC, cfg.repair)
                pitches.append(pos)
    pairs = list(zip(pitches, durations))
    if cfg.direction is Direction.BACKWARD:
        pairs.reverse()
    return pairs


def anchor_pitch(tune: Tune, cfg: SetupConfig) -> int:
    """The pitch interval reconstruction starts from."""
    return tune.notes[-1].midi if cfg.direction is Direction.BACKWARD else tune.notes[0].midi
