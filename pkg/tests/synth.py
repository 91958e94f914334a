"""Seeded synthetic corpora for tests that would otherwise need the real dataset.

Tunes are built from short motifs over a Shour-like ladder with koron
notes, repeated and shifted by a degree, with long closing notes. That
gives them the repetition Sequitur feeds on and realistic framework sizes.
"""
from __future__ import annotations

import random
from pathlib import Path

from gusheh.corpus import (
    ManifestEntry, MICROTONE_BEND, Note, Tune, midi_to_note_name, quarter_pitch,
    serialize_datasheet, serialize_manifest,
)

K = MICROTONE_BEND
# F3 .. Bb4 with Ak koron; the D slot is D or Dk depending on the tune
LADDER = [(53, 0), (55, 0), (56, K), (58, 0), (60, 0), None, (63, 0), (65, 0), (67, 0), (68, K), (70, 0)]


def _framework(rng):
    d_slot = (62, 0) if rng.random() < 0.5 else (61, K)
    ladder = [p if p is not None else d_slot for p in LADDER]
    size = rng.randint(5, 8)
    start = rng.randint(0, len(ladder) - size)
    return ladder[start:start + size]


def _motif(rng, span):
    steps = [rng.choice((-2, -1, -1, 0, 1, 1, 2)) for _ in range(rng.randint(3, 6))]
    durs = [rng.choice((1, 2, 2, 2, 4)) for _ in steps]
    return list(zip(steps, durs))


def notes_from_pairs(pairs, main_octave_start="F3"):
    """(midi, bend, duration) triples -> Notes with quarter-tone intervals."""
    notes = []
    prev = None
    for midi, bend, dur in pairs:
        qp = quarter_pitch(midi, bend)
        notes.append(Note(midi_to_note_name(midi, bend, main_octave_start), midi, bend, dur,
                          0 if prev is None else qp - prev))
        prev = qp
    return tuple(notes)


def synthetic_tune(rng: random.Random, tune_id: str, n_notes: int) -> Tune:
    fw = _framework(rng)
    top = len(fw) - 1
    motifs = [_motif(rng, top) for _ in range(rng.randint(2, 4))]
    pos = rng.randint(0, top)
    out = []
    while len(out) < n_notes:
        motif = rng.choice(motifs)
        shift = rng.choice((0, 0, 0, 1, -1))
        for _ in range(rng.choice((1, 2, 2, 3))):
            for step, dur in motif:
                pos = min(max(pos + step + shift, 0), top)
                shift = 0
                out.append((*fw[pos], dur))
        out[-1] = (*out[-1][:2], rng.choice((4, 8)))
    return Tune(tune_id, notes_from_pairs(out[:n_notes]))


def synthetic_corpus(seed: int = 7, n_tunes: int = 29, lo: int = 60, hi: int = 420) -> list[Tune]:
    rng = random.Random(seed)
    return [synthetic_tune(rng, f"synth{i:02d}", rng.randint(lo, hi)) for i in range(n_tunes)]


def random_tune(rng: random.Random, tune_id: str = "rand", max_len: int = 60) -> Tune:
    """Unstructured tune: any pitch 0..127, any bend, any duration class."""
    pairs = [(rng.randint(0, 127), rng.choice((0, K)), rng.choice((1, 2, 4, 8)))
             for _ in range(rng.randint(1, max_len))]
    return Tune(tune_id, notes_from_pairs(pairs))


def write_corpus(tunes, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    for t in tunes:
        (directory / f"{t.id}.csv").write_text(serialize_datasheet(t), encoding="utf-8")
    entries = [ManifestEntry(t.id, "F3", i) for i, t in enumerate(tunes)]
    (directory / "manifest.csv").write_text(serialize_manifest(entries), encoding="utf-8")
    return directory


def random_grammar(rng: random.Random, mutations: int = 3):
    """Sequitur grammar of a random sequence, then a few random mutations."""
    from gusheh.grammar import induce
    from gusheh.mutation import mutate

    alphabet = rng.randint(2, 8)
    g = induce([rng.randrange(alphabet) for _ in range(rng.randint(2, 80))])
    for _ in range(rng.randint(0, mutations)):
        g, _ = mutate(g, rng)
    return g
