"""Command-line entry point.

Exit codes: 0 success, 1 pipeline error, 2 I/O or format error.
"""
from __future__ import annotations

import argparse
import logging
import os
import random
import sys
from pathlib import Path

from . import corpus as corpus_mod
from .errors import FormatError, GushehError
from .grammar import dump_grammar, induce, pai, topology_dot
from .metrics import concat_analysis, metrics_csv, run_experiment
from .midi_io import MidiConfig, export_midi
from .mutation import generate_variation, write_log
from .representation import SETUPS, SetupConfig, to_tokens

log = logging.getLogger("gusheh")

CORPUS_ENV = "GUSHEH_CORPUS_DIR"
EXIT_PIPELINE = 1
EXIT_IO = 2


class CliError(Exception):
    def __init__(self, message, code=EXIT_IO):
        super().__init__(message)
        self.code = code


def _add_setup_flags(p):
    g = p.add_argument_group("representation setup")
    g.add_argument("--setup", choices=sorted(SETUPS), help="named setup (default setup_1); axis flags override it")
    g.add_argument("--basis", choices=["pitch", "interval"])
    g.add_argument("--scale", choices=["chromatic", "diatonic"])
    g.add_argument("--direction", choices=["forward", "backward"])
    g.add_argument("--shape", choices=["integer", "tuple"])
    g.add_argument("--repair", choices=["none", "clamp", "mirror"])


def _setup_from_args(args) -> SetupConfig:
    base = SETUPS[args.setup or "setup_1"]
    fields = {name: getattr(args, name) or getattr(base, name).value
              for name in ("basis", "scale", "direction", "shape", "repair")}
    try:
        return SetupConfig(**fields)
    except ValueError as e:
        raise CliError(f"invalid setup: {e}", EXIT_PIPELINE) from None


def _corpus_dir(arg) -> Path:
    path = arg or os.environ.get(CORPUS_ENV)
    if not path:
        raise CliError(f"no corpus directory given and {CORPUS_ENV} is not set")
    path = Path(path)
    if not path.is_dir():
        raise CliError(f"corpus directory not found: {path}")
    return path


def _resolve_input(arg) -> Path:
    path = Path(arg)
    if not path.exists() and not path.is_absolute() and os.environ.get(CORPUS_ENV):
        alt = Path(os.environ[CORPUS_ENV]) / path
        if alt.exists():
            return alt
    if not path.exists():
        raise CliError(f"file not found: {path}")
    return path


def _main_octave(path: Path, override):
    if override:
        return override
    if (path.parent / corpus_mod.MANIFEST_NAME).exists():
        for entry in corpus_mod.read_manifest(path.parent):
            if entry.id == path.stem:
                return entry.main_octave_start
    return corpus_mod.DEFAULT_MAIN_OCTAVE


def _write(path, text_or_bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(text_or_bytes, bytes):
        path.write_bytes(text_or_bytes)
    else:
        path.write_text(text_or_bytes, encoding="utf-8")


# ---------------------------------------------------------------- commands

def cmd_parse(args):
    tune = corpus_mod.load_tune(_resolve_input(args.input))
    cfg = _setup_from_args(args)
    g = induce(to_tokens(tune, cfg), enforce_utility=args.rule_utility)
    text = dump_grammar(g) + f"PAI: {pai(g)}\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    if args.dot:
        _write(args.dot, topology_dot(g))
    return 0


def cmd_topology(args):
    tune = corpus_mod.load_tune(_resolve_input(args.input))
    g = induce(to_tokens(tune, _setup_from_args(args)), enforce_utility=args.rule_utility)
    dot = topology_dot(g)
    if args.out:
        _write(args.out, dot)
    else:
        sys.stdout.write(dot)
    return 0


def cmd_variation(args):
    path = _resolve_input(args.input)
    tune = corpus_mod.load_tune(path)
    cfg = _setup_from_args(args)
    variant, records = generate_variation(tune, cfg, args.n, random.Random(args.seed))
    out = Path(args.out or ".")
    stem = out / variant.id
    _write(stem.with_suffix(".csv"), corpus_mod.serialize_datasheet(variant))
    _write(stem.with_suffix(".mid"), export_midi(variant, MidiConfig(tempo_bpm=args.tempo)))
    with open(stem.with_suffix(".mutations.jsonl"), "w", encoding="utf-8") as fh:
        write_log(records, fh)
    print(f"{variant.id}: {len(variant)} notes after {args.n} mutations -> {stem}.csv/.mid/.mutations.jsonl")
    return 0


def _parse_setups(text):
    names = [s.strip() for s in text.split(",") if s.strip()]
    unknown = [n for n in names if n not in SETUPS]
    if unknown:
        raise CliError(f"unknown setups: {', '.join(unknown)}", EXIT_PIPELINE)
    return {n: SETUPS[n] for n in names}


def cmd_experiment(args):
    tunes = corpus_mod.load_corpus(_corpus_dir(args.corpus))
    setups = _parse_setups(args.setups)
    runs = run_experiment(tunes, setups, args.n, args.seed, workers=args.workers)
    failed = [r for r in runs if not r.ok]
    for r in failed:
        log.error("cell %s/%s failed: %s", r.tune, r.setup, r.error)
    _write(args.out, metrics_csv(runs, args.seed))
    print(f"{len(runs) - len(failed)}/{len(runs)} cells succeeded -> {args.out}")
    return 0 if len(failed) < len(runs) else EXIT_PIPELINE


def cmd_concat(args):
    tunes = corpus_mod.load_corpus(_corpus_dir(args.corpus))
    pai_concat, pai_sum = concat_analysis(tunes, _setup_from_args(args))
    print(f"pai_concat {pai_concat}")
    print(f"pai_sum {pai_sum}")
    return 0


def cmd_export_midi(args):
    path = _resolve_input(args.input)
    tune = corpus_mod.load_tune(path)
    out = args.out or path.with_suffix(".mid")
    _write(out, export_midi(tune, MidiConfig(ticks_per_quarter=args.tpq, tempo_bpm=args.tempo)))
    print(f"wrote {out}")
    return 0


def cmd_validate(args):
    target = Path(args.path) if args.path else _corpus_dir(None)
    if not target.exists():
        target = _resolve_input(args.path)
    if target.is_dir():
        entries = corpus_mod.read_manifest(target)
        items = [(target / f"{e.id}.csv", args.main_octave or e.main_octave_start) for e in entries]
    else:
        items = [(target, _main_octave(target, args.main_octave))]
    bad = 0
    for path, start in items:
        problems = corpus_mod.validate_tune(corpus_mod.load_tune(path), start)
        for p in problems:
            print(f"{path.name}: {p}")
        bad += bool(problems)
    print(f"{len(items) - bad}/{len(items)} files valid")
    return EXIT_PIPELINE if bad else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gusheh", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="induce a grammar and print it with its PAI")
    p.add_argument("input")
    _add_setup_flags(p)
    p.add_argument("--dot", help="also write the rule topology as DOT")
    p.add_argument("--out", help="write the dump here instead of stdout")
    p.add_argument("--rule-utility", action="store_true", help="inline rules referenced only once")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("topology", help="write the rule topology as DOT")
    p.add_argument("input")
    _add_setup_flags(p)
    p.add_argument("--out")
    p.add_argument("--rule-utility", action="store_true")
    p.set_defaults(func=cmd_topology)

    p = sub.add_parser("variation", help="mutate a tune's grammar and write the variant")
    p.add_argument("input")
    _add_setup_flags(p)
    p.add_argument("--n", type=int, default=10, help="number of mutations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory (default: current)")
    p.add_argument("--tempo", type=float, default=120.0)
    p.set_defaults(func=cmd_variation)

    p = sub.add_parser("experiment", help="run mutation chains and write the metrics CSV")
    p.add_argument("corpus", nargs="?", help=f"corpus directory (default ${CORPUS_ENV})")
    p.add_argument("--setups", default=",".join(SETUPS))
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="metrics.csv")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("concat", help="PAI of the concatenated corpus vs. the sum of tune PAIs")
    p.add_argument("corpus", nargs="?")
    _add_setup_flags(p)
    p.set_defaults(func=cmd_concat)

    p = sub.add_parser("export-midi", help="write a data sheet as a MIDI file")
    p.add_argument("input")
    p.add_argument("--out")
    p.add_argument("--tempo", type=float, default=120.0)
    p.add_argument("--tpq", type=int, default=480)
    p.set_defaults(func=cmd_export_midi)

    p = sub.add_parser("validate", help="check data sheets for consistency")
    p.add_argument("path", nargs="?", help="data sheet or corpus directory")
    p.add_argument("--main-octave", help="main octave start, e.g. F3 (default from manifest)")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as e:
        print(f"gusheh: {e}", file=sys.stderr)
        return e.code
    except (OSError, FormatError) as e:
        print(f"gusheh: {e}", file=sys.stderr)
        return EXIT_IO
    except (GushehError, ValueError) as e:
        print(f"gusheh: {e}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
