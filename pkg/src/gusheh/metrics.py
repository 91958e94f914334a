"""Per-step variation metrics, batch experiments and the concatenation analysis."""
from __future__ import annotations

import csv
import hashlib
import io
import logging
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from rapidfuzz.distance import Levenshtein

from .corpus import Tune
from .grammar import induce, pai
from .mutation import VariationPipeline
from .representation import SETUPS, SetupConfig, setup_name, to_tokens

log = logging.getLogger(__name__)

METRICS_HEADER = ("tune", "setup", "seed", "step", "length", "ed", "pai", "pai_over_length", "ed_norm")
MEAN_ID = "MEAN"


def edit_distance(a, b) -> int:
    """Levenshtein distance with unit costs over whole-token equality."""
    # rapidfuzz compares hashes of non-string items, so map tokens to exact ids first
    ids: dict = {}
    ia = [ids.setdefault(t, len(ids)) for t in a]
    ib = [ids.setdefault(t, len(ids)) for t in b]
    return Levenshtein.distance(ia, ib)


@dataclass(frozen=True)
class StepMetrics:
    step: int
    length: int
    ed: int
    pai: int
    pai_over_length: Fraction
    ed_normalized: Fraction


def step_metrics(step: int, original_tokens, tokens, grammar_pai: int) -> StepMetrics:
    ed = edit_distance(original_tokens, tokens)
    length = len(tokens)
    return StepMetrics(step, length, ed, grammar_pai, Fraction(grammar_pai, length),
                       Fraction(ed, max(length, len(original_tokens))))


@dataclass
class ExperimentRun:
    tune: str
    setup: str
    seed: int
    rows: list[StepMetrics] = field(default_factory=list)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def cell_seed(seed: int, tune_id: str, setup: str) -> int:
    """Per-(tune, setup) seed, independent of execution order."""
    digest = hashlib.sha256(f"{tune_id}\x1f{setup}".encode()).digest()
    return seed ^ int.from_bytes(digest[:8], "big")


def run_cell(tune: Tune, cfg: SetupConfig, n: int, seed: int, name: str | None = None) -> ExperimentRun:
    name = name or setup_name(cfg)
    cseed = cell_seed(seed, tune.id, name)
    run = ExperimentRun(tune.id, name, cseed)
    try:
        pipe = VariationPipeline(tune, cfg, random.Random(cseed))
        state = pipe.state()
        run.rows.append(step_metrics(0, pipe.original_tokens, state.tokens, pai(state.grammar)))
        for _ in range(n):
            state = pipe.advance()
            run.rows.append(step_metrics(state.step, pipe.original_tokens, state.tokens, pai(state.grammar)))
    except Exception as e:  # a failed cell must not abort the batch
        log.warning("cell %s/%s failed: %s", tune.id, name, e)
        run.error = f"{type(e).__name__}: {e}"
    return run


def _run_cell_args(args):
    return run_cell(*args)


def run_experiment(corpus, setups, n: int, seed: int, workers: int = 1) -> list[ExperimentRun]:
    """One mutation chain of length ``n`` per (tune, setup).

    ``setups`` is a list of SetupConfig or a mapping name -> SetupConfig.
    Results are ordered by (tune, setup) whatever ``workers`` is.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    named = list(setups.items()) if isinstance(setups, dict) else [(setup_name(c), c) for c in setups]
    jobs = [(t, cfg, n, seed, name) for t in corpus for name, cfg in named]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            runs = list(ex.map(_run_cell_args, jobs, chunksize=1))
    else:
        runs = [_run_cell_args(j) for j in jobs]
    return sorted(runs, key=lambda r: (r.tune, r.setup))


def mean_rows(runs) -> dict[str, list[dict]]:
    """Average each metric per setup and step over successful runs."""
    by_setup: dict[str, list[ExperimentRun]] = {}
    for r in runs:
        if r.ok:
            by_setup.setdefault(r.setup, []).append(r)
    out = {}
    for name, rs in by_setup.items():
        steps = min(len(r.rows) for r in rs)
        rows = []
        for s in range(steps):
            cells = [r.rows[s] for r in rs]
            k = len(cells)
            rows.append({
                "step": s,
                "length": Fraction(sum(c.length for c in cells), k),
                "ed": Fraction(sum(c.ed for c in cells), k),
                "pai": Fraction(sum(c.pai for c in cells), k),
                "pai_over_length": sum((c.pai_over_length for c in cells), Fraction(0)) / k,
                "ed_norm": sum((c.ed_normalized for c in cells), Fraction(0)) / k,
            })
        out[name] = rows
    return out


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return str(x.numerator)
        return f"{float(x):.6f}"
    return str(x)


def metrics_csv(runs, seed: int, include_means: bool = True) -> str:
    """Metrics table sorted by (tune, setup, step); MEAN rows carry setup averages."""
    records = []
    for r in runs:
        for m in r.rows:
            records.append((r.tune, r.setup, r.seed, m.step, m.length, m.ed, m.pai,
                            m.pai_over_length, m.ed_normalized))
    if include_means:
        for name, rows in mean_rows(runs).items():
            for m in rows:
                records.append((MEAN_ID, name, seed, m["step"], m["length"], m["ed"], m["pai"],
                                m["pai_over_length"], m["ed_norm"]))
    records.sort(key=lambda r: (r[0], r[1], r[3]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for rec in records:
        w.writerow([_fmt(x) for x in rec])
    return buf.getvalue()


def concat_analysis(corpus, cfg: SetupConfig = SETUPS["setup_1"]) -> tuple[int, int]:
    """(PAI of the concatenated corpus, sum of per-tune PAIs)."""
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    streams = [to_tokens(t, cfg) for t in corpus]
    pai_sum = sum(pai(induce(s)) for s in streams)
    pai_concat = pai(induce([tok for s in streams for tok in s]))
    return pai_concat, pai_sum
