"""Grammar mutation operators, melodic repair and the variation pipeline.

A mutation is split in two: a sampler draws a *locus* (which rules,
which positions, which symbol) and ``apply_mutation`` applies it
deterministically. Records keep the locus, so a log replays exactly
without the random generator.

After every mutation, rules no longer reachable from the root are
dropped. Candidates that would leave a cycle, an empty right-hand side
or a no-op are rejected and another mutation is drawn.
"""
from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field

from .corpus import Tune, make_tune
from .errors import NoApplicableMutation
from .grammar import Grammar, RuleRef, expand, induce, integrity_problems, reachable
from .representation import (
    ModalFramework, Repair, Scale, SetupConfig, Token, anchor_pitch,
    build_modal_framework, from_tokens, to_tokens,
)

MAX_ATTEMPTS = 100


class MutationKind(str, enum.Enum):
    InsertPrimitive = "InsertPrimitive"
    DeletePrimitive = "DeletePrimitive"
    MovePrimitiveWithinRhs = "MovePrimitiveWithinRhs"
    MovePrimitiveToOtherRhs = "MovePrimitiveToOtherRhs"
    SwapPrimitivesWithinRhs = "SwapPrimitivesWithinRhs"
    SwapPrimitivesBetweenRhs = "SwapPrimitivesBetweenRhs"
    ChangePrimitive = "ChangePrimitive"
    InsertExistingRule = "InsertExistingRule"
    DeleteRuleFromRhs = "DeleteRuleFromRhs"
    MoveRuleWithinRhs = "MoveRuleWithinRhs"
    MoveRuleBetweenRhs = "MoveRuleBetweenRhs"
    SwapRulesWithinRhs = "SwapRulesWithinRhs"
    SwapRulesBetweenRhs = "SwapRulesBetweenRhs"
    SwapRuleAndPrimitiveWithinRhs = "SwapRuleAndPrimitiveWithinRhs"
    SwapRuleAndPrimitiveBetweenRhs = "SwapRuleAndPrimitiveBetweenRhs"
    ReverseRhs = "ReverseRhs"
    ReverseSubsequence = "ReverseSubsequence"
    SwapTwoRhs = "SwapTwoRhs"
    DeleteRuleFromGrammar = "DeleteRuleFromGrammar"


class InvalidMutation(Exception):
    """A drawn locus cannot be applied; the caller resamples."""


@dataclass(frozen=True)
class MutationRecord:
    step: int
    kind: MutationKind
    locus: dict
    rng_seed: int
    applied: bool = True
    resamples: int = 0

    def to_json(self) -> str:
        locus = dict(self.locus)
        if "symbol" in locus:
            locus["symbol"] = _symbol_to_json(locus["symbol"])
        return json.dumps({
            "step": self.step, "kind": self.kind.value, "locus": locus,
            "seed": self.rng_seed, "applied": self.applied, "resamples": self.resamples,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "MutationRecord":
        d = json.loads(line)
        locus = d["locus"]
        if "symbol" in locus:
            locus["symbol"] = _symbol_from_json(locus["symbol"])
        return cls(d["step"], MutationKind(d["kind"]), locus, d["seed"],
                   d.get("applied", True), d.get("resamples", 0))


def _symbol_to_json(sym):
    return sym.to_json() if isinstance(sym, Token) else sym


def _symbol_from_json(data):
    if isinstance(data, (int, list)):
        return Token.from_json(data)
    return data


def write_log(records, fh) -> None:
    for r in records:
        fh.write(r.to_json() + "\n")


def read_log(fh) -> list[MutationRecord]:
    return [MutationRecord.from_json(line) for line in fh if line.strip()]


# ------------------------------------------------------------------ sites

def _sites(rules, want_rule):
    return [(rid, i) for rid in sorted(rules) for i, s in enumerate(rules[rid])
            if isinstance(s, RuleRef) == want_rule]


def _terminal_sites(rules):
    return _sites(rules, False)


def _ref_sites(rules):
    return _sites(rules, True)


def _long(rules, sites):
    """Sites whose RHS survives losing one symbol."""
    return [(r, i) for r, i in sites if len(rules[r]) > 1]


def _inlinable(g: Grammar) -> list[int]:
    """Non-root rules whose inlining keeps the PAI.

    Inlining a rule of length L used m times changes the PAI by
    (m - 1) * (L - 1), so only rules used once or of length 1 qualify.
    """
    refs = g.references()
    return [r for r in sorted(g.rules) if r != g.root and (refs[r] - 1) * (len(g.rules[r]) - 1) == 0]


def _applicable(g: Grammar, kind: MutationKind) -> bool:
    rules = g.rules
    n_rules = len(rules)
    term = _terminal_sites(rules)
    refs = _ref_sites(rules)
    K = MutationKind
    if kind is K.InsertPrimitive:
        return bool(term)
    if kind is K.DeletePrimitive:
        return bool(_long(rules, term))
    if kind is K.MovePrimitiveWithinRhs:
        return any(len(rules[r]) > 1 for r, _ in term)
    if kind is K.MovePrimitiveToOtherRhs:
        return n_rules > 1 and bool(_long(rules, term))
    if kind is K.SwapPrimitivesWithinRhs:
        return any(len({s for s in rules[r] if not isinstance(s, RuleRef)}) > 1 for r in rules)
    if kind is K.SwapPrimitivesBetweenRhs:
        return n_rules > 1 and len({rules[r][i] for r, i in term}) > 1
    if kind is K.ChangePrimitive:
        return len({rules[r][i] for r, i in term}) > 1
    if kind is K.InsertExistingRule:
        return n_rules > 1
    if kind is K.DeleteRuleFromRhs:
        return bool(_long(rules, refs))
    if kind is K.MoveRuleWithinRhs:
        return any(len(rules[r]) > 1 for r, _ in refs)
    if kind is K.MoveRuleBetweenRhs:
        return n_rules > 2 and bool(_long(rules, refs))
    if kind is K.SwapRulesWithinRhs:
        return any(len({s for s in rules[r] if isinstance(s, RuleRef)}) > 1 for r in rules)
    if kind is K.SwapRulesBetweenRhs:
        return len({r for r, _ in refs}) > 1 and len({rules[r][i] for r, i in refs}) > 1
    if kind is K.SwapRuleAndPrimitiveWithinRhs:
        return any(any(isinstance(s, RuleRef) for s in rules[r]) and
                   any(not isinstance(s, RuleRef) for s in rules[r]) for r in rules)
    if kind is K.SwapRuleAndPrimitiveBetweenRhs:
        return bool(refs) and bool(term) and n_rules > 1
    if kind is K.ReverseRhs:
        return any(len(rhs) > 1 for rhs in rules.values())
    if kind is K.ReverseSubsequence:
        return any(len(rhs) > 2 for rhs in rules.values())
    if kind is K.SwapTwoRhs:
        return n_rules > 2
    if kind is K.DeleteRuleFromGrammar:
        return bool(_inlinable(g))
    raise ValueError(kind)


def applicable_kinds(g: Grammar) -> list[MutationKind]:
    return [k for k in MutationKind if _applicable(g, k)]


# --------------------------------------------------------------- sampling

def _sample_locus(g: Grammar, kind: MutationKind, rng: random.Random) -> dict:
    rules = g.rules
    ids = sorted(rules)
    non_root = [r for r in ids if r != g.root]
    K = MutationKind

    def pick(seq):
        if not seq:
            raise InvalidMutation("nothing to pick from")
        return rng.choice(seq)

    def pick_site(sites):
        # rule first, then a position in it: every RHS is equally likely
        # to be touched however long it is
        r = pick(sorted({r for r, _ in sites}))
        return r, pick([i for rr, i in sites if rr == r])

    def other_rule(exclude):
        return pick([r for r in ids if r != exclude])

    if kind is K.InsertPrimitive:
        r = pick(ids)
        return {"rules": [r], "positions": [rng.randint(0, len(rules[r]))], "symbol": pick(g.terminals())}
    if kind is K.DeletePrimitive:
        r, i = pick_site(_long(rules, _terminal_sites(rules)))
        return {"rules": [r], "positions": [i]}
    if kind in (K.MovePrimitiveWithinRhs, K.MoveRuleWithinRhs):
        sites = _terminal_sites(rules) if kind is K.MovePrimitiveWithinRhs else _ref_sites(rules)
        r, i = pick_site([(r, i) for r, i in sites if len(rules[r]) > 1])
        j = pick([j for j in range(len(rules[r])) if j != i])
        return {"rules": [r], "positions": [i, j]}
    if kind in (K.MovePrimitiveToOtherRhs, K.MoveRuleBetweenRhs):
        sites = _terminal_sites(rules) if kind is K.MovePrimitiveToOtherRhs else _ref_sites(rules)
        r1, i = pick_site(_long(rules, sites))
        r2 = other_rule(r1)
        return {"rules": [r1, r2], "positions": [i, rng.randint(0, len(rules[r2]))]}
    if kind in (K.SwapPrimitivesWithinRhs, K.SwapRulesWithinRhs):
        sites = _terminal_sites(rules) if kind is K.SwapPrimitivesWithinRhs else _ref_sites(rules)
        r, i = pick_site(sites)
        j = pick([j for rr, j in sites if rr == r and rules[r][j] != rules[r][i]])
        return {"rules": [r], "positions": sorted((i, j))}
    if kind in (K.SwapPrimitivesBetweenRhs, K.SwapRulesBetweenRhs):
        sites = _terminal_sites(rules) if kind is K.SwapPrimitivesBetweenRhs else _ref_sites(rules)
        r1, i = pick_site(sites)
        r2, j = pick_site([(r, j) for r, j in sites if r != r1 and rules[r][j] != rules[r1][i]])
        return {"rules": [r1, r2], "positions": [i, j]}
    if kind is K.ChangePrimitive:
        r, i = pick_site(_terminal_sites(rules))
        sym = pick([t for t in g.terminals() if t != rules[r][i]])
        return {"rules": [r], "positions": [i], "symbol": sym}
    if kind is K.InsertExistingRule:
        host = pick(ids)
        target = pick([r for r in non_root if r != host])
        return {"rules": [host, target], "positions": [rng.randint(0, len(rules[host]))]}
    if kind is K.DeleteRuleFromRhs:
        r, i = pick_site(_long(rules, _ref_sites(rules)))
        return {"rules": [r], "positions": [i]}
    if kind is K.SwapRuleAndPrimitiveWithinRhs:
        r, i = pick_site(_ref_sites(rules))
        j = pick([j for j, s in enumerate(rules[r]) if not isinstance(s, RuleRef)])
        return {"rules": [r], "positions": [i, j]}
    if kind is K.SwapRuleAndPrimitiveBetweenRhs:
        r1, i = pick_site(_ref_sites(rules))
        r2, j = pick_site([(r, j) for r, j in _terminal_sites(rules) if r != r1])
        return {"rules": [r1, r2], "positions": [i, j]}
    if kind is K.ReverseRhs:
        return {"rules": [pick([r for r in ids if len(rules[r]) > 1])], "positions": []}
    if kind is K.ReverseSubsequence:
        r = pick([r for r in ids if len(rules[r]) > 2])
        n = len(rules[r])
        size = rng.randint(2, n - 1)
        i = rng.randint(0, n - size)
        return {"rules": [r], "positions": [i, i + size - 1]}
    if kind is K.SwapTwoRhs:
        r1, r2 = sorted(rng.sample(non_root, 2))
        return {"rules": [r1, r2], "positions": []}
    if kind is K.DeleteRuleFromGrammar:
        return {"rules": [pick(_inlinable(g))], "positions": []}
    raise ValueError(kind)


# ---------------------------------------------------------------- applying

def apply_mutation(g: Grammar, kind: MutationKind, locus: dict) -> Grammar:
    """Apply one mutation at an explicit locus.

    Raises InvalidMutation when the locus does not fit the grammar or the
    result would not be expandable.
    """
    kind = MutationKind(kind)
    rules = {rid: list(rhs) for rid, rhs in g.rules.items()}
    rids = locus.get("rules", [])
    pos = locus.get("positions", [])
    for r in rids:
        if r not in rules:
            raise InvalidMutation(f"no rule p{r}")
    K = MutationKind

    def sym_at(r, i, want_rule):
        if not 0 <= i < len(rules[r]):
            raise InvalidMutation(f"p{r} has no position {i}")
        s = rules[r][i]
        if isinstance(s, RuleRef) != want_rule:
            raise InvalidMutation(f"p{r}[{i}] is not a {'rule' if want_rule else 'primitive'}")
        return s

    def check_insert_pos(r, p):
        if not 0 <= p <= len(rules[r]):
            raise InvalidMutation(f"p{r} has no insertion point {p}")

    if kind is K.InsertPrimitive:
        r, = rids
        check_insert_pos(r, pos[0])
        if isinstance(locus["symbol"], RuleRef):
            raise InvalidMutation("symbol must be a primitive")
        rules[r].insert(pos[0], locus["symbol"])
    elif kind in (K.DeletePrimitive, K.DeleteRuleFromRhs):
        r, = rids
        sym_at(r, pos[0], kind is K.DeleteRuleFromRhs)
        del rules[r][pos[0]]
    elif kind in (K.MovePrimitiveWithinRhs, K.MoveRuleWithinRhs):
        r, = rids
        i, j = pos
        s = sym_at(r, i, kind is K.MoveRuleWithinRhs)
        if i == j or not 0 <= j < len(rules[r]):
            raise InvalidMutation("bad target position")
        del rules[r][i]
        rules[r].insert(j, s)
    elif kind in (K.MovePrimitiveToOtherRhs, K.MoveRuleBetweenRhs):
        r1, r2 = rids
        i, j = pos
        if r1 == r2:
            raise InvalidMutation("source and target RHS must differ")
        s = sym_at(r1, i, kind is K.MoveRuleBetweenRhs)
        check_insert_pos(r2, j)
        del rules[r1][i]
        rules[r2].insert(j, s)
    elif kind in (K.SwapPrimitivesWithinRhs, K.SwapRulesWithinRhs):
        r, = rids
        i, j = pos
        want = kind is K.SwapRulesWithinRhs
        a, b = sym_at(r, i, want), sym_at(r, j, want)
        if a == b:
            raise InvalidMutation("swapping equal symbols is a no-op")
        rules[r][i], rules[r][j] = b, a
    elif kind in (K.SwapPrimitivesBetweenRhs, K.SwapRulesBetweenRhs, K.SwapRuleAndPrimitiveBetweenRhs):
        r1, r2 = rids
        i, j = pos
        if r1 == r2:
            raise InvalidMutation("the two RHSs must differ")
        first_rule = kind is not K.SwapPrimitivesBetweenRhs
        second_rule = kind is K.SwapRulesBetweenRhs
        a, b = sym_at(r1, i, first_rule), sym_at(r2, j, second_rule)
        if a == b:
            raise InvalidMutation("swapping equal symbols is a no-op")
        rules[r1][i], rules[r2][j] = b, a
    elif kind is K.SwapRuleAndPrimitiveWithinRhs:
        r, = rids
        i, j = pos
        a, b = sym_at(r, i, True), sym_at(r, j, False)
        rules[r][i], rules[r][j] = b, a
    elif kind is K.ChangePrimitive:
        r, = rids
        old = sym_at(r, pos[0], False)
        new = locus["symbol"]
        if new == old or isinstance(new, RuleRef):
            raise InvalidMutation("replacement must be a different primitive")
        rules[r][pos[0]] = new
    elif kind is K.InsertExistingRule:
        host, target = rids
        check_insert_pos(host, pos[0])
        if target == g.root or target == host:
            raise InvalidMutation("cannot insert the root or a rule into itself")
        rules[host].insert(pos[0], RuleRef(target))
    elif kind is K.ReverseRhs:
        r, = rids
        if rules[r] == rules[r][::-1]:
            raise InvalidMutation("RHS is a palindrome")
        rules[r].reverse()
    elif kind is K.ReverseSubsequence:
        r, = rids
        i, j = pos
        n = len(rules[r])
        if not (0 <= i < j < n and j - i + 1 < n):
            raise InvalidMutation("need a proper sub-sequence of length >= 2")
        seg = rules[r][i:j + 1]
        if seg == seg[::-1]:
            raise InvalidMutation("sub-sequence is a palindrome")
        rules[r][i:j + 1] = seg[::-1]
    elif kind is K.SwapTwoRhs:
        r1, r2 = rids
        if r1 == r2 or g.root in (r1, r2):
            raise InvalidMutation("swap needs two distinct non-root rules")
        if rules[r1] == rules[r2]:
            raise InvalidMutation("identical RHSs")
        rules[r1], rules[r2] = rules[r2], rules[r1]
    elif kind is K.DeleteRuleFromGrammar:
        victim, = rids
        if victim == g.root:
            raise InvalidMutation("cannot delete the root")
        if victim not in _inlinable(g):
            raise InvalidMutation(f"inlining p{victim} would change the PAI")
        body = rules.pop(victim)
        for rid, rhs in rules.items():
            if any(isinstance(s, RuleRef) and s.id == victim for s in rhs):
                out = []
                for s in rhs:
                    if isinstance(s, RuleRef) and s.id == victim:
                        out.extend(body)
                    else:
                        out.append(s)
                rules[rid] = out
    else:  # pragma: no cover
        raise ValueError(kind)

    candidate = Grammar(rules, g.root)
    problems = integrity_problems(candidate)
    if problems:
        raise InvalidMutation("; ".join(problems))
    live = reachable(candidate)
    if len(live) != len(rules):
        candidate = Grammar({r: rhs for r, rhs in rules.items() if r in live}, g.root)
    return candidate


def mutate(g: Grammar, rng: random.Random, kind: MutationKind | None = None, step: int = 0,
           max_attempts: int = MAX_ATTEMPTS) -> tuple[Grammar, MutationRecord]:
    """Apply exactly one mutation drawn with ``rng``.

    Without ``kind``, the kind is drawn uniformly from the applicable
    ones on every attempt. Rejected draws count against ``max_attempts``.
    """
    seed = rng.getrandbits(32)
    local = random.Random(seed)
    if kind is not None:
        kind = MutationKind(kind)
        kinds = [kind] if _applicable(g, kind) else []
    else:
        kinds = applicable_kinds(g)
    if not kinds:
        raise NoApplicableMutation(f"step {step}: no applicable mutation" + (f" of kind {kind.value}" if kind else ""))
    for attempt in range(max_attempts):
        k = local.choice(kinds)
        try:
            locus = _sample_locus(g, k, local)
            new = apply_mutation(g, k, locus)
        except InvalidMutation:
            continue
        return new, MutationRecord(step, k, locus, seed, True, attempt)
    raise NoApplicableMutation(f"step {step}: no valid mutation after {max_attempts} attempts")


def replay(g: Grammar, records) -> Grammar:
    for rec in records:
        if rec.applied:
            g = apply_mutation(g, rec.kind, rec.locus)
    return g


# ------------------------------------------------------------------ repair

def repair_clamp(value: int, fw: ModalFramework, scale: Scale | str) -> int:
    """Nearest framework pitch (ties go low), or the degree clamped to 1..len(fw)."""
    if Scale(scale) is Scale.DIATONIC:
        return min(max(value, 1), len(fw))
    if value in fw:
        return value
    return min(fw.pitches, key=lambda p: (abs(p - value), p))


def _reflect(x: int, lo: int, hi: int) -> int:
    if lo == hi:
        return lo
    period = 2 * (hi - lo)
    m = (x - lo) % period
    return lo + (m if m <= hi - lo else period - m)


def repair_mirror(degree: int, fw: ModalFramework) -> int:
    """Reflect an out-of-range degree back at the boundary it crossed."""
    return _reflect(degree, 1, len(fw))


def repair_value(value: int, fw: ModalFramework, scale: Scale | str, strategy: Repair | str) -> int:
    scale, strategy = Scale(scale), Repair(strategy)
    if strategy is Repair.NONE:
        if scale is Scale.DIATONIC and not 1 <= value <= len(fw):
            raise ValueError(f"degree {value} outside the framework and no repair")
        return value
    if strategy is Repair.CLAMP:
        return repair_clamp(value, fw, scale)
    if scale is Scale.DIATONIC:
        return repair_mirror(value, fw)
    # chromatic mirror: reflect in MIDI space, then snap to a framework pitch
    return repair_clamp(_reflect(value, fw.lowest, fw.highest), fw, Scale.CHROMATIC)


# -------------------------------------------------------------- pipeline

@dataclass
class VariationState:
    step: int
    grammar: Grammar
    tokens: list
    pairs: list
    record: MutationRecord | None = None


@dataclass
class VariationPipeline:
    """Tokenize, induce, then mutate one step at a time."""

    tune: Tune
    cfg: SetupConfig
    rng: random.Random
    fw: ModalFramework = field(init=False)
    anchor: int = field(init=False)
    original_tokens: list = field(init=False)
    grammar: Grammar = field(init=False)
    step: int = field(init=False, default=0)

    def __post_init__(self):
        self.fw = build_modal_framework(self.tune)
        self.anchor = anchor_pitch(self.tune, self.cfg)
        self.original_tokens = to_tokens(self.tune, self.cfg)
        self.grammar = induce(self.original_tokens)

    def reconstruct(self, tokens) -> list[tuple[int, int]]:
        return from_tokens(tokens, self.cfg, anchor=self.anchor, fw=self.fw)

    def state(self, record=None) -> VariationState:
        tokens = expand(self.grammar)
        return VariationState(self.step, self.grammar, tokens, self.reconstruct(tokens), record)

    def advance(self, kind: MutationKind | None = None) -> VariationState:
        self.step += 1
        self.grammar, record = mutate(self.grammar, self.rng, kind=kind, step=self.step)
        return self.state(record)


def generate_variation(tune: Tune, cfg: SetupConfig, n_mutations: int, rng: random.Random | int,
                       tune_id: str | None = None) -> tuple[Tune, list[MutationRecord]]:
    """Mutate the tune's grammar ``n_mutations`` times and rebuild a tune."""
    if n_mutations < 0:
        raise ValueError("n_mutations must be >= 0")
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    pipe = VariationPipeline(tune, cfg, rng)
    records = []
    state = pipe.state()
    for _ in range(n_mutations):
        state = pipe.advance()
        records.append(state.record)
    variant = make_tune(tune_id or f"{tune.id}_variant", state.pairs, source=tune)
    return variant, records
