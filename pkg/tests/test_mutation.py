from __future__ import annotations

import io
import random

import pytest

from gusheh.corpus import parse_datasheet, serialize_datasheet
from gusheh.errors import NoApplicableMutation
from gusheh.grammar import Grammar, RuleRef, expand, induce, integrity_problems, pai
from gusheh.mutation import (
    InvalidMutation, MutationKind, VariationPipeline, apply_mutation, applicable_kinds,
    generate_variation, mutate, read_log, repair_clamp, repair_mirror, repair_value, replay, write_log,
)
from gusheh.representation import SETUPS, ModalFramework, SetupConfig, Token, build_modal_framework

from conftest import DATA
from synth import random_grammar

R = RuleRef
K = MutationKind
FW = ModalFramework((53, 55, 56, 58, 60))

# p0 -> a p1 b p2 c ; p1 -> x y ; p2 -> p1 z p3 ; p3 -> u v
G = Grammar({0: ("a", R(1), "b", R(2), "c"), 1: ("x", "y"), 2: (R(1), "z", R(3)), 3: ("u", "v")})


def rhs(g, rid):
    return [str(s) for s in g.rules[rid]]


# (kind, locus, {rule: expected rhs}) worked out by hand on G
HAND_CASES = [
    (K.InsertPrimitive, {"rules": [1], "positions": [1], "symbol": "q"}, {1: "x q y"}),
    (K.DeletePrimitive, {"rules": [0], "positions": [0]}, {0: "p1 b p2 c"}),
    (K.MovePrimitiveWithinRhs, {"rules": [0], "positions": [0, 2]}, {0: "p1 b a p2 c"}),
    (K.MovePrimitiveToOtherRhs, {"rules": [0, 1], "positions": [2, 0]}, {0: "a p1 p2 c", 1: "b x y"}),
    (K.SwapPrimitivesWithinRhs, {"rules": [0], "positions": [0, 4]}, {0: "c p1 b p2 a"}),
    (K.SwapPrimitivesBetweenRhs, {"rules": [0, 1], "positions": [0, 1]}, {0: "y p1 b p2 c", 1: "x a"}),
    (K.ChangePrimitive, {"rules": [2], "positions": [1], "symbol": "a"}, {2: "p1 a p3"}),
    (K.InsertExistingRule, {"rules": [0, 3], "positions": [5]}, {0: "a p1 b p2 c p3"}),
    (K.DeleteRuleFromRhs, {"rules": [0], "positions": [1]}, {0: "a b p2 c", 1: "x y"}),
    (K.MoveRuleWithinRhs, {"rules": [0], "positions": [1, 4]}, {0: "a b p2 c p1"}),
    (K.MoveRuleBetweenRhs, {"rules": [2, 1], "positions": [2, 0]}, {2: "p1 z", 1: "p3 x y"}),
    (K.SwapRulesWithinRhs, {"rules": [0], "positions": [1, 3]}, {0: "a p2 b p1 c"}),
    (K.SwapRulesBetweenRhs, {"rules": [0, 2], "positions": [1, 2]}, {0: "a p3 b p2 c", 2: "p1 z p1"}),
    (K.SwapRuleAndPrimitiveWithinRhs, {"rules": [0], "positions": [1, 0]}, {0: "p1 a b p2 c"}),
    (K.SwapRuleAndPrimitiveBetweenRhs, {"rules": [2, 3], "positions": [0, 1]}, {2: "v z p3", 3: "u p1"}),
    (K.ReverseRhs, {"rules": [0], "positions": []}, {0: "c p2 b p1 a"}),
    (K.ReverseSubsequence, {"rules": [0], "positions": [1, 3]}, {0: "a p2 b p1 c"}),
    (K.SwapTwoRhs, {"rules": [1, 3], "positions": []}, {1: "u v", 3: "x y"}),
    (K.DeleteRuleFromGrammar, {"rules": [3], "positions": []}, {2: "p1 z u v"}),
]


def test_hand_cases_cover_every_kind():
    assert {c[0] for c in HAND_CASES} == set(MutationKind)
    assert len(MutationKind) == 19


@pytest.mark.parametrize("kind, locus, expected", HAND_CASES, ids=[c[0].value for c in HAND_CASES])
def test_apply_by_hand(kind, locus, expected):
    out = apply_mutation(G, kind, locus)
    for rid, text in expected.items():
        assert " ".join(rhs(out, rid)) == text
    for rid in set(G.rules) - set(expected):
        if rid in out.rules:
            assert out.rules[rid] == G.rules[rid]
    assert integrity_problems(out) == []


def test_unreachable_rules_are_pruned():
    out = apply_mutation(G, K.DeleteRuleFromRhs, {"rules": [2], "positions": [2]})
    assert sorted(out.rules) == [0, 1, 2]
    assert "".join(expand(out)) == "axybxyzc"


@pytest.mark.parametrize("kind, locus", [
    (K.InsertExistingRule, {"rules": [1, 2], "positions": [0]}),          # p1 -> p2 -> p1
    (K.MoveRuleBetweenRhs, {"rules": [0, 1], "positions": [3, 0]}),       # p2 into p1
    (K.SwapRuleAndPrimitiveBetweenRhs, {"rules": [0, 1], "positions": [1, 0]}),  # p1 into itself
    (K.SwapRulesBetweenRhs, {"rules": [0, 2], "positions": [1, 0]}),      # p1 for p1
    (K.SwapPrimitivesWithinRhs, {"rules": [0], "positions": [0, 1]}),     # p1 is not a primitive
    (K.DeletePrimitive, {"rules": [0], "positions": [9]}),
    (K.DeleteRuleFromGrammar, {"rules": [1], "positions": []}),           # used twice, length 2
    (K.DeleteRuleFromGrammar, {"rules": [0], "positions": []}),
    (K.SwapTwoRhs, {"rules": [0, 1], "positions": []}),
    (K.InsertPrimitive, {"rules": [7], "positions": [0], "symbol": "a"}),
])
def test_invalid_loci_rejected(kind, locus):
    with pytest.raises(InvalidMutation):
        apply_mutation(G, kind, locus)


def test_empty_rhs_rejected():
    g = Grammar({0: (R(1), R(1)), 1: ("a",)})
    with pytest.raises(InvalidMutation):
        apply_mutation(g, K.MovePrimitiveToOtherRhs, {"rules": [1, 0], "positions": [0, 0]})


def test_delete_rule_from_grammar_paper_shape():
    # abracadabra as p0 -> p1 c a d p1, p1 -> p3 p2, p2 -> r a, p3 -> a b
    g = Grammar({0: (R(1), "c", "a", "d", R(1)), 1: (R(3), R(2)), 2: ("r", "a"), 3: ("a", "b")})
    assert pai(g) == 7
    out = apply_mutation(g, K.DeleteRuleFromGrammar, {"rules": [2], "positions": []})
    assert rhs(out, 1) == ["p3", "r", "a"]
    assert 2 not in out.rules
    assert expand(out) == expand(g) and pai(out) == 7


def test_reverse_root():
    g = Grammar({0: ("a", "b", "c")})
    out = apply_mutation(g, K.ReverseRhs, {"rules": [0], "positions": []})
    assert "".join(expand(out)) == "cba"


def test_swap_two_rhs_replaces_every_site():
    phrase = (Token(58, 1), Token(56, 2), Token(55, 8))
    other = (Token(60, 2), Token(58, 2))
    g = Grammar({0: (R(3), Token(53, 2), R(4), R(3)), 3: phrase, 4: other})
    out = apply_mutation(g, K.SwapTwoRhs, {"rules": [3, 4], "positions": []})
    assert expand(out) == list(other) + [Token(53, 2)] + list(phrase) + list(other)


def test_random_mutations_keep_integrity():
    rng = random.Random(1)
    for _ in range(300):
        g = random_grammar(rng)
        new, rec = mutate(g, rng)
        assert integrity_problems(new) == []
        expand(new)
        assert rec.kind in applicable_kinds(g)
        assert replay(g, [rec]) == new


def test_delete_rule_from_grammar_keeps_expansion_and_pai():
    rng = random.Random(2)
    done = 0
    while done < 200:
        g = random_grammar(rng)
        if K.DeleteRuleFromGrammar not in applicable_kinds(g):
            continue
        new, _ = mutate(g, rng, kind=K.DeleteRuleFromGrammar)
        assert expand(new) == expand(g)
        assert pai(new) == pai(g)
        assert len(new) < len(g)
        done += 1


def test_no_applicable_mutation():
    g = Grammar({0: ("a",)})
    assert applicable_kinds(g) == [K.InsertPrimitive]
    with pytest.raises(NoApplicableMutation):
        mutate(g, random.Random(0), kind=K.SwapTwoRhs)


def test_records_round_trip_through_jsonl():
    rng = random.Random(3)
    tokens = [Token(v, 2) for v in [53, 55, 56, 55, 53, 55, 56, 55, 58]]
    g = induce(tokens)
    records = []
    cur = g
    for step in range(1, 30):
        cur, rec = mutate(cur, rng, step=step)
        records.append(rec)
    buf = io.StringIO()
    write_log(records, buf)
    buf.seek(0)
    again = read_log(buf)
    assert again == records
    assert replay(g, again) == cur
    assert expand(g) == tokens


# ---------------------------------------------------------------- repair

def brute_clamp(v, pitches):
    best = None
    for p in pitches:
        if best is None or abs(p - v) < abs(best - v):
            best = p
    return best


def walk_reflect(d, n):
    """Reflect at whichever boundary is violated until in range."""
    if n == 1:
        return 1
    while not 1 <= d <= n:
        d = 2 * n - d if d > n else 2 - d
    return d


def test_clamp_examples():
    assert repair_clamp(52, FW, "chromatic") == 53
    assert repair_clamp(57, FW, "chromatic") == 56
    assert repair_clamp(7, FW, "diatonic") == 5
    assert repair_clamp(-2, FW, "diatonic") == 1


def test_clamp_matches_brute_force():
    for v in range(30, 90):
        assert repair_clamp(v, FW, "chromatic") == brute_clamp(v, FW.pitches)


def test_mirror_examples():
    assert repair_mirror(6, FW) == 4
    assert FW.pitch_of(repair_mirror(6, FW)) == 58
    assert repair_mirror(0, FW) == 2
    assert repair_mirror(3, FW) == 3


def test_mirror_matches_reflection_walk():
    for n in range(1, 9):
        fw = ModalFramework(tuple(range(60, 60 + n)))
        for d in range(-40, 41):
            assert repair_mirror(d, fw) == walk_reflect(d, n), (d, n)


def test_chromatic_mirror_lands_in_framework():
    for v in range(20, 100):
        assert repair_value(v, FW, "chromatic", "mirror") in FW
    # 62 is 2 above the top: reflected to 58
    assert repair_value(62, FW, "chromatic", "mirror") == 58


def test_repair_none_rejects_bad_degree():
    with pytest.raises(ValueError):
        repair_value(9, FW, "diatonic", "none")


# ---------------------------------------------------------------- pipeline

def test_zero_mutations_is_identity(all_tunes):
    for name, cfg in SETUPS.items():
        for t in all_tunes[:8]:
            variant, records = generate_variation(t, cfg, 0, 1)
            assert records == []
            assert variant.pairs() == t.pairs()


@pytest.mark.parametrize("name", ["setup_2", "setup_3", "setup_4", "setup_5"])
def test_variants_stay_in_framework(synth_corpus, name):
    cfg = SETUPS[name]
    for i, t in enumerate(synth_corpus[:10]):
        fw = build_modal_framework(t)
        variant, _ = generate_variation(t, cfg, 20, i)
        assert all(p in fw for p in variant.pitches)
        if cfg.direction.value == "backward":
            assert variant.pitches[-1] == t.pitches[-1]
        else:
            assert variant.pitches[0] == t.pitches[0]


def test_variation_is_deterministic(daramad):
    a = generate_variation(daramad, SETUPS["setup_5"], 15, 9)
    b = generate_variation(daramad, SETUPS["setup_5"], 15, random.Random(9))
    assert a == b


def test_fig2_seed_42_golden(daramad):
    variant, records = generate_variation(daramad, SETUPS["setup_4"], 5, random.Random(42))
    assert len(records) == 5
    assert variant.pitches[-1] == 55
    assert set(variant.pitches) <= {53, 55, 56, 58, 60}
    golden = DATA / "golden" / "daramad_setup_4_seed42.csv"
    assert serialize_datasheet(variant) == golden.read_text()
    assert parse_datasheet(golden.read_text(), variant.id) == variant


def test_pipeline_steps(daramad):
    pipe = VariationPipeline(daramad, SETUPS["setup_2"], random.Random(0))
    s0 = pipe.state()
    assert s0.step == 0 and s0.tokens == pipe.original_tokens and s0.pairs == daramad.pairs()
    s1 = pipe.advance(K.ReverseRhs)
    assert s1.step == 1 and s1.record.kind is K.ReverseRhs
    assert s1.pairs[0][0] == 53


def test_integer_shape_pipeline(daramad):
    cfg = SetupConfig("interval", "diatonic", "forward", "integer", "mirror")
    variant, _ = generate_variation(daramad, cfg, 10, 4)
    assert {n.duration for n in variant.notes} == {2}
    assert variant.pitches[0] == 53


def test_negative_n_rejected(daramad):
    with pytest.raises(ValueError):
        generate_variation(daramad, SETUPS["setup_1"], -1, 0)
