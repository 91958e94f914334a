"""Sequitur grammar induction, expansion, PAI and rule-topology export.

``induce`` runs the online Sequitur algorithm (Nevill-Manning & Witten)
over any sequence of hashable terminals. Digram uniqueness is always
enforced. Rule utility in the classic sense (inline a rule referenced
only once) is optional: by default rules are kept once created, which
keeps every rule binary and matches the nested grammars shown for the
Shour corpus. Either way every rule's expansion occurs at least twice in
the input.

The pathway assembly index of a grammar is the number of binary joins
needed to build all right-hand sides, ``sum(len(rhs) - 1)``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Hashable, Iterable

from .errors import FormatError, IntegrityError


@dataclass(frozen=True)
class RuleRef:
    id: int

    def __str__(self):
        return f"p{self.id}"


@dataclass(frozen=True)
class Grammar:
    """Rule id -> right-hand side. Terminals are any hashable except RuleRef."""

    rules: dict[int, tuple] = field(hash=False)
    root: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rules", {k: tuple(v) for k, v in self.rules.items()})

    def __len__(self):
        return len(self.rules)

    def expand(self, max_length: int | None = None) -> list:
        return expand(self, max_length)

    def pai(self) -> int:
        return pai(self)

    def references(self) -> dict[int, int]:
        """Number of RuleRef occurrences of each rule across all RHSs."""
        counts = {rid: 0 for rid in self.rules}
        for rhs in self.rules.values():
            for s in rhs:
                if isinstance(s, RuleRef) and s.id in counts:
                    counts[s.id] += 1
        return counts

    def children(self, rid: int) -> list[int]:
        """Distinct rules referenced by ``rid``, in first-use order."""
        return list(dict.fromkeys(s.id for s in self.rules[rid] if isinstance(s, RuleRef)))

    def terminals(self) -> list:
        """Distinct terminals in order of first appearance (rules by id)."""
        seen = {}
        for rid in sorted(self.rules):
            for s in self.rules[rid]:
                if not isinstance(s, RuleRef):
                    seen.setdefault(s, None)
        return list(seen)


def is_rule(sym) -> bool:
    return isinstance(sym, RuleRef)


# ------------------------------------------------------------------ Sequitur
#
# Each rule body is a circular doubly linked list closed by a guard node.
# ``_index`` maps a digram key to the left node of its single registered
# occurrence.

class _Rule:
    __slots__ = ("guard", "count", "ordinal")

    def __init__(self, ordinal):
        self.ordinal = ordinal
        self.count = 0
        self.guard = _Node(self, guard=True)
        self.guard.prev = self.guard.next = self.guard

    @property
    def first(self):
        return self.guard.next

    @property
    def last(self):
        return self.guard.prev


class _Node:
    __slots__ = ("value", "prev", "next", "guard", "key")

    def __init__(self, value, guard=False):
        self.value = value
        self.guard = guard
        self.prev = self.next = None
        if guard:
            self.key = ("g", id(value))
        elif isinstance(value, _Rule):
            self.key = ("r", id(value))
        else:
            self.key = ("t", value)

    @property
    def nonterminal(self):
        return not self.guard and isinstance(self.value, _Rule)


class _Sequitur:
    def __init__(self, enforce_utility: bool):
        self.enforce_utility = enforce_utility
        self.ordinals = 0
        self.root = self._new_rule()
        self.rules = {id(self.root): self.root}
        self.index: dict[tuple, _Node] = {}

    def _new_rule(self):
        r = _Rule(self.ordinals)
        self.ordinals += 1
        return r

    def _new_node(self, value):
        if isinstance(value, _Rule):
            value.count += 1
        return _Node(value)

    @staticmethod
    def _digram(node):
        return node.key, node.next.key

    def feed(self, value):
        last = self.root.last
        self._insert_after(last, self._new_node(value))
        self._check(self.root.last.prev)

    # -- list surgery, mirroring the reference implementation

    def _join(self, left, right):
        if left.next is not None:
            self._delete_digram(left)
            # overlapping triples (e.g. "aaa") keep their second digram registered
            rp, rn = right.prev, right.next
            if rp is not None and rn is not None and right.key == rp.key == rn.key:
                self.index[self._digram(right)] = right
            lp, ln = left.prev, left.next
            if lp is not None and ln is not None and left.key == lp.key == ln.key:
                self.index[self._digram(lp)] = lp
        left.next = right
        right.prev = left

    def _insert_after(self, node, new):
        self._join(new, node.next)
        self._join(node, new)

    def _delete_digram(self, node):
        if node.guard or node.next.guard:
            return
        key = self._digram(node)
        if self.index.get(key) is node:
            del self.index[key]

    def _delete_node(self, node):
        self._join(node.prev, node.next)
        self._delete_digram(node)
        if node.nonterminal:
            node.value.count -= 1

    def _check(self, node) -> bool:
        if node.guard or node.next.guard:
            return False
        key = self._digram(node)
        found = self.index.get(key)
        if found is None:
            self.index[key] = node
            return False
        if found.next is not node:
            self._match(node, found)
        return True

    def _match(self, new, existing):
        if existing.prev.guard and existing.next.next.guard:
            rule = existing.prev.value
            self._substitute(new, rule)
        else:
            rule = self._new_rule()
            self.rules[id(rule)] = rule
            self._insert_after(rule.last, self._new_node(new.value))
            self._insert_after(rule.last, self._new_node(new.next.value))
            self._substitute(existing, rule)
            self._substitute(new, rule)
            self.index[self._digram(rule.first)] = rule.first
        if self.enforce_utility:
            first = rule.first
            if first.nonterminal and first.value.count == 1:
                self._expand(first)

    def _substitute(self, node, rule):
        q = node.prev
        self._delete_node(q.next)
        self._delete_node(q.next)
        self._insert_after(q, self._new_node(rule))
        if not self._check(q):
            self._check(q.next)

    def _expand(self, node):
        """Inline the rule referenced by ``node`` (its only use)."""
        left, right = node.prev, node.next
        rule = node.value
        first, last = rule.first, rule.last
        self._delete_digram(left)
        self._delete_digram(node)
        del self.rules[id(rule)]
        left.next = first
        first.prev = left
        last.next = right
        right.prev = last
        if not last.guard and not right.guard:
            self.index[self._digram(last)] = last

    def to_grammar(self) -> Grammar:
        live = sorted(self.rules.values(), key=lambda r: r.ordinal)
        ids = {id(r): i for i, r in enumerate(live)}
        rules = {}
        for r in live:
            rhs = []
            node = r.first
            while not node.guard:
                rhs.append(RuleRef(ids[id(node.value)]) if node.nonterminal else node.value)
                node = node.next
            rules[ids[id(r)]] = tuple(rhs)
        return Grammar(rules, 0)


def induce(seq: Iterable[Hashable], enforce_utility: bool = False) -> Grammar:
    """Build a Sequitur grammar whose root expands to ``seq``.

    Rule ids are dense, in creation order, root = 0.
    """
    seq = list(seq)
    if not seq:
        raise ValueError("cannot induce a grammar from an empty sequence")
    if any(isinstance(s, RuleRef) for s in seq):
        raise TypeError("RuleRef cannot be used as a terminal")
    s = _Sequitur(enforce_utility)
    for value in seq:
        s.feed(value)
    return s.to_grammar()


# ------------------------------------------------------------ grammar walks

def expand(g: Grammar, max_length: int | None = None) -> list:
    """Depth-first, left-to-right expansion of the root rule."""
    if g.root not in g.rules:
        raise IntegrityError(f"root rule p{g.root} missing")
    out = []
    stack = [(g.root, 0)]
    on_path = {g.root}
    rules = g.rules
    while stack:
        rid, i = stack.pop()
        rhs = rules[rid]
        if i == len(rhs):
            on_path.discard(rid)
            continue
        stack.append((rid, i + 1))
        sym = rhs[i]
        if isinstance(sym, RuleRef):
            if sym.id not in rules:
                raise IntegrityError(f"p{rid} references missing rule p{sym.id}")
            if sym.id in on_path:
                raise IntegrityError(f"cycle through p{sym.id}")
            on_path.add(sym.id)
            stack.append((sym.id, 0))
        else:
            out.append(sym)
            if max_length is not None and len(out) > max_length:
                raise IntegrityError(f"expansion longer than {max_length}")
    return out


def pai(g: Grammar) -> int:
    return sum(len(rhs) - 1 for rhs in g.rules.values())


def reaches(g: Grammar, start: int, target: int) -> bool:
    """True if ``target`` is reachable from ``start`` (including start == target)."""
    seen = set()
    todo = [start]
    while todo:
        rid = todo.pop()
        if rid == target:
            return True
        if rid in seen or rid not in g.rules:
            continue
        seen.add(rid)
        todo.extend(s.id for s in g.rules[rid] if isinstance(s, RuleRef))
    return False


def integrity_problems(g: Grammar) -> list[str]:
    """Empty when every reference resolves, no RHS is empty and there is no cycle."""
    problems = []
    if g.root not in g.rules:
        return [f"root rule p{g.root} missing"]
    for rid, rhs in g.rules.items():
        if not rhs:
            problems.append(f"p{rid} has an empty right-hand side")
        for s in rhs:
            if isinstance(s, RuleRef) and s.id not in g.rules:
                problems.append(f"p{rid} references missing rule p{s.id}")
    if problems:
        return problems
    # iterative three-colour DFS
    state = {}
    for start in g.rules:
        if start in state:
            continue
        stack = [(start, iter(g.children(start)))]
        state[start] = 1
        while stack:
            rid, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[rid] = 2
                stack.pop()
            elif state.get(nxt) == 1:
                problems.append(f"cycle through p{nxt}")
                return problems
            elif nxt not in state:
                state[nxt] = 1
                stack.append((nxt, iter(g.children(nxt))))
    return problems


def reachable(g: Grammar) -> set[int]:
    seen = set()
    todo = [g.root]
    while todo:
        rid = todo.pop()
        if rid in seen or rid not in g.rules:
            continue
        seen.add(rid)
        todo.extend(g.children(rid))
    return seen


def derivation_counts(g: Grammar) -> dict[int, int]:
    """How many times each rule is used in the parse tree of the root."""
    order = []
    state = {}
    for start in sorted(g.rules):
        stack = [(start, iter(g.children(start)))]
        if start in state:
            continue
        state[start] = 1
        while stack:
            rid, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                order.append(rid)
                stack.pop()
            elif nxt not in state:
                state[nxt] = 1
                stack.append((nxt, iter(g.children(nxt))))
    counts = {rid: 0 for rid in g.rules}
    counts[g.root] = 1
    for rid in reversed(order):  # parents before children
        for s in g.rules[rid]:
            if isinstance(s, RuleRef):
                counts[s.id] += counts[rid]
    return counts


def repeated_digrams(g: Grammar) -> list[tuple]:
    """Digrams occurring more than once across all RHSs.

    Overlapping occurrences inside a run (``a a a``) count once.
    """
    seen = {}
    dupes = []
    for rid in sorted(g.rules):
        rhs = g.rules[rid]
        prev_at = None
        for i in range(len(rhs) - 1):
            d = (rhs[i], rhs[i + 1])
            if d in seen:
                if seen[d] == (rid, i - 1) and prev_at == d:
                    prev_at = None
                    continue
                dupes.append(d)
            else:
                seen[d] = (rid, i)
            prev_at = d
    return dupes


# ------------------------------------------------------------------- export

def _dot_id(rid):
    return f'"{rid}"'


def topology_dot(g: Grammar, name: str = "grammar") -> str:
    """Graphviz digraph: one node per rule, one edge per distinct parent -> child."""
    lines = [f"digraph {name} {{"]
    for rid in sorted(g.rules):
        lines.append(f'  {_dot_id(rid)} [label="{rid}"];')
    for rid in sorted(g.rules):
        for child in g.children(rid):
            lines.append(f"  {_dot_id(rid)} -> {_dot_id(child)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def format_symbol(sym) -> str:
    return str(sym)


def dump_grammar(g: Grammar) -> str:
    """One rule per line: ``pN -> sym sym ...``, root first."""
    order = [g.root] + sorted(r for r in g.rules if r != g.root)
    return "".join(f"p{rid} -> {' '.join(format_symbol(s) for s in g.rules[rid])}\n" for rid in order)


_SYM_RE = re.compile(r"p(\d+)|\((-?\d+),(-?\d+)\)|(-?\d+)|(\S+)")


def parse_grammar_dump(text: str) -> Grammar:
    """Inverse of dump_grammar for token or single-word terminals."""
    from .representation import Token

    rules = {}
    root = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        head, sep, body = line.partition("->")
        m = re.fullmatch(r"\s*p(\d+)\s*", head)
        if not sep or not m:
            raise FormatError(f"expected 'pN -> ...', got {line!r}", row=lineno)
        rid = int(m.group(1))
        rhs = []
        for sm in _SYM_RE.finditer(body):
            ref, val, dur, bare, word = sm.groups()
            if ref is not None:
                rhs.append(RuleRef(int(ref)))
            elif val is not None:
                rhs.append(Token(int(val), int(dur)))
            elif bare is not None:
                rhs.append(Token(int(bare)))
            else:
                rhs.append(word)
        rules[rid] = tuple(rhs)
        if root is None:
            root = rid
    if root is None:
        raise FormatError("empty grammar dump")
    return Grammar(rules, root)
