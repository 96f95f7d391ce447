"""Equality and order hypotheses over group precisions.

A hypothesis such as ``1=2>(3,4,5=6)>7`` partitions the groups into equality
blocks and orders some blocks above others. ``>`` means "larger precision",
that is, smaller variance. With ``scale="sd"`` the same text is read as a
statement about standard deviations and every relation is reversed.

Grammar::

    expr  := term (('<' | '>') term)*
    term  := atom (',' atom)* | '(' term ')'
    atom  := index ('=' index)*
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import GroupStats
from .errors import DomainError, ParseError, ValidationError

SCALES = ("precision", "sd")

_TOKEN = re.compile(r"\s*(?:(\d+)|([=,<>()]))")


@dataclass(frozen=True)
class HypothesisSpec:
    """Partition of groups 1..k into blocks plus a strict order among blocks.

    Attributes:
        k: Number of groups.
        blocks: Tuple of blocks, each a sorted tuple of 1-based group indices,
            sorted by smallest member.
        order: Pairs ``(i, j)`` of block positions meaning block i has the
            larger precision.
        chain: Blocks grouped into the terms of the expression, used only to
            print the hypothesis back.
    """

    k: int
    blocks: tuple[tuple[int, ...], ...]
    order: frozenset[tuple[int, int]] = frozenset()
    chain: tuple[tuple[int, ...], ...] = field(default=(), compare=False, repr=False)
    ops: tuple[str, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        members = sorted(i for b in self.blocks for i in b)
        if members != list(range(1, self.k + 1)):
            raise ValidationError(f"blocks must partition groups 1..{self.k}")
        m = len(self.blocks)
        for i, j in self.order:
            if not (0 <= i < m and 0 <= j < m) or i == j:
                raise ValidationError("order refers to an unknown block or relates a block to itself")
        if _has_cycle(m, self.order):
            raise ValidationError("order relation is cyclic")

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def is_null(self) -> bool:
        return self.n_blocks == 1

    def block_of(self) -> list[int]:
        """Block position of each group (0-based groups)."""
        out = [0] * self.k
        for b, members in enumerate(self.blocks):
            for i in members:
                out[i - 1] = b
        return out

    def __str__(self) -> str:
        return format_hypothesis(self)


def _has_cycle(m: int, order) -> bool:
    succ = {i: [] for i in range(m)}
    for i, j in order:
        succ[i].append(j)
    state = [0] * m

    def visit(u):
        state[u] = 1
        for v in succ[u]:
            if state[v] == 1 or (state[v] == 0 and visit(v)):
                return True
        state[u] = 2
        return False

    return any(state[u] == 0 and visit(u) for u in range(m))


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            ws = len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[pos + ws]!r}", pos + ws)
        start = m.start(1) if m.group(1) else m.start(2)
        out.append((m.group(1) or m.group(2), start))
        pos = m.end()
    out.append(("", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expr(self):
        terms = [self.term()]
        ops = []
        while self.peek()[0] in ("<", ">"):
            ops.append(self.take()[0])
            terms.append(self.term())
        tok, pos = self.peek()
        if tok != "":
            raise ParseError(f"unexpected token {tok!r}", pos)
        return terms, ops

    def term(self):
        tok, pos = self.peek()
        if tok == "(":
            self.take()
            inner = self.term()
            tok, pos = self.take()
            if tok != ")":
                raise ParseError("expected ')'", pos)
            return inner
        atoms = [self.atom()]
        while self.peek()[0] == ",":
            self.take()
            atoms.append(self.atom())
        return atoms

    def atom(self):
        members = [self.index()]
        while self.peek()[0] == "=":
            self.take()
            members.append(self.index())
        return members

    def index(self):
        tok, pos = self.take()
        if not tok.isdigit():
            raise ParseError(f"expected a group index, got {tok or 'end of input'!r}", pos)
        value = int(tok)
        if value == 0:
            raise ParseError("group indices start at 1", pos)
        return value


def parse_hypothesis(text: str, k: int, scale: str = "precision") -> HypothesisSpec:
    """Parse a hypothesis string over ``k`` groups."""
    if scale not in SCALES:
        raise ValidationError(f"scale must be one of {SCALES}, got {scale!r}")
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty hypothesis", 0)
    if k < 1:
        raise ValidationError("need at least one group")
    terms, ops = _Parser(text).expr()

    seen: set[int] = set()
    for term in terms:
        for atom in term:
            for idx in atom:
                if idx > k:
                    raise ValidationError(f"group index {idx} out of range 1..{k}")
                if idx in seen:
                    raise ValidationError(f"group index {idx} appears more than once")
                seen.add(idx)
    missing = sorted(set(range(1, k + 1)) - seen)
    if missing:
        raise ValidationError(f"group indices {missing} missing from hypothesis")

    blocks = sorted(tuple(sorted(atom)) for term in terms for atom in term)
    position = {b: i for i, b in enumerate(blocks)}
    chain = tuple(tuple(sorted(position[tuple(sorted(a))] for a in term)) for term in terms)
    if scale == "sd":
        ops = [">" if op == "<" else "<" for op in ops]
    order = set()
    for left, op, right in zip(chain, ops, chain[1:]):
        big, small = (left, right) if op == ">" else (right, left)
        order.update((i, j) for i in big for j in small)
    return HypothesisSpec(k, tuple(blocks), frozenset(order), chain, tuple(ops))


def format_hypothesis(spec: HypothesisSpec) -> str:
    """Canonical text form, read on the precision scale."""

    def block(b):
        return "=".join(str(i) for i in spec.blocks[b])

    chain, ops = spec.chain, spec.ops
    if not chain:
        # built directly rather than parsed: only unordered specs are printable
        if spec.order:
            raise ValueError("cannot print an order that did not come from the parser")
        chain, ops = (tuple(range(spec.n_blocks)),), ()
    if ops and all(op == "<" for op in ops):
        chain, ops = chain[::-1], tuple(">" for _ in ops)
    if len(chain) == 1:
        return ",".join(block(b) for b in chain[0])
    parts = []
    for term in chain:
        text = ",".join(block(b) for b in term)
        parts.append(f"({text})" if len(term) > 1 else text)
    out = parts[0]
    for op, part in zip(ops, parts[1:]):
        out += op + part
    return out


def _as_rho(rho, k: int) -> np.ndarray:
    r = np.asarray(rho, dtype=float)
    if r.shape[-1] != k:
        raise DomainError(f"expected {k} weights, got {r.shape[-1]}")
    return r


def order_mask(rho, spec: HypothesisSpec) -> np.ndarray:
    """Vectorized order check over rows of ``rho`` (shape (..., k))."""
    r = _as_rho(rho, spec.k)
    ok = np.ones(r.shape[:-1], dtype=bool)
    for i, j in spec.order:
        big = [m - 1 for m in spec.blocks[i]]
        small = [m - 1 for m in spec.blocks[j]]
        ok &= r[..., big].min(axis=-1) > r[..., small].max(axis=-1)
    return ok


def satisfies_order(rho: Sequence[float], spec: HypothesisSpec) -> bool:
    """True when every ordered block pair holds strictly for all members."""
    r = _as_rho(rho, spec.k)
    if r.ndim != 1:
        raise DomainError("satisfies_order takes a single weight vector")
    if np.any(r <= 0) or abs(r.sum() - 1) > 1e-9:
        raise DomainError("rho must be a strictly positive simplex vector")
    return bool(order_mask(r, spec))


def collapse(stats: Sequence[GroupStats], spec: HypothesisSpec) -> tuple[list[GroupStats], HypothesisSpec]:
    """Pool each equality block into one group.

    The pooled group carries the count of merged groups, so that its
    residual degrees of freedom stay n - (number of member means).
    """
    if len(stats) != spec.k:
        raise DomainError(f"hypothesis has {spec.k} groups but {len(stats)} stats were given")
    pooled = [
        GroupStats(
            sum(stats[i - 1].n for i in b),
            sum(stats[i - 1].ss for i in b),
            sum(stats[i - 1].pooled for i in b),
        )
        for b in spec.blocks
    ]
    m = spec.n_blocks
    reduced = HypothesisSpec(
        m,
        tuple((b + 1,) for b in range(m)),
        spec.order,
        spec.chain,
        spec.ops,
    )
    return pooled, reduced


def permute_hypothesis(spec: HypothesisSpec, perm: Sequence[int]) -> HypothesisSpec:
    """Relabel groups: old group g becomes group perm[g-1] (1-based)."""
    if sorted(perm) != list(range(1, spec.k + 1)):
        raise ValidationError("perm must be a permutation of 1..k")
    text = format_hypothesis(spec)
    relabeled = re.sub(r"\d+", lambda m: str(perm[int(m.group()) - 1]), text)
    return parse_hypothesis(relabeled, spec.k)
