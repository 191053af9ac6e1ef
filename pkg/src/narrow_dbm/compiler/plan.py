"""Support sequences S^1 ⊂ S^2 ⊂ ... grown by probability-sharing steps."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..core import Distribution, StateSpace, SupportSet, flip, hamming_adjacent
from ..errors import DimensionError, PlanError


@dataclass(frozen=True)
class Move:
    """Mass flows from ``source`` to ``target = flip(source, direction, symbol)``."""

    source: int
    target: int
    direction: int
    symbol: int


@dataclass(frozen=True)
class SharingStep:
    """Disjoint adjacent pairs, each with its own flip direction.

    Every member of a pair that lies in the current support and whose flip
    is a new state becomes a source; ``fractions`` holds one sharing fraction
    per resulting move, in pair order then member order.  For binary units
    ``symbols`` may be omitted (the bit is inverted).
    """

    pairs: tuple[tuple[int, int], ...]
    directions: tuple[int, ...]
    symbols: tuple[int, ...] | None = None
    fractions: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((int(a), int(b)) for a, b in self.pairs))
        object.__setattr__(self, "directions", tuple(int(d) for d in self.directions))
        if self.symbols is not None:
            object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        object.__setattr__(self, "fractions", tuple(float(f) for f in self.fractions))

    def validate(self, space: StateSpace) -> None:
        if len(self.pairs) != len(self.directions):
            raise PlanError("each pair needs exactly one direction")
        if self.symbols is not None and len(self.symbols) != len(self.pairs):
            raise PlanError("each pair needs exactly one symbol")
        if self.symbols is None and space.q != 2:
            raise PlanError("q-ary sharing steps need explicit symbols")
        if len(set(self.directions)) != len(self.directions):
            raise PlanError(f"directions repeat: {self.directions}")
        seen: set[int] = set()
        for j, (a, b) in enumerate(self.pairs):
            for s in (a, b):
                if not 0 <= s < space.size:
                    raise PlanError(f"pair {j} state {s} out of range")
            if not hamming_adjacent(space.decode(a), space.decode(b)):
                raise PlanError(f"pair {j} = {(a, b)} is not an adjacent pair")
            if a in seen or b in seen:
                raise PlanError(f"pair {j} overlaps an earlier pair")
            seen.update((a, b))
            if not 0 <= self.directions[j] < space.n:
                raise PlanError(f"direction {self.directions[j]} out of range")
            if self.symbols is not None and not 0 <= self.symbols[j] < space.q:
                raise PlanError(f"symbol {self.symbols[j]} out of range")

    def moves(self, space: StateSpace, support: SupportSet) -> list[Move]:
        """Sources and new points of this step applied to ``support``."""
        self.validate(space)
        out: list[Move] = []
        new: set[int] = set()
        for j, pair in enumerate(self.pairs):
            i = self.directions[j]
            for a in pair:
                if a not in support:
                    continue
                x = space.decode(a)
                b = (1 - x[i]) if self.symbols is None else self.symbols[j]
                if x[i] == b:
                    continue
                y = space.encode(flip(x, i, b, space.q))
                if y in support:
                    continue
                if y in new:
                    raise PlanError(f"state {y} is produced by two moves")
                new.add(y)
                out.append(Move(a, y, i, b))
        if self.fractions and len(self.fractions) != len(out):
            raise PlanError(f"{len(self.fractions)} fractions given for {len(out)} moves")
        return out

    def with_fractions(self, fractions: Sequence[float]) -> "SharingStep":
        return replace(self, fractions=tuple(fractions))


@dataclass(frozen=True)
class SharingPlan:
    space: StateSpace
    initial: SupportSet
    initial_pairs: tuple[tuple[int, int], ...]
    steps: tuple[SharingStep, ...] = field(default=())

    @property
    def depth(self) -> int:
        """Hidden layers needed: one RBM plus one feedforward layer per step."""
        return 1 + len(self.steps)

    def supports(self) -> list[SupportSet]:
        """S^1, ..., S^T with T = len(steps) + 1."""
        out = [self.initial]
        for t, step in enumerate(self.steps):
            moves = step.moves(self.space, out[-1])
            if not moves:
                raise PlanError(f"step {t} adds no new states")
            out.append(out[-1].union(m.target for m in moves))
        return out

    @property
    def final(self) -> SupportSet:
        return self.supports()[-1]

    def validate(self) -> None:
        check_pair_cover(self.space, self.initial, self.initial_pairs)
        self.supports()


def check_pair_cover(space: StateSpace, support: SupportSet, pairs) -> None:
    seen: set[int] = set()
    for a, b in pairs:
        if not hamming_adjacent(space.decode(a), space.decode(b)):
            raise PlanError(f"{(a, b)} is not an adjacent pair")
        if a in seen or b in seen:
            raise PlanError("initial pairs overlap")
        seen.update((a, b))
    missing = [s for s in support if s not in seen]
    if missing:
        raise PlanError(f"support states {missing} are not covered by the pairs")


def cover_with_pairs(space: StateSpace, members: Sequence[int]) -> list[tuple[int, int]]:
    """Greedy disjoint cover of ``members`` by adjacent pairs.

    Members are matched to an adjacent member when possible (scanning the
    last coordinate first); a leftover state is paired with an outside
    neighbour.
    """
    inside = set(members)
    used: set[int] = set()
    pairs = []
    for a in sorted(inside):
        if a in used:
            continue
        x = space.decode(a)
        partner = None
        for d in range(space.n - 1, -1, -1):
            for u in range(space.q):
                if u == x[d]:
                    continue
                b = space.encode(flip(x, d, u, space.q))
                if b in inside and b not in used:
                    partner = b
                    break
            if partner is not None:
                break
        if partner is None:
            for d in range(space.n - 1, -1, -1):
                for u in range(space.q):
                    b = space.encode(flip(x, d, u, space.q)) if u != x[d] else None
                    if b is not None and b not in used and b not in inside:
                        partner = b
                        break
                if partner is not None:
                    break
        if partner is None:
            raise PlanError(f"state {a} has no free neighbour to pair with")
        used.update((a, partner))
        pairs.append((a, partner))
    return pairs


def initial_support(n: int, q: int = 2) -> tuple[SupportSet, list[tuple[int, int]]]:
    """S^1 together with the adjacent pairs that cover it.

    For binary units with n = 2**k + k + 1 (k >= 1) this is the set of
    strings whose last 2**k entries are zero.  Otherwise up to n pairs along
    the last coordinate, first in enumeration order.
    """
    space = StateSpace(n, q)
    k = 1
    while 2**k + k + 1 < n:
        k += 1
    if q == 2 and 2**k + k + 1 == n:
        tail = 2**k
        members = [i for i, x in enumerate(space.states) if not x[n - tail :].any()]
        return SupportSet(space, tuple(members)), cover_with_pairs(space, members)
    pairs = []
    for i, x in enumerate(space.states):
        if x[-1] != 0:
            continue
        pairs.append((i, space.encode(flip(x, n - 1, 1, q))))
        if len(pairs) == n:
            break
    members = tuple(s for p in pairs for s in p)
    return SupportSet(space, tuple(sorted(members))), pairs


def _greedy_step(space: StateSpace, support: SupportSet) -> SharingStep:
    n, q = space.n, space.q
    states = space.states
    used: set[int] = set()
    used_dirs: set[int] = set()
    new: set[int] = set()
    pairs, dirs, syms = [], [], []
    in_s = support.mask()
    members = sorted(support.members)

    def encode_flip(a: int, i: int, b: int) -> int:
        x = states[a]
        return a + (b - int(x[i])) * q ** (n - 1 - i)

    while len(new) < n:
        best = None
        for i in range(n):
            if i in used_dirs:
                continue
            for b in range(q):
                for a in members:
                    if a in used or states[a][i] == b:
                        continue
                    y = encode_flip(a, i, b)
                    if in_s[y] or y in new:
                        continue
                    cand = (1, i, b, (a, y))
                    if len(new) + 2 <= n:
                        for d in range(n):
                            if d == i:
                                continue
                            for u in range(q):
                                if u == states[a][d]:
                                    continue
                                a2 = encode_flip(a, d, u)
                                if not in_s[a2] or a2 in used:
                                    continue
                                y2 = encode_flip(a2, i, b)
                                if in_s[y2] or y2 in new or y2 == y:
                                    continue
                                cand = (2, i, b, (a, a2))
                                break
                            if cand[0] == 2:
                                break
                    if best is None or cand[0] > best[0]:
                        best = cand
                    if best[0] == 2:
                        break
                if best is not None and best[0] == 2:
                    break
            if best is not None and best[0] == 2:
                break
        if best is None:
            break
        gain, i, b, pair = best
        used_dirs.add(i)
        pairs.append(pair)
        dirs.append(i)
        syms.append(b)
        a, second = pair
        used.update(pair)
        new.add(encode_flip(a, i, b))
        if gain == 2:
            new.add(encode_flip(second, i, b))
        else:
            used.add(second)
    if not pairs:
        raise PlanError("no sharing move extends the support")
    return SharingStep(tuple(pairs), tuple(dirs), tuple(syms) if q != 2 else None)


def plan_supports(n: int, q: int = 2) -> SharingPlan:
    """Greedy plan from S^1 to the full cube, at most n new states per step.

    Moves that add two states (both members of a pair shared along one
    direction) are preferred; ties break by enumeration order.
    """
    if n < 1:
        raise DimensionError(f"need at least one unit, got {n}")
    space = StateSpace(n, q)
    initial, pairs = initial_support(n, q)
    steps = []
    support = initial
    while not support.is_full():
        step = _greedy_step(space, support)
        steps.append(step)
        support = support.union(m.target for m in step.moves(space, support))
    return SharingPlan(space, initial, tuple(pairs), tuple(steps))


def unshare(probs: np.ndarray, moves: Sequence[Move]) -> np.ndarray:
    """Return each new point's mass to its source."""
    prev = np.array(probs, dtype=np.float64)
    for m in moves:
        prev[m.source] += prev[m.target]
        prev[m.target] = 0.0
    return prev


def sharing_fractions(prev: np.ndarray, cur: np.ndarray, moves: Sequence[Move]) -> list[float]:
    """Fraction of each source's mass that the step moves (0/0 taken as 0)."""
    return [float(cur[m.target] / prev[m.source]) if prev[m.source] > 0 else 0.0 for m in moves]


def backward_targets(target: Distribution, plan: SharingPlan) -> list[Distribution]:
    """Per-level targets t^1, ..., t^T with t^T = target and t^l on S^l."""
    if target.space != plan.space:
        raise DimensionError(f"target lives on {target.space}, plan on {plan.space}")
    supports = plan.supports()
    outside = target.probs[~supports[-1].mask()].sum()
    if outside > 0:
        raise PlanError(f"target puts mass {outside:g} outside the plan's final support")
    levels = [target.probs]
    for step, support in zip(reversed(plan.steps), reversed(supports[:-1])):
        levels.append(unshare(levels[-1], step.moves(plan.space, support)))
    return [Distribution(plan.space, p) for p in reversed(levels)]
