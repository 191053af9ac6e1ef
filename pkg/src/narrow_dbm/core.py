"""State spaces over q-ary hypercubes and dense distributions on them.

States are enumerated lexicographically with the leftmost coordinate most
significant, so ``index = sum_i x_i * q**(n-1-i)``.  Every file format and
every oracle comparison in the package relies on this order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    ConditioningError,
    DegenerateProductError,
    DimensionError,
    DomainError,
    ParseError,
    PositivityError,
)

State = tuple[int, ...]

NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True)
class StateSpace:
    """The set {0, ..., q-1}^n in lexicographic order."""

    n: int
    q: int = 2

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 0:
            raise DomainError(f"unit count must be a non-negative integer, got {self.n!r}")
        if not isinstance(self.q, (int, np.integer)) or self.q < 2:
            raise DomainError(f"alphabet size must be an integer >= 2, got {self.q!r}")

    @property
    def size(self) -> int:
        return self.q**self.n

    def __len__(self) -> int:
        return self.size

    @cached_property
    def states(self) -> np.ndarray:
        """All states as an integer array of shape (q**n, n)."""
        idx = np.arange(self.size)
        powers = self.q ** np.arange(self.n - 1, -1, -1)
        out = (idx[:, None] // powers[None, :]) % self.q
        out.setflags(write=False)
        return out

    @cached_property
    def onehot(self) -> np.ndarray:
        """One-hot encoding of all states, shape (q**n, n, q)."""
        out = np.eye(self.q)[self.states]
        out.setflags(write=False)
        return out

    def encode(self, state: Sequence[int]) -> int:
        state = self.check_state(state)
        index = 0
        for v in state:
            index = index * self.q + v
        return index

    def decode(self, index: int) -> State:
        if not 0 <= index < self.size:
            raise DomainError(f"state index {index} out of range for {self.size} states")
        return tuple(int(v) for v in self.states[index])

    def check_state(self, state: Sequence[int]) -> State:
        state = tuple(int(v) for v in state)
        if len(state) != self.n:
            raise DimensionError(f"state {state} has {len(state)} coordinates, expected {self.n}")
        if any(not 0 <= v < self.q for v in state):
            raise DomainError(f"state {state} has symbols outside 0..{self.q - 1}")
        return state


def hamming_adjacent(x: Sequence[int], y: Sequence[int]) -> bool:
    """True iff ``x`` and ``y`` differ in exactly one coordinate."""
    if len(x) != len(y):
        raise DimensionError(f"states of length {len(x)} and {len(y)} are not comparable")
    return sum(int(a) != int(b) for a, b in zip(x, y)) == 1


def flip(x: Sequence[int], j: int, b: int | None = None, q: int = 2) -> State:
    """Return ``x`` with coordinate ``j`` set to ``b``.

    For binary states ``b`` may be omitted, in which case the bit is inverted.
    """
    x = tuple(int(v) for v in x)
    if not 0 <= j < len(x):
        raise DomainError(f"coordinate {j} out of range for a state with {len(x)} units")
    if b is None:
        if q != 2:
            raise DomainError("flip needs an explicit symbol when q > 2")
        b = 1 - x[j]
    if not 0 <= b < q:
        raise DomainError(f"symbol {b} out of range for q={q}")
    return x[:j] + (int(b),) + x[j + 1 :]


@dataclass(frozen=True, eq=False)
class Distribution:
    """Dense probability vector over the states of a :class:`StateSpace`."""

    space: StateSpace
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64).reshape(-1)
        if p.shape[0] != self.space.size:
            raise DimensionError(f"expected {self.space.size} probabilities, got {p.shape[0]}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise DomainError("probabilities must be finite and non-negative")
        total = p.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise DomainError(f"probabilities sum to {total!r}, not 1")
        if abs(total - 1.0) > 8 * np.finfo(np.float64).eps:
            p = p / total
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_weights(cls, space: StateSpace, weights) -> "Distribution":
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != space.size:
            raise DimensionError(f"expected {space.size} weights, got {w.shape[0]}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DomainError("weights must be finite and non-negative")
        total = w.sum()
        if total <= 0:
            raise DegenerateProductError("weights have zero total mass")
        return cls(space, w / total)

    @classmethod
    def from_log_weights(cls, space: StateSpace, log_weights) -> "Distribution":
        lw = np.asarray(log_weights, dtype=np.float64).reshape(-1)
        lw = lw - np.max(lw)
        w = np.exp(lw)
        return cls(space, w / w.sum())

    @classmethod
    def uniform(cls, space: StateSpace) -> "Distribution":
        return cls(space, np.full(space.size, 1.0 / space.size))

    @classmethod
    def point(cls, space: StateSpace, state: Sequence[int] | int) -> "Distribution":
        index = state if isinstance(state, (int, np.integer)) else space.encode(state)
        p = np.zeros(space.size)
        p[index] = 1.0
        return cls(space, p)

    def __len__(self) -> int:
        return self.space.size

    def __getitem__(self, state) -> float:
        if isinstance(state, (int, np.integer)):
            return float(self.probs[state])
        return float(self.probs[self.space.encode(state)])

    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.probs > 0))

    def is_strictly_positive(self) -> bool:
        return bool(np.all(self.probs > 0))

    def to_json(self) -> dict:
        return {"n": self.space.n, "q": self.space.q, "probs": [float(v) for v in self.probs]}

    @classmethod
    def from_json(cls, doc: Mapping) -> "Distribution":
        if not isinstance(doc, Mapping):
            raise ParseError("$", "distribution document must be a JSON object")
        for key in ("n", "probs"):
            if key not in doc:
                raise ParseError(key, "missing required field")
        n, q = doc["n"], doc.get("q", 2)
        if not isinstance(n, int) or isinstance(n, bool) or n < 0:
            raise ParseError("n", f"expected a non-negative integer, got {n!r}")
        if not isinstance(q, int) or isinstance(q, bool) or q < 2:
            raise ParseError("q", f"expected an integer >= 2, got {q!r}")
        probs = doc["probs"]
        if not isinstance(probs, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in probs
        ):
            raise ParseError("probs", "expected a list of numbers")
        space = StateSpace(n, q)
        if len(probs) != space.size:
            raise ParseError("probs", f"expected {space.size} entries, got {len(probs)}")
        try:
            return cls(space, np.array(probs, dtype=np.float64))
        except DomainError as exc:
            raise ParseError("probs", str(exc)) from exc


@dataclass(frozen=True)
class SupportSet:
    """An ordered set of state indices of one state space."""

    space: StateSpace
    members: tuple[int, ...]

    def __post_init__(self):
        members = tuple(int(m) for m in self.members)
        if len(set(members)) != len(members):
            raise DomainError("support set has duplicate members")
        if any(not 0 <= m < self.space.size for m in members):
            raise DomainError("support set member out of range")
        object.__setattr__(self, "members", members)

    @classmethod
    def of(cls, space: StateSpace, states: Iterable) -> "SupportSet":
        members = [s if isinstance(s, (int, np.integer)) else space.encode(s) for s in states]
        return cls(space, tuple(members))

    def __contains__(self, index) -> bool:
        return int(index) in self._lookup

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @cached_property
    def _lookup(self) -> frozenset:
        return frozenset(self.members)

    def mask(self) -> np.ndarray:
        m = np.zeros(self.space.size, dtype=bool)
        m[list(self.members)] = True
        return m

    def union(self, other: Iterable[int]) -> "SupportSet":
        extra = [int(i) for i in other if int(i) not in self._lookup]
        return SupportSet(self.space, self.members + tuple(dict.fromkeys(extra)))

    def is_full(self) -> bool:
        return len(self.members) == self.space.size


def _same_space(a: Distribution, b: Distribution) -> None:
    if a.space != b.space:
        raise DimensionError(f"distributions live on different spaces: {a.space} vs {b.space}")


def total_variation(p: Distribution, r: Distribution) -> float:
    _same_space(p, r)
    return 0.5 * float(np.abs(p.probs - r.probs).sum())


def kl_divergence(target: Distribution, model: Distribution) -> float:
    """D(target || model) in nats.

    Returns ``inf`` when the model puts zero mass on a state the target
    charges; callers monitor KL as a metric and must survive that case.
    """
    _same_space(target, model)
    t, m = target.probs, model.probs
    on = t > 0
    if np.any(m[on] == 0):
        return float("inf")
    value = float(np.sum(t[on] * (np.log(t[on]) - np.log(m[on]))))
    return max(value, 0.0)


def hadamard(r: Distribution, s: Distribution) -> Distribution:
    """Renormalized entry-wise product of two distributions."""
    _same_space(r, s)
    w = r.probs * s.probs
    total = w.sum()
    if not total > 0:
        raise DegenerateProductError("distributions have disjoint supports")
    return Distribution(r.space, w / total)


def neutralize(r: Distribution, s: Distribution) -> Distribution:
    """The distribution s' with ``hadamard(r, s') == s``.

    ``r`` must be strictly positive; the result has the same support as ``s``.
    """
    _same_space(r, s)
    if not r.is_strictly_positive():
        raise PositivityError("cannot neutralize a distribution with zero entries")
    w = s.probs / r.probs
    return Distribution(r.space, w / w.sum())


def condition_split(
    p: Distribution, input_coords: Sequence[int], input_value: Sequence[int]
) -> Distribution:
    """Conditional over the coordinates not in ``input_coords``.

    The remaining coordinates keep their original relative order.  Clamping
    every coordinate yields the point mass on the single state of the empty
    space.
    """
    n, q = p.space.n, p.space.q
    coords = [int(c) for c in input_coords]
    values = [int(v) for v in input_value]
    if len(coords) != len(values):
        raise DimensionError("input coordinates and input values differ in length")
    if len(set(coords)) != len(coords):
        raise DomainError("input coordinates repeat")
    for c, v in zip(coords, values):
        if not 0 <= c < n:
            raise DomainError(f"coordinate {c} out of range for {n} units")
        if not 0 <= v < q:
            raise DomainError(f"symbol {v} out of range for q={q}")
    rest = [i for i in range(n) if i not in coords]
    table = p.probs.reshape((q,) * n) if n else p.probs.reshape(())
    index = [slice(None)] * n
    for c, v in zip(coords, values):
        index[c] = v
    sub = np.asarray(table[tuple(index)], dtype=np.float64).reshape(-1)
    total = sub.sum()
    if not total > 0:
        raise ConditioningError("clamped event has zero probability")
    return Distribution(StateSpace(len(rest), q), sub / total)
