"""Closed-form depth and width bounds for narrow layered Boltzmann machines.

Bounds are real-valued inequalities; the integer contract is their ceiling.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import DomainError

_EPS = 1e-12


def _ceil(x: float) -> int:
    # guard against 7.999999999 from floating round-off
    return math.ceil(x - _EPS)


def admissible_width(n: int, q: int = 2) -> tuple[int, int]:
    """Smallest ``n' = q**k + k + 1 >= n`` with ``k >= 1``, returned as (n', k)."""
    if q < 2:
        raise DomainError(f"alphabet size must be >= 2, got {q}")
    k = 1
    while q**k + k + 1 < n:
        k += 1
    return q**k + k + 1, k


def sufficient_depth_raw(n: int, q: int = 2) -> float:
    if n < 2:
        raise DomainError(f"sufficient depth is defined for n >= 2, got {n}")
    n_prime, _ = admissible_width(n, q)
    if q == 2:
        return 2**n_prime / (2 * (n_prime - math.log2(n_prime) - 1))
    return 1 + (q**n_prime - 1) / (q * (q - 1) * (n_prime - math.log(n_prime, q) - 1))


def sufficient_depth(n: int, q: int = 2) -> int:
    """Number of hidden layers of width n that guarantees universal approximation."""
    return _ceil(sufficient_depth_raw(n, q))


def necessary_depth_raw(n: int, q: int = 2) -> float:
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if q == 2:
        return (2**n - (n + 1)) / (n * (n + 1))
    return (q**n - 1) / (n * (q - 1) * (n * (q - 1) + 2))


def necessary_depth(n: int, q: int = 2) -> int:
    return max(1, _ceil(necessary_depth_raw(n, q)))


def min_first_hidden_width(n0: int) -> int:
    if n0 < 1:
        raise DomainError(f"n0 must be >= 1, got {n0}")
    return n0 - 1 if n0 % 2 == 0 else n0


def param_count(n: int, L: int) -> int:
    """Weights and biases of a machine with L hidden layers, all of width n."""
    if n < 1 or L < 1:
        raise DomainError("n and L must be positive")
    return L * n * n + (L + 1) * n


@dataclass(frozen=True)
class BoundsReport:
    n: int
    q: int
    n_prime: int
    k: int
    sufficient_depth: int | None
    sufficient_depth_raw: float | None
    necessary_depth: int
    necessary_depth_raw: float
    min_first_hidden_width: int
    depth: int
    param_count: int

    def to_json(self) -> dict:
        return asdict(self)


def bounds_report(n: int, q: int = 2, L: int | None = None) -> BoundsReport:
    """All bounds for n visible units; ``param_count`` is taken at depth L
    (default: the sufficient depth, or 1 when that is undefined)."""
    n_prime, k = admissible_width(n, q)
    suff = sufficient_depth(n, q) if n >= 2 else None
    suff_raw = sufficient_depth_raw(n, q) if n >= 2 else None
    depth = L if L is not None else (suff or 1)
    return BoundsReport(
        n=n,
        q=q,
        n_prime=n_prime,
        k=k,
        sufficient_depth=suff,
        sufficient_depth_raw=suff_raw,
        necessary_depth=necessary_depth(n, q),
        necessary_depth_raw=necessary_depth_raw(n, q),
        min_first_hidden_width=min_first_hidden_width(n),
        depth=depth,
        param_count=param_count(n, depth),
    )
