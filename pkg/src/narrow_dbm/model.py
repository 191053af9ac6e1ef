"""Layered Boltzmann machine parameters, energies and serialization.

Binary machines (q=2) store weights as ``n_l x n_{l+1}`` matrices and biases
as length-``n_l`` vectors acting on 0/1 states.  For q > 2 units are one-hot
encoded: weights have shape ``(n_l, q, n_{l+1}, q)`` and biases ``(n_l, q)``.
Symbol-0 slices are stored explicitly, so the q>2 parameterization carries
redundant directions that normalization absorbs.

The two forms are related by the embedding ``[x=1] = x``, ``[x=0] = 1 - x``.
Expanding a one-hot coupling ``W`` between units x and y gives::

    W00 + x (W10 - W00) + y (W01 - W00) + x y (W11 - W10 - W01 + W00)

so the compact weight is ``W11 - W10 - W01 + W00`` and the difference terms
move into the biases (the constant drops out under normalization).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Distribution, StateSpace
from .errors import DimensionError, DomainError, ParseError, SizeError

ORACLE_LIMIT = 2**20


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def weight_shape(q: int, n_lo: int, n_hi: int) -> tuple[int, ...]:
    return (n_lo, n_hi) if q == 2 else (n_lo, q, n_hi, q)


def bias_shape(q: int, n: int) -> tuple[int, ...]:
    return (n,) if q == 2 else (n, q)


@dataclass(frozen=True, eq=False)
class DbmParams:
    """Interaction arrays ``weights[l]`` between layers l and l+1 and one
    bias array per layer.  Layer 0 is the visible layer."""

    q: int
    widths: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        q = self.q
        if not isinstance(q, (int, np.integer)) or q < 2:
            raise DomainError(f"alphabet size must be an integer >= 2, got {q!r}")
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 2 or any(w < 1 for w in widths):
            raise DimensionError(f"need at least two layers of positive width, got {widths}")
        L = len(widths) - 1
        if len(self.weights) != L:
            raise DimensionError(f"expected {L} weight arrays, got {len(self.weights)}")
        if len(self.biases) != L + 1:
            raise DimensionError(f"expected {L + 1} bias arrays, got {len(self.biases)}")
        weights = tuple(_frozen(w) for w in self.weights)
        biases = tuple(_frozen(b) for b in self.biases)
        for l, w in enumerate(weights):
            expect = weight_shape(q, widths[l], widths[l + 1])
            if w.shape != expect:
                raise DimensionError(f"weights[{l}] has shape {w.shape}, expected {expect}")
        for l, b in enumerate(biases):
            expect = bias_shape(q, widths[l])
            if b.shape != expect:
                raise DimensionError(f"biases[{l}] has shape {b.shape}, expected {expect}")
        if not all(np.all(np.isfinite(a)) for a in weights + biases):
            raise DomainError("parameters must be finite")
        object.__setattr__(self, "q", int(q))
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def depth(self) -> int:
        """Number of hidden layers L."""
        return len(self.widths) - 1

    @property
    def total_units(self) -> int:
        return sum(self.widths)

    def space(self, k: int) -> StateSpace:
        return StateSpace(self.widths[k], self.q)

    @classmethod
    def zeros(cls, widths: Sequence[int], q: int = 2) -> "DbmParams":
        widths = tuple(widths)
        return cls(
            q,
            widths,
            tuple(np.zeros(weight_shape(q, a, b)) for a, b in zip(widths, widths[1:])),
            tuple(np.zeros(bias_shape(q, w)) for w in widths),
        )

    @classmethod
    def random(
        cls, widths: Sequence[int], q: int = 2, rng=None, scale: float = 1.0
    ) -> "DbmParams":
        rng = np.random.default_rng(rng)
        widths = tuple(widths)
        return cls(
            q,
            widths,
            tuple(rng.normal(0, scale, weight_shape(q, a, b)) for a, b in zip(widths, widths[1:])),
            tuple(rng.normal(0, scale, bias_shape(q, w)) for w in widths),
        )

    def replace(self, weights=None, biases=None) -> "DbmParams":
        return DbmParams(
            self.q,
            self.widths,
            tuple(self.weights if weights is None else weights),
            tuple(self.biases if biases is None else biases),
        )

    def to_onehot(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Weights and biases in the one-hot form, for any q."""
        if self.q != 2:
            return [np.array(w) for w in self.weights], [np.array(b) for b in self.biases]
        ws = []
        for w in self.weights:
            full = np.zeros((w.shape[0], 2, w.shape[1], 2))
            full[:, 1, :, 1] = w
            ws.append(full)
        bs = []
        for b in self.biases:
            full = np.zeros((b.shape[0], 2))
            full[:, 1] = b
            bs.append(full)
        return ws, bs

    @classmethod
    def from_onehot(cls, q: int, widths, weights, biases) -> "DbmParams":
        """Build native parameters from one-hot arrays (compacting when q=2)."""
        widths = tuple(widths)
        if q != 2:
            return cls(q, widths, tuple(weights), tuple(biases))
        cw = []
        cb = [np.asarray(b)[:, 1] - np.asarray(b)[:, 0] for b in biases]
        for l, w in enumerate(weights):
            w = np.asarray(w)
            cw.append(w[:, 1, :, 1] - w[:, 1, :, 0] - w[:, 0, :, 1] + w[:, 0, :, 0])
            cb[l] = cb[l] + (w[:, 1, :, 0] - w[:, 0, :, 0]).sum(axis=1)
            cb[l + 1] = cb[l + 1] + (w[:, 0, :, 1] - w[:, 0, :, 0]).sum(axis=0)
        return cls(2, widths, tuple(cw), tuple(cb))


RbmParams = DbmParams  # a DbmParams with depth 1


@dataclass(frozen=True, eq=False)
class FeedforwardLayer:
    """Conditional q(x_out | x_in) ∝ exp(x_out^T W x_in + x_out^T B)."""

    q: int
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w, b = _frozen(self.weights), _frozen(self.bias)
        if self.q == 2:
            if w.ndim != 2:
                raise DimensionError(f"binary weights must be a matrix, got shape {w.shape}")
            n_out, n_in = w.shape
        else:
            if w.ndim != 4 or w.shape[1] != self.q or w.shape[3] != self.q:
                raise DimensionError(f"weights must have shape (n_out, q, n_in, q), got {w.shape}")
            n_out, n_in = w.shape[0], w.shape[2]
        if b.shape != bias_shape(self.q, n_out):
            raise DimensionError(f"bias has shape {b.shape}, expected {bias_shape(self.q, n_out)}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise DomainError("parameters must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    @property
    def n_in(self) -> int:
        return self.weights.shape[1] if self.q == 2 else self.weights.shape[2]

    @classmethod
    def from_dbm(cls, params: DbmParams, l: int, input_bias_split=None) -> "FeedforwardLayer":
        """The conditional of layer l given layer l+1 with bias ``B_l - B'_l``."""
        bias = params.biases[l]
        if input_bias_split is not None:
            bias = bias - np.asarray(input_bias_split)
        return cls(params.q, params.weights[l], bias)

    def fields(self, x_in: np.ndarray) -> np.ndarray:
        """Per-unit log-potentials of the outputs, shape (batch, n_out, q).

        ``x_in`` is an integer array of input states, shape (batch, n_in).
        """
        x_in = np.atleast_2d(np.asarray(x_in, dtype=np.int64))
        if x_in.shape[1] != self.n_in:
            raise DimensionError(f"input states have {x_in.shape[1]} units, expected {self.n_in}")
        if self.q == 2:
            on = x_in @ self.weights.T + self.bias
            return np.stack([np.zeros_like(on), on], axis=2)
        enc = np.eye(self.q)[x_in]
        return np.einsum("ivmu,bmu->biv", self.weights, enc) + self.bias[None]


def _unary(q: int, states: np.ndarray, b: np.ndarray) -> np.ndarray:
    if q == 2:
        return states @ b
    return np.eye(q)[states].reshape(len(states), -1) @ b.reshape(-1)


def _pairwise(q: int, lo: np.ndarray, w: np.ndarray, hi: np.ndarray) -> np.ndarray:
    if q == 2:
        return np.einsum("si,ij,sj->s", lo, w, hi)
    e_lo, e_hi = np.eye(q)[lo], np.eye(q)[hi]
    return np.einsum("siv,ivmu,smu->s", e_lo, w, e_hi)


def negative_energy(params: DbmParams, joint_state: Sequence[Sequence[int]]) -> float:
    """Exponent of the joint Boltzmann factor for one state of every layer."""
    if len(joint_state) != len(params.widths):
        raise DimensionError(f"expected {len(params.widths)} layer states, got {len(joint_state)}")
    xs = []
    for k, x in enumerate(joint_state):
        x = np.asarray(x, dtype=np.int64).reshape(1, -1)
        if x.shape[1] != params.widths[k]:
            raise DimensionError(f"layer {k} state has {x.shape[1]} units, expected {params.widths[k]}")
        if np.any(x < 0) or np.any(x >= params.q):
            raise DomainError(f"layer {k} state has symbols outside 0..{params.q - 1}")
        xs.append(x)
    total = sum(_unary(params.q, x, b)[0] for x, b in zip(xs, params.biases))
    total += sum(
        _pairwise(params.q, xs[l], w, xs[l + 1])[0] for l, w in enumerate(params.weights)
    )
    return float(total)


def _joint_log_weights(params: DbmParams, limit: int) -> np.ndarray:
    N = params.total_units
    count = params.q**N
    if count > limit:
        raise SizeError(f"{count} joint states exceed the oracle limit {limit}")
    space = StateSpace(N, params.q)
    states = space.states
    cuts = np.cumsum((0,) + params.widths)
    out = np.empty(count)
    chunk = 1 << 15
    for start in range(0, count, chunk):
        block = states[start : start + chunk]
        layers = [block[:, cuts[k] : cuts[k + 1]] for k in range(len(params.widths))]
        acc = np.zeros(len(block))
        for x, b in zip(layers, params.biases):
            acc += _unary(params.q, x, b)
        for l, w in enumerate(params.weights):
            acc += _pairwise(params.q, layers[l], w, layers[l + 1])
        out[start : start + len(block)] = acc
    return out


def joint_distribution_oracle(params: DbmParams, limit: int = ORACLE_LIMIT) -> Distribution:
    """Brute-force joint distribution over all units, layers concatenated."""
    lw = _joint_log_weights(params, limit)
    return Distribution.from_log_weights(StateSpace(params.total_units, params.q), lw)


def oracle_log_partition(params: DbmParams, limit: int = ORACLE_LIMIT) -> float:
    lw = _joint_log_weights(params, limit)
    m = lw.max()
    return float(m + math.log(np.exp(lw - m).sum()))


def oracle_layer_marginal(params: DbmParams, k: int, limit: int = ORACLE_LIMIT) -> Distribution:
    """Marginal of layer k obtained by summing the enumerated joint."""
    joint = joint_distribution_oracle(params, limit).probs
    sizes = [params.q**w for w in params.widths]
    table = joint.reshape(sizes)
    axes = tuple(i for i in range(len(sizes)) if i != k)
    return Distribution.from_weights(params.space(k), table.sum(axis=axes))


# -- serialization -----------------------------------------------------------


def to_json(params: DbmParams) -> dict:
    return {
        "q": params.q,
        "widths": list(params.widths),
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }


def serialize(params: DbmParams) -> bytes:
    """JSON encoding; floats use the shortest repr that round-trips exactly."""
    return json.dumps(to_json(params), allow_nan=False).encode("utf-8")


def _array(value, path: str, shape: tuple[int, ...]) -> np.ndarray:
    try:
        a = np.array(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ParseError(path, f"not a numeric array: {exc}") from exc
    if a.shape != shape:
        raise ParseError(path, f"shape {a.shape}, expected {shape}")
    if not np.all(np.isfinite(a)):
        raise ParseError(path, "entries must be finite")
    return a


def from_json(doc) -> DbmParams:
    if not isinstance(doc, dict):
        raise ParseError("$", "model document must be a JSON object")
    q = doc.get("q", 2)
    if not isinstance(q, int) or isinstance(q, bool) or q < 2:
        raise ParseError("q", f"expected an integer >= 2, got {q!r}")
    for key in ("widths", "weights", "biases"):
        if key not in doc:
            raise ParseError(key, "missing required field")
    widths = doc["widths"]
    if (
        not isinstance(widths, list)
        or len(widths) < 2
        or not all(isinstance(w, int) and not isinstance(w, bool) and w >= 1 for w in widths)
    ):
        raise ParseError("widths", "expected a list of at least two positive integers")
    L = len(widths) - 1
    if not isinstance(doc["weights"], list) or len(doc["weights"]) != L:
        raise ParseError("weights", f"expected a list of {L} arrays")
    if not isinstance(doc["biases"], list) or len(doc["biases"]) != L + 1:
        raise ParseError("biases", f"expected a list of {L + 1} arrays")
    weights = [
        _array(w, f"weights[{l}]", weight_shape(q, widths[l], widths[l + 1]))
        for l, w in enumerate(doc["weights"])
    ]
    biases = [_array(b, f"biases[{l}]", bias_shape(q, widths[l])) for l, b in enumerate(doc["biases"])]
    return DbmParams(q, tuple(widths), tuple(weights), tuple(biases))


def deserialize(data: bytes | str) -> DbmParams:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError("$", f"invalid JSON: {exc}") from exc
    return from_json(doc)
