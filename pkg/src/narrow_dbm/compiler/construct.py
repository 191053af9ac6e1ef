"""Explicit parameter constructions: the top RBM and the sharing layers."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from ..core import Distribution, StateSpace, SupportSet
from ..errors import DimensionError, PlanError
from ..model import DbmParams, FeedforwardLayer
from .plan import Move, SharingStep, check_pair_cover

LOGIT_CLIP = 200.0


def build_rbm_support(
    target: Distribution,
    pairs: Sequence[tuple[int, int]],
    beta: float,
    width: int | None = None,
) -> DbmParams:
    """RBM whose visible marginal approximates ``target``.

    The target's support must be covered by disjoint adjacent pairs, one
    hidden unit per pair.  Off-support mass decays like ``exp(-beta)``.
    """
    with np.errstate(divide="ignore"):
        log_t = np.log(target.probs)
    return rbm_from_log_weights(target.space, log_t, pairs, beta, width)


def rbm_from_log_weights(
    space: StateSpace,
    log_t: np.ndarray,
    pairs: Sequence[tuple[int, int]],
    beta: float,
    width: int | None = None,
) -> DbmParams:
    """Same as :func:`build_rbm_support` for a target given by log weights
    (``-inf`` off the support), so dynamic ranges beyond double precision
    are handled."""
    n, q = space.n, space.q
    width = n if width is None else int(width)
    pairs = [tuple(int(s) for s in p) for p in pairs]
    if len(pairs) > width:
        raise PlanError(f"{len(pairs)} pairs exceed the {width} hidden units")
    log_t = np.asarray(log_t, dtype=np.float64)
    on = np.isfinite(log_t)
    supp = SupportSet(space, tuple(int(i) for i in np.flatnonzero(on)))
    check_pair_cover(space, supp, pairs)
    if beta <= np.log(q):
        raise PlanError(f"beta must exceed log q = {np.log(q):.3g}")
    low = log_t[on].min()
    Y = {x: beta + log_t[x] - low for x in supp}
    lam = max(Y.values()) + beta

    def g(x):
        # log(e^Y - (q - 1)) without overflow
        return float(Y[x] + np.log1p(-(q - 1) * np.exp(-Y[x])))

    W = np.zeros((n, q, width, q))
    Bh = np.zeros((width, q))
    states = space.states
    for j, (a, a2) in enumerate(pairs):
        if a not in Y:
            a, a2 = a2, a
        if a not in Y:
            continue
        xa, xb = states[a], states[a2]
        d = int(np.flatnonzero(xa != xb)[0])
        for m in range(n):
            if m != d:
                W[m, xa[m], j, 1] = lam
        W[d, :, j, 1] = -lam
        W[d, xa[d], j, 1] = 0.0
        if a2 in Y:
            W[d, xb[d], j, 1] = g(a2) - g(a)
        Bh[j, 1] = g(a) - lam * (n - 1)
    return DbmParams.from_onehot(q, (n, width), [W], [np.zeros((n, q)), Bh])


def _features(space: StateSpace) -> np.ndarray:
    """Indicator of (coordinate m carries symbol u >= 1), shape (q**n, n*(q-1))."""
    q = space.q
    cols = [space.states[:, m] == u for m in range(space.n) for u in range(1, q)]
    return np.stack(cols, axis=1).astype(np.float64)


def _sharing_row(
    space: StateSpace,
    unit: int,
    support: SupportSet,
    sources: dict[int, tuple[int, float]],
    margin: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Fields of one output unit, in the gauge where symbol 0 has zero field.

    ``sources`` maps a source state to (new symbol, log-odds of moving).
    Non-sources keep their symbol with log-odds at least ``margin``; a source
    moves to its new symbol with exactly the given log-odds.
    The spread of the fields over the whole cube is minimized, which keeps
    the neutralizer of this layer as flat as possible.
    """
    n, q = space.n, space.q
    A = _features(space)
    nf = A.shape[1]
    block = 1 + nf
    nv = (q - 1) * block + 1
    N = space.size

    # G[v] maps the variable vector to the field of symbol v at every state
    G = np.zeros((q, N, nv))
    for v in range(1, q):
        o = (v - 1) * block
        G[v, :, o] = 1.0
        G[v, :, o + 1 : o + block] = A

    states = space.states
    ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
    for x in support:
        xi = int(states[x, unit])
        if x in sources:
            b, logit = sources[x]
            eq_rows.append(G[b, x] - G[xi, x])
            eq_rhs.append(logit)
            keep = (xi, b)
        else:
            keep = (xi,)
        for u in range(q):
            if u in keep:
                continue
            for k in keep:
                ub_rows.append(G[u, x] - G[k, x])
                ub_rhs.append(-margin)
    for v in range(q):
        for u in range(v + 1, q):
            diff = G[v] - G[u]
            for sign in (1.0, -1.0):
                rows = sign * diff
                rows[:, -1] = -1.0
                ub_rows.extend(rows)
                ub_rhs.extend([0.0] * N)
    c = np.zeros(nv)
    c[-1] = 1.0
    # the problem is homogeneous in its right-hand side; solve at unit scale
    scale = max([margin] + [abs(v) for v in eq_rhs])
    res = linprog(
        c,
        A_ub=np.array(ub_rows),
        b_ub=np.array(ub_rhs) / scale,
        A_eq=np.array(eq_rows) if eq_rows else None,
        b_eq=np.array(eq_rhs) / scale if eq_rhs else None,
        bounds=[(None, None)] * nv,
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise PlanError(f"sharing constraints for unit {unit} are infeasible: {res.message}")
    z = res.x * scale
    W = np.zeros((q, n, q))
    B = np.zeros(q)
    for v in range(1, q):
        o = (v - 1) * block
        B[v] = z[o]
        W[v, :, 1:] = z[o + 1 : o + block].reshape(n, q - 1)
    return W, B


def _logit(rho: float) -> float:
    rho = min(max(rho, 1e-300), 1.0 - 1e-16)
    return float(np.clip(np.log(rho) - np.log1p(-rho), -LOGIT_CLIP, LOGIT_CLIP))


def build_sharing_layer(
    support: SupportSet,
    step: SharingStep,
    beta: float,
    logits: Sequence[float] | None = None,
) -> FeedforwardLayer:
    """Feedforward layer that copies states of ``support`` and performs ``step``.

    ``step.fractions`` must hold one fraction per move.  Within-support
    transitions are reproduced up to ``exp(-beta)`` leaks.  ``logits``, if
    given, overrides the fractions with exact log-odds (no clipping), for
    fractions too small to represent.
    """
    space = support.space
    n, q = space.n, space.q
    moves: list[Move] = step.moves(space, support)
    if len(step.fractions) != len(moves):
        raise PlanError(f"step needs {len(moves)} fractions, got {len(step.fractions)}")
    for f in step.fractions:
        if not 0.0 <= f <= 1.0:
            raise PlanError(f"sharing fraction {f} outside [0, 1]")
    W = np.zeros((n, q, n, q))
    B = np.zeros((n, q))
    if logits is None:
        logits = [_logit(f) for f in step.fractions]
    elif len(logits) != len(moves):
        raise PlanError(f"step needs {len(moves)} logits, got {len(logits)}")
    for i in range(n):
        sources = {
            m.source: (m.symbol, float(z))
            for m, z in zip(moves, logits)
            if m.direction == i
        }
        W[i], B[i] = _sharing_row(space, i, support, sources, beta)
    if q == 2:
        return FeedforwardLayer(2, W[:, 1, :, 1], B[:, 1])
    return FeedforwardLayer(q, W, B)


def centering_bias(layer: FeedforwardLayer) -> np.ndarray:
    """Input bias that cancels the mean output field, in native layout."""
    if layer.q == 2:
        return -0.5 * layer.weights.sum(axis=0)
    return -layer.weights.sum(axis=(0, 1)) / layer.q


def interface_log_weights(layer: FeedforwardLayer, bias_split) -> np.ndarray:
    """Unnormalized log of the top marginal of the RBM ``(W, B, B')``."""
    space = StateSpace(layer.n_in, layer.q)
    split = np.asarray(bias_split, dtype=np.float64)
    if layer.q == 2:
        if split.shape != (layer.n_in,):
            raise DimensionError(f"bias split has shape {split.shape}")
        lin = space.states @ split
    else:
        if split.shape != (layer.n_in, layer.q):
            raise DimensionError(f"bias split has shape {split.shape}")
        lin = np.einsum("amu,mu->a", space.onehot, split)
    f = layer.fields(space.states)
    return lin + logsumexp(f, axis=2).sum(axis=1)


def interface_marginal(layer: FeedforwardLayer, bias_split) -> Distribution:
    space = StateSpace(layer.n_in, layer.q)
    return Distribution.from_log_weights(space, interface_log_weights(layer, bias_split))
