"""Exact inference by chain elimination over layers.

A layered machine is a chain whose "variables" are whole layers, so the
partition function and every layer marginal follow from one upward and one
downward sweep of log-domain messages of length ``q**n_k``.  Cost is
``O(sum_k q**(n_k + n_{k+1}))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import Distribution, StateSpace, hadamard
from .errors import DimensionError, LayerIndexError
from .model import DbmParams, FeedforwardLayer, bias_shape


@dataclass(frozen=True, eq=False)
class TransferMessage:
    """Log of the summed Boltzmann factors of all layers on one side of layer k.

    ``direction`` is ``"up"`` for the contribution of layers above k and
    ``"down"`` for layers below.
    """

    layer: int
    direction: str
    log_values: np.ndarray


def _encoded(space: StateSpace) -> np.ndarray:
    if space.q == 2:
        return space.states.astype(np.float64)
    return space.onehot.reshape(space.size, -1)


def unary_log_potentials(params: DbmParams) -> list[np.ndarray]:
    return [_encoded(params.space(k)) @ b.reshape(-1) for k, b in enumerate(params.biases)]


def pair_log_potentials(params: DbmParams) -> list[np.ndarray]:
    """Tables ``T_l[x_l, x_{l+1}] = x_l^T W_l x_{l+1}`` in enumeration order."""
    out = []
    for l, w in enumerate(params.weights):
        lo, hi = _encoded(params.space(l)), _encoded(params.space(l + 1))
        out.append(lo @ w.reshape(lo.shape[1], hi.shape[1]) @ hi.T)
    return out


def transfer_messages(params: DbmParams) -> tuple[list[TransferMessage], list[TransferMessage]]:
    """Upward and downward messages for every layer."""
    pair = pair_log_potentials(params)
    unary = unary_log_potentials(params)
    L = params.depth
    up = [None] * (L + 1)
    up[L] = np.zeros(len(unary[L]))
    for k in range(L - 1, -1, -1):
        up[k] = logsumexp(pair[k] + (unary[k + 1] + up[k + 1])[None, :], axis=1)
    down = [None] * (L + 1)
    down[0] = np.zeros(len(unary[0]))
    for k in range(1, L + 1):
        down[k] = logsumexp(pair[k - 1] + (unary[k - 1] + down[k - 1])[:, None], axis=0)
    return (
        [TransferMessage(k, "up", v) for k, v in enumerate(up)],
        [TransferMessage(k, "down", v) for k, v in enumerate(down)],
    )


def layer_log_weights(params: DbmParams) -> list[np.ndarray]:
    """Unnormalized log marginals of every layer."""
    up, down = transfer_messages(params)
    unary = unary_log_potentials(params)
    return [unary[k] + up[k].log_values + down[k].log_values for k in range(params.depth + 1)]


def log_partition(params: DbmParams) -> float:
    up, _ = transfer_messages(params)
    return float(logsumexp(unary_log_potentials(params)[0] + up[0].log_values))


def _check_layer(params: DbmParams, k: int) -> None:
    if not 0 <= k <= params.depth:
        raise LayerIndexError(f"layer {k} out of range 0..{params.depth}")


def layer_marginal(params: DbmParams, k: int) -> Distribution:
    _check_layer(params, k)
    return Distribution.from_log_weights(params.space(k), layer_log_weights(params)[k])


def layer_marginals(params: DbmParams) -> list[Distribution]:
    return [
        Distribution.from_log_weights(params.space(k), lw)
        for k, lw in enumerate(layer_log_weights(params))
    ]


def split_at_layer(
    params: DbmParams, k: int, bias_split
) -> tuple[DbmParams, DbmParams]:
    """Cut the machine at layer k, giving ``bias_split`` to the lower part.

    The k-th layer marginal of ``params`` equals the renormalized product of
    the lower part's top marginal and the upper part's bottom marginal, for
    every choice of ``bias_split``.
    """
    if not 0 < k < params.depth:
        raise LayerIndexError(f"split layer {k} must lie strictly inside 0..{params.depth}")
    split = np.asarray(bias_split, dtype=np.float64)
    if split.shape != bias_shape(params.q, params.widths[k]):
        raise DimensionError(f"bias split has shape {split.shape}, expected {params.biases[k].shape}")
    lower = DbmParams(
        params.q,
        params.widths[: k + 1],
        params.weights[:k],
        params.biases[:k] + (split,),
    )
    upper = DbmParams(
        params.q,
        params.widths[k:],
        params.weights[k:],
        (params.biases[k] - split,) + params.biases[k + 1 :],
    )
    return lower, upper


def conditional_log_table(layer: FeedforwardLayer) -> np.ndarray:
    """``log q(x_out | x_in)`` as a (q**n_in, q**n_out) array."""
    space_in = StateSpace(layer.n_in, layer.q)
    space_out = StateSpace(layer.n_out, layer.q)
    f = layer.fields(space_in.states)
    logp = f - logsumexp(f, axis=2, keepdims=True)
    # units are conditionally independent given the input
    return np.einsum("biv,oiv->bo", logp, space_out.onehot)


def ff_conditional(layer: FeedforwardLayer, x_in) -> Distribution:
    x_in = np.asarray(x_in, dtype=np.int64).reshape(1, -1)
    if x_in.shape[1] != layer.n_in:
        raise DimensionError(f"input state has {x_in.shape[1]} units, expected {layer.n_in}")
    space_out = StateSpace(layer.n_out, layer.q)
    f = layer.fields(x_in)[0]
    logp = f - logsumexp(f, axis=1, keepdims=True)
    lw = np.einsum("iv,oiv->o", logp, space_out.onehot)
    return Distribution.from_log_weights(space_out, lw)


def pushforward(layer: FeedforwardLayer, p_in: Distribution) -> Distribution:
    if p_in.space != StateSpace(layer.n_in, layer.q):
        raise DimensionError(f"input distribution lives on {p_in.space}, layer expects n={layer.n_in}")
    table = np.exp(conditional_log_table(layer))
    return Distribution.from_weights(StateSpace(layer.n_out, layer.q), p_in.probs @ table)


def visible_factorization_check(params: DbmParams, bias_split=None) -> float:
    """Max deviation between the visible marginal and its feedforward form.

    The right-hand side passes ``r * s`` through the bottom conditional, where
    r is the top marginal of the bottom RBM ``(W_0, B_0, B'_1)`` and s the
    bottom marginal of the machine on layers 1..L.  ``bias_split`` defaults
    to ``B_1 / 2``.
    """
    if params.depth < 2:
        raise DimensionError("factorization needs at least two hidden layers")
    if bias_split is None:
        bias_split = params.biases[1] / 2
    rbm, upper = split_at_layer(params, 1, bias_split)
    left = layer_marginal(params, 0)
    r = layer_marginal(rbm, 1)
    s = layer_marginal(upper, 0)
    right = pushforward(FeedforwardLayer.from_dbm(params, 0), hadamard(r, s))
    return float(np.max(np.abs(left.probs - right.probs)))
