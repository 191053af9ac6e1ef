"""Top-level compilation of a target distribution into a narrow deep machine."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from ..bounds import min_first_hidden_width, sufficient_depth
from ..core import Distribution, kl_divergence
from ..errors import ConvergenceError, DimensionError, DomainError, PlanError
from ..inference import layer_marginal
from ..model import DbmParams, bias_shape, weight_shape
from .construct import (
    build_sharing_layer,
    centering_bias,
    interface_log_weights,
    rbm_from_log_weights,
)
from .plan import SharingPlan, backward_targets, plan_supports


@dataclass(frozen=True)
class CompileConfig:
    """Knobs of the compiler.

    ``beta0`` is the base margin on the first attempt; every layer adds to
    it what its targets demand.  The base doubles after every failed
    attempt until it passes ``max_beta``.
    """

    tolerance: float = 1e-2
    beta0: float = 8.0
    max_beta: float = 64.0
    max_depth: int | None = None
    width: int | None = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise DomainError(f"tolerance must be positive, got {self.tolerance}")
        if not self.beta0 > 0 or self.max_beta < self.beta0:
            raise DomainError("need 0 < beta0 <= max_beta")


@dataclass
class Certificate:
    """Evidence attached to a compiled model."""

    n: int
    q: int
    width: int
    depth: int
    kl: float
    tolerance: float
    converged: bool
    smoothing: float
    betas: list[float]
    beta_base: float
    bound_sufficient: int | None
    attempts: list[dict] = field(default_factory=list)
    level_targets: list[list[float]] = field(default_factory=list)
    interfaces: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["kl"] = _finite(self.kl)
        for a in doc["attempts"]:
            a["kl"] = _finite(a["kl"])
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _finite(x: float):
    return x if np.isfinite(x) else None


def smooth(target: Distribution, weight: float) -> Distribution:
    """Mix with the uniform distribution at the given weight."""
    u = np.full(target.space.size, 1.0 / target.space.size)
    return Distribution(target.space, (1 - weight) * target.probs + weight * u)


def _pad(a: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    out = np.zeros(shape)
    out[tuple(slice(0, s) for s in a.shape)] = a
    return out


def _log_range(log_p: np.ndarray, mask: np.ndarray) -> float:
    return float(log_p[mask].max() - log_p[mask].min())


def _normalized(log_w: np.ndarray) -> np.ndarray:
    on = np.isfinite(log_w)
    out = np.full(log_w.shape, -np.inf)
    out[on] = log_w[on] - logsumexp(log_w[on])
    return out


def _build(t: Distribution, plan: SharingPlan, base: float, width: int):
    """One pass of the bottom-up construction at base margin ``base``.

    Targets are carried as log weights because dividing out the interface
    distributions widens their dynamic range at every level.  A layer's
    margin is ``base`` plus whatever its output target and the interface
    below demand: the log-range of the target (relative leak into the
    lightest state) and the excess of the interface weight anywhere over
    its minimum on the support (amplification of off-support leaks).
    """
    space = plan.space
    n, q = space.n, space.q
    supports = plan.supports()
    with np.errstate(divide="ignore"):
        cur = np.log(t.probs)
    demand = 0.0
    layers, splits, betas, interfaces = [], [], [], []
    for step, support in zip(reversed(plan.steps), reversed(supports[:-1])):
        moves = step.moves(space, support)
        on_out = np.isfinite(cur)
        prev = np.array(cur)
        for m in moves:
            prev[m.source] = np.logaddexp(prev[m.source], prev[m.target])
            prev[m.target] = -np.inf
        fractions = [float(np.exp(cur[m.target] - prev[m.source])) for m in moves]
        logits = [float(cur[m.target] - cur[m.source]) for m in moves]
        beta = base + max(_log_range(cur, on_out), demand)
        layer = build_sharing_layer(support, step.with_fractions(fractions), beta, logits)
        split = centering_bias(layer)
        log_r = interface_log_weights(layer, split)
        on = np.isfinite(prev)
        demand = float(log_r.max() - log_r[on].min())
        corrected = _normalized(np.where(on, prev - log_r, -np.inf))
        interfaces.append(
            {
                "layer": len(layers) + 1,
                "beta": beta,
                "fractions": fractions,
                "output_target": np.exp(cur).tolist(),
                "unshared": np.exp(prev).tolist(),
                "neutralizer_log": (log_r - log_r.max()).tolist(),
                "corrected": np.exp(corrected).tolist(),
                "corrected_log_range": _log_range(corrected, on),
                "bias_split": np.asarray(split).tolist(),
            }
        )
        cur = corrected
        layers.append(layer)
        splits.append(split)
        betas.append(beta)
    beta_top = base + demand
    rbm = rbm_from_log_weights(space, cur, plan.initial_pairs, beta_top, width)
    betas.append(beta_top)

    L = len(layers) + 1
    widths = (n,) + (width,) * L
    weights = [
        _pad(layer.weights, weight_shape(q, widths[k], widths[k + 1]))
        for k, layer in enumerate(layers)
    ]
    weights.append(_pad(rbm.weights[0], weight_shape(q, widths[L - 1], widths[L])))
    biases = [np.zeros(bias_shape(q, w)) for w in widths]
    for k, layer in enumerate(layers):
        biases[k] += _pad(layer.bias, biases[k].shape)
        biases[k + 1] += _pad(splits[k], biases[k + 1].shape)
    biases[L - 1] += _pad(rbm.biases[0], biases[L - 1].shape)
    biases[L] += rbm.biases[1]
    params = DbmParams(q, widths, tuple(weights), tuple(biases))
    return params, betas, interfaces


def compile_distribution(
    target: Distribution, config: CompileConfig | None = None
) -> tuple[DbmParams, Certificate]:
    """Compile ``target`` into a machine of hidden width ``config.width``.

    Raises ``ConvergenceError`` (carrying the best model) if no margin up to
    ``max_beta`` reaches the tolerance.
    """
    config = config or CompileConfig()
    space = target.space
    n, q = space.n, space.q
    if n < 1:
        raise DimensionError("target needs at least one visible unit")
    width = n if config.width is None else int(config.width)
    if width < min_first_hidden_width(n):
        raise DomainError(
            f"hidden width {width} is below the minimum {min_first_hidden_width(n)} "
            f"for {n} visible units"
        )
    if width < n:
        raise PlanError(f"the sharing construction needs hidden width >= {n}, got {width}")
    bound = sufficient_depth(n, q) if n >= 2 else None

    def certificate(params, kl, converged, smoothing, betas, base, attempts, levels, interfaces):
        return Certificate(
            n=n, q=q, width=width, depth=params.depth, kl=kl, tolerance=config.tolerance,
            converged=converged, smoothing=smoothing, betas=betas, beta_base=base,
            bound_sufficient=bound, attempts=attempts, level_targets=levels, interfaces=interfaces,
        )

    if np.allclose(target.probs, 1.0 / space.size, rtol=0, atol=1e-15):
        params = DbmParams.zeros((n, width), q)
        kl = kl_divergence(target, layer_marginal(params, 0))
        return params, certificate(params, kl, True, 0.0, [0.0], 0.0, [], [target.probs.tolist()], [])

    smoothing = 0.0
    t = target
    if not target.is_strictly_positive():
        smoothing = config.tolerance / 2
        t = smooth(target, smoothing)

    plan = plan_supports(n, q)
    if config.max_depth is not None and plan.depth > config.max_depth:
        raise PlanError(f"plan needs depth {plan.depth} > max_depth {config.max_depth}")

    levels = [d.probs.tolist() for d in backward_targets(t, plan)]
    best = None
    attempts = []
    base = config.beta0
    while base <= config.max_beta * (1 + 1e-12):
        try:
            params, betas, interfaces = _build(t, plan, base, width)
        except PlanError as exc:
            # numerically infeasible sharing row at this margin
            attempts.append({"beta": base, "kl": float("inf"), "error": str(exc)})
            base *= 2
            continue
        kl = kl_divergence(target, layer_marginal(params, 0))
        attempts.append({"beta": base, "kl": kl})
        if best is None or kl < best[1]:
            best = (params, kl, betas, base, interfaces)
        if kl <= config.tolerance:
            break
        base *= 2
    if best is None:
        raise ConvergenceError(
            f"no margin up to {config.max_beta:g} gave a feasible construction", float("inf")
        )
    params, kl, betas, base, interfaces = best
    converged = kl <= config.tolerance
    cert = certificate(params, kl, converged, smoothing, betas, base, attempts, levels, interfaces)
    if not converged:
        raise ConvergenceError(
            f"best KL {kl:.3g} exceeds tolerance {config.tolerance:g}", kl, params, cert
        )
    return params, cert


compile = compile_distribution
