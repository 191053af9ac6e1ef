"""Brute-force reference computations, written independently of the package.

Everything here loops over explicit states with itertools and plain Python
floats where practical, so it shares no code path with the library.
"""

import itertools
import math

import numpy as np


def states(n, q=2):
    return list(itertools.product(range(q), repeat=n))


def energy_term(q, w, x, y):
    """x^T W y for one pair of layers, native layout."""
    total = 0.0
    for i, xi in enumerate(x):
        for j, yj in enumerate(y):
            if q == 2:
                total += w[i, j] * xi * yj
            else:
                total += w[i, xi, j, yj]
    return total


def bias_term(q, b, x):
    if q == 2:
        return float(sum(b[i] * xi for i, xi in enumerate(x)))
    return float(sum(b[i, xi] for i, xi in enumerate(x)))


def joint_table(params):
    """Dict from joint state (tuple of layer states) to unnormalized weight."""
    q = params.q
    layers = [states(w, q) for w in params.widths]
    out = {}
    for combo in itertools.product(*layers):
        e = sum(bias_term(q, b, x) for b, x in zip(params.biases, combo))
        e += sum(
            energy_term(q, w, combo[l], combo[l + 1]) for l, w in enumerate(params.weights)
        )
        out[combo] = e
    return out


def log_partition(params):
    vals = list(joint_table(params).values())
    m = max(vals)
    return m + math.log(sum(math.exp(v - m) for v in vals))


def layer_marginal(params, k):
    table = joint_table(params)
    m = max(table.values())
    idx = {s: i for i, s in enumerate(states(params.widths[k], params.q))}
    out = np.zeros(len(idx))
    for combo, e in table.items():
        out[idx[combo[k]]] += math.exp(e - m)
    return out / out.sum()


def kl(p, r):
    return sum(pi * math.log(pi / ri) for pi, ri in zip(p, r) if pi > 0)


def ff_pushforward(W, B, p_in, n_out, n_in):
    """Binary feedforward layer: P(x_out | x_in) = prod_i sigmoid(+-(W x_in + B)_i)."""
    outs = states(n_out)
    ins = states(n_in)
    res = np.zeros(len(outs))
    for a, x in enumerate(ins):
        if p_in[a] == 0:
            continue
        field = [B[i] + sum(W[i, j] * x[j] for j in range(n_in)) for i in range(n_out)]
        for b, y in enumerate(outs):
            pr = 1.0
            for i in range(n_out):
                on = 1.0 / (1.0 + math.exp(-field[i])) if field[i] > -700 else 0.0
                pr *= on if y[i] == 1 else 1.0 - on
            res[b] += p_in[a] * pr
    return res
