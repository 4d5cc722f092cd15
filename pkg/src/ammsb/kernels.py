"""Closed-form likelihood kernels shared by samplers, baselines and evaluation.

All kernels take normalized parameters (pi, beta); callers normalize at the
boundary.  Everything is computed in the linear domain: the factors live in
[0, 1] scales where even delta = 1e-7 cannot underflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PairContext:
    """One observed pair: link indicator y plus the parameters it sees."""

    y: int
    pi_a: np.ndarray
    pi_b: np.ndarray
    beta: np.ndarray
    delta: float


def bern(p, y: int):
    """p^y (1-p)^(1-y) without calling pow; works for scalars and arrays."""
    return p if y == 1 else 1.0 - p


def pair_terms(pi_a, pi_b, bpow, dpow):
    """Elementwise unnormalized weight pi_a * (bpow*pi_b + dpow*(1-pi_b)).

    This is the single expression behind f_local and its bulk approximation;
    both call it so the two paths are bitwise identical when fed identical
    inputs.
    """
    return pi_a * (bpow * pi_b + dpow * (1.0 - pi_b))


def f_pair(ctx: PairContext, k: int, l: int) -> float:
    """Unnormalized posterior weight of the co-assignment (k, l)."""
    if k == l:
        return float(bern(ctx.beta[k], ctx.y) * ctx.pi_a[k] * ctx.pi_b[k])
    return float(bern(ctx.delta, ctx.y) * ctx.pi_a[k] * ctx.pi_b[l])


def z_norm(ctx: PairContext) -> float:
    """Normalization constant sum_{k,l} f_pair, computed with one K-loop."""
    dpow = bern(ctx.delta, ctx.y)
    bpow = bern(ctx.beta, ctx.y)
    return float(dpow + np.sum((bpow - dpow) * ctx.pi_a * ctx.pi_b))


def f_local(ctx: PairContext, k: int) -> float:
    """Weight of z_ab = k with the partner assignment summed out."""
    dpow = bern(ctx.delta, ctx.y)
    bpow = bern(float(ctx.beta[k]), ctx.y)
    return float(pair_terms(ctx.pi_a[k], ctx.pi_b[k], bpow, dpow))


def f_local_vec(ctx: PairContext) -> np.ndarray:
    """All K marginal weights at once."""
    dpow = bern(ctx.delta, ctx.y)
    bpow = bern(ctx.beta, ctx.y)
    return pair_terms(ctx.pi_a, ctx.pi_b, bpow, dpow)


def pair_likelihood(ctx: PairContext) -> float:
    """Marginal probability of the observation y for this pair.

    Algebraically equal to z_norm; written in the overlap form used by the
    held-out evaluation.
    """
    overlap = ctx.pi_a * ctx.pi_b
    same = float(np.sum(overlap * bern(ctx.beta, ctx.y)))
    return same + (1.0 - float(np.sum(overlap))) * bern(ctx.delta, ctx.y)


def pair_likelihood_rows(pi_a, pi_b, beta, delta, y):
    """Vectorized pair_likelihood over aligned rows of pairs.

    pi_a, pi_b are (P, K); y is a (P,) 0/1 array.  Returns (P,) marginal
    probabilities.
    """
    overlap = pi_a * pi_b
    mass = np.sum(overlap, axis=1)
    p_link = overlap @ beta + (1.0 - mass) * delta
    return np.where(y == 1, p_link, 1.0 - p_link)
