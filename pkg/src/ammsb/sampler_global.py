"""Langevin update of the community-strength weights (the global step)."""

from __future__ import annotations

import numpy as np

from ammsb.kernels import PairContext, bern, f_pair, pair_terms, z_norm
from ammsb.minibatch import EdgeBatch
from ammsb.rng import DOM_THETA, NoiseField
from ammsb.sampler_local import RowView, dense_view
from ammsb.state import VALUE_FLOOR, ModelState


def grad_theta_pair(ctx: PairContext, theta_k0: float, theta_k1: float, k: int, i: int) -> float:
    """Per-pair gradient of the marginalized log-likelihood w.r.t. theta_ki.

    The |1-i-y| switch keeps the 1/theta_ki term only when the coordinate
    matches the observation.
    """
    match = abs(1 - i - ctx.y)
    theta_ki = theta_k1 if i == 1 else theta_k0
    resp = f_pair(ctx, k, k) / z_norm(ctx)
    return resp * (match / theta_ki - 1.0 / (theta_k0 + theta_k1))


def pair_f_sum(view_a: RowView, view_b: RowView, beta, delta: float, y: int, bulk_ids=None) -> float:
    """Ordered sum of marginal pair weights: the update-side normalizer.

    Equals the closed-form normalization constant up to rounding; the bulk
    block of view_a, when present, contributes through its block averages.
    """
    dpow = bern(delta, y)
    if view_a.ids is None:
        bpow = bern(beta, y)
        f = pair_terms(view_a.pi_ex, view_b.pi_at(None), bpow, dpow)
        return float(np.sum(f))
    bpow = bern(beta[view_a.ids], y)
    f = pair_terms(view_a.pi_ex, view_b.pi_at(view_a.ids), bpow, dpow)
    if view_a.n_bulk:
        bb = float(np.mean(beta[bulk_ids]))
        pib_bar = float(np.mean(view_b.pi_at(bulk_ids)))
        f_rep = float(pair_terms(view_a.pi_bulk, pib_bar, bern(bb, y), dpow))
        f = view_a.ordered_insert(f, f_rep)
    return float(np.sum(f))


def theta_responsibilities(
    views: dict,
    batch: EdgeBatch,
    beta,
    delta: float,
    subset: np.ndarray,
    bulk_ids=None,
) -> np.ndarray:
    """Sum over batch pairs of f(k,k)/Z for each community in subset."""
    bpow = bern(beta[subset], batch.y)
    R = np.zeros(len(subset))
    for a, b in batch.pairs:
        va = views[int(a)]
        vb = views[int(b)]
        z = pair_f_sum(va, vb, beta, delta, batch.y, bulk_ids)
        R += bpow * va.pi_at(subset) * vb.pi_at(subset) / z
    return R


def theta_step(
    theta: np.ndarray,
    R: np.ndarray,
    subset: np.ndarray,
    y: int,
    h: float,
    eta: float,
    eps: float,
    noise: NoiseField | None,
    t: int,
) -> np.ndarray:
    """Reflected Langevin move of theta[subset] given batch responsibilities."""
    th = theta[subset]
    th_sum = th[:, 0] + th[:, 1]
    G = np.empty_like(th)
    G[:, 0] = (R / th[:, 0] if y == 0 else 0.0) - R / th_sum
    G[:, 1] = (R / th[:, 1] if y == 1 else 0.0) - R / th_sum
    if noise is None:
        xi = 0.0
    else:
        scale = np.sqrt(eps)
        xi = np.empty_like(th)
        xi[:, 0] = scale * noise.normals(DOM_THETA, t, 0, 2 * subset)
        xi[:, 1] = scale * noise.normals(DOM_THETA, t, 0, 2 * subset + 1)
    proposal = th + 0.5 * eps * (eta - th + h * G) + np.sqrt(th) * xi
    out = theta.copy()
    out[subset] = np.maximum(np.abs(proposal), VALUE_FLOOR)
    return out


def update_theta(
    state: ModelState,
    batch: EdgeBatch,
    eps: float,
    subset,
    noise: NoiseField | None = None,
    t: int = 0,
    delta: float = 1e-7,
    eta: float = 1.0,
) -> ModelState:
    """Dense-path global update; returns a state with the new theta."""
    subset = np.asarray(subset, dtype=np.int64)
    beta = state.beta()
    nodes = {int(v) for pair in batch.pairs for v in pair}
    views = {v: dense_view(state.phi, v) for v in nodes}
    R = theta_responsibilities(views, batch, beta, delta, subset)
    new_theta = theta_step(state.theta, R, subset, batch.y, batch.scale, eta, eps, noise, t)
    return ModelState(phi=state.phi, theta=new_theta)
