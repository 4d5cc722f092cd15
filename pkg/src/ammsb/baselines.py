"""Exact batch samplers used as desk-scale accuracy oracles.

Collapsed Gibbs resamples the latent pair assignments jointly per pair from
the conjugate-collapsed conditional; Langevin Monte Carlo proposes from the
full-data preconditioned drift and applies an exact Metropolis-Hastings
test, so both target the exact posterior.  Per-sweep cost is quadratic in
the node count; these are oracles, not performance paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ammsb.graph import Graph, HeldOutSplit
from ammsb.state import HyperParams, ModelState

DESK_SCALE_LIMIT = 1600


@dataclass
class AssignmentState:
    """Explicit latent assignments for collapsed Gibbs.

    pairs is (P, 3) rows (a, b, y); z_ab[p] and z_ba[p] are the two directed
    draws of pair p.  n[a, k] counts node a's draws, s1[k]/s0[k] count
    co-assigned pairs by observation.
    """

    pairs: np.ndarray
    z_ab: np.ndarray
    z_ba: np.ndarray
    n: np.ndarray
    s1: np.ndarray
    s0: np.ndarray


def training_pairs(g: Graph, heldout: HeldOutSplit | None = None) -> np.ndarray:
    """All trainable (a, b, y) rows: every pair except held-out ones."""
    excluded = set()
    if heldout is not None:
        excluded = {(int(a), int(b)) for a, b, _ in heldout.pairs}
    rows = []
    for a in range(g.num_nodes):
        for b in range(a + 1, g.num_nodes):
            if (a, b) in excluded:
                continue
            rows.append((a, b, 1 if g.has_edge(a, b) else 0))
    return np.asarray(rows, dtype=np.int64)


def init_cgs(g: Graph, hp: HyperParams, rng: np.random.Generator, heldout: HeldOutSplit | None = None) -> AssignmentState:
    _check_desk_scale(g)
    pairs = training_pairs(g, heldout)
    P = len(pairs)
    z_ab = rng.integers(hp.K, size=P)
    z_ba = rng.integers(hp.K, size=P)
    st = AssignmentState(
        pairs=pairs,
        z_ab=z_ab,
        z_ba=z_ba,
        n=np.zeros((g.num_nodes, hp.K), dtype=np.int64),
        s1=np.zeros(hp.K, dtype=np.int64),
        s0=np.zeros(hp.K, dtype=np.int64),
    )
    rebuild_counts(st, hp.K)
    return st


def rebuild_counts(st: AssignmentState, K: int) -> None:
    st.n[:] = 0
    st.s1[:] = 0
    st.s0[:] = 0
    for (a, b, y), k, l in zip(st.pairs, st.z_ab, st.z_ba):
        st.n[a, k] += 1
        st.n[b, l] += 1
        if k == l:
            (st.s1 if y else st.s0)[k] += 1


def counts_consistent(st: AssignmentState, K: int) -> bool:
    n = np.zeros_like(st.n)
    s1 = np.zeros_like(st.s1)
    s0 = np.zeros_like(st.s0)
    for (a, b, y), k, l in zip(st.pairs, st.z_ab, st.z_ba):
        n[a, k] += 1
        n[b, l] += 1
        if k == l:
            (s1 if y else s0)[k] += 1
    return bool(np.array_equal(n, st.n) and np.array_equal(s1, st.s1) and np.array_equal(s0, st.s0))


def cgs_sweep(st: AssignmentState, hp: HyperParams, rng: np.random.Generator) -> None:
    """One full sweep: jointly resample (z_ab, z_ba) for every pair.

    The blocked K^2 conditional mixes better than coordinate moves and is
    affordable at desk scale.
    """
    K = hp.K
    alpha = hp.alpha
    eta = hp.eta
    us = rng.random(len(st.pairs))
    n = st.n
    for p, (a, b, y) in enumerate(st.pairs):
        k_old = st.z_ab[p]
        l_old = st.z_ba[p]
        n[a, k_old] -= 1
        n[b, l_old] -= 1
        s = st.s1 if y else st.s0
        if k_old == l_old:
            s[k_old] -= 1

        wa = n[a] + alpha
        wb = n[b] + alpha
        dpow = hp.delta if y else 1.0 - hp.delta
        W = dpow * np.outer(wa, wb)
        s_match = st.s1 if y else st.s0
        diag = (s_match + eta) / (st.s1 + st.s0 + 2.0 * eta)
        idx = np.arange(K)
        W[idx, idx] = wa * wb * diag

        flat = np.cumsum(W.ravel())
        pick = int(np.searchsorted(flat, us[p] * flat[-1], side="right"))
        pick = min(pick, K * K - 1)
        k_new, l_new = divmod(pick, K)

        st.z_ab[p] = k_new
        st.z_ba[p] = l_new
        n[a, k_new] += 1
        n[b, l_new] += 1
        if k_new == l_new:
            (st.s1 if y else st.s0)[k_new] += 1


def cgs_estimate_params(st: AssignmentState, hp: HyperParams):
    """Posterior-predictive point estimates (pi, beta) from the counts."""
    row_tot = np.sum(st.n, axis=1, keepdims=True)
    pi = (st.n + hp.alpha) / (row_tot + hp.K * hp.alpha)
    beta = (st.s1 + hp.eta) / (st.s1 + st.s0 + 2.0 * hp.eta)
    return pi, beta


def log_joint(state: ModelState, pairs: np.ndarray, hp: HyperParams) -> float:
    """Exact log posterior (up to a constant) of the expanded-mean state."""
    phi = state.phi
    theta = state.theta
    lp = float(np.sum((hp.alpha - 1.0) * np.log(phi) - phi))
    lp += float(np.sum((hp.eta - 1.0) * np.log(theta) - theta))
    pi = state.pi()
    beta = state.beta()
    z = _pair_marginals(pi, beta, hp.delta, pairs)
    return lp + float(np.sum(np.log(z)))


def _pair_marginals(pi, beta, delta, pairs):
    pa = pi[pairs[:, 0]]
    pb = pi[pairs[:, 1]]
    overlap = np.sum(pa * pb, axis=1)
    p_link = (pa * pb) @ beta + (1.0 - overlap) * delta
    y = pairs[:, 2]
    return np.where(y == 1, p_link, 1.0 - p_link)


def full_drift(state: ModelState, pairs: np.ndarray, hp: HyperParams):
    """Exact-gradient drift fields for phi and theta (batch-free)."""
    phi = state.phi
    theta = state.theta
    pi = state.pi()
    beta = state.beta()
    ia = pairs[:, 0]
    ib = pairs[:, 1]
    y = pairs[:, 2]
    pa = pi[ia]
    pb = pi[ib]
    bpow = np.where(y[:, None] == 1, beta[None, :], 1.0 - beta[None, :])
    dpow = np.where(y == 1, hp.delta, 1.0 - hp.delta)

    f_ab = pa * (bpow * pb + dpow[:, None] * (1.0 - pb))
    f_ba = pb * (bpow * pa + dpow[:, None] * (1.0 - pa))
    z = np.sum(f_ab, axis=1)

    grad_phi = np.zeros_like(phi)
    np.add.at(grad_phi, ia, f_ab / z[:, None])
    np.add.at(grad_phi, ib, f_ba / z[:, None])
    grad_phi /= phi
    pair_count = np.zeros(len(phi))
    np.add.at(pair_count, ia, 1.0)
    np.add.at(pair_count, ib, 1.0)
    grad_phi -= (pair_count / np.sum(phi, axis=1))[:, None]

    diag = bpow * pa * pb
    r = diag / z[:, None]
    R1 = np.sum(r[y == 1], axis=0)
    R0 = np.sum(r[y == 0], axis=0)
    R = R1 + R0
    theta_sum = theta[:, 0] + theta[:, 1]
    grad_theta = np.empty_like(theta)
    grad_theta[:, 0] = R0 / theta[:, 0] - R / theta_sum
    grad_theta[:, 1] = R1 / theta[:, 1] - R / theta_sum

    drift_phi = hp.alpha - phi + grad_phi
    drift_theta = hp.eta - theta + grad_theta
    return drift_phi, drift_theta


def _log_q(prop, cur, drift_cur, eps):
    """Log density of the Riemannian-scaled Gaussian proposal."""
    mean = cur + 0.5 * eps * drift_cur
    var = eps * cur
    return float(np.sum(-0.5 * (prop - mean) ** 2 / var - 0.5 * np.log(2.0 * np.pi * var)))


def lmc_step(
    state: ModelState,
    pairs: np.ndarray,
    hp: HyperParams,
    eps: float,
    rng: np.random.Generator,
):
    """One Langevin proposal over (phi, theta) with an exact MH test.

    Proposals with any non-positive coordinate are rejected outright, which
    keeps the Gaussian proposal density tractable (no reflection folding).
    Returns (state, accepted).
    """
    drift_phi, drift_theta = full_drift(state, pairs, hp)
    root = np.sqrt(eps)
    prop_phi = state.phi + 0.5 * eps * drift_phi + np.sqrt(state.phi) * root * rng.standard_normal(state.phi.shape)
    prop_theta = state.theta + 0.5 * eps * drift_theta + np.sqrt(state.theta) * root * rng.standard_normal(state.theta.shape)

    u = rng.random()
    if np.any(prop_phi <= 0.0) or np.any(prop_theta <= 0.0):
        return state, False
    proposal = ModelState(phi=prop_phi, theta=prop_theta)

    lp_cur = log_joint(state, pairs, hp)
    lp_prop = log_joint(proposal, pairs, hp)
    drift_phi_p, drift_theta_p = full_drift(proposal, pairs, hp)
    log_fwd = _log_q(prop_phi, state.phi, drift_phi, eps) + _log_q(prop_theta, state.theta, drift_theta, eps)
    log_bwd = _log_q(state.phi, prop_phi, drift_phi_p, eps) + _log_q(state.theta, prop_theta, drift_theta_p, eps)

    log_ratio = lp_prop + log_bwd - lp_cur - log_fwd
    if np.log(u) < log_ratio:
        return proposal, True
    return state, False


def _check_desk_scale(g: Graph) -> None:
    if g.num_nodes > DESK_SCALE_LIMIT:
        raise ValueError(
            f"batch baselines are quadratic per sweep; refusing {g.num_nodes} nodes "
            f"(limit {DESK_SCALE_LIMIT})"
        )
