"""Langevin update of membership weight rows (the per-node local step).

One engine serves both the dense sampler and the sparse large-K variant.  A
row is described by a RowView: explicit community ids with their weights,
plus an optional bulk block of ``n_bulk`` communities sharing one weight.
The dense sampler is the special case of an empty bulk with every community
explicit, so a sparse row whose bulk happens to be empty (or a singleton,
where the block average degenerates to the exact value) produces bitwise
identical arithmetic to the dense path.  Sums that define normalizers and
totals therefore always run in community-id order, with the bulk block
contributing at the position of its smallest member.
"""

from __future__ import annotations

import numpy as np

from ammsb.kernels import pair_terms
from ammsb.minibatch import NodeBatch
from ammsb.rng import DOM_PHI, NoiseField
from ammsb.state import VALUE_FLOOR, ModelState

_ARANGE_CACHE: dict = {}


def _arange(k: int) -> np.ndarray:
    arr = _ARANGE_CACHE.get(k)
    if arr is None:
        arr = np.arange(k, dtype=np.int64)
        _ARANGE_CACHE[k] = arr
    return arr


class RowView:
    """Frozen snapshot of one node's membership weights.

    ``ids is None`` means dense: ``vals`` holds all K weights.  Otherwise
    ``ids`` is a sorted id array aligned with ``vals`` and ``n_bulk``
    communities share ``bulk_val``; ``rep_id`` is the smallest bulk id and
    fixes where the bulk block sits in ordered sums.
    """

    __slots__ = ("ids", "vals", "n_bulk", "bulk_val", "rep_id", "rep_pos", "total", "pi_ex", "pi_bulk")

    def __init__(self, ids, vals, n_bulk: int = 0, bulk_val: float = 0.0, rep_id: int = -1):
        self.ids = ids
        self.vals = vals
        self.n_bulk = n_bulk
        self.bulk_val = bulk_val
        self.rep_id = rep_id
        if n_bulk:
            self.rep_pos = int(np.searchsorted(ids, rep_id))
            self.total = float(np.sum(np.insert(vals, self.rep_pos, n_bulk * bulk_val)))
            self.pi_bulk = bulk_val / self.total
        else:
            self.rep_pos = -1
            self.total = float(np.sum(vals))
            self.pi_bulk = 0.0
        self.pi_ex = vals / self.total

    def pi_at(self, ks) -> np.ndarray:
        """Membership probabilities at the given community ids."""
        if self.ids is None:
            return self.pi_ex if ks is None else self.pi_ex[ks]
        pos = np.searchsorted(self.ids, ks)
        clipped = np.minimum(pos, len(self.ids) - 1) if len(self.ids) else np.zeros_like(pos)
        if len(self.ids):
            found = self.ids[clipped] == ks
            return np.where(found, self.pi_ex[clipped], self.pi_bulk)
        return np.full(np.shape(ks), self.pi_bulk)

    def ordered_insert(self, values: np.ndarray, rep_value: float) -> np.ndarray:
        """Explicit values with the bulk block inserted at its id position."""
        if not self.n_bulk:
            return values
        return np.insert(values, self.rep_pos, self.n_bulk * rep_value)


def dense_view(phi: np.ndarray, a: int) -> RowView:
    return RowView(None, phi[a])


def _stratum_sums(row: RowView, partner_views, bpow, dpow, bpow_rep, bulk_ids):
    """Accumulate f/Z over one stratum's partners, in partner order.

    Returns (acc, acc_rep): per-explicit-community and bulk-representative
    sums of f / Z.  The Z of every pair is the ordered sum of all K marginal
    weights with the bulk block approximated through the block averages.
    """
    n_explicit = len(row.vals)
    acc = np.zeros(n_explicit)
    acc_rep = 0.0
    for view in partner_views:
        pib = view.pi_at(row.ids)
        f = pair_terms(row.pi_ex, pib, bpow, dpow)
        if row.n_bulk:
            pib_bar = float(np.mean(view.pi_at(bulk_ids)))
            f_rep = float(pair_terms(row.pi_bulk, pib_bar, bpow_rep, dpow))
            z = float(np.sum(row.ordered_insert(f, f_rep)))
        else:
            f_rep = 0.0
            z = float(np.sum(f))
        acc += f / z
        acc_rep += f_rep / z
    return acc, acc_rep


def row_drift(row: RowView, nb: NodeBatch, views: dict, beta, delta: float, bulk_ids=None):
    """Stratified gradient estimate for every explicit community and the bulk.

    Returns (G, G_rep) where G aligns with the row's explicit ids.  Each
    term is c1 * sum_{V1} grad + c0 * sum_{V0} grad with the per-pair
    gradient f/(Z * phi_k) - 1/phi_total.
    """
    if row.ids is None:
        bpow1 = beta
        bpow0 = 1.0 - beta
        bpow1_rep = bpow0_rep = 0.0
    else:
        bpow1 = beta[row.ids]
        bpow0 = 1.0 - bpow1
        if row.n_bulk:
            bb = float(np.mean(beta[bulk_ids]))
            bpow1_rep = bb
            bpow0_rep = 1.0 - bb
        else:
            bpow1_rep = bpow0_rep = 0.0

    acc1, acc1_rep = _stratum_sums(row, [views[int(b)] for b in nb.v1], bpow1, delta, bpow1_rep, bulk_ids)
    acc0, acc0_rep = _stratum_sums(row, [views[int(b)] for b in nb.v0], bpow0, 1.0 - delta, bpow0_rep, bulk_ids)

    weight = nb.c1 * len(nb.v1) + nb.c0 * len(nb.v0)
    G = (nb.c1 * acc1 + nb.c0 * acc0) / row.vals - weight / row.total
    if row.n_bulk:
        G_rep = (nb.c1 * acc1_rep + nb.c0 * acc0_rep) / row.bulk_val - weight / row.total
    else:
        G_rep = 0.0
    return G, G_rep


def row_update_values(
    row: RowView,
    nb: NodeBatch,
    views: dict,
    beta,
    delta: float,
    alpha: float,
    eps: float,
    noise: NoiseField | None,
    t: int,
    node: int,
    bulk_ids=None,
):
    """Reflected Langevin step; returns (new_vals, new_bulk_val)."""
    G, G_rep = row_drift(row, nb, views, beta, delta, bulk_ids)
    ks = _arange(len(row.vals)) if row.ids is None else row.ids
    if noise is None:
        xi = 0.0
        xi_rep = 0.0
    else:
        scale = np.sqrt(eps)
        xi = scale * noise.normals(DOM_PHI, t, node, ks)
        if row.n_bulk:
            xi_rep = float(scale * noise.normals(DOM_PHI, t, node, np.asarray([row.rep_id]))[0])
        else:
            xi_rep = 0.0
    vals = row.vals
    proposal = vals + 0.5 * eps * (alpha - vals + G) + np.sqrt(vals) * xi
    new_vals = np.maximum(np.abs(proposal), VALUE_FLOOR)
    if row.n_bulk:
        bv = row.bulk_val
        prop_rep = bv + 0.5 * eps * (alpha - bv + G_rep) + np.sqrt(bv) * xi_rep
        new_bulk = max(abs(prop_rep), VALUE_FLOOR)
    else:
        new_bulk = row.bulk_val
    return new_vals, new_bulk


def grad_phi(ctx, phi_a: np.ndarray, k: int) -> float:
    """Per-pair gradient of the marginalized log-likelihood w.r.t. phi_ak."""
    from ammsb.kernels import f_local, z_norm

    return float(f_local(ctx, k) / (z_norm(ctx) * phi_a[k]) - 1.0 / np.sum(phi_a))


def update_phi_row(
    state: ModelState,
    a: int,
    nb: NodeBatch,
    eps: float,
    noise: NoiseField | None = None,
    t: int = 0,
    delta: float = 1e-7,
    alpha: float | None = None,
) -> np.ndarray:
    """Dense-path row update; returns the new phi row without mutating state."""
    if alpha is None:
        raise ValueError("alpha is required")
    views = {int(b): dense_view(state.phi, int(b)) for b in np.concatenate([nb.v1, nb.v0])}
    row = dense_view(state.phi, a)
    new_vals, _ = row_update_values(
        row, nb, views, state.beta(), delta, alpha, eps, noise, t, a
    )
    return new_vals
