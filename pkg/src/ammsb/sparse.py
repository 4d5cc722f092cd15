"""Sparse large-K membership representation with one-shot bulk updates.

Per node, communities are split into an active set (top of the membership
cdf up to a threshold tau), a candidate set (communities active at some
neighbor), and a bulk whose members all share a single weight.  Active and
candidate weights are stored explicitly and updated individually; the bulk
is updated once through its representative.  A global reference count of
explicit memberships backs promotion of communities that no node represents
yet.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ammsb.kernels import bern, pair_terms
from ammsb.minibatch import NodeBatch
from ammsb.rng import NoiseField
from ammsb.sampler_local import RowView, row_update_values
from ammsb.state import VALUE_FLOOR

logger = logging.getLogger(__name__)


def split_communities(pi_row: np.ndarray, tau: float, neighbor_active: set):
    """Threshold split of one membership vector.

    Sorts communities by probability (descending, ties by id) and takes the
    prefix whose inclusive cdf stays below tau as active; of the rest, ids
    active at a neighbor become candidates; everything else is bulk.
    Returns (active_ids, candidate_ids) as sorted arrays.
    """
    if not (0.0 < tau <= 1.0):
        raise ValueError("tau must be in (0, 1]")
    order = np.argsort(-pi_row, kind="stable")
    cdf = np.cumsum(pi_row[order])
    active = order[cdf < tau]
    active_set = set(active.tolist())
    candidate = sorted(k for k in neighbor_active if k not in active_set)
    return np.sort(active), np.asarray(candidate, dtype=np.int64)


@dataclass(frozen=True)
class BulkSummary:
    """Block averages over a bulk mini-batch."""

    pi_bar_b: float
    beta_bar_a: float
    m_bulk: int


def f_tilde(y: int, pi_a_bulk: float, summary: BulkSummary, delta: float) -> float:
    """Shared unnormalized weight for every bulk community of the pivot."""
    return float(
        pair_terms(pi_a_bulk, summary.pi_bar_b, bern(summary.beta_bar_a, y), bern(delta, y))
    )


def z_tilde(n_bulk: int, f_tilde_value: float, exact_terms: np.ndarray, rep_pos: int | None = None) -> float:
    """Approximate normalizer: bulk block plus the exact explicit terms."""
    if n_bulk == 0:
        return float(np.sum(exact_terms))
    pos = len(exact_terms) if rep_pos is None else rep_pos
    return float(np.sum(np.insert(exact_terms, pos, n_bulk * f_tilde_value)))


class IndexedSet:
    """Set with O(1) uniform random removal (swap-pop against a position map)."""

    def __init__(self, items=()):
        self._list = list(items)
        self._pos = {x: i for i, x in enumerate(self._list)}

    def __contains__(self, x):
        return x in self._pos

    def __len__(self):
        return len(self._list)

    def add(self, x):
        if x not in self._pos:
            self._pos[x] = len(self._list)
            self._list.append(x)

    def discard(self, x):
        i = self._pos.pop(x, None)
        if i is None:
            return
        last = self._list.pop()
        if i < len(self._list):
            self._list[i] = last
            self._pos[last] = i

    def pop_random(self, rng: np.random.Generator):
        i = int(rng.integers(len(self._list)))
        x = self._list[i]
        self.discard(x)
        return x


class SparseRow:
    """One node's explicit weights plus the shared bulk weight."""

    __slots__ = ("K", "ids", "vals", "active", "bulk_val")

    def __init__(self, K: int, ids: np.ndarray, vals: np.ndarray, active: np.ndarray, bulk_val: float):
        self.K = K
        self.ids = ids  # sorted explicit ids (active | candidate)
        self.vals = vals
        self.active = active  # bool mask aligned with ids
        self.bulk_val = bulk_val

    @property
    def n_bulk(self) -> int:
        return self.K - len(self.ids)

    def rep_id(self) -> int:
        """Smallest community id in the bulk."""
        ids = self.ids
        if len(ids) == 0:
            return 0
        missing = np.nonzero(ids != np.arange(len(ids)))[0]
        return int(missing[0]) if len(missing) else len(ids)

    def view(self) -> RowView:
        nb = self.n_bulk
        return RowView(self.ids, self.vals, nb, self.bulk_val, self.rep_id() if nb else -1)

    def active_ids(self) -> set:
        return set(self.ids[self.active].tolist())

    def explicit_count(self) -> int:
        return len(self.ids) + (1 if self.n_bulk else 0)

    def dense_phi(self) -> np.ndarray:
        out = np.full(self.K, self.bulk_val)
        out[self.ids] = self.vals
        return out

    def total_mass(self) -> float:
        return self.view().total


def bulk_member_sample(row: SparseRow, count: int, rng: np.random.Generator, exclude: set | None = None) -> list:
    """Uniform distinct bulk members; rejection when the bulk is large."""
    n_bulk = row.n_bulk
    ex = exclude or set()
    avail = n_bulk - len(ex)
    count = min(count, avail)
    if count <= 0:
        return []
    if n_bulk <= 2 * count + 8:
        members = np.setdiff1d(np.arange(row.K, dtype=np.int64), row.ids, assume_unique=True)
        pool = [int(k) for k in members if int(k) not in ex]
        if count >= len(pool):
            return pool
        return sorted(int(pool[i]) for i in rng.choice(len(pool), size=count, replace=False))
    ids = row.ids
    picked: set = set()
    while len(picked) < count:
        cand = rng.integers(row.K, size=2 * (count - len(picked)) + 4)
        pos = np.searchsorted(ids, cand)
        clipped = np.minimum(pos, len(ids) - 1)
        explicit = (ids[clipped] == cand) if len(ids) else np.zeros(len(cand), dtype=bool)
        for c in cand[~explicit].tolist():
            if c not in ex and c not in picked:
                picked.add(c)
                if len(picked) == count:
                    break
    return sorted(picked)


def sample_bulk_batch(row: SparseRow, m_bulk: int, rng: np.random.Generator) -> np.ndarray | None:
    """Bulk mini-batch ids for the block averages; None when there is no bulk.

    Taking the whole bulk consumes no randomness, which keeps the τ = 1
    reduction on the same streams as the dense sampler.
    """
    n_bulk = row.n_bulk
    if n_bulk == 0:
        return None
    take = min(m_bulk, n_bulk)
    if take == n_bulk:
        return np.setdiff1d(np.arange(row.K, dtype=np.int64), row.ids, assume_unique=True)
    return np.asarray(bulk_member_sample(row, take, rng), dtype=np.int64)


class SparseState:
    """All sparse rows plus the global explicit-membership reference counts."""

    def __init__(self, rows: list, K: int):
        self.rows = rows
        self.K = K
        self.refcount = np.zeros(K, dtype=np.int64)
        for row in rows:
            self.refcount[row.ids] += 1
        self.unrepresented = IndexedSet(np.nonzero(self.refcount == 0)[0].tolist())

    @property
    def n_nodes(self) -> int:
        return len(self.rows)

    def neighbor_active(self, graph, a: int) -> set:
        out: set = set()
        for b in graph.neighbors[a]:
            out |= self.rows[int(b)].active_ids()
        return out

    def pi_dense(self) -> np.ndarray:
        out = np.empty((self.n_nodes, self.K))
        for a, row in enumerate(self.rows):
            out[a] = row.dense_phi()
            out[a] /= row.total_mass()
        return out

    def memory_ratios(self) -> np.ndarray:
        return np.asarray([row.explicit_count() / self.K for row in self.rows])

    def _register(self, added, removed):
        for k in added:
            if self.refcount[k] == 0:
                self.unrepresented.discard(k)
            self.refcount[k] += 1
        for k in removed:
            self.refcount[k] -= 1
            if self.refcount[k] == 0:
                self.unrepresented.add(k)


def build_sparse_state(phi: np.ndarray, tau: float, graph) -> SparseState:
    """Initial split of a dense weight matrix.

    Two passes: actives from each node's own memberships, then candidates
    from the neighbors' active sets.  Bulk members are absorbed into their
    mass-preserving mean.
    """
    n, K = phi.shape
    totals = np.sum(phi, axis=1)
    actives = []
    for a in range(n):
        act, _ = split_communities(phi[a] / totals[a], tau, set())
        actives.append(set(act.tolist()))
    rows = []
    for a in range(n):
        neighbor_active: set = set()
        for b in graph.neighbors[a]:
            neighbor_active |= actives[int(b)]
        explicit = sorted(actives[a] | (neighbor_active - actives[a]))
        ids = np.asarray(explicit, dtype=np.int64)
        vals = phi[a][ids].copy()
        active_mask = np.asarray([k in actives[a] for k in explicit], dtype=bool)
        n_bulk = K - len(ids)
        if n_bulk:
            bulk_mass = totals[a] - float(np.sum(vals))
            bulk_val = max(bulk_mass / n_bulk, VALUE_FLOOR)
        else:
            bulk_val = VALUE_FLOOR
        rows.append(SparseRow(K, ids, vals, active_mask, bulk_val))
    return SparseState(rows, K)


def sparse_grad_and_update(
    state: SparseState,
    a: int,
    nb: NodeBatch,
    views: dict,
    beta: np.ndarray,
    delta: float,
    alpha: float,
    eps: float,
    noise: NoiseField | None,
    t: int,
    bulk_ids: np.ndarray | None,
):
    """Row update for a sparse node; explicit entries individually, bulk once.

    Returns (new_vals, new_bulk_val); the caller applies them.  With an
    empty bulk this is the dense update verbatim.
    """
    row = state.rows[a].view()
    return row_update_values(row, nb, views, beta, delta, alpha, eps, noise, t, a, bulk_ids)


def promote_demote(state: SparseState, a: int, tau: float, neighbor_active: set, rng: np.random.Generator) -> None:
    """Re-split node a's communities after an update.

    Promotes bulk members while the explicit cdf sits below tau (preferring
    globally unrepresented communities), reclassifies explicit entries by
    the threshold rule, keeps non-active entries that neighbors hold active
    as candidates, pulls bulk members active at neighbors into the candidate
    set, and absorbs everything else into the mass-preserving bulk mean.
    """
    row = state.rows[a]
    K = state.K
    old_explicit = set(row.ids.tolist())

    ids = row.ids
    vals = row.vals
    n_bulk = row.n_bulk
    bulk_val = row.bulk_val
    view = row.view()
    total = view.total
    pi_ex = view.pi_ex
    pi_bulk = view.pi_bulk

    promoted: list = []
    if n_bulk:
        above_mass = float(np.sum(pi_ex[pi_ex >= pi_bulk]))
        if above_mass < tau:
            want = min(n_bulk, int((tau - above_mass) / pi_bulk))
            popped: list = []
            while want > 0 and len(state.unrepresented):
                popped.append(state.unrepresented.pop_random(rng))
                want -= 1
            promoted.extend(popped)
            if want > 0:
                promoted.extend(bulk_member_sample(row, want, rng, exclude=set(promoted)))
            # membership bookkeeping has a single source of truth in
            # _register below; restore the pool before the diff is applied
            for k in popped:
                state.unrepresented.add(k)
    if promoted:
        promoted_arr = np.asarray(sorted(promoted), dtype=np.int64)
        ids = np.concatenate([ids, promoted_arr])
        order = np.argsort(ids, kind="stable")
        ids = ids[order]
        vals = np.concatenate([vals, np.full(len(promoted_arr), bulk_val)])[order]
        pi_ex = np.concatenate([pi_ex, np.full(len(promoted_arr), pi_bulk)])[order]
        n_bulk -= len(promoted_arr)

    # threshold classification over the explicit entries
    order = np.argsort(-pi_ex, kind="stable")
    cdf = np.cumsum(pi_ex[order])
    active_sorted = order[cdf < tau]
    active_set = set(ids[active_sorted].tolist())

    keep = np.asarray([k in active_set or k in neighbor_active for k in ids.tolist()], dtype=bool)
    demoted_mass = float(np.sum(vals[~keep]))
    n_demoted = int(np.sum(~keep))

    bulk_to_candidate = sorted(_bulk_filter(ids, K, neighbor_active))

    kept_ids = ids[keep]
    kept_vals = vals[keep]
    if bulk_to_candidate:
        extra = np.asarray(bulk_to_candidate, dtype=np.int64)
        kept_ids = np.concatenate([kept_ids, extra])
        kept_vals = np.concatenate([kept_vals, np.full(len(extra), bulk_val)])
        order = np.argsort(kept_ids, kind="stable")
        kept_ids = kept_ids[order]
        kept_vals = kept_vals[order]
        n_bulk -= len(extra)

    new_bulk_count = n_bulk + n_demoted
    if new_bulk_count > 0:
        bulk_mass = n_bulk * bulk_val + demoted_mass
        new_bulk_val = max(bulk_mass / new_bulk_count, VALUE_FLOOR)
    else:
        new_bulk_val = VALUE_FLOOR

    new_active = np.asarray([k in active_set for k in kept_ids.tolist()], dtype=bool)
    new_explicit = set(kept_ids.tolist())
    state._register(sorted(new_explicit - old_explicit), sorted(old_explicit - new_explicit))
    state.rows[a] = SparseRow(K, kept_ids, kept_vals, new_active, new_bulk_val)

    if abs(total - state.rows[a].total_mass()) > 1e-6 * max(total, 1.0):
        logger.warning("node %d: mass drift %.3e after re-split", a, total - state.rows[a].total_mass())


def _bulk_filter(ids: np.ndarray, K: int, wanted: set) -> set:
    """Members of `wanted` that are valid bulk ids (in range, not explicit)."""
    explicit = set(ids.tolist())
    return {k for k in wanted if 0 <= k < K and k not in explicit}
