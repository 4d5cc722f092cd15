"""Stratified mini-batch samplers with exactly unbiased scale factors.

The edge sampler picks a pivot node uniformly, then a fair coin decides
between the pivot's link stratum (all its link edges) and a non-link stratum
(a uniform subset of its non-link peers).  The scale factor attached to a
batch makes h * sum_{batch} g an exactly unbiased estimator of the full sum
of g over every trainable pair, for any per-pair function g:

    link stratum      h = N          (each link is seen from two pivots,
                                      each with probability 1/(2N))
    non-link stratum  h = N * M / n  (M = pivot's non-link population after
                                      held-out exclusion, n = batch size)

When a pivot has no links (or no non-links) the coin is forced to the other
stratum; the forced batch carries h/2 because that pivot now reaches the
stratum with probability 1 instead of 1/2.  In the sparse regime M ~= N and
n = ceil(N/m), so h reduces to the familiar m*N.

The node sampler draws the two strata around a fixed pivot and weights them
with c1 = |N(a)|/|V1| and c0 = M0/|V0| (M0 = non-neighbors excluding
held-out partners), which makes c1*sum_{V1} g + c0*sum_{V0} g unbiased for
sum over all trainable peers of the pivot.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ammsb.graph import Graph, HeldOutSplit

LINK = 1
NONLINK = 0


@dataclass(frozen=True)
class EdgeBatch:
    pivot: int
    pairs: np.ndarray  # (n, 2) int64, pivot first
    y: int  # LINK or NONLINK stratum
    scale: float
    forced: bool = False


@dataclass(frozen=True)
class NodeBatch:
    pivot: int
    v1: np.ndarray  # neighbor sample
    v0: np.ndarray  # non-neighbor sample
    c1: float
    c0: float


def _excluded(a: int, heldout: HeldOutSplit | None) -> set:
    return heldout.partners(a) if heldout is not None else set()


def nonlink_population(g: Graph, a: int, heldout: HeldOutSplit | None) -> np.ndarray:
    """Sorted ids of the pivot's trainable non-link peers."""
    mask = np.ones(g.num_nodes, dtype=bool)
    mask[a] = False
    mask[g.neighbors[a]] = False
    ex = _excluded(a, heldout)
    if ex:
        mask[list(ex)] = False
    return np.nonzero(mask)[0]


def _edge_batch(g: Graph, a: int, y: int, members: np.ndarray, pop_size: int, forced: bool) -> EdgeBatch:
    n = len(members)
    pairs = np.empty((n, 2), dtype=np.int64)
    pairs[:, 0] = a
    pairs[:, 1] = members
    if y == LINK:
        scale = float(g.num_nodes)
    else:
        scale = g.num_nodes * pop_size / n if n else 0.0
    if forced:
        scale *= 0.5
    return EdgeBatch(pivot=a, pairs=pairs, y=y, scale=scale, forced=forced)


def sample_edge_strata(
    g: Graph, m: int, heldout: HeldOutSplit | None, rng: np.random.Generator
) -> EdgeBatch:
    """Draw one stratified edge batch (pivot, coin, subset)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if g.num_nodes < 2:
        raise ValueError("graph too small to sample pairs")
    a = int(rng.integers(g.num_nodes))
    want_link = bool(rng.random() < 0.5)
    nonlinks = nonlink_population(g, a, heldout)
    deg = g.degree(a)

    forced = False
    if want_link and deg == 0:
        want_link, forced = False, True
    elif not want_link and len(nonlinks) == 0:
        want_link, forced = True, True

    if want_link:
        if deg == 0:
            raise ValueError(f"node {a} has neither links nor trainable non-links")
        return _edge_batch(g, a, LINK, g.neighbors[a], deg, forced)
    if len(nonlinks) == 0:
        raise ValueError(f"node {a} has neither links nor trainable non-links")
    n0 = min(math.ceil(g.num_nodes / m), len(nonlinks))
    members = np.sort(rng.choice(nonlinks, size=n0, replace=False))
    return _edge_batch(g, a, NONLINK, members, len(nonlinks), forced)


def enumerate_edge_batches(g: Graph, m: int, heldout: HeldOutSplit | None = None):
    """All (probability, EdgeBatch) outcomes of sample_edge_strata.

    Enumeration support for the unbiasedness oracles; feasible for desk-size
    graphs only.
    """
    out = []
    n_nodes = g.num_nodes
    for a in range(n_nodes):
        p_pivot = 1.0 / n_nodes
        nonlinks = nonlink_population(g, a, heldout)
        deg = g.degree(a)
        link_forced = len(nonlinks) == 0
        nonlink_forced = deg == 0
        if deg == 0 and len(nonlinks) == 0:
            raise ValueError(f"node {a} has no trainable pairs")
        if deg > 0:
            p_link = p_pivot if link_forced else p_pivot * 0.5
            out.append((p_link, _edge_batch(g, a, LINK, g.neighbors[a], deg, link_forced)))
        if len(nonlinks) > 0:
            n0 = min(math.ceil(n_nodes / m), len(nonlinks))
            p_branch = p_pivot if nonlink_forced else p_pivot * 0.5
            n_subsets = math.comb(len(nonlinks), n0)
            for subset in itertools.combinations(nonlinks.tolist(), n0):
                members = np.asarray(subset, dtype=np.int64)
                out.append(
                    (
                        p_branch / n_subsets,
                        _edge_batch(g, a, NONLINK, members, len(nonlinks), nonlink_forced),
                    )
                )
    return out


def sample_node_batch(
    g: Graph,
    a: int,
    n1: int,
    n0: int,
    rng: np.random.Generator,
    heldout: HeldOutSplit | None = None,
) -> NodeBatch:
    """Stratified peer sample around pivot a with unbiasedness weights."""
    if n1 < 1 or n0 < 1:
        raise ValueError("n1 and n0 must be >= 1")
    neigh = g.neighbors[a]
    deg = len(neigh)
    if deg == 0:
        v1 = np.empty(0, dtype=np.int64)
        c1 = 0.0
    elif n1 >= deg:
        v1 = neigh.copy()
        c1 = 1.0
    else:
        v1 = np.sort(rng.choice(neigh, size=n1, replace=False))
        c1 = deg / n1
    pop0 = nonlink_population(g, a, heldout)
    if len(pop0) == 0:
        v0 = np.empty(0, dtype=np.int64)
        c0 = 0.0
    elif n0 >= len(pop0):
        v0 = pop0.copy()
        c0 = 1.0
    else:
        v0 = np.sort(rng.choice(pop0, size=n0, replace=False))
        c0 = len(pop0) / n0
    return NodeBatch(pivot=a, v1=v1, v0=v0, c1=c1, c0=c0)


def sample_uniform_node_batch(
    g: Graph,
    a: int,
    n: int,
    rng: np.random.Generator,
    heldout: HeldOutSplit | None = None,
) -> NodeBatch:
    """Unstratified variant: n peers uniform over the trainable population.

    Both strata carry the same weight pop/n, so the estimator stays unbiased
    without using the adjacency structure in the sampling step.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    mask = np.ones(g.num_nodes, dtype=bool)
    mask[a] = False
    ex = _excluded(a, heldout)
    if ex:
        mask[list(ex)] = False
    pop = np.nonzero(mask)[0]
    take = min(n, len(pop))
    if take == 0:
        raise ValueError(f"node {a} has no trainable peers")
    peers = np.sort(rng.choice(pop, size=take, replace=False))
    is_link = np.fromiter((g.has_edge(a, int(b)) for b in peers), dtype=bool, count=take)
    c = len(pop) / take
    return NodeBatch(pivot=a, v1=peers[is_link], v0=peers[~is_link], c1=c, c0=c)


def enumerate_node_batches(
    g: Graph, a: int, n1: int, n0: int, heldout: HeldOutSplit | None = None
):
    """All (probability, NodeBatch) outcomes of sample_node_batch."""
    neigh = g.neighbors[a]
    deg = len(neigh)
    pop0 = nonlink_population(g, a, heldout)

    if deg == 0:
        v1_choices = [(1.0, np.empty(0, dtype=np.int64), 0.0)]
    elif n1 >= deg:
        v1_choices = [(1.0, neigh.copy(), 1.0)]
    else:
        total = math.comb(deg, n1)
        v1_choices = [
            (1.0 / total, np.asarray(s, dtype=np.int64), deg / n1)
            for s in itertools.combinations(neigh.tolist(), n1)
        ]
    if len(pop0) == 0:
        v0_choices = [(1.0, np.empty(0, dtype=np.int64), 0.0)]
    elif n0 >= len(pop0):
        v0_choices = [(1.0, pop0.copy(), 1.0)]
    else:
        total = math.comb(len(pop0), n0)
        v0_choices = [
            (1.0 / total, np.asarray(s, dtype=np.int64), len(pop0) / n0)
            for s in itertools.combinations(pop0.tolist(), n0)
        ]
    out = []
    for p1, v1, c1 in v1_choices:
        for p0, v0, c0 in v0_choices:
            out.append((p1 * p0, NodeBatch(pivot=a, v1=v1, v0=v0, c1=c1, c0=c0)))
    return out
