"""Graph container, edge-list IO, synthetic generation and held-out splits."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import beta as _beta_dist

logger = logging.getLogger(__name__)

_GEN_CHUNK = 1 << 16  # pairs per generation block; fixed so streams are reproducible


class Graph:
    """Undirected simple graph over dense integer node ids [0, N).

    Adjacency is kept per node both as a sorted id array (for batch slicing)
    and as a set (for O(1) membership).  Instances are immutable once built
    and safe for any number of concurrent readers.
    """

    __slots__ = ("num_nodes", "num_links", "neighbors", "_adj")

    def __init__(self, num_nodes: int, edges):
        if num_nodes < 1:
            raise ValueError("graph needs at least one node")
        adj = [set() for _ in range(num_nodes)]
        for a, b in edges:
            a = int(a)
            b = int(b)
            if a == b:
                raise ValueError(f"self-loop at node {a}")
            if not (0 <= a < num_nodes and 0 <= b < num_nodes):
                raise ValueError(f"edge ({a},{b}) outside [0,{num_nodes})")
            adj[a].add(b)
            adj[b].add(a)
        self._adj = adj
        self.neighbors = [np.fromiter(sorted(s), dtype=np.int64, count=len(s)) for s in adj]
        self.num_nodes = num_nodes
        self.num_links = sum(len(s) for s in adj) // 2

    def degree(self, a: int) -> int:
        return len(self._adj[a])

    def has_edge(self, a: int, b: int) -> bool:
        return b in self._adj[a]

    def adjacency_set(self, a: int) -> set:
        return self._adj[a]

    def edge_array(self) -> np.ndarray:
        """All links as an (L, 2) array with a < b, lexicographic order."""
        out = np.empty((self.num_links, 2), dtype=np.int64)
        i = 0
        for a in range(self.num_nodes):
            nb = self.neighbors[a]
            upper = nb[nb > a]
            n = len(upper)
            out[i : i + n, 0] = a
            out[i : i + n, 1] = upper
            i += n
        return out

    def without_edges(self, pairs) -> "Graph":
        """Copy with the given links removed."""
        drop = {(min(a, b), max(a, b)) for a, b in pairs}
        kept = [
            (a, b)
            for a, b in self.edge_array()
            if (a, b) not in drop
        ]
        return Graph(self.num_nodes, kept)

    def density(self) -> float:
        total = self.num_nodes * (self.num_nodes - 1) / 2
        return self.num_links / total if total else 0.0

    def same_adjacency(self, other: "Graph") -> bool:
        return self.num_nodes == other.num_nodes and all(
            np.array_equal(x, y) for x, y in zip(self.neighbors, other.neighbors)
        )


def validate_graph(g: Graph) -> None:
    """Assert structural invariants; raises AssertionError on violation."""
    deg_sum = 0
    for a in range(g.num_nodes):
        nb = g.neighbors[a]
        assert np.all(np.diff(nb) > 0), f"unsorted or duplicate neighbors at {a}"
        assert a not in g.adjacency_set(a), f"self-loop at {a}"
        for b in nb:
            assert a in g.adjacency_set(int(b)), f"asymmetric edge ({a},{b})"
        deg_sum += len(nb)
    assert g.num_links == deg_sum // 2


@dataclass(frozen=True)
class GroundTruth:
    """Generating parameters of a synthetic graph."""

    pi: np.ndarray  # (N, K) row-stochastic memberships
    beta: np.ndarray  # (K,) community strengths in (0, 1)


@dataclass(frozen=True)
class HeldOutSplit:
    """Labeled test pairs withheld from training.

    ``pairs`` is (T, 3) int64 rows (a, b, y) with a < b; link rows were
    removed from ``training_graph``.  ``partner_map`` gives, per node, the
    set of peers it forms a held-out pair with (either label), which the
    mini-batch samplers use to keep test pairs out of the training strata.
    """

    pairs: np.ndarray
    training_graph: Graph
    partner_map: dict

    def partners(self, a: int) -> set:
        return self.partner_map.get(a, _EMPTY_SET)

    def num_links(self) -> int:
        return int(np.sum(self.pairs[:, 2]))


_EMPTY_SET: frozenset = frozenset()


def load_edge_list(path) -> Graph:
    """Parse a whitespace edge-list file into a Graph.

    External ids are remapped to dense [0, N) in first-appearance order.
    Lines whose first non-blank character is '#' are comments.  Duplicate
    edges and self-loops are dropped; the counts are logged.
    """
    remap: dict = {}
    edges = set()
    dup = 0
    loops = 0
    try:
        fh = open(path, "r", encoding="ascii")
    except OSError as e:
        raise ValueError(f"cannot read edge list {path}: {e}") from e
    with fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            tokens = stripped.split()
            if len(tokens) != 2:
                raise ValueError(f"{path}:{lineno}: expected two tokens, got {len(tokens)}")
            try:
                ra, rb = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer tokens {tokens!r}") from None
            if ra < 0 or rb < 0:
                raise ValueError(f"{path}:{lineno}: negative node id")
            for r in (ra, rb):
                if r not in remap:
                    remap[r] = len(remap)
            if ra == rb:
                loops += 1
                continue
            a, b = remap[ra], remap[rb]
            key = (min(a, b), max(a, b))
            if key in edges:
                dup += 1
            else:
                edges.add(key)
    if not remap:
        raise ValueError(f"{path}: empty graph")
    if dup or loops:
        logger.info("%s: dropped %d duplicate edges, %d self-loops", path, dup, loops)
    return Graph(len(remap), sorted(edges))


def save_edge_list(g: Graph, path) -> None:
    """Write a graph in the text edge-list format (one "a b" line per link)."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# undirected edge list: {g.num_nodes} nodes, {g.num_links} links\n")
        for a, b in g.edge_array():
            fh.write(f"{a} {b}\n")


def generate_ammsb(
    n_nodes: int,
    k: int,
    alpha: float,
    eta: float,
    delta: float,
    rng: np.random.Generator,
    beta_override=None,
):
    """Sample a graph from the assortative blockmodel generative process.

    Community strengths come from Beta(eta, eta) via inverse-CDF so that a
    fixed seed responds smoothly (and, for strengths, monotonically toward
    1/2) as eta moves.  ``beta_override`` substitutes fixed strengths, which
    degenerate test setups need.  Returns (Graph, GroundTruth).
    """
    if n_nodes < 2 or k < 1:
        raise ValueError("need n_nodes >= 2 and k >= 1")
    if not (0.0 <= delta < 1.0):
        raise ValueError("delta must be in [0, 1)")
    if alpha <= 0 or eta <= 0:
        raise ValueError("alpha and eta must be positive")

    u = rng.random(k)
    if beta_override is not None:
        beta = np.asarray(beta_override, dtype=np.float64)
        if beta.shape != (k,):
            raise ValueError("beta_override must have length k")
    else:
        beta = np.clip(_beta_dist.ppf(u, eta, eta), 1e-12, 1.0 - 1e-12)
    pi = rng.dirichlet(np.full(k, alpha), size=n_nodes)

    ia, ib = np.triu_indices(n_nodes, 1)
    cum = np.cumsum(pi, axis=1)
    edges = []
    for lo in range(0, len(ia), _GEN_CHUNK):
        hi = min(lo + _GEN_CHUNK, len(ia))
        aa, bb = ia[lo:hi], ib[lo:hi]
        u1 = rng.random(hi - lo)
        u2 = rng.random(hi - lo)
        uy = rng.random(hi - lo)
        za = (u1[:, None] > cum[aa]).sum(axis=1)
        zb = (u2[:, None] > cum[bb]).sum(axis=1)
        p = np.where(za == zb, beta[za], delta)
        linked = uy < p
        edges.extend(zip(aa[linked].tolist(), bb[linked].tolist()))
    return Graph(n_nodes, edges), GroundTruth(pi=pi, beta=beta)


def split_heldout(g: Graph, fraction: float, rng: np.random.Generator):
    """Withhold ceil(fraction * L) links plus an equal number of non-links.

    Held-out links are removed from the returned training graph; held-out
    non-links are recorded so training strata can skip them.  Returns
    (training_graph, HeldOutSplit).
    """
    if not (0.0 < fraction < 1.0):
        raise ValueError("fraction must be in (0, 1)")
    n_test = math.ceil(fraction * g.num_links)
    if g.num_links < n_test or n_test < 1:
        raise ValueError("graph has too few links for the requested fraction")

    edges = g.edge_array()
    link_idx = rng.choice(g.num_links, size=n_test, replace=False)
    link_pairs = edges[np.sort(link_idx)]

    chosen = set()
    nonlink_pairs = []
    n = g.num_nodes
    while len(nonlink_pairs) < n_test:
        a = int(rng.integers(n))
        b = int(rng.integers(n))
        if a == b:
            continue
        key = (min(a, b), max(a, b))
        if key in chosen or g.has_edge(*key):
            continue
        chosen.add(key)
        nonlink_pairs.append(key)

    rows = [(int(a), int(b), 1) for a, b in link_pairs]
    rows += [(a, b, 0) for a, b in nonlink_pairs]
    pairs = np.asarray(rows, dtype=np.int64)

    training = g.without_edges(link_pairs)
    lost = [a for a in range(n) if training.degree(a) == 0 and g.degree(a) > 0]
    if lost:
        logger.warning(
            "held-out split isolated %d node(s); training signal may be weak", len(lost)
        )

    partner_map: dict = {}
    for a, b, _ in rows:
        partner_map.setdefault(a, set()).add(b)
        partner_map.setdefault(b, set()).add(a)
    return training, HeldOutSplit(pairs=pairs, training_graph=training, partner_map=partner_map)
