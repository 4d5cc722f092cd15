"""Held-out perplexity over a stream of posterior samples, plus trace output."""

from __future__ import annotations

import logging
import math

import numpy as np

from ammsb.graph import Graph, HeldOutSplit
from ammsb.kernels import pair_likelihood_rows

logger = logging.getLogger(__name__)

TRACE_HEADER = "iter,seconds,perplexity,mem_ratio,accept_rate"


class PerplexityAccumulator:
    """Running per-pair average of predictive probabilities.

    Probabilities are averaged over samples first and logged second, so the
    order of operations matches the averaged-predictive definition.
    """

    def __init__(self, n_pairs: int):
        self.sums = np.zeros(n_pairs)
        self.T = 0

    def averages(self) -> np.ndarray:
        if self.T < 1:
            raise ValueError("no samples absorbed")
        return self.sums / self.T


def absorb_sample(
    acc: PerplexityAccumulator,
    heldout: HeldOutSplit,
    pi: np.ndarray,
    beta: np.ndarray,
    delta: float,
) -> None:
    pairs = heldout.pairs
    p = pair_likelihood_rows(pi[pairs[:, 0]], pi[pairs[:, 1]], beta, delta, pairs[:, 2])
    acc.sums += p
    acc.T += 1


def perplexity(acc: PerplexityAccumulator) -> float:
    avg = acc.averages()
    if np.any(avg <= 0.0):
        logger.warning("zero average predictive probability on %d pair(s)", int(np.sum(avg <= 0.0)))
        return math.inf
    return float(np.exp(-np.mean(np.log(avg))))


def trivial_perplexity(training: Graph, heldout: HeldOutSplit) -> float:
    """Perplexity of the constant link-rate predictor on the same test set."""
    rho = training.density()
    y = heldout.pairs[:, 2]
    p = np.where(y == 1, rho, 1.0 - rho)
    return float(np.exp(-np.mean(np.log(p))))


def nmi(labels_a, labels_b) -> float:
    """Normalized mutual information between two hard labelings.

    Diagnostic for synthetic runs with known memberships; arithmetic-mean
    normalization.
    """
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if len(a) != len(b):
        raise ValueError("label arrays differ in length")
    n = len(a)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)
    joint = table / n
    pa = joint.sum(axis=1)
    pb = joint.sum(axis=0)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / np.outer(pa, pb)[nz])))
    ha = -float(np.sum(pa[pa > 0] * np.log(pa[pa > 0])))
    hb = -float(np.sum(pb[pb > 0] * np.log(pb[pb > 0])))
    denom = 0.5 * (ha + hb)
    return mi / denom if denom > 0 else 0.0


class TraceWriter:
    """CSV trace: one row per evaluation; inapplicable columns stay empty."""

    def __init__(self, path):
        self._fh = open(path, "w", encoding="ascii")
        self._fh.write(TRACE_HEADER + "\n")
        self._last_seconds = 0.0

    def write(self, iteration: int, seconds: float, perp: float, mem_ratio=None, accept_rate=None):
        if seconds < self._last_seconds:
            raise ValueError("wall-clock column must be non-decreasing")
        self._last_seconds = seconds
        mem = f"{mem_ratio:.6f}" if mem_ratio is not None else ""
        acc = f"{accept_rate:.6f}" if accept_rate is not None else ""
        self._fh.write(f"{iteration},{seconds:.6f},{perp:.17g},{mem},{acc}\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
