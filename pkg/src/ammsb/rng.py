"""Deterministic random-stream plumbing.

Every randomness consumer is keyed by (seed, domain, iteration, ...) rather
than pulling from one shared sequential stream.  This makes results
independent of thread scheduling, of how many draws another consumer took,
and of whether the dense or the sparse code path ran, which the determinism
and reduction guarantees of the samplers rely on.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

# Stream domains. Values are arbitrary but fixed; changing them changes
# every sampled trajectory.
DOM_INIT = 1
DOM_DATA = 2
DOM_SPLIT = 3
DOM_EDGE = 4
DOM_NODE = 5
DOM_PHI = 6
DOM_THETA = 7
DOM_GLOBAL = 8

_PHI64 = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a (seed, *key) address."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    )


def _mix(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; operates on uint64 arrays (wraparound is silent
    # for arrays, unlike numpy scalars).
    x = (x ^ (x >> _S30)) * _MIX1
    x = (x ^ (x >> _S27)) * _MIX2
    return x ^ (x >> _S31)


class NoiseField:
    """Counter-based standard-normal noise addressable by (domain, t, node, k).

    Langevin noise must be retrievable for an arbitrary subset of community
    indices without generating the whole K-vector, and the value for a given
    (iteration, node, community) must not depend on which other coordinates
    were touched.  A keyed hash into an inverse-CDF normal gives exactly
    that; no generator state is carried between calls.
    """

    def __init__(self, seed: int):
        self._seed = np.asarray([seed], dtype=np.uint64)

    def _base(self, domain: int, t: int, node: int) -> np.ndarray:
        h = _mix(self._seed + _PHI64 * np.asarray([domain + 1], dtype=np.uint64))
        h = _mix(h + _PHI64 * np.asarray([t + 1], dtype=np.uint64))
        return _mix(h + _PHI64 * np.asarray([node + 1], dtype=np.uint64))

    def uniforms(self, domain: int, t: int, node: int, ks) -> np.ndarray:
        """Uniform(0,1) draws for the given community indices."""
        ks64 = np.asarray(ks, dtype=np.uint64)
        h = _mix(self._base(domain, t, node) ^ (ks64 + np.uint64(1)) * _PHI64)
        # top 53 bits -> open interval (0, 1)
        return ((h >> _S11).astype(np.float64) + 0.5) * (2.0 ** -53)

    def normals(self, domain: int, t: int, node: int, ks) -> np.ndarray:
        return ndtri(self.uniforms(domain, t, node, ks))
