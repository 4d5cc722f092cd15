import numpy as np
import pytest
from hypothesis import settings

from ammsb.graph import Graph
from ammsb.kernels import PairContext

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")


def random_graph(n, density, rng) -> Graph:
    edges = []
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < density:
                edges.append((a, b))
    return Graph(n, edges)


def random_ctx(rng, k=None, y=None) -> PairContext:
    k = k if k is not None else int(rng.integers(1, 7))
    y = y if y is not None else int(rng.integers(2))
    return PairContext(
        y=y,
        pi_a=rng.dirichlet(np.ones(k)),
        pi_b=rng.dirichlet(np.ones(k)),
        beta=rng.uniform(0.05, 0.95, size=k),
        delta=float(rng.uniform(0.01, 0.3)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
