import math

import numpy as np
import pytest

from ammsb.graph import Graph, split_heldout
from ammsb.minibatch import (
    LINK,
    NONLINK,
    enumerate_edge_batches,
    enumerate_node_batches,
    nonlink_population,
    sample_edge_strata,
    sample_node_batch,
    sample_uniform_node_batch,
)

from conftest import random_graph


def pair_fn(n, seed=0):
    """Arbitrary fixed symmetric test function over unordered pairs."""
    rng = np.random.default_rng(seed)
    table = rng.uniform(0.1, 2.0, size=(n, n))
    return lambda a, b: table[min(a, b), max(a, b)]


def full_pair_sum(g, fn, heldout=None):
    excluded = set()
    if heldout is not None:
        excluded = {(int(a), int(b)) for a, b, _ in heldout.pairs}
    return sum(
        fn(a, b)
        for a in range(g.num_nodes)
        for b in range(a + 1, g.num_nodes)
        if (a, b) not in excluded
    )


def expected_edge_estimate(g, m, fn, heldout=None):
    total = 0.0
    prob = 0.0
    for p, batch in enumerate_edge_batches(g, m, heldout):
        total += p * batch.scale * sum(fn(int(a), int(b)) for a, b in batch.pairs)
        prob += p
    assert abs(prob - 1.0) < 1e-12
    return total


def test_nonlink_branch_size_and_scale(rng):
    g = random_graph(100, 0.1, rng)
    while True:
        batch = sample_edge_strata(g, 10, None, rng)
        if batch.y == NONLINK:
            break
    a = batch.pivot
    pop = g.num_nodes - 1 - g.degree(a)
    assert len(batch.pairs) == 10  # ceil(100/10)
    assert batch.scale == pytest.approx(g.num_nodes * pop / 10)
    assert all(p[0] == a and not g.has_edge(a, int(p[1])) for p in batch.pairs)


def test_link_branch_returns_all_links(rng):
    g = Graph(6, [(0, 1), (0, 2), (0, 3), (4, 5)])
    while True:
        batch = sample_edge_strata(g, 2, None, rng)
        if batch.y == LINK and batch.pivot == 0:
            break
    assert len(batch.pairs) == 3
    assert batch.scale == 6.0
    assert sorted(int(b) for _, b in batch.pairs) == [1, 2, 3]


def test_edge_estimator_unbiased_by_enumeration():
    for seed, n, m in ((0, 7, 2), (1, 8, 3), (2, 6, 1)):
        g = random_graph(n, 0.35, np.random.default_rng(seed))
        if g.num_links == 0:
            continue
        fn = pair_fn(n, seed)
        est = expected_edge_estimate(g, m, fn)
        assert est == pytest.approx(full_pair_sum(g, fn), abs=1e-9)


def test_edge_estimator_unbiased_with_isolated_node():
    # isolated node 4 forces the non-link branch; fully-connected pivots force links
    g = Graph(5, [(0, 1), (0, 2), (0, 3), (1, 2)])
    fn = pair_fn(5, 3)
    est = expected_edge_estimate(g, 2, fn)
    assert est == pytest.approx(full_pair_sum(g, fn), abs=1e-9)


def test_edge_estimator_unbiased_with_heldout(rng):
    g = random_graph(8, 0.5, np.random.default_rng(11))
    _, heldout = split_heldout(g, 0.2, np.random.default_rng(1))
    training = heldout.training_graph
    fn = pair_fn(8, 4)
    est = expected_edge_estimate(training, 2, fn, heldout)
    assert est == pytest.approx(full_pair_sum(training, fn, heldout), abs=1e-9)


def test_edge_batches_never_contain_heldout_or_self(rng):
    g = random_graph(30, 0.3, np.random.default_rng(2))
    _, heldout = split_heldout(g, 0.1, np.random.default_rng(3))
    training = heldout.training_graph
    banned = {(int(a), int(b)) for a, b, _ in heldout.pairs}
    for _ in range(200):
        batch = sample_edge_strata(training, 3, heldout, rng)
        for a, b in batch.pairs:
            a, b = int(a), int(b)
            assert a != b
            assert (min(a, b), max(a, b)) not in banned


def test_node_batch_full_stratum(rng):
    g = random_graph(30, 0.3, np.random.default_rng(4))
    a = max(range(30), key=g.degree)
    nb = sample_node_batch(g, a, g.degree(a), 5, rng)
    assert nb.c1 == 1.0
    assert np.array_equal(nb.v1, g.neighbors[a])


def test_node_batch_c0_formula(rng):
    # N=101, deg(a)=1, n0=10 -> c0 = 99/10
    edges = [(0, 1)] + [(i, i + 1) for i in range(2, 100)]
    g = Graph(101, edges)
    nb = sample_node_batch(g, 0, 10, 10, rng)
    assert nb.c0 == pytest.approx(9.9)
    assert nb.c1 == 1.0 and len(nb.v1) == 1


def test_node_batch_zero_degree_pivot(rng):
    g = Graph(5, [(1, 2)])
    nb = sample_node_batch(g, 0, 10, 2, rng)
    assert len(nb.v1) == 0 and nb.c1 == 0.0
    assert len(nb.v0) == 2


def test_node_batch_take_all_scaling(rng):
    g = Graph(4, [(0, 1)])
    nb = sample_node_batch(g, 0, 5, 50, rng)
    assert nb.c0 == 1.0
    assert sorted(nb.v0.tolist()) == [2, 3]


def test_node_estimator_unbiased_by_enumeration():
    g = random_graph(7, 0.4, np.random.default_rng(8))
    fn = pair_fn(7, 9)
    for a in range(7):
        target = sum(fn(a, b) for b in range(7) if b != a)
        est = 0.0
        prob = 0.0
        for p, nb in enumerate_node_batches(g, a, 2, 2):
            est += p * (
                nb.c1 * sum(fn(a, int(b)) for b in nb.v1)
                + nb.c0 * sum(fn(a, int(b)) for b in nb.v0)
            )
            prob += p
        assert abs(prob - 1.0) < 1e-12
        assert est == pytest.approx(target, abs=1e-9)


def test_node_estimator_unbiased_with_heldout():
    g = random_graph(7, 0.5, np.random.default_rng(12))
    _, heldout = split_heldout(g, 0.2, np.random.default_rng(13))
    training = heldout.training_graph
    fn = pair_fn(7, 14)
    for a in range(7):
        banned = heldout.partners(a)
        target = sum(fn(a, b) for b in range(7) if b != a and b not in banned)
        est = 0.0
        for p, nb in enumerate_node_batches(training, a, 2, 2, heldout):
            est += p * (
                nb.c1 * sum(fn(a, int(b)) for b in nb.v1)
                + nb.c0 * sum(fn(a, int(b)) for b in nb.v0)
            )
        assert est == pytest.approx(target, abs=1e-9)


def test_uniform_node_batch_unbiased(rng):
    g = random_graph(12, 0.3, np.random.default_rng(6))
    fn = pair_fn(12, 7)
    a = 3
    target = sum(fn(a, b) for b in range(12) if b != a)
    reps = 40_000
    acc = 0.0
    for _ in range(reps):
        nb = sample_uniform_node_batch(g, a, 4, rng)
        acc += nb.c1 * sum(fn(a, int(b)) for b in nb.v1) + nb.c0 * sum(fn(a, int(b)) for b in nb.v0)
    assert acc / reps == pytest.approx(target, rel=0.02)


def test_node_batches_exclude_self_and_heldout(rng):
    g = random_graph(25, 0.3, np.random.default_rng(10))
    _, heldout = split_heldout(g, 0.1, np.random.default_rng(11))
    training = heldout.training_graph
    for a in range(0, 25, 5):
        banned = heldout.partners(a)
        for _ in range(30):
            nb = sample_node_batch(training, a, 4, 4, rng, heldout)
            members = set(nb.v1.tolist()) | set(nb.v0.tolist())
            assert a not in members
            assert not (members & banned)
            assert all(training.has_edge(a, b) for b in nb.v1)
            assert all(not training.has_edge(a, b) for b in nb.v0)


def test_population_respects_heldout(rng):
    g = random_graph(20, 0.2, np.random.default_rng(5))
    _, heldout = split_heldout(g, 0.2, np.random.default_rng(6))
    training = heldout.training_graph
    for a in range(20):
        pop = nonlink_population(training, a, heldout)
        assert a not in pop
        assert not (set(pop.tolist()) & heldout.partners(a))


def test_invalid_arguments(rng):
    g = Graph(4, [(0, 1)])
    with pytest.raises(ValueError):
        sample_edge_strata(g, 0, None, rng)
    with pytest.raises(ValueError):
        sample_node_batch(g, 0, 0, 1, rng)
