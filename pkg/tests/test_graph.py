import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ammsb.graph import (
    Graph,
    generate_ammsb,
    load_edge_list,
    save_edge_list,
    split_heldout,
    validate_graph,
)
from ammsb.rng import DOM_DATA, substream

from conftest import random_graph


def test_load_simple_lines(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("0 1\n1 2\n")
    g = load_edge_list(p)
    assert g.num_nodes == 3
    assert g.num_links == 2
    assert g.has_edge(0, 1) and g.has_edge(1, 2) and not g.has_edge(0, 2)


def test_load_drops_self_loops_and_comments(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# comment\n5 5\n5 6\n")
    g = load_edge_list(p)
    assert g.num_nodes == 2
    assert g.num_links == 1
    # first-appearance remap: 5 -> 0, 6 -> 1
    assert g.has_edge(0, 1)


def test_load_drops_duplicates(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("3 7\n7 3\n3 7\n")
    g = load_edge_list(p)
    assert g.num_nodes == 2 and g.num_links == 1


def test_load_malformed_line_reports_number(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("0 1\n0 x\n")
    with pytest.raises(ValueError, match=":2"):
        load_edge_list(p)
    p.write_text("0 1 2\n")
    with pytest.raises(ValueError, match=":1"):
        load_edge_list(p)


def test_load_empty_and_missing(tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("# nothing\n")
    with pytest.raises(ValueError, match="empty"):
        load_edge_list(p)
    with pytest.raises(ValueError):
        load_edge_list(tmp_path / "missing.txt")


def test_roundtrip_random_graph(tmp_path, rng):
    g = random_graph(50, 0.12, rng)
    path = tmp_path / "r.txt"
    save_edge_list(g, path)
    g2 = load_edge_list(path)
    assert g.same_adjacency(g2)


def test_constructor_rejects_self_loop():
    with pytest.raises(ValueError, match="self-loop"):
        Graph(3, [(0, 0)])


def test_generate_complete_graph_with_forced_beta(rng):
    g, truth = generate_ammsb(8, 1, 1.0, 1.0, 0.0, rng, beta_override=[1.0])
    assert g.num_links == 8 * 7 // 2
    assert truth.beta[0] == 1.0


def test_generate_invariants_and_truth(rng):
    g, truth = generate_ammsb(40, 4, 0.25, 0.5, 0.05, rng)
    validate_graph(g)
    assert np.allclose(truth.pi.sum(axis=1), 1.0, atol=1e-12)
    assert np.all((truth.beta > 0) & (truth.beta < 1))


def test_generate_deterministic():
    g1, t1 = generate_ammsb(30, 3, 0.4, 0.8, 0.02, substream(9, DOM_DATA))
    g2, t2 = generate_ammsb(30, 3, 0.4, 0.8, 0.02, substream(9, DOM_DATA))
    assert g1.same_adjacency(g2)
    assert np.array_equal(t1.pi, t2.pi) and np.array_equal(t1.beta, t2.beta)


def test_generate_rejects_bad_hyperparams(rng):
    with pytest.raises(ValueError):
        generate_ammsb(1, 2, 1.0, 1.0, 0.1, rng)
    with pytest.raises(ValueError):
        generate_ammsb(5, 2, 1.0, 1.0, 1.0, rng)
    with pytest.raises(ValueError):
        generate_ammsb(5, 2, -1.0, 1.0, 0.1, rng)


def test_table_synthetic_density():
    # default synthetic setup: 75 nodes, ~30% link density
    rng = substream(42, DOM_DATA)
    g, _ = generate_ammsb(75, 4, 0.25, 0.2, 0.2333, rng)
    assert abs(g.density() - 0.30) < 0.05


def test_generated_density_matches_analytic_oracle():
    # empirical density over many graphs vs. a Monte Carlo estimate computed
    # from exact per-pair link probabilities (no z sampling on the oracle path)
    n, k, alpha, eta, delta = 24, 3, 0.3, 0.6, 0.05
    reps = 200
    rng = substream(7, DOM_DATA)
    densities = np.empty(reps)
    for i in range(reps):
        g, _ = generate_ammsb(n, k, alpha, eta, delta, rng)
        densities[i] = g.density()

    orng = np.random.default_rng(123)
    est = np.empty(400)
    for i in range(len(est)):
        pi = orng.dirichlet(np.full(k, alpha), size=n)
        beta = orng.beta(eta, eta, size=k)
        overlap = pi @ (pi * beta[None, :]).T
        mass = pi @ pi.T
        p = overlap + (1.0 - mass) * delta
        iu = np.triu_indices(n, 1)
        est[i] = p[iu].mean()
    se = np.sqrt(densities.var() / reps + est.var() / len(est))
    assert abs(densities.mean() - est.mean()) < 3 * se


def test_split_heldout_arithmetic(rng):
    g = random_graph(90, 0.25, rng)
    # engineer exactly 1000 links is overkill; use the rule directly
    training, split = split_heldout(g, 0.01, rng)
    n_test = int(np.ceil(0.01 * g.num_links))
    assert int(np.sum(split.pairs[:, 2] == 1)) == n_test
    assert int(np.sum(split.pairs[:, 2] == 0)) == n_test
    assert training.num_links == g.num_links - n_test


def test_split_heldout_links_absent_from_training(rng):
    g = random_graph(40, 0.3, rng)
    training, split = split_heldout(g, 0.05, rng)
    for a, b, y in split.pairs:
        if y == 1:
            assert not training.has_edge(int(a), int(b))
            assert g.has_edge(int(a), int(b))
        else:
            assert not g.has_edge(int(a), int(b))


def test_split_heldout_partition(rng):
    for seed in range(3):
        g = random_graph(30, 0.3, np.random.default_rng(seed))
        training, split = split_heldout(g, 0.1, rng)
        orig = {tuple(e) for e in g.edge_array()}
        train = {tuple(e) for e in training.edge_array()}
        test_links = {(int(a), int(b)) for a, b, y in split.pairs if y == 1}
        assert train | test_links == orig
        assert not (train & test_links)


def test_split_heldout_no_duplicate_pairs(rng):
    g = random_graph(30, 0.4, rng)
    _, split = split_heldout(g, 0.1, rng)
    keys = {(int(a), int(b)) for a, b, _ in split.pairs}
    assert len(keys) == len(split.pairs)
    assert all(a < b for a, b, _ in split.pairs)


def test_split_heldout_rejects_bad_fraction(rng):
    g = random_graph(20, 0.3, rng)
    with pytest.raises(ValueError):
        split_heldout(g, 0.0, rng)
    with pytest.raises(ValueError):
        split_heldout(g, 1.0, rng)


@settings(max_examples=25)
@given(st.integers(min_value=2, max_value=30), st.integers(min_value=0, max_value=10_000))
def test_generated_graph_invariants(n, seed):
    g, _ = generate_ammsb(n, 3, 0.5, 1.0, 0.1, np.random.default_rng(seed))
    validate_graph(g)
