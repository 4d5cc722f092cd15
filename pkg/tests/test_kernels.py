import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from ammsb.kernels import PairContext, f_local, f_local_vec, f_pair, pair_likelihood, z_norm

from conftest import random_ctx


def _ctx(y, pi_a, pi_b, beta, delta):
    return PairContext(
        y=y,
        pi_a=np.asarray(pi_a, dtype=float),
        pi_b=np.asarray(pi_b, dtype=float),
        beta=np.asarray(beta, dtype=float),
        delta=delta,
    )


def brute_force_z(ctx):
    k = len(ctx.pi_a)
    return sum(f_pair(ctx, i, j) for i in range(k) for j in range(k))


def test_f_pair_same_community_product():
    ctx = _ctx(1, [0.4, 0.6], [0.3, 0.7], [0.5, 0.5], 0.1)
    assert abs(f_pair(ctx, 0, 0) - 0.06) < 1e-15


def test_f_pair_cross_community_product():
    ctx = _ctx(0, [0.2, 0.8], [0.5, 0.5], [0.5, 0.5], 0.1)
    assert abs(f_pair(ctx, 0, 1) - 0.09) < 1e-15


def test_f_pair_total_probability_over_y(rng):
    for _ in range(50):
        base = random_ctx(rng)
        total = 0.0
        k = len(base.pi_a)
        for y in (0, 1):
            ctx = _ctx(y, base.pi_a, base.pi_b, base.beta, base.delta)
            total += sum(f_pair(ctx, i, j) for i in range(k) for j in range(k))
        assert abs(total - 1.0) < 1e-12


def test_z_norm_single_community_collapse():
    ctx = _ctx(1, [1.0], [1.0], [0.6], 0.1)
    assert abs(z_norm(ctx) - 0.6) < 1e-15


def test_z_norm_beta_equal_delta_vanishes():
    for y in (0, 1):
        ctx = _ctx(y, [0.2, 0.3, 0.5], [0.6, 0.1, 0.3], [0.1, 0.1, 0.1], 0.1)
        want = 0.1 if y == 1 else 0.9
        assert abs(z_norm(ctx) - want) < 1e-15


def test_z_norm_equals_brute_force(rng):
    for _ in range(200):
        ctx = random_ctx(rng)
        assert abs(z_norm(ctx) - brute_force_z(ctx)) < 1e-12


def test_f_local_sums_to_z(rng):
    for _ in range(200):
        ctx = random_ctx(rng)
        total = sum(f_local(ctx, k) for k in range(len(ctx.pi_a)))
        assert abs(total - z_norm(ctx)) < 1e-12
        assert abs(float(np.sum(f_local_vec(ctx))) - total) < 1e-12


def test_f_local_single_community():
    for y, want in ((1, 0.6), (0, 0.4)):
        ctx = _ctx(y, [1.0], [1.0], [0.6], 0.1)
        assert abs(f_local(ctx, 0) - want) < 1e-15


def test_f_local_zero_factor():
    # certain link, none observed, same community
    ctx = _ctx(0, [0.5, 0.5], [0.0, 1.0], [0.3, 1.0], 0.1)
    assert f_local(ctx, 1) == 0.0


def test_pair_likelihood_single_community():
    ctx = _ctx(1, [1.0], [1.0], [0.7], 0.1)
    assert abs(pair_likelihood(ctx) - 0.7) < 1e-15


def test_pair_likelihood_matches_enumeration(rng):
    for _ in range(100):
        ctx = random_ctx(rng, k=3)
        assert abs(pair_likelihood(ctx) - brute_force_z(ctx)) < 1e-12


def test_pair_likelihood_bernoulli_normalization(rng):
    for _ in range(100):
        base = random_ctx(rng)
        p1 = pair_likelihood(_ctx(1, base.pi_a, base.pi_b, base.beta, base.delta))
        p0 = pair_likelihood(_ctx(0, base.pi_a, base.pi_b, base.beta, base.delta))
        assert abs(p1 + p0 - 1.0) < 1e-12


@given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=10_000), st.integers(min_value=0, max_value=1))
def test_kernel_identities_property(k, seed, y):
    ctx = random_ctx(np.random.default_rng(seed), k=k, y=y)
    z = z_norm(ctx)
    assert z > 0
    assert abs(z - brute_force_z(ctx)) < 1e-12
    assert abs(float(np.sum(f_local_vec(ctx))) - z) < 1e-12
    assert np.all(f_local_vec(ctx) >= 0)
