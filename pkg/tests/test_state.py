import numpy as np
import pytest

from ammsb.state import (
    HyperParams,
    ModelState,
    StepSchedule,
    init_state,
    load_checkpoint,
    save_checkpoint,
    step_size,
)


def test_init_positive_and_simplex(rng):
    hp = HyperParams(K=5, alpha=0.2, eta=1.0)
    st = init_state(hp, 30, rng)
    assert np.all(st.phi > 0) and np.all(st.theta > 0)
    assert np.allclose(st.pi().sum(axis=1), 1.0, atol=1e-12)
    beta = st.beta()
    assert np.all((beta > 0) & (beta < 1))


def test_init_mean_matches_gamma_prior(rng):
    hp = HyperParams(K=8, alpha=0.7, eta=1.0)
    draws = np.concatenate([init_state(hp, 40, rng).phi.ravel() for _ in range(30)])
    se = draws.std() / np.sqrt(len(draws))
    assert abs(draws.mean() - hp.alpha) < 4 * se


def test_init_deterministic():
    hp = HyperParams(K=3, alpha=0.5, eta=1.0)
    a = init_state(hp, 10, np.random.default_rng(5))
    b = init_state(hp, 10, np.random.default_rng(5))
    assert np.array_equal(a.phi, b.phi) and np.array_equal(a.theta, b.theta)


def test_derived_views_are_pure(rng):
    hp = HyperParams(K=4, alpha=0.5, eta=1.0)
    st = init_state(hp, 6, rng)
    assert np.array_equal(st.pi(), st.pi())
    assert np.array_equal(st.beta(), st.beta())


def test_step_size_decaying_reference_point():
    s = StepSchedule(tau0=1024.0, kappa=0.5)
    assert step_size(s, 0) == 0.03125
    assert step_size(s, 10) == (1034.0) ** -0.5


def test_step_size_fixed_mode():
    s = StepSchedule(fixed=0.01)
    assert all(step_size(s, t) == 0.01 for t in (0, 1, 1000))


def test_step_size_zero_offset_guard():
    s = StepSchedule(tau0=0.0, kappa=0.5)
    with pytest.raises(ValueError):
        step_size(s, 0)
    assert step_size(s, 4) == 0.5


def test_schedule_validation():
    with pytest.raises(ValueError):
        StepSchedule(kappa=0.0)
    with pytest.raises(ValueError):
        StepSchedule(kappa=1.5)
    with pytest.raises(ValueError):
        StepSchedule(fixed=-1.0)
    with pytest.raises(ValueError):
        HyperParams(K=0, alpha=1.0, eta=1.0)
    with pytest.raises(ValueError):
        HyperParams(K=2, alpha=1.0, eta=1.0, delta=1.0)


def test_checkpoint_roundtrip_bit_faithful(tmp_path, rng):
    hp = HyperParams(K=4, alpha=1 / 3, eta=0.9)
    st = init_state(hp, 12, rng)
    path = tmp_path / "ck.txt"
    save_checkpoint(st, path)
    back = load_checkpoint(path)
    assert np.array_equal(st.phi, back.phi)
    assert np.array_equal(st.theta, back.theta)


def test_checkpoint_rejects_garbage(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("not-a-checkpoint 1 2 3\n")
    with pytest.raises(ValueError, match="not a checkpoint"):
        load_checkpoint(p)
    p.write_text("ammsb-checkpoint v9 1 1\n1.0\n1.0 1.0\n")
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(p)
