"""Sampler state: unnormalized parameters, hyperparameters, step schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Positivity floor shared by all update rules.  The gradients contain 1/phi
# and 1/theta, so exact zeros (possible in floating point after reflection)
# are clamped here.
VALUE_FLOOR = 1e-12

CHECKPOINT_MAGIC = "ammsb-checkpoint"
CHECKPOINT_VERSION = "v1"


@dataclass(frozen=True)
class HyperParams:
    """Model hyperparameters; delta defaults to a near-zero background rate."""

    K: int
    alpha: float
    eta: float
    delta: float = 1e-7

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.alpha <= 0 or self.eta <= 0:
            raise ValueError("alpha and eta must be positive")
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must be in (0, 1)")


@dataclass
class ModelState:
    """Unnormalized sampler state.

    phi is (N, K), theta is (K, 2); all entries strictly positive.  The
    simplex parameters are derived views: pi normalizes phi rows, beta is
    theta[:,1] / (theta[:,0] + theta[:,1]).  Rows of phi may be written
    concurrently by distinct-node updates; theta has a single writer.
    """

    phi: np.ndarray
    theta: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.phi.shape[0]

    @property
    def K(self) -> int:
        return self.phi.shape[1]

    def pi(self) -> np.ndarray:
        return self.phi / np.sum(self.phi, axis=1, keepdims=True)

    def beta(self) -> np.ndarray:
        return self.theta[:, 1] / (self.theta[:, 0] + self.theta[:, 1])

    def copy(self) -> "ModelState":
        return ModelState(phi=self.phi.copy(), theta=self.theta.copy())


@dataclass(frozen=True)
class StepSchedule:
    """Step size eps_t = (tau0 + t)^(-kappa), or a constant in fixed mode.

    kappa in (0.5, 1] gives the summability pair sum(eps) = inf,
    sum(eps^2) < inf; kappa = 0.5 (the experimental default) sits on the
    boundary and is allowed.
    """

    tau0: float = 1024.0
    kappa: float = 0.5
    fixed: float | None = None

    def __post_init__(self):
        if self.fixed is not None:
            if self.fixed <= 0:
                raise ValueError("fixed step size must be positive")
            return
        if self.tau0 < 0:
            raise ValueError("tau0 must be >= 0")
        if not (0.0 < self.kappa <= 1.0):
            raise ValueError("kappa must be in (0, 1]")


def step_size(schedule: StepSchedule, t: int) -> float:
    if t < 0:
        raise ValueError("t must be >= 0")
    if schedule.fixed is not None:
        return schedule.fixed
    base = schedule.tau0 + t
    if base <= 0:
        raise ValueError("tau0 + t must be positive in decaying mode")
    return float(base ** (-schedule.kappa))


def init_state(hp: HyperParams, n_nodes: int, rng: np.random.Generator) -> ModelState:
    """Gamma-prior initialization: phi ~ Gamma(alpha, 1), theta ~ Gamma(eta, 1)."""
    phi = rng.gamma(hp.alpha, 1.0, size=(n_nodes, hp.K))
    theta = rng.gamma(hp.eta, 1.0, size=(hp.K, 2))
    np.maximum(phi, VALUE_FLOOR, out=phi)
    np.maximum(theta, VALUE_FLOOR, out=theta)
    return ModelState(phi=phi, theta=theta)


def save_checkpoint(state: ModelState, path) -> None:
    """Plain-text checkpoint, >= 17 significant digits for faithful resume."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION} {state.n_nodes} {state.K}\n")
        for row in state.phi:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
        for row in state.theta:
            fh.write(f"{row[0]:.17g} {row[1]:.17g}\n")


def load_checkpoint(path) -> ModelState:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        if header[1] != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header[1]}")
        n, k = int(header[2]), int(header[3])
        phi = np.empty((n, k))
        for i in range(n):
            vals = fh.readline().split()
            if len(vals) != k:
                raise ValueError(f"{path}: truncated phi row {i}")
            phi[i] = [float(v) for v in vals]
        theta = np.empty((k, 2))
        for i in range(k):
            vals = fh.readline().split()
            if len(vals) != 2:
                raise ValueError(f"{path}: truncated theta row {i}")
            theta[i] = [float(v) for v in vals]
    if np.any(phi <= 0) or np.any(theta <= 0):
        raise ValueError(f"{path}: non-positive entries")
    return ModelState(phi=phi, theta=theta)
