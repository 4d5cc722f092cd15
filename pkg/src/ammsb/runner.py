"""Experiment harness: data handling, the sampling loop, traces, checkpoints.

Each iteration follows the same order for every Langevin variant: draw one
stratified edge batch, give every node that appears in it a local update
against parameters frozen at phase start, then update a random subset of
the community strengths from the same batch.  Local updates for distinct
nodes write disjoint rows and may run on a thread pool; per-(iteration,
node) random streams and a serial application phase make the result
independent of the thread count.
"""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ammsb.baselines import (
    AssignmentState,
    cgs_estimate_params,
    cgs_sweep,
    init_cgs,
    lmc_step,
    training_pairs,
)
from ammsb.config import ConfigError, RunConfig, parse_config, validate_config
from ammsb.evaluate import (
    PerplexityAccumulator,
    TraceWriter,
    absorb_sample,
    nmi,
    perplexity,
    trivial_perplexity,
)
from ammsb.graph import (
    Graph,
    generate_ammsb,
    load_edge_list,
    save_edge_list,
    split_heldout,
)
from ammsb.minibatch import sample_edge_strata, sample_node_batch, sample_uniform_node_batch
from ammsb.rng import (
    DOM_DATA,
    DOM_EDGE,
    DOM_GLOBAL,
    DOM_INIT,
    DOM_NODE,
    DOM_SPLIT,
    NoiseField,
    substream,
)
from ammsb.sampler_global import theta_responsibilities, theta_step
from ammsb.sampler_local import dense_view, row_update_values
from ammsb.sparse import SparseRow, build_sparse_state, promote_demote, sample_bulk_batch
from ammsb.state import (
    HyperParams,
    ModelState,
    StepSchedule,
    init_state,
    load_checkpoint,
    save_checkpoint,
    step_size,
)

logger = logging.getLogger(__name__)

DOM_PROMOTE = 9

TRUTH_SUFFIX = ".truth.txt"


class _LangevinRunner:
    """Shared loop machinery for the dense and sparse stochastic samplers."""

    def __init__(self, cfg: RunConfig, graph: Graph, heldout):
        self.cfg = cfg
        self.graph = graph
        self.heldout = heldout
        self.hp = HyperParams(K=cfg.K, alpha=cfg.resolved_alpha(), eta=cfg.eta, delta=cfg.delta)
        self.schedule = StepSchedule(tau0=cfg.tau0, kappa=cfg.kappa, fixed=cfg.fixed_step)
        self.noise = NoiseField(cfg.seed)
        self.m = cfg.resolved_m(graph.num_nodes)
        self.subset_size = max(1, round(cfg.resolved_fraction() * cfg.K))
        self._pool = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()

    # row access, overridden per representation
    def view(self, a):
        raise NotImplementedError

    def theta(self) -> np.ndarray:
        raise NotImplementedError

    def sample_bulk(self, a, rng):
        return None

    def apply(self, a, result, t):
        raise NotImplementedError

    def _node_context(self, a: int, t: int):
        rng = substream(self.cfg.seed, DOM_NODE, t, a)
        if self.cfg.local_sampling == "uniform":
            nb = sample_uniform_node_batch(self.graph, a, self.cfg.n1 + self.cfg.n0, rng, self.heldout)
        else:
            nb = sample_node_batch(self.graph, a, self.cfg.n1, self.cfg.n0, rng, self.heldout)
        return nb, self.sample_bulk(a, rng)

    def iterate(self, t: int) -> None:
        cfg = self.cfg
        eps = step_size(self.schedule, t)
        batch = sample_edge_strata(self.graph, self.m, self.heldout, substream(cfg.seed, DOM_EDGE, t))
        nodes = sorted({int(v) for pair in batch.pairs for v in pair})
        contexts = {a: self._node_context(a, t) for a in nodes}

        needed = set(nodes)
        for nb, _ in contexts.values():
            needed.update(int(b) for b in nb.v1)
            needed.update(int(b) for b in nb.v0)
        views = {b: self.view(b) for b in sorted(needed)}
        beta = self._beta()
        alpha = self.hp.alpha
        delta = self.hp.delta

        def compute(a):
            nb, bulk_ids = contexts[a]
            return row_update_values(
                views[a], nb, views, beta, delta, alpha, eps, self.noise, t, a, bulk_ids
            )

        if self._pool is not None:
            results = list(self._pool.map(compute, nodes))
        else:
            results = [compute(a) for a in nodes]
        for a, result in zip(nodes, results):
            self.apply(a, result, t)

        grng = substream(cfg.seed, DOM_GLOBAL, t)
        subset = np.sort(grng.choice(cfg.K, size=self.subset_size, replace=False))
        pivot_bulk = self.sample_bulk(batch.pivot, grng)
        gviews = {v: self.view(v) for v in nodes}
        R = theta_responsibilities(gviews, batch, beta, delta, subset, pivot_bulk)
        new_theta = theta_step(
            self.theta(), R, subset, batch.y, batch.scale, self.hp.eta, eps, self.noise, t
        )
        self._set_theta(new_theta)

    def _beta(self) -> np.ndarray:
        th = self.theta()
        return th[:, 1] / (th[:, 0] + th[:, 1])

    def _set_theta(self, theta):
        raise NotImplementedError

    # reporting hooks
    def posterior(self):
        raise NotImplementedError

    def mem_ratio(self):
        return None

    def accept_rate(self):
        return None

    def checkpoint_state(self) -> ModelState:
        raise NotImplementedError


class DenseSGMC(_LangevinRunner):
    def __init__(self, cfg, graph, heldout, state: ModelState):
        super().__init__(cfg, graph, heldout)
        self.state = state

    def view(self, a):
        return dense_view(self.state.phi, a)

    def theta(self):
        return self.state.theta

    def _set_theta(self, theta):
        self.state.theta = theta

    def apply(self, a, result, t):
        new_vals, _ = result
        self.state.phi[a] = new_vals

    def posterior(self):
        return self.state.pi(), self.state.beta()

    def checkpoint_state(self):
        return self.state


class SparseSGMC(_LangevinRunner):
    def __init__(self, cfg, graph, heldout, state: ModelState):
        super().__init__(cfg, graph, heldout)
        self.sparse = build_sparse_state(state.phi, cfg.tau, graph)
        self._theta = state.theta

    def view(self, a):
        return self.sparse.rows[a].view()

    def theta(self):
        return self._theta

    def _set_theta(self, theta):
        self._theta = theta

    def sample_bulk(self, a, rng):
        return sample_bulk_batch(self.sparse.rows[a], self.cfg.bulk_batch, rng)

    def apply(self, a, result, t):
        new_vals, new_bulk = result
        old = self.sparse.rows[a]
        self.sparse.rows[a] = SparseRow(old.K, old.ids, new_vals, old.active, new_bulk)
        neighbor_active = self.sparse.neighbor_active(self.graph, a)
        promote_demote(
            self.sparse,
            a,
            self.cfg.tau,
            neighbor_active,
            substream(self.cfg.seed, DOM_PROMOTE, t, a),
        )

    def posterior(self):
        return self.sparse.pi_dense(), self._beta()

    def mem_ratio(self):
        return float(np.mean(self.sparse.memory_ratios()))

    def checkpoint_state(self):
        phi = np.empty((self.sparse.n_nodes, self.cfg.K))
        for a, row in enumerate(self.sparse.rows):
            phi[a] = row.dense_phi()
        return ModelState(phi=phi, theta=self._theta)


class CgsRunner:
    def __init__(self, cfg: RunConfig, graph: Graph, heldout):
        self.cfg = cfg
        self.hp = HyperParams(K=cfg.K, alpha=cfg.resolved_alpha(), eta=cfg.eta, delta=cfg.delta)
        self.state = init_cgs(graph, self.hp, substream(cfg.seed, DOM_INIT), heldout)

    def iterate(self, t: int) -> None:
        cgs_sweep(self.state, self.hp, substream(self.cfg.seed, DOM_EDGE, t))

    def posterior(self):
        return cgs_estimate_params(self.state, self.hp)

    def mem_ratio(self):
        return None

    def accept_rate(self):
        return None

    def checkpoint_state(self):
        phi = self.state.n + self.hp.alpha
        theta = np.column_stack([self.state.s0 + self.hp.eta, self.state.s1 + self.hp.eta])
        return ModelState(phi=phi.astype(float), theta=theta.astype(float))

    def close(self):
        pass


class LmcRunner:
    def __init__(self, cfg: RunConfig, graph: Graph, heldout, state: ModelState):
        self.cfg = cfg
        self.hp = HyperParams(K=cfg.K, alpha=cfg.resolved_alpha(), eta=cfg.eta, delta=cfg.delta)
        self.schedule = StepSchedule(tau0=cfg.tau0, kappa=cfg.kappa, fixed=cfg.fixed_step)
        self.pairs = training_pairs(graph, heldout)
        self.state = state
        self.accepted = 0
        self.steps = 0

    def iterate(self, t: int) -> None:
        eps = step_size(self.schedule, t)
        self.state, ok = lmc_step(self.state, self.pairs, self.hp, eps, substream(self.cfg.seed, DOM_EDGE, t))
        self.steps += 1
        self.accepted += int(ok)

    def posterior(self):
        return self.state.pi(), self.state.beta()

    def mem_ratio(self):
        return None

    def accept_rate(self):
        return self.accepted / self.steps if self.steps else 0.0

    def checkpoint_state(self):
        return self.state

    def close(self):
        pass


def _initial_state(cfg: RunConfig, n_nodes: int) -> ModelState:
    if cfg.resume:
        state = load_checkpoint(cfg.resume)
        if state.n_nodes != n_nodes or state.K != cfg.K:
            raise ConfigError(
                f"checkpoint {cfg.resume} has shape ({state.n_nodes}, {state.K}), "
                f"run needs ({n_nodes}, {cfg.K})"
            )
        return state
    hp = HyperParams(K=cfg.K, alpha=cfg.resolved_alpha(), eta=cfg.eta, delta=cfg.delta)
    return init_state(hp, n_nodes, substream(cfg.seed, DOM_INIT))


def build_runner(cfg: RunConfig, graph: Graph, heldout):
    if cfg.algorithm == "sgmc":
        return DenseSGMC(cfg, graph, heldout, _initial_state(cfg, graph.num_nodes))
    if cfg.algorithm == "sgmc-m":
        return SparseSGMC(cfg, graph, heldout, _initial_state(cfg, graph.num_nodes))
    if cfg.algorithm == "cgs":
        if cfg.resume:
            raise ConfigError("resume is only supported for sgmc and sgmc-m")
        return CgsRunner(cfg, graph, heldout)
    if cfg.algorithm == "lmc":
        if cfg.resume:
            raise ConfigError("resume is only supported for sgmc and sgmc-m")
        return LmcRunner(cfg, graph, heldout, _initial_state(cfg, graph.num_nodes))
    raise ConfigError(f"unknown algorithm {cfg.algorithm}")


@dataclass
class RunResult:
    final_perplexity: float
    trivial_perplexity: float
    sampling_seconds: float
    iterations: int
    mem_ratio: float | None
    accept_rate: float | None
    nmi: float | None
    trace_path: str
    checkpoint_path: str


def run_experiment(cfg) -> RunResult:
    """Execute a configured run and write trace, checkpoint and summary."""
    if not isinstance(cfg, RunConfig):
        cfg = parse_config(cfg)
    else:
        validate_config(cfg)
    if not cfg.dataset:
        raise ConfigError("config key 'dataset' is required for run")
    if not os.path.exists(cfg.dataset):
        raise ConfigError(f"dataset not found: {cfg.dataset}")

    full_graph = load_edge_list(cfg.dataset)
    training, heldout = split_heldout(full_graph, cfg.heldout_fraction, substream(cfg.seed, DOM_SPLIT))
    runner = build_runner(cfg, training, heldout)

    os.makedirs(cfg.out_dir, exist_ok=True)
    trace_path = os.path.join(cfg.out_dir, "trace.csv")
    ckpt_path = os.path.join(cfg.out_dir, "checkpoint.txt")

    acc = PerplexityAccumulator(len(heldout.pairs))
    sampling_seconds = 0.0
    final_perp = math.nan
    start = cfg.resume_iter
    try:
        with TraceWriter(trace_path) as trace:
            for t in range(start, start + cfg.max_iters):
                t0 = time.perf_counter()
                runner.iterate(t)
                sampling_seconds += time.perf_counter() - t0
                done = t + 1
                if done % cfg.eval_interval == 0 and done > cfg.burn_in:
                    pi, beta = runner.posterior()
                    absorb_sample(acc, heldout, pi, beta, cfg.delta)
                    final_perp = perplexity(acc)
                    ratio = runner.mem_ratio()
                    trace.write(done, sampling_seconds, final_perp, ratio, runner.accept_rate())
                    if ratio is not None:
                        ratios = runner.sparse.memory_ratios()
                        logger.info(
                            "iter %d: explicit-share mean %.4f max %.4f",
                            done,
                            float(np.mean(ratios)),
                            float(np.max(ratios)),
                        )
    finally:
        runner.close()
    if acc.T == 0:
        raise ConfigError(
            "no posterior samples absorbed; lower burn_in/eval_interval or raise max_iters"
        )

    save_checkpoint(runner.checkpoint_state(), ckpt_path)

    truth_nmi = None
    truth_path = cfg.dataset + TRUTH_SUFFIX
    if os.path.exists(truth_path):
        true_pi, _ = load_ground_truth(truth_path)
        if len(true_pi) == training.num_nodes:
            pi, _ = runner.posterior()
            truth_nmi = nmi(np.argmax(true_pi, axis=1), np.argmax(pi, axis=1))

    result = RunResult(
        final_perplexity=final_perp,
        trivial_perplexity=trivial_perplexity(training, heldout),
        sampling_seconds=sampling_seconds,
        iterations=cfg.max_iters,
        mem_ratio=runner.mem_ratio(),
        accept_rate=runner.accept_rate(),
        nmi=truth_nmi,
        trace_path=trace_path,
        checkpoint_path=ckpt_path,
    )
    _write_summary(os.path.join(cfg.out_dir, "summary.txt"), result)
    return result


def _write_summary(path, result: RunResult) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"final_perplexity = {result.final_perplexity:.6f}\n")
        fh.write(f"trivial_perplexity = {result.trivial_perplexity:.6f}\n")
        fh.write(f"runtime_seconds = {result.sampling_seconds:.3f}\n")
        fh.write(f"iterations = {result.iterations}\n")
        if result.mem_ratio is not None:
            fh.write(f"mem_ratio = {result.mem_ratio:.6f}\n")
        if result.accept_rate is not None:
            fh.write(f"accept_rate = {result.accept_rate:.6f}\n")
        if result.nmi is not None:
            fh.write(f"nmi = {result.nmi:.6f}\n")


def make_synthetic(cfg) -> tuple:
    """Write a synthetic dataset plus its generating parameters to disk."""
    if not isinstance(cfg, RunConfig):
        cfg = parse_config(cfg)
    if not cfg.dataset:
        raise ConfigError("config key 'dataset' must name the output edge-list path")
    rng = substream(cfg.seed, DOM_DATA)
    g, truth = generate_ammsb(
        cfg.n_nodes, cfg.K, cfg.resolved_alpha(), cfg.eta, cfg.delta, rng
    )
    out_dir = os.path.dirname(cfg.dataset)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    save_edge_list(g, cfg.dataset)
    truth_path = cfg.dataset + TRUTH_SUFFIX
    save_ground_truth(truth.pi, truth.beta, truth_path)
    logger.info(
        "synthetic dataset: %d nodes, %d links (density %.3f)",
        g.num_nodes,
        g.num_links,
        g.density(),
    )
    return cfg.dataset, truth_path


def save_ground_truth(pi, beta, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"ammsb-truth v1 {len(pi)} {len(beta)}\n")
        fh.write(" ".join(f"{b:.17g}" for b in beta) + "\n")
        for row in pi:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_ground_truth(path):
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "ammsb-truth":
            raise ValueError(f"{path}: not a ground-truth file")
        n, k = int(header[2]), int(header[3])
        beta = np.asarray([float(v) for v in fh.readline().split()])
        pi = np.empty((n, k))
        for i in range(n):
            pi[i] = [float(v) for v in fh.readline().split()]
    return pi, beta
