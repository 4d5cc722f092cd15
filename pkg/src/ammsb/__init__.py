"""MCMC for assortative mixed-membership stochastic blockmodels.

Stochastic-gradient Riemannian Langevin samplers (dense and sparse large-K
variants), exact batch baselines (collapsed Gibbs, Langevin Monte Carlo with
MH correction), synthetic graph generation and held-out perplexity
evaluation.
"""

from ammsb.graph import Graph, GroundTruth, HeldOutSplit, generate_ammsb, load_edge_list, split_heldout
from ammsb.state import HyperParams, ModelState, StepSchedule, init_state, step_size
from ammsb.kernels import PairContext, f_local, f_pair, pair_likelihood, z_norm

__all__ = [
    "Graph",
    "GroundTruth",
    "HeldOutSplit",
    "generate_ammsb",
    "load_edge_list",
    "split_heldout",
    "HyperParams",
    "ModelState",
    "StepSchedule",
    "init_state",
    "step_size",
    "PairContext",
    "f_pair",
    "z_norm",
    "f_local",
    "pair_likelihood",
]
