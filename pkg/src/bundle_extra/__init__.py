"""Decentralized consensus optimization with EXTRA and bundle EXTRA."""

from .algorithms import (
    Algorithm,
    RunConfig,
    RunResult,
    RunState,
    bundle_extra_step,
    extra_primal_dual_step,
    extra_recursion_step,
    init_state,
    initial_dual,
    run,
)
from .bundle import Cut, CutSet, ModelKind, evaluate, subgradient, update_model
from .graph import Graph, is_connected, neighbors, random_connected_graph
from .metrics import kkt_residuals, rate_statistics, theorem1_bound
from .mixing import MixingPair, laplacian_weights, make_pair, metropolis_weights, validate_assumption4
from .problem import LeastSquaresOracle, Problem, global_optimum_least_squares, least_squares_instance
from .subsolver import ProxPWLInstance, ProxPWLSolution, project_simplex, solve

__version__ = "0.1.0"
