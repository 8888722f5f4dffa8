"""Synchronous simulations of EXTRA and bundle EXTRA.

All iterates are ``n x d`` stacks whose row ``i`` belongs to agent ``i``.
Mixing is applied as ``Wt @ x``; since ``Wt`` carries the graph's
sparsity pattern, row ``i`` of the product only combines rows of agents in
``N_i + {i}``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import metrics as mt
from .bundle import CutBank, ModelKind
from .mixing import MixingPair
from .problem import Problem, global_optimum_least_squares, LeastSquaresOracle
from .subsolver import DEFAULT_TOL, solve_batch

DIVERGENCE_FACTOR = 1e12


class Algorithm(str, Enum):
    EXTRA = "extra"
    BUNDLE_EXTRA = "bundle_extra"


@dataclass
class RunState:
    x: np.ndarray
    q: np.ndarray | None = None
    k: int = 0
    bank: CutBank | None = None
    prev_x: np.ndarray | None = None
    prev_grad: np.ndarray | None = None
    inner_iters: int = 0
    inner_unconverged: int = 0


def initial_dual(x0, Wt, alpha: float) -> np.ndarray:
    """``q0 = (I - Wt) x0 / alpha``."""
    return (x0 - Wt @ x0) / alpha


def init_state(x0, Wt, alpha: float) -> RunState:
    x0 = np.array(x0, dtype=float)
    return RunState(x=x0, q=initial_dual(x0, Wt, alpha))


def _grad(grad_oracle, x):
    return grad_oracle.gradient(x) if hasattr(grad_oracle, "gradient") else grad_oracle(x)


def extra_recursion_step(state: RunState, W, Wt, alpha: float, grad_oracle) -> RunState:
    """One step of the two-term EXTRA recursion.

    ``x1 = W x0 - alpha grad f(x0)`` and afterwards
    ``x_{k+1} = 2 Wt x_k - Wt x_{k-1} - alpha (grad f(x_k) - grad f(x_{k-1}))``.
    """
    g = _grad(grad_oracle, state.x)
    if state.k == 0:
        x_new = W @ state.x - alpha * g
    else:
        x_new = 2 * (Wt @ state.x) - Wt @ state.prev_x - alpha * (g - state.prev_grad)
    return replace(state, x=x_new, k=state.k + 1, prev_x=state.x, prev_grad=g)


def extra_primal_dual_step(state: RunState, Wt, alpha: float, grad_oracle, grad=None) -> RunState:
    """EXTRA as a primal-dual iteration.

    The linearized primal subproblem has the closed form
    ``x_{k+1} = Wt x_k - alpha (grad f(x_k) + q_k)``; the dual then moves
    by ``(I - Wt) x_{k+1} / alpha``.
    """
    g = _grad(grad_oracle, state.x) if grad is None else grad
    x_new = Wt @ state.x - alpha * (g + state.q)
    q_new = state.q + (x_new - Wt @ x_new) / alpha
    return replace(state, x=x_new, q=q_new, k=state.k + 1)


def bundle_extra_step(
    state: RunState,
    Wt,
    alpha: float,
    problem: Problem,
    kind=ModelKind.CUTTING_PLANE,
    window: int = 0,
    inner_tol: float = DEFAULT_TOL,
    max_inner: int = 10_000,
    values=None,
    grads=None,
    pool: ThreadPoolExecutor | None = None,
) -> RunState:
    """One round of bundle EXTRA.

    Each agent first adds the cut at its current iterate to its model,
    then minimizes ``model + <q_i, x> + ||x - sum_j wt_ij x_j||^2 / (2 alpha)``
    through the simplex dual, and finally updates its dual variable from
    the freshly published neighbor iterates.
    """
    x, q = state.x, state.q
    if values is None or grads is None:
        values, grads = problem.values_and_gradients(x)

    bank = state.bank
    if bank is None:
        kind = ModelKind(kind)
        floors = problem.lower_bounds() if kind.uses_floor else None
        bank = CutBank(x.shape[0], problem.dim, kind, window, floors)
    bank = bank.update(x, values, grads)

    centers = Wt @ x - alpha * q
    G, r, active = bank.prox_data(centers)
    lam, _, iters = solve_batch(G, r, active, alpha, bank.lam, inner_tol, max_inner, pool)
    bank.lam = lam
    x_new = centers - alpha * bank.combine(lam)
    q_new = q + (x_new - Wt @ x_new) / alpha
    return replace(
        state,
        x=x_new,
        q=q_new,
        k=state.k + 1,
        bank=bank,
        inner_iters=int(iters.sum()),
        inner_unconverged=int(np.count_nonzero(iters >= max_inner)),
    )


@dataclass
class RunConfig:
    """Everything needed to reproduce one run.

    ``x0`` is ``"zeros"``, ``"random"`` (standard normal drawn from
    ``seed``) or an explicit ``n x d`` array. ``stop_tol`` ends the run
    early once ``rel_error <= stop_tol``; ``None`` runs all iterations.
    """

    problem: Problem
    mixing: MixingPair
    alpha: float
    algorithm: Algorithm = Algorithm.EXTRA
    model_kind: ModelKind = ModelKind.CUTTING_PLANE
    window: int = 0
    max_iters: int = 1000
    inner_tol: float = DEFAULT_TOL
    max_inner_iters: int = 10_000
    seed: int = 0
    x0: object = "zeros"
    stop_tol: float | None = None
    threads: int = 1

    def __post_init__(self):
        self.algorithm = Algorithm(self.algorithm)
        self.model_kind = ModelKind(self.model_kind)
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if self.mixing.n != self.problem.n:
            raise ValueError("mixing matrix size does not match the number of agents")

    def initial_point(self) -> np.ndarray:
        n, d = self.problem.n, self.problem.dim
        if isinstance(self.x0, str):
            if self.x0 == "zeros":
                return np.zeros((n, d))
            if self.x0 == "random":
                return np.random.default_rng(self.seed).standard_normal((n, d))
            raise ValueError(f"unknown x0 rule {self.x0!r}")
        x0 = np.array(self.x0, dtype=float)
        if x0.shape != (n, d):
            raise ValueError(f"x0 has shape {x0.shape}, expected {(n, d)}")
        return x0


@dataclass
class RunResult:
    config: RunConfig
    trajectory: list = field(default_factory=list)
    state: RunState | None = None
    diverged: bool = False
    bound: float = math.nan
    x_star: np.ndarray | None = None

    @property
    def completed_iters(self) -> int:
        return self.trajectory[-1].k if self.trajectory else 0

    def iters_to_tol(self, tol: float):
        """First iteration with ``rel_error <= tol``, or ``None``."""
        for m in self.trajectory:
            if m.rel_error <= tol:
                return m.k
        return None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(m, name) for m in self.trajectory])


def reference_optimum(problem: Problem) -> np.ndarray:
    if problem.reference_optimum is None:
        if not all(isinstance(o, LeastSquaresOracle) for o in problem.oracles):
            raise ValueError("problem has no reference optimum to measure against")
        problem.reference_optimum = global_optimum_least_squares(problem)
    return problem.reference_optimum


def run(config: RunConfig) -> RunResult:
    """Iterate the configured algorithm, recording metrics at every ``k``.

    Row ``k`` of the trajectory describes ``x^k``; ``k = 0`` is the initial
    point. A non-finite iterate or one whose norm exceeds
    ``DIVERGENCE_FACTOR`` times the initial scale halts the run with
    ``diverged=True``.
    """
    prob, Wt, alpha = config.problem, config.mixing.Wt, config.alpha
    n = prob.n
    x_star = reference_optimum(prob)
    X_star = mt.stack_optimum(x_star, n)
    q_star = mt.optimal_dual(prob, x_star, n)
    inv_alpha, inv_L = 1.0 / alpha, 1.0 / prob.L

    state = init_state(config.initial_point(), Wt, alpha)
    result = RunResult(config, state=state, x_star=x_star)
    result.bound = mt.theorem1_bound(state.x, state.q, x_star, Wt, alpha, prob)
    scale = max(np.linalg.norm(state.x), np.linalg.norm(X_star), 1.0)

    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    cumulative = 0.0
    inner_total = 0
    # overflow on the way to divergence is expected and caught by the norm test
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            while True:
                x = state.x
                values, grads = prob.values_and_gradients(x)
                if not (np.all(np.isfinite(x)) and np.all(np.isfinite(grads))) or (
                    np.linalg.norm(x) > DIVERGENCE_FACTOR * scale
                ):
                    result.diverged = True
                    break
                cons = mt.consensus_residual(x, Wt)
                gres = mt.grad_residual_from(grads, q_star)
                if state.k >= 1:
                    cumulative += inv_alpha * cons + inv_L * gres
                inner_total += state.inner_iters
                rel = mt.relative_error(x, X_star)
                result.trajectory.append(
                    mt.IterationMetrics(
                        k=state.k,
                        consensus_residual=cons,
                        grad_residual=gres,
                        rel_error=rel,
                        dual_mean_norm=float(np.linalg.norm(state.q.sum(axis=0))),
                        cumulative_kkt_sum=cumulative,
                        inner_iters_total=inner_total,
                    )
                )
                if state.k >= config.max_iters:
                    break
                if config.stop_tol is not None and rel <= config.stop_tol:
                    break
                if config.algorithm == Algorithm.EXTRA:
                    state = extra_primal_dual_step(state, Wt, alpha, prob, grad=grads)
                else:
                    state = bundle_extra_step(
                        state, Wt, alpha, prob, config.model_kind, config.window,
                        config.inner_tol, config.max_inner_iters, values, grads, pool,
                    )
                    if state.inner_unconverged:
                        warnings.warn(
                            f"round {state.k}: {state.inner_unconverged} inner solves hit the iteration cap",
                            RuntimeWarning,
                            stacklevel=2,
                        )
        finally:
            if pool is not None:
                pool.shutdown()
    result.state = state
    return result
