"""Per-agent smooth convex objectives and the stacked consensus objective."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


class ObjectiveOracle:
    """Smooth convex local objective ``f_i``.

    Subclasses provide :meth:`value` and :meth:`gradient`; ``smoothness``
    is a Lipschitz constant of the gradient and ``lower_bound`` a known
    lower bound on ``min f_i`` (``-inf`` when none is known).
    """

    dim: int
    smoothness: float
    lower_bound: float = -np.inf

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def value_and_gradient(self, x):
        return self.value(x), self.gradient(x)


class LeastSquaresOracle(ObjectiveOracle):
    """``f(x) = ||P x - q||^2 / (2 n)``."""

    def __init__(self, P, q, n_agents: int = 1):
        self.P = np.atleast_2d(np.asarray(P, dtype=float))
        self.q = np.asarray(q, dtype=float).reshape(-1)
        if self.P.shape[0] != self.q.shape[0]:
            raise ValueError(f"P has {self.P.shape[0]} rows but q has {self.q.shape[0]}")
        self.scale = 1.0 / n_agents
        self.dim = self.P.shape[1]
        top = np.linalg.eigvalsh(self.P.T @ self.P)[-1] if self.P.size else 0.0
        self.smoothness = float(max(top, 0.0) * self.scale)
        self.lower_bound = 0.0

    def value(self, x):
        r = self.P @ x - self.q
        return 0.5 * self.scale * float(r @ r)

    def gradient(self, x):
        return self.scale * (self.P.T @ (self.P @ x - self.q))

    def value_and_gradient(self, x):
        r = self.P @ x - self.q
        return 0.5 * self.scale * float(r @ r), self.scale * (self.P.T @ r)


@dataclass
class Problem:
    """Consensus problem ``min sum_i f_i(x_i)`` s.t. ``x_1 = ... = x_n``."""

    oracles: list
    reference_optimum: np.ndarray | None = None

    def __post_init__(self):
        dims = {o.dim for o in self.oracles}
        if len(dims) != 1:
            raise ValueError(f"oracles disagree on dimension: {sorted(dims)}")

    @property
    def n(self) -> int:
        return len(self.oracles)

    @property
    def dim(self) -> int:
        return self.oracles[0].dim

    @property
    def L(self) -> float:
        return smoothness_constant(self)

    def lower_bounds(self) -> np.ndarray:
        return np.array([o.lower_bound for o in self.oracles])

    def values(self, X) -> np.ndarray:
        return np.array([o.value(x) for o, x in zip(self.oracles, X)])

    def value(self, X) -> float:
        return float(self.values(X).sum())

    def gradient(self, X) -> np.ndarray:
        """Stacked gradient: row ``i`` is ``grad f_i(X[i])``."""
        if self._stacked_ls():
            return self.values_and_gradients(X)[1]
        return np.stack([o.gradient(x) for o, x in zip(self.oracles, X)])

    def _stacked_ls(self):
        # (P, q, scale) stacks when every agent is a least-squares oracle of one shape
        cache = self.__dict__.get("_ls_cache")
        if cache is None:
            shapes = {getattr(o, "P", np.empty(0)).shape for o in self.oracles}
            if all(isinstance(o, LeastSquaresOracle) for o in self.oracles) and len(shapes) == 1:
                cache = (
                    np.stack([o.P for o in self.oracles]),
                    np.stack([o.q for o in self.oracles]),
                    np.array([o.scale for o in self.oracles]),
                )
            else:
                cache = False
            self.__dict__["_ls_cache"] = cache
        return cache

    def values_and_gradients(self, X):
        ls = self._stacked_ls()
        if ls:
            P, q, scale = ls
            R = np.matmul(P, X[:, :, None])[:, :, 0] - q
            vals = 0.5 * scale * np.sum(R * R, axis=1)
            grads = scale[:, None] * np.matmul(P.transpose(0, 2, 1), R[:, :, None])[:, :, 0]
            return vals, grads
        pairs = [o.value_and_gradient(x) for o, x in zip(self.oracles, X)]
        return np.array([p[0] for p in pairs]), np.stack([p[1] for p in pairs])

    def fingerprint(self) -> str:
        """Hash of the instance data, used to show two runs share a problem."""
        h = hashlib.sha256()
        for o in self.oracles:
            for name in ("P", "q"):
                arr = getattr(o, name, None)
                if arr is not None:
                    h.update(np.ascontiguousarray(arr).tobytes())
            h.update(repr((o.dim, o.smoothness, o.lower_bound)).encode())
        return h.hexdigest()[:16]


def smoothness_constant(p: Problem) -> float:
    return float(max(o.smoothness for o in p.oracles))


def least_squares_instance(n: int, d: int, eta: int, seed: int) -> Problem:
    """Random decentralized least-squares problem.

    Agent ``i`` holds ``f_i(x) = ||P_i x - q_i||^2 / (2 n)`` with
    ``P_i`` of shape ``(eta, d)``. Entries of ``P_i`` are Gaussian with
    mean 2 and variance 2, entries of ``q_i`` Gaussian with mean 1 and
    variance 0.5.
    """
    if min(n, d, eta) < 1:
        raise ValueError("n, d and eta must all be >= 1")
    rng = np.random.default_rng(seed)
    P = 2.0 + np.sqrt(2.0) * rng.standard_normal((n, eta, d))
    q = 1.0 + np.sqrt(0.5) * rng.standard_normal((n, eta))
    prob = Problem([LeastSquaresOracle(P[i], q[i], n) for i in range(n)])
    prob.reference_optimum = global_optimum_least_squares(prob)
    return prob


def global_optimum_least_squares(p: Problem) -> np.ndarray:
    """Minimizer of ``sum_i f_i`` from the normal equations.

    Falls back to the pseudoinverse when the normal matrix is singular.
    """
    H = sum(o.scale * o.P.T @ o.P for o in p.oracles)
    rhs = sum(o.scale * o.P.T @ o.q for o in p.oracles)
    evals, evecs = np.linalg.eigh(H)
    cutoff = max(evals[-1], 0.0) * H.shape[0] * np.finfo(float).eps
    keep = evals > cutoff
    x = evecs[:, keep] @ ((evecs[:, keep].T @ rhs) / evals[keep])
    # one refinement step against the eigensolver's round-off
    r = rhs - H @ x
    x = x + evecs[:, keep] @ ((evecs[:, keep].T @ r) / evals[keep])
    return x


def stationarity_residual(p: Problem, x) -> float:
    """``||sum_i grad f_i(x)||`` at a common point ``x``."""
    return float(np.linalg.norm(sum(o.gradient(x) for o in p.oracles)))
