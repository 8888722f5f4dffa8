"""Mixing matrices ``W`` and ``Wt = (W + I) / 2`` and their admissibility checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph

DEFAULT_TOL = 1e-10


class MixingError(ValueError):
    """Weight matrix violates the admissibility conditions."""


def laplacian_matrix(g: Graph) -> np.ndarray:
    adj = g.adjacency().astype(float)
    return np.diag(adj.sum(axis=1)) - adj


def metropolis_weights(g: Graph) -> np.ndarray:
    """Metropolis-Hastings weights ``w_ij = 1 / (1 + max(d_i, d_j))`` on edges.

    The diagonal absorbs the remaining mass so every row sums to one.
    """
    deg = g.degrees()
    W = np.zeros((g.n, g.n))
    for i, j in g.edges:
        W[i, j] = W[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    W[np.diag_indices(g.n)] = 1.0 - W.sum(axis=1)
    return W


def laplacian_weights(g: Graph, tau: float) -> np.ndarray:
    """``I - tau * L`` for the graph Laplacian ``L``; requires ``0 < tau < 2 / lambda_max(L)``."""
    lap = laplacian_matrix(g)
    lam_max = np.linalg.eigvalsh(lap)[-1] if g.n > 1 else 0.0
    if tau <= 0 or (lam_max > 0 and tau >= 2.0 / lam_max):
        bound = 2.0 / lam_max if lam_max > 0 else np.inf
        raise MixingError(f"tau={tau} outside (0, {bound})")
    return np.eye(g.n) - tau * lap


@dataclass(frozen=True)
class MixingPair:
    W: np.ndarray
    Wt: np.ndarray
    lambda_min_Wt: float

    @property
    def n(self) -> int:
        return self.W.shape[0]


@dataclass
class ValidationReport:
    """Outcome of each admissibility check, keyed by check name."""

    checks: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list[str]:
        return [name for name, passed in self.checks.items() if not passed]


def _pattern_ok(M, g, tol):
    if g is None:
        return True
    mask = g.adjacency().astype(bool) | np.eye(g.n, dtype=bool)
    return bool(np.all(np.abs(M[~mask]) <= tol))


def validate_assumption4(p: MixingPair, g: Graph | None = None, tol: float = DEFAULT_TOL):
    """Check sparsity, symmetry, null-space and spectral conditions on ``(W, Wt)``.

    Never raises; failures are reported in the returned
    :class:`ValidationReport`.
    """
    W, Wt = p.W, p.Wt
    n = W.shape[0]
    ones = np.ones(n)
    rep = ValidationReport()

    rep.checks["decentralized"] = _pattern_ok(W, g, tol) and _pattern_ok(Wt, g, tol)
    rep.checks["symmetry"] = bool(
        np.max(np.abs(W - W.T), initial=0.0) <= tol
        and np.max(np.abs(Wt - Wt.T), initial=0.0) <= tol
    )

    D = W - Wt
    D_ev = np.linalg.eigvalsh((D + D.T) / 2)
    rank_D = int(np.sum(np.abs(D_ev) > tol))
    rep.details["rank_W_minus_Wt"] = rank_D
    rep.checks["null_space"] = bool(
        np.linalg.norm(D @ ones) <= tol * np.sqrt(n)
        and rank_D == n - 1
        and np.linalg.norm(Wt @ ones - ones) <= tol * np.sqrt(n)
    )

    Wt_ev = np.linalg.eigvalsh((Wt + Wt.T) / 2)
    upper = (np.eye(n) + Wt) / 2 - Wt
    lower = Wt - W
    upper_min = np.linalg.eigvalsh((upper + upper.T) / 2)[0]
    lower_min = np.linalg.eigvalsh((lower + lower.T) / 2)[0]
    rep.details.update(
        lambda_min_Wt=float(Wt_ev[0]),
        min_eig_upper=float(upper_min),
        min_eig_lower=float(lower_min),
    )
    rep.checks["spectral"] = bool(Wt_ev[0] > tol and upper_min >= -tol and lower_min >= -tol)
    return rep


def make_pair(W, g: Graph | None = None, tol: float = DEFAULT_TOL, check: bool = True):
    """Build ``MixingPair(W, (W + I) / 2)``.

    With ``check=True`` the pair is validated and :class:`MixingError`
    is raised listing every failed check.
    """
    W = np.array(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise MixingError(f"W must be square, got shape {W.shape}")
    Wt = (W + np.eye(W.shape[0])) / 2
    pair = MixingPair(W, Wt, float(np.linalg.eigvalsh((Wt + Wt.T) / 2)[0]))
    if check:
        rep = validate_assumption4(pair, g, tol)
        if not rep.ok:
            raise MixingError(f"mixing matrix fails checks: {', '.join(rep.failures())}")
    return pair


def lambda_min_power(Wt, shift: float = 1.0, max_iters: int = 100_000, tol: float = 1e-13, seed: int = 0):
    """Smallest eigenvalue of symmetric ``Wt`` by power iteration on ``shift * I - Wt``.

    ``shift`` must upper-bound the spectrum of ``Wt``; 1 suffices for
    admissible mixing matrices.
    """
    n = Wt.shape[0]
    B = shift * np.eye(n) - Wt
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    mu = v @ B @ v
    for _ in range(max_iters):
        w = B @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return float(shift)
        v = w / nrm
        mu_new = v @ B @ v
        if abs(mu_new - mu) <= tol * max(1.0, abs(mu_new)):
            mu = mu_new
            break
        mu = mu_new
    return float(shift - mu)
