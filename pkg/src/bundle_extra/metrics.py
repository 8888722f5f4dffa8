"""KKT residuals, the summability bound and rate statistics for consensus runs."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

PINV_CUTOFF = 1e-12


@dataclass(frozen=True)
class IterationMetrics:
    k: int
    consensus_residual: float
    grad_residual: float
    rel_error: float
    dual_mean_norm: float
    cumulative_kkt_sum: float
    inner_iters_total: int = 0

    def as_dict(self):
        return asdict(self)


def _gradient(grad_oracle, x):
    return grad_oracle.gradient(x) if hasattr(grad_oracle, "gradient") else grad_oracle(x)


def stack_optimum(x_star, n: int) -> np.ndarray:
    """Broadcast a common optimum ``x*`` to the ``n x d`` stack ``1 x*^T``."""
    x_star = np.asarray(x_star, dtype=float)
    if x_star.ndim == 2:
        return x_star
    return np.tile(x_star, (n, 1))


def consensus_residual(x, Wt) -> float:
    """``trace(x^T (I - Wt) x)``."""
    return float(np.sum(x * (x - Wt @ x)))


def grad_residual_from(grad_x, q_star) -> float:
    r = grad_x + q_star
    return float(np.sum(r * r))


def kkt_residuals(x, q_star, Wt, grad_oracle):
    """Consensus violation ``trace(x^T (I - Wt) x)`` and stationarity ``||grad f(x) + q*||_F^2``.

    ``grad_oracle`` is either an object with a ``gradient`` method acting
    on the stacked iterate (e.g. :class:`~bundle_extra.problem.Problem`)
    or a plain callable.
    """
    return consensus_residual(x, Wt), grad_residual_from(_gradient(grad_oracle, x), q_star)


def optimal_dual(grad_oracle, x_star, n: int) -> np.ndarray:
    """``q* = -grad f(1 x*^T)``."""
    return -_gradient(grad_oracle, stack_optimum(x_star, n))


def pinv_psd(M, cutoff: float = PINV_CUTOFF) -> np.ndarray:
    """Pseudoinverse of a symmetric PSD matrix, dropping eigenvalues below ``cutoff * lambda_max``."""
    evals, evecs = np.linalg.eigh((M + M.T) / 2)
    top = max(evals[-1], 0.0)
    keep = evals > cutoff * top
    return (evecs[:, keep] / evals[keep]) @ evecs[:, keep].T


def theorem1_bound(x0, q0, x_star, Wt, alpha: float, grad_oracle) -> float:
    """Right-hand side of the KKT summability bound.

    ``||x0 - x*||_Wt^2 / alpha + alpha ||q0 + grad f(x*)||^2_{(I - Wt)^+}``
    with Frobenius-type weighted norms over the ``n x d`` stacks.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    n = Wt.shape[0]
    X_star = stack_optimum(x_star, n)
    dx = x0 - X_star
    first = float(np.sum(dx * (Wt @ dx))) / alpha
    dq = q0 + _gradient(grad_oracle, X_star)
    second = alpha * float(np.sum(dq * (pinv_psd(np.eye(n) - Wt) @ dq)))
    return first + second


def relative_error(x, X_star) -> float:
    denom = np.linalg.norm(X_star)
    err = np.linalg.norm(x - X_star)
    return float(err / denom) if denom > 0 else float(err)


def rate_statistics(trajectory, keys=("consensus_residual", "grad_residual")):
    """Running min, running mean and ``k``-scaled versions of each residual.

    ``trajectory`` is a sequence of :class:`IterationMetrics` (or of
    mappings with the same keys). Statistics at row ``k`` are over the
    iterations ``1..k``, matching the summation range of the bound; row 0
    uses iteration 0 alone. Returns a dict of arrays keyed
    ``"<residual>_<stat>"`` with stats ``min``, ``mean``, ``k_min`` and
    ``k_mean``, plus ``"k"``.
    """
    rows = [r.as_dict() if hasattr(r, "as_dict") else dict(r) for r in trajectory]
    if not rows:
        raise ValueError("empty trajectory")
    ks = np.array([r["k"] for r in rows], dtype=float)
    out = {"k": ks}
    for key in keys:
        vals = np.array([r[key] for r in rows], dtype=float)
        body = vals[1:] if ks[0] == 0 else vals
        run_min = np.minimum.accumulate(body)
        run_mean = np.cumsum(body) / np.arange(1, body.size + 1)
        if ks[0] == 0:
            run_min = np.concatenate([[vals[0]], run_min])
            run_mean = np.concatenate([[vals[0]], run_mean])
        out[f"{key}_min"] = run_min
        out[f"{key}_mean"] = run_mean
        out[f"{key}_k_min"] = ks * run_min
        out[f"{key}_k_mean"] = ks * run_mean
    return out
