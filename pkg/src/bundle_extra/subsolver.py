"""Proximal step on a piecewise-linear model, solved through its simplex dual.

The primal problem is::

    minimize_x  max_j (a_j^T x + b_j) + ||x - c||^2 / (2 alpha)

Its dual is the concave quadratic program over the probability simplex::

    maximize_lam  h(lam) = -alpha/2 ||A^T lam||^2 + lam^T (A c + b)

and any dual optimum gives the primal optimum ``x = c - alpha A^T lam``.

Everything the dual iteration needs lives in ``m``-dimensional space: with
``G = A A^T`` and ``r = A c + b`` the dual gradient is ``g = r - alpha G lam``
and the duality gap at the recovered ``x`` is ``max_j g_j - lam^T g``. The
kernel therefore never touches the ``d``-dimensional data.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 10_000
POWER_ITERS = 20
POLISH_EVERY = 20


class InnerSolverWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class ProxPWLInstance:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    alpha: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if A.shape[0] < 1:
            raise ValueError("need at least one affine piece")
        if A.shape != (b.size, c.size):
            raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}, c {c.shape}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ValueError("non-finite instance data")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def primal_value(self, x) -> float:
        dx = x - self.c
        return float(np.max(self.A @ x + self.b) + dx @ dx / (2 * self.alpha))


@dataclass(frozen=True)
class ProxPWLSolution:
    x: np.ndarray
    lam: np.ndarray
    gap: float
    inner_iters: int
    converged: bool

    @property
    def status(self) -> str:
        return "converged" if self.converged else "max_iters"


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex.

    A 2-D input is projected row by row. Uses the sort-and-threshold rule:
    ``theta`` is chosen so that ``max(v - theta, 0)`` sums to one.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        return project_simplex(v[None, :])[0]
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    k = np.arange(1, v.shape[1] + 1)
    rho = np.count_nonzero(u - css / k > 0, axis=1)
    theta = css[np.arange(v.shape[0]), rho - 1] / rho
    out = np.maximum(v - theta[:, None], 0.0)
    # renormalize the support so the sum is one to the last bit
    return out / out.sum(axis=1, keepdims=True)


@numba.njit(cache=True)
def _proj_simplex(v, out):
    m = v.size
    u = -np.sort(-v)
    css = 0.0
    theta = 0.0
    for k in range(m):
        css += u[k]
        t = (css - 1.0) / (k + 1)
        if u[k] - t > 0.0:
            theta = t
    s = 0.0
    for j in range(m):
        w = v[j] - theta
        out[j] = w if w > 0.0 else 0.0
        s += out[j]
    for j in range(m):
        out[j] /= s


@numba.njit(cache=True)
def _dual_grad(G, r, alpha, lam, g):
    m = lam.size
    for i in range(m):
        acc = 0.0
        for j in range(m):
            acc += G[i, j] * lam[j]
        g[i] = r[i] - alpha * acc


@numba.njit(cache=True)
def _value_gap(r, lam, g):
    # h(lam) = (lam^T r + lam^T g) / 2 ; gap = max g - lam^T g
    lr = 0.0
    lg = 0.0
    gmax = g[0]
    for j in range(lam.size):
        lr += lam[j] * r[j]
        lg += lam[j] * g[j]
        if g[j] > gmax:
            gmax = g[j]
    return 0.5 * (lr + lg), gmax - lg


@numba.njit(cache=True)
def _top_eig(G, iters):
    m = G.shape[0]
    v = np.empty(m)
    w = np.empty(m)
    for i in range(m):
        v[i] = math.sin(i + 1.0)
    est = 0.0
    for _ in range(iters):
        nrm = 0.0
        for i in range(m):
            acc = 0.0
            for j in range(m):
                acc += G[i, j] * v[j]
            w[i] = acc
            nrm += acc * acc
        nrm = math.sqrt(nrm)
        if nrm == 0.0:
            return 0.0
        est = nrm
        for i in range(m):
            v[i] = w[i] / nrm
    tr = 0.0
    for i in range(m):
        tr += G[i, i]
    return min(1.05 * est, tr)


@numba.njit(cache=True)
def _centered(G):
    # P G P with P = I - 11^T/m: curvature of h along the simplex
    m = G.shape[0]
    row = np.empty(m)
    tot = 0.0
    for i in range(m):
        acc = 0.0
        for j in range(m):
            acc += G[i, j]
        row[i] = acc / m
        tot += acc
    tot /= m * m
    C = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            C[i, j] = G[i, j] - row[i] - row[j] + tot
    return C


@numba.njit(cache=True, nogil=True)
def _gauss_solve(H, rhs):
    """Gaussian elimination with partial pivoting; ``ok`` is False on a (near) zero pivot."""
    k = rhs.size
    M = H.copy()
    y = rhs.copy()
    scale = 0.0
    for a in range(k):
        scale = max(scale, abs(M[a, a]))
    eps = 1e-14 * scale
    for col in range(k):
        piv = col
        for a in range(col + 1, k):
            if abs(M[a, col]) > abs(M[piv, col]):
                piv = a
        if not abs(M[piv, col]) > eps:
            return y, False
        if piv != col:
            for c in range(k):
                M[col, c], M[piv, c] = M[piv, c], M[col, c]
            y[col], y[piv] = y[piv], y[col]
        for a in range(col + 1, k):
            f = M[a, col] / M[col, col]
            if f != 0.0:
                for c in range(col, k):
                    M[a, c] -= f * M[col, c]
                y[a] -= f * y[col]
    for col in range(k - 1, -1, -1):
        acc = y[col]
        for c in range(col + 1, k):
            acc -= M[col, c] * y[c]
        y[col] = acc / M[col, col]
    return y, True


@numba.njit(cache=True, nogil=True)
def _active_set(G, r, alpha, lam, tol, max_steps):
    """Primal active-set iterations on the simplex, started from feasible ``lam``.

    Each step minimizes the dual objective over the affine hull of the
    current support; a blocking bound shrinks the support, a positive
    reduced gradient outside it grows the support. ``lam`` is updated in
    place and stays feasible. Returns ``(certified, gap, h, steps)``.
    """
    m = r.size
    in_s = lam > 0.0
    lhat = np.empty(m)
    g = np.empty(m)
    h = -np.inf
    gap = np.inf
    steps = 0
    while steps < max_steps:
        steps += 1
        idx = np.flatnonzero(in_s)
        s = idx.size
        for j in range(m):
            lhat[j] = 0.0
        if s == 1:
            lhat[idx[0]] = 1.0
        else:
            p = idx[0]
            for a in range(s):
                if lam[idx[a]] > lam[p]:
                    p = idx[a]
            others = np.empty(s - 1, dtype=np.int64)
            k = 0
            for a in range(s):
                if idx[a] != p:
                    others[k] = idx[a]
                    k += 1
            # lam = e_p + sum_j y_j (e_j - e_p): reduced Newton system at y = 0
            H = np.empty((s - 1, s - 1))
            rhs = np.empty(s - 1)
            gp = alpha * G[p, p] - r[p]
            for a in range(s - 1):
                ja = others[a]
                rhs[a] = -((alpha * G[ja, p] - r[ja]) - gp)
                for b in range(s - 1):
                    jb = others[b]
                    H[a, b] = alpha * (G[ja, jb] - G[ja, p] - G[p, jb] + G[p, p])
            y, ok = _gauss_solve(H, rhs)
            if not ok:
                y = np.linalg.lstsq(H, rhs, -1.0)[0]
            tot = 0.0
            for a in range(s - 1):
                lhat[others[a]] = y[a]
                tot += y[a]
            lhat[p] = 1.0 - tot

        blocked = False
        t_min = 1.0
        for a in range(s):
            j = idx[a]
            if lhat[j] < 0.0:
                t = lam[j] / (lam[j] - lhat[j])
                if t < t_min:
                    t_min = t
                blocked = True
        if blocked:
            for a in range(s):
                j = idx[a]
                lam[j] = lam[j] + t_min * (lhat[j] - lam[j])
                if lam[j] <= 1e-300 or lhat[j] < 0.0 and lam[j] <= 1e-15:
                    lam[j] = 0.0
                    in_s[j] = False
            tot = 0.0
            for j in range(m):
                tot += lam[j]
            for j in range(m):
                lam[j] /= tot
            continue

        for j in range(m):
            lam[j] = lhat[j]
        _dual_grad(G, r, alpha, lam, g)
        # grow the support until no excluded piece improves the dual; the
        # gap test alone would accept points short of the exact optimum
        lg = 0.0
        scale = 0.0
        for j in range(m):
            lg += lam[j] * g[j]
            scale = max(scale, abs(g[j]))
        best = -1
        for j in range(m):
            if not in_s[j] and (best < 0 or g[j] > g[best]):
                best = j
        if best < 0 or g[best] <= lg + 1e-15 * (1.0 + scale):
            break
        in_s[best] = True
    _dual_grad(G, r, alpha, lam, g)
    h, gap = _value_gap(r, lam, g)
    return gap <= tol * (1.0 + abs(h)), max(gap, 0.0), h, steps


@numba.njit(cache=True, nogil=True)
def _solve_gram(G, r, alpha, lam0, tol, max_iters, polish):
    m = r.size
    lam = np.empty(m)
    g = np.empty(m)
    if m == 1:
        lam[0] = 1.0
        _dual_grad(G, r, alpha, lam, g)
        return lam, 0.0, 0

    if m == 2:
        denom = G[0, 0] - 2.0 * G[0, 1] + G[1, 1]
        if alpha * denom > 1e-300:
            s = ((r[0] - r[1]) / alpha - G[0, 1] + G[1, 1]) / denom
        elif r[0] > r[1]:
            s = 1.0
        elif r[0] < r[1]:
            s = 0.0
        else:
            s = 0.5
        s = min(1.0, max(0.0, s))
        lam[0] = s
        lam[1] = 1.0 - s
        _dual_grad(G, r, alpha, lam, g)
        h, gap = _value_gap(r, lam, g)
        return lam, max(gap, 0.0), 0

    _proj_simplex(lam0, lam)
    _dual_grad(G, r, alpha, lam, g)
    h, gap = _value_gap(r, lam, g)
    it = 0
    if polish:
        # exact on the right support, so tried even when the warm start passes
        trial = lam.copy()
        ok, gap_p, h_p, steps = _active_set(G, r, alpha, trial, tol, 2 * m + 2)
        it += steps
        if ok and h_p >= h:
            return trial, gap_p, it
        if h_p > h:
            lam[:] = trial
            _dual_grad(G, r, alpha, lam, g)
            h, gap = _value_gap(r, lam, g)
    if gap <= tol * (1.0 + abs(h)):
        return lam, max(gap, 0.0), it

    lip = alpha * _top_eig(_centered(G), POWER_ITERS)
    if lip <= 1e-300:
        # no curvature along the simplex: the best vertex is optimal
        best = 0
        for j in range(m):
            lam[j] = 0.0
            if r[j] > r[best]:
                best = j
        lam[best] = 1.0
        _dual_grad(G, r, alpha, lam, g)
        h, gap = _value_gap(r, lam, g)
        return lam, max(gap, 0.0), it + 1
    step = 1.0 / lip

    y = lam.copy()
    gy = np.empty(m)
    trial = np.empty(m)
    z = np.empty(m)
    gt = np.empty(m)
    t = 1.0
    apg = 0
    while it < max_iters:
        it += 1
        apg += 1
        _dual_grad(G, r, alpha, y, gy)
        for j in range(m):
            z[j] = y[j] + step * gy[j]
        _proj_simplex(z, trial)
        _dual_grad(G, r, alpha, trial, gt)
        h_new, gap_new = _value_gap(r, trial, gt)
        if h_new < h and t > 1.0:
            # ascent lost: drop momentum and restart from the last iterate
            t = 1.0
            for j in range(m):
                y[j] = lam[j]
            continue
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_new
        for j in range(m):
            y[j] = trial[j] + beta * (trial[j] - lam[j])
            lam[j] = trial[j]
            g[j] = gt[j]
        t = t_new
        h = h_new
        gap = gap_new
        if gap <= tol * (1.0 + abs(h)):
            break
        if polish and apg % POLISH_EVERY == 0:
            cand = lam.copy()
            ok, gap_p, h_p, steps = _active_set(G, r, alpha, cand, tol, 2 * m + 2)
            if ok:
                return cand, gap_p, it
    return lam, max(gap, 0.0), it


@numba.njit(cache=True, nogil=True)
def _solve_batch(G, r, active, alpha, lam0, tol, max_iters, polish, lo, hi, lam_out, gaps, iters):
    for i in range(lo, hi):
        idx = np.flatnonzero(active[i])
        m = idx.size
        Gi = np.empty((m, m))
        ri = np.empty(m)
        li = np.empty(m)
        for a in range(m):
            ri[a] = r[i, idx[a]]
            li[a] = lam0[i, idx[a]]
            for b in range(m):
                Gi[a, b] = G[i, idx[a], idx[b]]
        lam, gap, it = _solve_gram(Gi, ri, alpha, li, tol, max_iters, polish)
        for s in range(lam_out.shape[1]):
            lam_out[i, s] = 0.0
        for a in range(m):
            lam_out[i, idx[a]] = lam[a]
        gaps[i] = gap
        iters[i] = it


def solve_batch(G, r, active, alpha, lam0, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS, pool=None, polish=True):
    """Solve one dual per row: ``G[i]``, ``r[i]`` restricted to the pieces where ``active[i]``.

    Inactive entries of the returned multipliers are zero. With a thread
    pool the rows are split into contiguous chunks; every row is solved
    independently, so the result does not depend on the chunking.
    """
    n, M = r.shape
    G = np.ascontiguousarray(G, dtype=float)
    r = np.ascontiguousarray(r, dtype=float)
    active = np.ascontiguousarray(active, dtype=np.bool_)
    lam0 = np.ascontiguousarray(lam0, dtype=float)
    lam = np.zeros((n, M))
    gaps = np.zeros(n)
    iters = np.zeros(n, dtype=np.int64)
    args = (G, r, active, float(alpha), lam0, float(tol), int(max_iters), bool(polish))
    if pool is None or n < 2:
        _solve_batch(*args, 0, n, lam, gaps, iters)
    else:
        workers = getattr(pool, "_max_workers", 1)
        bounds = np.linspace(0, n, min(workers, n) + 1).astype(int)
        futures = [
            pool.submit(_solve_batch, *args, int(lo), int(hi), lam, gaps, iters)
            for lo, hi in zip(bounds[:-1], bounds[1:])
        ]
        for fut in futures:
            fut.result()
    return lam, gaps, iters


def solve_gram(G, r, alpha, lam0=None, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS, polish=True):
    """Maximize the dual given ``G = A A^T`` and ``r = A c + b``.

    Returns ``(lam, gap, iters)``. ``lam0`` warm-starts the iteration and
    is projected onto the simplex first. With ``polish`` the solver tries
    exact active-set steps on the current support before and during the
    gradient iterations, accepting them only when the duality gap
    certifies the result; ``polish=False`` runs the plain accelerated
    method.
    """
    m = r.size
    if lam0 is None:
        lam0 = np.full(m, 1.0 / m)
    return _solve_gram(
        np.ascontiguousarray(G, dtype=float),
        np.ascontiguousarray(r, dtype=float),
        float(alpha),
        np.ascontiguousarray(lam0, dtype=float),
        float(tol),
        int(max_iters),
        bool(polish),
    )


def dual_value(inst: ProxPWLInstance, lam) -> float:
    z = inst.A.T @ lam
    return float(-0.5 * inst.alpha * z @ z + lam @ (inst.A @ inst.c + inst.b))


def dual_gradient(inst: ProxPWLInstance, lam) -> np.ndarray:
    return -inst.alpha * (inst.A @ (inst.A.T @ lam)) + inst.A @ inst.c + inst.b


def dual_lipschitz(inst: ProxPWLInstance, iters: int = POWER_ITERS) -> float:
    """Lipschitz constant of the dual gradient along the simplex.

    Adding a multiple of the all-ones vector does not change a simplex
    projection, so only the curvature of the centered slopes
    ``(I - 11^T/m) A`` matters: ``alpha * ||(I - 11^T/m) A||_2^2``,
    estimated by power iteration.
    """
    G = np.ascontiguousarray(inst.A @ inst.A.T)
    return inst.alpha * float(_top_eig(_centered(G), iters))


def solve(
    inst: ProxPWLInstance,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    lam0=None,
    polish: bool = True,
):
    """Solve the proximal piecewise-linear problem through its dual.

    Accelerated projected gradient ascent with restart runs until the
    duality gap falls below ``tol * (1 + |h(lam)|)``. If ``max_iters`` is
    hit first, the current point is returned with ``converged=False`` and an
    :class:`InnerSolverWarning` is emitted.
    """
    G = inst.A @ inst.A.T
    r = inst.A @ inst.c + inst.b
    lam, _, iters = solve_gram(G, r, inst.alpha, lam0, tol, max_iters, polish)
    x = inst.c - inst.alpha * (inst.A.T @ lam)
    h = dual_value(inst, lam)
    gap = max(inst.primal_value(x) - h, 0.0)
    converged = gap <= tol * (1 + abs(h)) or iters < max_iters
    if not converged:
        warnings.warn(
            f"inner solver stopped at {iters} iterations with gap {gap:.3e}",
            InnerSolverWarning,
            stacklevel=2,
        )
    return ProxPWLSolution(x, lam, gap, iters, bool(converged))
