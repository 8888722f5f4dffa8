"""Piecewise-linear bundle models of local objectives.

A model is the pointwise maximum of affine cuts ``a^T x + b``, optionally
clamped from below by a scalar floor. Every cut built from
``(x_t, f(x_t), grad f(x_t))`` is a global minorant of a convex ``f``, so
all models here are convex minorants that are exact at the newest point.

:class:`CutBank` keeps the models of all agents in stacked arrays and is
what the algorithms iterate on. :class:`CutSet` is the single-agent view
used for inspection; its functions delegate to a one-agent bank.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numba
import numpy as np

DUPLICATE_TOL = 1e-12


class ModelKind(str, Enum):
    SINGLE_CUT = "single_cut"
    POLYAK = "polyak"
    CUTTING_PLANE = "cutting_plane"
    POLYAK_CUTTING_PLANE = "polyak_cutting_plane"
    TWO_CUT = "two_cut"

    @property
    def uses_floor(self) -> bool:
        return self in (ModelKind.POLYAK, ModelKind.POLYAK_CUTTING_PLANE)

    def capacity(self, window: int) -> int:
        """Maximum number of stored cuts (the floor not included)."""
        if self in (ModelKind.CUTTING_PLANE, ModelKind.POLYAK_CUTTING_PLANE):
            return window + 1
        return 2 if self == ModelKind.TWO_CUT else 1


@dataclass(frozen=True)
class Cut:
    a: np.ndarray
    b: float

    @classmethod
    def at(cls, x, f_val, grad):
        """Linearization of ``f`` at ``x``."""
        grad = np.asarray(grad, dtype=float)
        return cls(grad.copy(), float(f_val - grad @ np.asarray(x, dtype=float)))

    def __call__(self, x) -> float:
        return float(self.a @ x + self.b)


@numba.njit(cache=True)
def _remove_slot(A, b, ids, lam, G, i, s, count):
    for t in range(s, count - 1):
        A[i, t] = A[i, t + 1]
        b[i, t] = b[i, t + 1]
        ids[i, t] = ids[i, t + 1]
        lam[i, t] = lam[i, t + 1]
        for u in range(count):
            G[i, t, u] = G[i, t + 1, u]
    for t in range(count - 1):
        for u in range(s, count - 1):
            G[i, t, u] = G[i, t, u + 1]
    lam[i, count - 1] = 0.0


@numba.njit(cache=True)
def _append_cuts(A, b, ids, lam, G, count, next_id, grads, new_b, evict, tol):
    """In-place: evict the oldest cut of full agents, drop stored copies of the new cut, append it."""
    n, cap = b.shape
    for i in range(n):
        c = count[i]
        if evict and c == cap:
            _remove_slot(A, b, ids, lam, G, i, 0, c)
            c -= 1
        s = 0
        while s < c:
            dist = abs(b[i, s] - new_b[i])
            j = 0
            while dist <= tol and j < A.shape[2]:
                dist += abs(A[i, s, j] - grads[i, j])
                j += 1
            if dist <= tol:
                _remove_slot(A, b, ids, lam, G, i, s, c)
                c -= 1
            else:
                s += 1
        A[i, c] = grads[i]
        b[i, c] = new_b[i]
        ids[i, c] = next_id[i]
        lam[i, c] = 0.0
        for t in range(c + 1):
            v = 0.0
            for j in range(A.shape[2]):
                v += A[i, t, j] * grads[i, j]
            G[i, t, c] = v
            G[i, c, t] = v
        next_id[i] += 1
        count[i] = c + 1


class CutBank:
    """Bundle models of ``n`` agents stored slot-wise.

    ``A[i, s]`` and ``b[i, s]`` hold cut ``s`` of agent ``i`` for
    ``s < count[i]``, oldest first. ``ids`` label cuts with increasing
    integers. ``lam`` holds one multiplier per slot plus a trailing slot for
    the floor; it is shifted together with the cuts so it can warm-start
    the next proximal solve.
    """

    def __init__(self, n, dim, kind=ModelKind.CUTTING_PLANE, window=0, floors=None):
        self.kind = ModelKind(kind)
        if window < 0:
            raise ValueError("window must be non-negative")
        self.window = int(window)
        self.n, self.dim = int(n), int(dim)
        self.cap = self.kind.capacity(self.window)
        if self.kind.uses_floor:
            if floors is None:
                raise ValueError(f"{self.kind.value} model needs a floor")
            floors = np.broadcast_to(np.asarray(floors, dtype=float), (self.n,)).copy()
            if not np.all(np.isfinite(floors)):
                raise ValueError(f"{self.kind.value} model needs finite floors")
            self.floors = floors
        else:
            self.floors = None
        self.A = np.zeros((self.n, self.cap, self.dim))
        self.b = np.zeros((self.n, self.cap))
        self.ids = np.full((self.n, self.cap), -1, dtype=np.int64)
        self.count = np.zeros(self.n, dtype=np.int64)
        self.next_id = np.zeros(self.n, dtype=np.int64)
        self.lam = np.zeros((self.n, self.cap + 1))
        self.G = np.zeros((self.n, self.cap, self.cap))

    def refresh_gram(self) -> None:
        """Recompute the cached slot Gram matrices after editing ``A`` by hand."""
        self.G = np.matmul(self.A, self.A.transpose(0, 2, 1))

    def copy(self) -> CutBank:
        new = object.__new__(CutBank)
        new.__dict__.update(self.__dict__)
        for name in ("A", "b", "ids", "count", "next_id", "lam", "G"):
            setattr(new, name, getattr(self, name).copy())
        if self.floors is not None:
            new.floors = self.floors.copy()
        return new

    @property
    def valid(self) -> np.ndarray:
        return np.arange(self.cap)[None, :] < self.count[:, None]

    def cut_values(self, X) -> np.ndarray:
        """``a_s^T x_i + b_s`` per agent and slot; empty slots are ``-inf``."""
        vals = np.matmul(self.A, X[:, :, None])[:, :, 0] + self.b
        return np.where(self.valid, vals, -np.inf)

    def evaluate(self, X) -> np.ndarray:
        out = self.cut_values(X).max(axis=1)
        if self.floors is not None:
            out = np.maximum(out, self.floors)
        return out

    def subgradient(self, X) -> np.ndarray:
        """Slope of the most recent maximizing cut per agent; zero where the floor is strictly active."""
        vals = self.cut_values(X)
        top = vals.max(axis=1)
        is_top = vals == top[:, None]
        last = self.cap - 1 - np.argmax(is_top[:, ::-1], axis=1)
        out = self.A[np.arange(self.n), last].copy()
        out[~np.isfinite(top)] = 0.0
        if self.floors is not None:
            out[self.floors > top] = 0.0
        return out

    def update(self, X, F, grads) -> CutBank:
        """New bank after every agent observes ``f_i(x_i)`` and ``grad f_i(x_i)``.

        * ``single_cut``: only the new cut.
        * ``polyak``: the new cut plus the floor.
        * ``cutting_plane``: the new cut after the newest ``window`` old cuts.
        * ``polyak_cutting_plane``: as ``cutting_plane``, plus the floor.
        * ``two_cut``: the previous model linearized at ``x_i`` (aggregated
          cut), then the new cut.

        A new cut equal to a stored one replaces the stored copy.
        """
        X = np.asarray(X, dtype=float)
        F = np.asarray(F, dtype=float)
        grads = np.asarray(grads, dtype=float)
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(F)) and np.all(np.isfinite(grads))):
            raise ValueError("non-finite point, value or gradient passed to the bundle update")
        new_b = F - np.sum(grads * X, axis=1)
        out = self.copy()

        if self.kind in (ModelKind.SINGLE_CUT, ModelKind.POLYAK):
            out.count[:] = 0
        elif self.kind == ModelKind.TWO_CUT:
            started = self.count > 0
            v = self.subgradient(X)
            agg_b = self.evaluate(X) - np.sum(v * X, axis=1)
            out.count[:] = 0
            out.A[started, 0] = v[started]
            out.b[started, 0] = agg_b[started]
            out.ids[started, 0] = out.next_id[started]
            out.G[started, 0, 0] = np.sum(v[started] ** 2, axis=1)
            out.next_id[started] += 1
            out.count[started] = 1
            out.lam[:] = 0.0
            out.lam[started, 0] = 1.0
        evict = self.kind in (ModelKind.CUTTING_PLANE, ModelKind.POLYAK_CUTTING_PLANE)
        _append_cuts(out.A, out.b, out.ids, out.lam, out.G, out.count, out.next_id,
                     np.ascontiguousarray(grads), np.ascontiguousarray(new_b), evict, DUPLICATE_TOL)
        return out

    def prox_data(self, C):
        """Dual data ``(G, r, active)`` for the proximal steps centered at the rows of ``C``.

        Slot ``cap`` stands for the floor (zero slope, intercept ``floor``).
        """
        M = self.cap + 1
        G = np.zeros((self.n, M, M))
        G[:, : self.cap, : self.cap] = self.G
        r = np.zeros((self.n, M))
        r[:, : self.cap] = np.matmul(self.A, C[:, :, None])[:, :, 0] + self.b
        active = np.zeros((self.n, M), dtype=np.bool_)
        active[:, : self.cap] = self.valid
        if self.floors is not None:
            r[:, self.cap] = self.floors
            active[:, self.cap] = True
        return G, r, active

    def combine(self, lam) -> np.ndarray:
        """``sum_s lam[i, s] a_{i,s}`` per agent (the floor has zero slope)."""
        return np.matmul(lam[:, None, : self.cap], self.A)[:, 0, :]

    def cutset(self, i: int) -> CutSet:
        k = self.count[i]
        return CutSet(
            self.A[i, :k].copy(),
            self.b[i, :k].copy(),
            self.ids[i, :k].copy(),
            self.kind,
            self.window,
            None if self.floors is None else float(self.floors[i]),
            int(self.next_id[i]),
        )

    @classmethod
    def from_cutsets(cls, cutsets) -> CutBank:
        first = cutsets[0]
        floors = None if first.floor is None else [cs.floor for cs in cutsets]
        bank = cls(len(cutsets), first.A.shape[1], first.kind, first.window, floors)
        for i, cs in enumerate(cutsets):
            k = cs.m
            if k > bank.cap:
                raise ValueError(f"cut set {i} holds {k} cuts, capacity is {bank.cap}")
            bank.A[i, :k] = cs.A
            bank.b[i, :k] = cs.b
            bank.ids[i, :k] = cs.ids
            bank.count[i] = k
            bank.next_id[i] = cs.next_id
        bank.refresh_gram()
        return bank


@dataclass(frozen=True)
class CutSet:
    """Bundle model of one agent.

    Cuts are stored row-wise in ``A`` (slopes) and ``b`` (intercepts),
    oldest first. ``floor`` is the scalar lower bound of the Polyak-type
    models and ``None`` otherwise.
    """

    A: np.ndarray
    b: np.ndarray
    ids: np.ndarray
    kind: ModelKind = ModelKind.CUTTING_PLANE
    window: int = 0
    floor: float | None = None
    next_id: int = 0

    @classmethod
    def empty(cls, dim, kind=ModelKind.CUTTING_PLANE, window=0, floor=None):
        kind = ModelKind(kind)
        floors = [floor] if kind.uses_floor and floor is not None else None
        return CutBank(1, dim, kind, window, floors).cutset(0)

    @classmethod
    def from_cuts(cls, cuts, kind=ModelKind.CUTTING_PLANE, window=None, floor=None):
        cuts = list(cuts)
        A = np.array([c.a for c in cuts], dtype=float).reshape(len(cuts), -1)
        window = max(len(cuts) - 1, 0) if window is None else window
        return cls(A, np.array([c.b for c in cuts], dtype=float), np.arange(len(cuts)),
                   ModelKind(kind), window, floor, len(cuts))

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def cuts(self) -> list[Cut]:
        return [Cut(a, float(b)) for a, b in zip(self.A, self.b)]

    def affine_pieces(self):
        """``(A, b)`` with the floor appended as a zero-slope piece when present."""
        if self.floor is None:
            return self.A, self.b
        return (
            np.vstack([self.A, np.zeros((1, self.A.shape[1]))]),
            np.append(self.b, self.floor),
        )

    def __call__(self, x) -> float:
        return evaluate(self, x)


def evaluate(cs: CutSet, x) -> float:
    """Model value ``max(max_j a_j^T x + b_j, floor)``."""
    x = np.asarray(x, dtype=float)
    return float(CutBank.from_cutsets([cs]).evaluate(x[None, :])[0])


def subgradient(cs: CutSet, x) -> np.ndarray:
    """Slope of the most recent maximizing cut at ``x``; zero if the floor is strictly active."""
    x = np.asarray(x, dtype=float)
    return CutBank.from_cutsets([cs]).subgradient(x[None, :])[0]


def update_model(cs: CutSet, x_new, f_val, grad) -> CutSet:
    """Single-agent version of :meth:`CutBank.update`."""
    x_new = np.asarray(x_new, dtype=float)
    bank = CutBank.from_cutsets([cs]).update(
        x_new[None, :], np.array([f_val], dtype=float), np.asarray(grad, dtype=float)[None, :]
    )
    return bank.cutset(0)
