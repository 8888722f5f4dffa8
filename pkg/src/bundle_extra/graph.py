"""Undirected communication graphs over ``n`` agents."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GraphError(ValueError):
    """Invalid graph or infeasible graph-generation parameters."""


def _normalize_edge(i, j, n):
    i, j = int(i), int(j)
    if i == j:
        raise GraphError(f"self-loop at node {i}")
    if not (0 <= i < n and 0 <= j < n):
        raise GraphError(f"edge ({i}, {j}) out of range for n={n}")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph with 0-based integer nodes.

    Edges are stored as sorted ``(i, j)`` pairs with ``i < j``.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("a graph needs at least one node")
        normalized = frozenset(_normalize_edge(i, j, self.n) for i, j in self.edges)
        object.__setattr__(self, "edges", normalized)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=np.int64)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = 1
        return adj

    def degrees(self) -> np.ndarray:
        return self.adjacency().sum(axis=1)

    def neighbors(self, i: int) -> set[int]:
        return neighbors(self, i)


def neighbors(g: Graph, i: int) -> set[int]:
    """Nodes adjacent to ``i`` (``i`` itself excluded)."""
    if not 0 <= i < g.n:
        raise IndexError(f"node {i} out of range for n={g.n}")
    out = set()
    for a, b in g.edges:
        if a == i:
            out.add(b)
        elif b == i:
            out.add(a)
    return out


def is_connected(g: Graph) -> bool:
    """Breadth-first search from node 0 reaches every node."""
    adj = [[] for _ in range(g.n)]
    for i, j in g.edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == g.n


def random_connected_graph(n: int, num_edges: int, seed: int) -> Graph:
    """Random connected graph with exactly ``num_edges`` edges.

    A uniformly random spanning tree is built first (random node order,
    each node attached to a uniformly chosen earlier node), then distinct
    non-tree edges are added uniformly at random.

    Raises
    ------
    GraphError
        If ``num_edges`` is outside ``[n - 1, n (n - 1) / 2]``.
    """
    if n < 1:
        raise GraphError("n must be positive")
    max_edges = n * (n - 1) // 2
    if num_edges < n - 1 or num_edges > max_edges:
        raise GraphError(
            f"num_edges={num_edges} infeasible for n={n} "
            f"(need {n - 1} <= num_edges <= {max_edges})"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    edges = set()
    for pos in range(1, n):
        parent = order[rng.integers(pos)]
        edges.add(_normalize_edge(order[pos], parent, n))

    remaining = [
        (i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in edges
    ]
    extra = num_edges - len(edges)
    if extra:
        picks = rng.choice(len(remaining), size=extra, replace=False)
        edges.update(remaining[p] for p in sorted(picks))
    return Graph(n, frozenset(edges))


def path_graph(n: int) -> Graph:
    return Graph(n, frozenset((i, i + 1) for i in range(n - 1)))


def star_graph(n: int) -> Graph:
    return Graph(n, frozenset((0, i) for i in range(1, n)))


def complete_graph(n: int) -> Graph:
    return Graph(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))


def write_edge_list(g: Graph, path) -> None:
    """Write ``g`` as text: a header line ``n m`` then one ``i j`` per edge."""
    lines = [f"{g.n} {g.num_edges}"]
    lines += [f"{i} {j}" for i, j in g.sorted_edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path) -> Graph:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 2:
        raise GraphError(f"{path}: missing 'n m' header")
    n, m = int(rows[0][0]), int(rows[0][1])
    body = rows[1:]
    if len(body) != m:
        raise GraphError(f"{path}: header announces {m} edges, found {len(body)}")
    edges = set()
    for row in body:
        e = _normalize_edge(row[0], row[1], n)
        if e in edges:
            raise GraphError(f"{path}: duplicate edge {e}")
        edges.add(e)
    return Graph(n, frozenset(edges))
