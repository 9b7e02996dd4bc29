"""Shortest-augmenting-path (Edmonds-Karp) max-flow over real capacities."""

from __future__ import annotations

import math
from collections import deque

from ..errors import TnarchError

INF = math.inf
# Residual capacities at or below this are treated as saturated.
EPS = 1e-12


class FlowNetwork:
    """Residual graph stored as paired arcs: arc ``i`` and its partner ``i ^ 1``."""

    def __init__(self, n_vertices: int):
        self.n = n_vertices
        self.adj: list[list[int]] = [[] for _ in range(n_vertices)]
        self.head: list[int] = []
        self.cap: list[float] = []

    def add_arc(self, u: int, v: int, cap: float, back_cap: float = 0.0) -> int:
        """Arc ``u -> v``; ``back_cap = cap`` makes it an undirected edge."""
        idx = len(self.head)
        self.head += [v, u]
        self.cap += [cap, back_cap]
        self.adj[u].append(idx)
        self.adj[v].append(idx + 1)
        return idx

    def add_edge(self, u: int, v: int, cap: float) -> int:
        return self.add_arc(u, v, cap, cap)

    def _bfs(self, s: int, t: int) -> list[int] | None:
        parent_arc = [-1] * self.n
        seen = [False] * self.n
        seen[s] = True
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for a in self.adj[u]:
                v = self.head[a]
                if not seen[v] and self.cap[a] > EPS:
                    seen[v] = True
                    parent_arc[v] = a
                    if v == t:
                        return parent_arc
                    queue.append(v)
        return None

    def max_flow(self, s: int, t: int) -> float:
        total = 0.0
        while True:
            parent_arc = self._bfs(s, t)
            if parent_arc is None:
                return total
            path = []
            v = t
            while v != s:
                a = parent_arc[v]
                path.append(a)
                v = self.head[a ^ 1]
            push = min(self.cap[a] for a in path)
            if push == INF:
                raise TnarchError("source and sink are joined by an unbounded path")
            for a in path:
                self.cap[a] -= push
                self.cap[a ^ 1] += push
            total += push

    def source_side(self, s: int) -> set[int]:
        """Vertices reachable from ``s`` through unsaturated residual arcs."""
        seen = {s}
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for a in self.adj[u]:
                v = self.head[a]
                if v not in seen and self.cap[a] > EPS:
                    seen.add(v)
                    queue.append(v)
        return seen
