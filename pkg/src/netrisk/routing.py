"""Simple safe routing: min-max (bottleneck) paths over node risks."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence


class Topology:
    """Undirected communication channels between entity positions."""

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        self.n = n
        self._adj: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            self.add_edge(u, v)

    def add_edge(self, u: int, v: int) -> None:
        if u == v:
            raise ValueError(f"self-loop on {u}")
        if not (0 <= u < self.n and 0 <= v < self.n):
            raise IndexError(f"edge ({u}, {v}) out of range")
        self._adj[u].add(v)
        self._adj[v].add(u)

    def neighbors(self, u: int) -> list[int]:
        return sorted(self._adj[u])

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in sorted(self._adj[u]) if u < v]

    def without(self, removed: Iterable[int]) -> "Topology":
        """Same node set with every edge touching ``removed`` dropped."""
        removed = set(removed)
        return Topology(self.n, [(u, v) for u, v in self.edges() if u not in removed and v not in removed])


@dataclass(frozen=True)
class RouteResult:
    path: tuple[int, ...]
    path_risk: float

    @property
    def hops(self) -> int:
        return len(self.path) - 1


def path_risk(path: Sequence[int], risks: Sequence[float], include_endpoints: bool = True) -> float:
    """Max mean risk along ``path``; ``-inf`` when no node counts."""
    nodes = path if include_endpoints else path[1:-1]
    return max((float(risks[v]) for v in nodes), default=-math.inf)


def _bottlenecks(topology: Topology, risks, src: int, include_endpoints: bool) -> list[float]:
    """Best achievable path risk from ``src`` to every node (``inf`` if unreachable)."""
    n = topology.n
    # through[v]: best max-risk of a src..v path counting v as an intermediate node.
    through = [math.inf] * n
    through[src] = float(risks[src]) if include_endpoints else -math.inf
    done = [False] * n
    heap = [(through[src], src)]
    while heap:
        b, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v in topology.neighbors(u):
            cand = max(b, float(risks[v]))
            if cand < through[v]:
                through[v] = cand
                heapq.heappush(heap, (cand, v))
    if include_endpoints:
        return through
    best = [math.inf] * n
    best[src] = -math.inf
    for v in range(n):
        if v != src:
            best[v] = min((through[u] if u != src else -math.inf for u in topology.neighbors(v)), default=math.inf)
    return best


def _tie_broken_path(topology: Topology, risks, src: int, dst: int, bound: float) -> tuple[int, ...]:
    """Fewest-hop, then lexicographically smallest path using nodes with risk <= bound."""
    allowed = [float(risks[v]) <= bound for v in range(topology.n)]
    allowed[src] = allowed[dst] = True
    # Hop distance to dst inside the allowed subgraph.
    dist = [-1] * topology.n
    dist[dst] = 0
    queue = deque([dst])
    while queue:
        u = queue.popleft()
        for v in topology.neighbors(u):
            if allowed[v] and dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    path = [src]
    u = src
    while u != dst:
        u = next(v for v in topology.neighbors(u) if dist[v] == dist[u] - 1)
        path.append(u)
    return tuple(path)


def _check(topology: Topology, risks, src: int) -> None:
    if len(risks) != topology.n:
        raise ValueError(f"{len(risks)} risks for {topology.n} entities")
    if not 0 <= src < topology.n:
        raise IndexError(f"source {src} out of range")


def min_max_path(
    topology: Topology, risks: Sequence[float], src: int, dst: int, include_endpoints: bool = True
) -> RouteResult | None:
    """Path minimizing the maximum node risk; ``None`` if ``dst`` is unreachable.

    Ties go to the fewest hops, then the lexicographically smallest node
    sequence.
    """
    _check(topology, risks, src)
    if not 0 <= dst < topology.n:
        raise IndexError(f"destination {dst} out of range")
    if src == dst:
        raise ValueError("source and destination must differ")
    bound = _bottlenecks(topology, risks, src, include_endpoints)[dst]
    if bound == math.inf:
        return None
    return RouteResult(_tie_broken_path(topology, risks, src, dst, bound), bound)


def all_min_max_paths(
    topology: Topology, risks: Sequence[float], src: int, include_endpoints: bool = True
) -> dict[int, RouteResult]:
    """Min-max routes from ``src`` to every reachable entity."""
    _check(topology, risks, src)
    bounds = _bottlenecks(topology, risks, src, include_endpoints)
    return {
        dst: RouteResult(_tie_broken_path(topology, risks, src, dst, b), b)
        for dst, b in enumerate(bounds)
        if dst != src and b != math.inf
    }
