"""Spectral node partitioning (relaxed ratio cut, recursive bisection)."""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .connectivity import ConnectivityGraph

FIEDLER_TOL = 1e-8


@dataclass(frozen=True)
class Partition:
    """Group id per entity position; ids are contiguous from 0."""

    assignment: tuple[int, ...]

    @property
    def group_count(self) -> int:
        return max(self.assignment) + 1 if self.assignment else 0

    def groups(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.group_count)]
        for pos, g in enumerate(self.assignment):
            out[g].append(pos)
        return out

    @classmethod
    def from_groups(cls, groups, n: int) -> "Partition":
        """Canonical labelling: groups numbered by their smallest member."""
        groups = sorted((sorted(g) for g in groups if len(g)), key=lambda g: g[0])
        assignment = [-1] * n
        for gid, members in enumerate(groups):
            for pos in members:
                assignment[pos] = gid
        if -1 in assignment:
            raise ValueError("groups do not cover every entity")
        return cls(tuple(assignment))


def _matrix(graph) -> np.ndarray:
    return graph.weights if isinstance(graph, ConnectivityGraph) else np.asarray(graph, dtype=float)


def laplacian(graph) -> np.ndarray:
    """Degree matrix minus the weight matrix."""
    F = _matrix(graph)
    return np.diag(F.sum(axis=1)) - F


def cut_weight(graph, partition: Partition) -> float:
    """Total weight of edges whose endpoints fall in different groups."""
    F = _matrix(graph)
    labels = np.asarray(partition.assignment)
    if labels.shape[0] != F.shape[0]:
        raise ValueError("partition size does not match graph")
    crossing = labels[:, None] != labels[None, :]
    return float(np.triu(F * crossing, k=1).sum())


def ratio_cut(graph, partition: Partition) -> float:
    """Sum over groups of (weight leaving the group) / (group size)."""
    F = _matrix(graph)
    labels = np.asarray(partition.assignment)
    total = 0.0
    for members in partition.groups():
        inside = labels == labels[members[0]]
        total += F[np.ix_(inside, ~inside)].sum() / len(members)
    return float(total)


def connected_components(weights: np.ndarray) -> list[list[int]]:
    F = np.asarray(weights, dtype=float)
    n = F.shape[0]
    seen = [False] * n
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        seen[start] = True
        comp, queue = [], deque([start])
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in np.flatnonzero(F[u] > 0):
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


def fiedler_vector(weights: np.ndarray, tol: float = FIEDLER_TOL, max_iter: int | None = None) -> np.ndarray:
    """Eigenvector of the second-smallest Laplacian eigenvalue of a connected graph.

    Inverse iteration on ``M = L + c/n 11^T``: the rank-one term lifts the
    constant eigenvector out of the null space, so the smallest eigenpair of
    ``M`` is the Fiedler pair. Iterates are kept orthogonal to the ones vector.

    The shift is bracketed: the Rayleigh quotient of any iterate bounds the
    Fiedler value from above, and a successful Cholesky factorization of
    ``M - s I`` certifies ``s`` lies below it. Each step halves the bracket and
    refactors at its lower end, so the convergence ratio shrinks
    geometrically even when the second and third eigenvalues nearly tie.
    """
    L = laplacian(weights)
    n = L.shape[0]
    max_iter = 10 * n if max_iter is None else max_iter
    shift = max(2.0 * float(np.diag(L).max()), 1.0)
    M = L + shift / n
    factor = cho_factor(M)
    norm_L = max(np.abs(L).sum(axis=1).max(), 1e-300)
    eye = np.eye(n)

    x = np.random.default_rng(0).standard_normal(n)
    x -= x.mean()
    x /= np.linalg.norm(x)
    lo, hi = 0.0, math.inf
    for _ in range(max_iter):
        y = cho_solve(factor, x)
        y -= y.mean()
        y /= np.linalg.norm(y)
        mu = float(y @ L @ y)
        if np.linalg.norm(L @ y - mu * y) <= tol * norm_L:
            return y
        x = y
        hi = min(hi, mu)
        if hi - lo > tol * norm_L:
            mid = 0.5 * (lo + hi)
            try:
                factor = cho_factor(M - mid * eye)
            except np.linalg.LinAlgError:
                hi = mid
            else:
                lo = mid
    warnings.warn("Fiedler iteration hit its cap; falling back to a dense eigensolver", RuntimeWarning)
    _, vecs = np.linalg.eigh(L)
    return vecs[:, 1]


def _bisect_matrix(F: np.ndarray) -> tuple[list[int], list[int]]:
    n = F.shape[0]
    comps = connected_components(F)
    if len(comps) > 1:
        # Zero-weight cut: balance whole components, largest first.
        left, right = [], []
        for comp in sorted(comps, key=lambda c: (-len(c), c[0])):
            (left if len(left) <= len(right) else right).extend(comp)
        return sorted(left), sorted(right)
    v = fiedler_vector(F)
    scale = np.abs(v).max()
    if v[int(np.argmax(np.abs(v)))] < 0:
        v = -v
    positive = v >= -1e-10 * scale
    return [i for i in range(n) if positive[i]], [i for i in range(n) if not positive[i]]


def spectral_bisect(graph) -> Partition:
    """Split into two groups by the sign of the Fiedler vector.

    Disconnected graphs are split along component boundaries instead.
    """
    F = _matrix(graph)
    n = F.shape[0]
    if n < 2:
        raise ValueError("bisection needs at least two entities")
    left, right = _bisect_matrix(F)
    return Partition.from_groups([left, right], n)


def iter_bisections(graph, max_size: int) -> Iterator[Partition]:
    """The starting single group, then the partition after each split (breadth first)."""
    if max_size < 1:
        raise ValueError("max_size must be >= 1")
    F = _matrix(graph)
    n = F.shape[0]
    done: list[list[int]] = []
    pending = deque([list(range(n))] if n else [])
    yield Partition.from_groups(list(pending), n)
    while pending:
        group = pending.popleft()
        if len(group) <= max_size:
            done.append(group)
            continue
        sub = F[np.ix_(group, group)]
        left, right = _bisect_matrix(sub)
        halves = [[group[i] for i in left], [group[i] for i in right]]
        pending.extend(halves)
        yield Partition.from_groups(done + list(pending), n)


def partition_to_size(graph, max_size: int) -> Partition:
    """Recursively bisect until every group has at most ``max_size`` entities."""
    last = None
    for last in iter_bisections(graph, max_size):
        pass
    return last
