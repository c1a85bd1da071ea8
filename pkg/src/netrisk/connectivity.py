"""Functional connectivity graphs.

The edge weight between two entities is the magnitude of the sample Pearson
correlation of their synchronized signals. Graphs are smoothed across windows
with a forget factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flows import EntityIndex
from .signals import SignalFrame

# Relative standard-deviation floor below which a signal counts as constant.
ZERO_VARIANCE_RTOL = 1e-12


class InsufficientSamplesError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConnectivityGraph:
    """Symmetric weight matrix with entries in [0, 1] and unit diagonal."""

    entity_index: EntityIndex
    weights: np.ndarray
    window_start: float = 0.0
    graph_window: float = 0.0

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def subgraph(self, positions) -> "ConnectivityGraph":
        positions = np.asarray(positions, dtype=int)
        F = self.weights[np.ix_(positions, positions)].copy()
        F.setflags(write=False)
        return ConnectivityGraph(self.entity_index.subset(positions), F, self.window_start, self.graph_window)


def make_graph(weights, entity_index: EntityIndex | None = None, window_start=0.0, graph_window=0.0) -> ConnectivityGraph:
    """Wrap a raw weight matrix, checking the graph invariants."""
    F = np.array(weights, dtype=float)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise ValueError(f"weight matrix must be square, got shape {F.shape}")
    if not np.allclose(F, F.T, rtol=0, atol=1e-12):
        raise ValueError("weight matrix must be symmetric")
    if F.size and (F.min() < 0 or F.max() > 1):
        raise ValueError("weights must lie in [0, 1]")
    if not np.allclose(np.diag(F), 1.0):
        raise ValueError("diagonal weights must be 1")
    if entity_index is None:
        entity_index = EntityIndex(str(i) for i in range(F.shape[0]))
    elif len(entity_index) != F.shape[0]:
        raise ValueError("entity index size does not match weight matrix")
    F.setflags(write=False)
    return ConnectivityGraph(entity_index, F, window_start, graph_window)


def correlation_magnitude(Y: np.ndarray) -> np.ndarray:
    """|Pearson r| between rows of ``Y`` with unit diagonal; constant rows get 0."""
    Y = np.asarray(Y, dtype=float)
    n, N = Y.shape
    if N < 2:
        raise InsufficientSamplesError(f"need at least 2 samples per signal, got {N}")
    centred = Y - Y.mean(axis=1, keepdims=True)
    cov = centred @ centred.T / (N - 1)
    std = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    scale = np.abs(Y).max(axis=1) if n else np.zeros(0)
    live = std > ZERO_VARIANCE_RTOL * np.maximum(scale, 1e-300)

    F = np.zeros((n, n))
    idx = np.flatnonzero(live)
    if idx.size:
        sub = cov[np.ix_(idx, idx)] / np.outer(std[idx], std[idx])
        F[np.ix_(idx, idx)] = np.abs(sub)
    F = np.minimum((F + F.T) / 2.0, 1.0)
    np.fill_diagonal(F, 1.0)
    return F


def pearson_graph(frame: SignalFrame) -> ConnectivityGraph:
    F = correlation_magnitude(frame.values)
    F.setflags(write=False)
    return ConnectivityGraph(frame.entity_index, F, frame.window_start, frame.graph_window)


def smooth(prev: ConnectivityGraph | None, current: ConnectivityGraph, forget_factor: float) -> ConnectivityGraph:
    """Blend the running graph with the current one: ``(1-rho) F_prev + rho F``.

    With no previous graph the current one is returned unchanged.
    """
    if not 0.0 <= forget_factor <= 1.0:
        raise ValueError(f"forget factor must lie in [0, 1], got {forget_factor}")
    if prev is None:
        return current
    if prev.weights.shape != current.weights.shape:
        raise ValueError(f"graph dimensions differ: {prev.weights.shape} vs {current.weights.shape}")
    F = (1.0 - forget_factor) * prev.weights + forget_factor * current.weights
    F.setflags(write=False)
    return ConnectivityGraph(current.entity_index, F, current.window_start, current.graph_window)


def max_eigenvalue(graph, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Largest eigenvalue of a symmetric nonnegative weight matrix by power iteration.

    Accepts a :class:`ConnectivityGraph` or a bare matrix. Iteration starts from
    the all-ones vector, which is never orthogonal to the Perron vector of a
    nonnegative matrix.
    """
    F = graph.weights if isinstance(graph, ConnectivityGraph) else np.asarray(graph, dtype=float)
    n = F.shape[0]
    if n == 0:
        raise ValueError("empty graph")
    x = np.full(n, 1.0 / np.sqrt(n))
    lam = float(x @ F @ x)
    for _ in range(max_iter):
        y = F @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x_new = y / norm
        lam_new = float(x_new @ F @ x_new)
        residual = np.linalg.norm(F @ x_new - lam_new * x_new)
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)) and residual <= np.sqrt(tol) * max(1.0, abs(lam_new)):
            return lam_new
        x, lam = x_new, lam_new
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")
