"""Linear MMSE risk estimator.

Risks propagate through the connectivity graph, ``x(t+tau) = F x(t) + w``, and
a few entities are measured directly, ``z = H x + v``. The estimator is the
discrete Kalman filter over that model, followed by a relief scaling that
keeps unobserved risks bounded.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .connectivity import ConnectivityGraph

DEFAULT_PROCESS_NOISE = 1e-3
PIVOT_RTOL = 1e-12


class SingularInnovationWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class RiskState:
    """Mean risk vector and error covariance at time ``t``."""

    mean: np.ndarray
    cov: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float).reshape(mean.size, mean.size)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n(self) -> int:
        return self.mean.size

    @property
    def variance(self) -> np.ndarray:
        return np.diag(self.cov).copy()


@dataclass(frozen=True)
class MeasurementBatch:
    """Risk measurements taken at one time: entity positions, values, variances."""

    indices: Sequence[int]
    values: Sequence[float]
    variances: Sequence[float]
    t: float = 0.0
    allow_exact: bool = False

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        variances = np.asarray(self.variances, dtype=float).reshape(-1)
        if not len(indices) == values.size == variances.size:
            raise ValueError("indices, values and variances must have equal length")
        if len(set(indices)) != len(indices):
            raise ValueError("measured entities must be distinct")
        if np.any(variances < 0) or (not self.allow_exact and np.any(variances == 0)):
            raise ValueError("measurement variances must be positive (or >= 0 with allow_exact)")
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "variances", variances)

    @classmethod
    def empty(cls, t: float = 0.0) -> "MeasurementBatch":
        return cls((), (), (), t)

    def __len__(self) -> int:
        return len(self.indices)

    def selection_matrix(self, n: int) -> np.ndarray:
        H = np.zeros((len(self.indices), n))
        H[np.arange(len(self.indices)), self.indices] = 1.0
        return H


@dataclass(frozen=True)
class NoiseModel:
    """Diagonal process noise, one variance per entity."""

    variances: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        q = np.asarray(self.variances, dtype=float).reshape(-1)
        if np.any(q < 0):
            raise ValueError("process noise variances must be >= 0")
        object.__setattr__(self, "variances", q)

    @classmethod
    def isotropic(cls, n: int, variance: float = DEFAULT_PROCESS_NOISE) -> "NoiseModel":
        return cls(np.full(n, float(variance)))

    @property
    def covariance(self) -> np.ndarray:
        return np.diag(self.variances)


def init_state(n: int, level: float = 1.0, variance: float = DEFAULT_PROCESS_NOISE, t: float = 0.0) -> RiskState:
    """Uniform prior: every mean at ``level``, independent errors of ``variance``."""
    if n < 1:
        raise ValueError("need at least one entity")
    if variance < 0:
        raise ValueError("prior variance must be >= 0")
    return RiskState(np.full(n, float(level)), variance * np.eye(n), t)


def _weights(graph) -> np.ndarray:
    return graph.weights if isinstance(graph, ConnectivityGraph) else np.asarray(graph, dtype=float)


def predict(state: RiskState, graph, noise: NoiseModel, dt: float | None = None) -> RiskState:
    """A priori state after one graph window: ``F x``, ``F P F^T + Q``."""
    F = _weights(graph)
    n = state.n
    if F.shape != (n, n):
        raise ValueError(f"graph is {F.shape}, state has {n} entities")
    if noise.variances.size != n:
        raise ValueError(f"noise model has {noise.variances.size} entries, state has {n}")
    if dt is None:
        dt = graph.graph_window if isinstance(graph, ConnectivityGraph) else 0.0
    mean = F @ state.mean
    cov = F @ state.cov @ F.T + np.diag(noise.variances)
    return RiskState(mean, (cov + cov.T) / 2.0, state.t + dt)


def _solve_innovation(S: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """``rhs @ S^-1`` for symmetric PSD ``S``; pseudo-inverse when near singular."""
    m = S.shape[0]
    threshold = PIVOT_RTOL * np.trace(S) / m
    try:
        chol = np.linalg.cholesky(S)
        if np.min(np.diag(chol)) ** 2 >= threshold and threshold > 0:
            # rhs S^-1 = (S^-1 rhs^T)^T
            tmp = np.linalg.solve(chol, rhs.T)
            return np.linalg.solve(chol.T, tmp).T
    except np.linalg.LinAlgError:
        pass
    warnings.warn("innovation covariance is numerically singular; using pseudo-inverse", SingularInnovationWarning)
    w, V = np.linalg.eigh(S)
    cutoff = PIVOT_RTOL * max(abs(w).max(), 1e-300)
    inv_w = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
    return rhs @ (V * inv_w) @ V.T


def update(prior: RiskState, batch: MeasurementBatch | None) -> RiskState:
    """Condition the prior on a measurement batch; an empty batch is a no-op."""
    if batch is None or len(batch) == 0:
        return prior
    n = prior.n
    idx = np.asarray(batch.indices)
    if idx.min() < 0 or idx.max() >= n:
        raise IndexError(f"measurement index out of range for {n} entities")
    P = prior.cov
    PHt = P[:, idx]                               # P H^T
    S = P[np.ix_(idx, idx)] + np.diag(batch.variances)
    K = _solve_innovation(S, PHt)                 # P H^T S^-1
    innovation = batch.values - prior.mean[idx]
    mean = prior.mean + K @ innovation
    cov = P - K @ S @ K.T
    return RiskState(mean, (cov + cov.T) / 2.0, prior.t)


def relieve(state: RiskState, relief: float) -> RiskState:
    """Scale mean by ``1 - relief`` and covariance by its square."""
    if not 0.0 <= relief < 1.0:
        raise ValueError(f"relief factor must lie in [0, 1), got {relief}")
    keep = 1.0 - relief
    return RiskState(keep * state.mean, keep * keep * state.cov, state.t)


def relief_rule_of_thumb(lambda_max: float) -> float:
    """Relief ``1 - 1/lambda_max`` that cancels growth along the dominant mode."""
    if lambda_max < 1.0 - 1e-12:
        raise ValueError(f"largest eigenvalue must be >= 1, got {lambda_max}")
    return max(0.0, 1.0 - 1.0 / lambda_max)


def step(
    state: RiskState,
    graph,
    batch: MeasurementBatch | None,
    noise: NoiseModel,
    relief: float,
    dt: float | None = None,
) -> RiskState:
    """One estimator cycle: predict, update, relieve."""
    return relieve(update(predict(state, graph, noise, dt), batch), relief)
