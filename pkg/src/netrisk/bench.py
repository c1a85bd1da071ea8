"""Network-state classification harness.

Risk-estimate features (NRE) are compared with a flow-based network state
inference baseline (FBNSI) that classifies individual flows and reports the
attack-flow fraction of each window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .config import RunConfig
from .flows import FlowRecord, build_entity_index
from .partition import partition_to_size
from .pipeline import StreamRun, bucket_flows, history_graph, run_stream, window_count
from .signals import get_parameter

BENIGN = "BENIGN"
ATTACK = "ATTACK"


class SingleClassError(ValueError):
    """Both classes are required but only one is present."""


class UnlabeledDataError(ValueError):
    pass


def label_windows(flows: Sequence[FlowRecord], graph_window: float, start: float = 0.0,
                  n_windows: int | None = None) -> list[str]:
    """ATTACK for windows holding at least one attack flow, else BENIGN."""
    if any(f.label is None for f in flows):
        raise UnlabeledDataError("every flow needs a label to derive window labels")
    count = window_count(flows, graph_window, start) if n_windows is None else n_windows
    labels = [BENIGN] * count
    for k, bucket in enumerate(bucket_flows(flows, graph_window, start, count)):
        if any(f.is_attack for f in bucket):
            labels[k] = ATTACK
    return labels


def nre_features(run: StreamRun, relative: bool = False) -> np.ndarray:
    """Windows x entities matrix of mean risks, groups concatenated in order.

    With ``relative=True`` each row is divided by its L1 norm, giving the
    relative risk distribution. That removes the per-window scale set by the
    relief factor, which otherwise drifts when the graph changes between
    windows.
    """
    n_windows = len(run.window_starts)
    rows = []
    for k in range(n_windows):
        snaps = sorted(run.window_snapshots(k), key=lambda s: s.group)
        rows.append(np.concatenate([s.mean for s in snaps]) if snaps else np.zeros(0))
    X = np.vstack(rows) if rows else np.zeros((0, len(run.entity_index)))
    if relative and X.size:
        norms = np.abs(X).sum(axis=1, keepdims=True)
        X = np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)
    return X


class GaussianNB:
    """Two-class Gaussian naive Bayes returning log-posterior differences."""

    def __init__(self, var_smoothing: float = 1e-9):
        self.var_smoothing = var_smoothing

    def fit(self, X, y) -> "GaussianNB":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y).astype(bool)
        if X.ndim == 1:
            X = X[:, None]
        if y.all() or not y.any():
            raise SingleClassError("training set needs samples of both classes")
        floor = self.var_smoothing * float(np.var(X, axis=0).mean())
        if floor <= 0:
            floor = self.var_smoothing
        self.means_ = np.vstack([X[~y].mean(axis=0), X[y].mean(axis=0)])
        self.vars_ = np.vstack([X[~y].var(axis=0), X[y].var(axis=0)]) + floor
        self.log_priors_ = np.log([np.mean(~y), np.mean(y)])
        return self

    def _log_likelihood(self, X, cls):
        mu, var = self.means_[cls], self.vars_[cls]
        return -0.5 * np.sum(np.log(2 * np.pi * var) + (X - mu) ** 2 / var, axis=1)

    def score(self, X) -> np.ndarray:
        """log P(attack | x) - log P(benign | x); positive means attack."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        return (self.log_priors_[1] + self._log_likelihood(X, 1)) - (self.log_priors_[0] + self._log_likelihood(X, 0))

    def predict(self, X) -> np.ndarray:
        return self.score(X) > 0


def gaussian_nb(train_X, train_y, test_X) -> np.ndarray:
    return GaussianNB().fit(train_X, train_y).score(test_X)


def flow_features(flows: Sequence[FlowRecord], param) -> np.ndarray:
    """Flow attributes behind a connection parameter, one row per flow."""
    attrs = get_parameter(param).flow_attributes
    if not attrs:
        raise ValueError(f"{get_parameter(param).name} has no flow-level attributes")
    return np.array([[float(getattr(f, a)) for a in attrs] for f in flows], dtype=float).reshape(len(flows), len(attrs))


@dataclass(frozen=True)
class FbnsiScore:
    likelihood: float
    empty: bool


def fbnsi_score(window_flows: Sequence[FlowRecord], classifier, param) -> FbnsiScore:
    """Fraction of the window's flows the flow classifier calls attack."""
    if not window_flows:
        return FbnsiScore(0.0, True)
    flagged = np.asarray(classifier.predict(flow_features(window_flows, param)), dtype=bool)
    return FbnsiScore(float(flagged.mean()), False)


@dataclass(frozen=True)
class RocCurve:
    points: tuple[tuple[float, float, float], ...]  # (threshold, fpr, tpr)
    auc: float

    @property
    def fpr(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    @property
    def tpr(self) -> np.ndarray:
        return np.array([p[2] for p in self.points])


def _binary(labels) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.dtype.kind in "UO":
        return np.array([str(v).upper() != BENIGN and str(v) != "0" for v in labels])
    return labels.astype(bool)


def roc(scores, labels) -> RocCurve:
    """Empirical ROC over distinct score thresholds (positive iff score >= threshold)."""
    scores = np.asarray(scores, dtype=float)
    y = _binary(labels)
    pos, neg = int(y.sum()), int((~y).sum())
    if pos == 0 or neg == 0:
        raise SingleClassError("ROC needs both classes")
    points = [(math.inf, 0.0, 0.0)]
    for thr in np.unique(scores)[::-1]:
        flagged = scores >= thr
        points.append((float(thr), float((flagged & ~y).sum() / neg), float((flagged & y).sum() / pos)))
    fpr = np.array([p[1] for p in points])
    tpr = np.array([p[2] for p in points])
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(tuple(points), auc)


def confusion(scores, labels, threshold: float) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn) when flagging ``score >= threshold``."""
    y = _binary(labels)
    flagged = np.asarray(scores, dtype=float) >= threshold
    return (int((flagged & y).sum()), int((flagged & ~y).sum()),
            int((~flagged & ~y).sum()), int((~flagged & y).sum()))


def balanced_accuracy(conf: tuple[int, int, int, int]) -> float:
    tp, fp, tn, fn = conf
    if tp + fn == 0 or tn + fp == 0:
        raise SingleClassError("balanced accuracy needs both classes")
    return 0.5 * (tp / (tp + fn) + tn / (tn + fp))


def peak_balanced_accuracy(curve: RocCurve) -> tuple[float, float]:
    """Best (TPR + 1 - FPR) / 2 over the curve and the threshold reaching it."""
    best = max(curve.points, key=lambda p: (0.5 * (p[2] + 1.0 - p[1]), -p[0]))
    return 0.5 * (best[2] + 1.0 - best[1]), best[0]


def chronological_split(n: int, fractions=(0.5, 0.25, 0.25)) -> tuple[slice, slice, slice]:
    if len(fractions) != 3 or any(f < 0 for f in fractions) or not math.isclose(sum(fractions), 1.0):
        raise ValueError("split fractions must be three non-negative numbers summing to 1")
    a = int(round(n * fractions[0]))
    b = int(round(n * (fractions[0] + fractions[1])))
    return slice(0, a), slice(a, b), slice(b, n)


@dataclass
class MethodResult:
    method: str
    val_curve: RocCurve
    test_curve: RocCurve
    val_peak_ba: float
    threshold: float
    test_ba: float
    val_scores: np.ndarray = field(repr=False)
    test_scores: np.ndarray = field(repr=False)

    @property
    def val_auc(self) -> float:
        return self.val_curve.auc

    @property
    def test_auc(self) -> float:
        return self.test_curve.auc


@dataclass
class BenchResult:
    param: str
    graph_window: float
    labels: list[str]
    split: tuple[slice, slice, slice]
    nre: MethodResult
    fbnsi: MethodResult
    run: StreamRun = field(repr=False)


def _evaluate(method, val_scores, val_labels, test_scores, test_labels) -> MethodResult:
    val_curve = roc(val_scores, val_labels)
    test_curve = roc(test_scores, test_labels)
    peak, thr = peak_balanced_accuracy(val_curve)
    test_ba = balanced_accuracy(confusion(test_scores, test_labels, thr))
    return MethodResult(method, val_curve, test_curve, peak, thr, test_ba,
                        np.asarray(val_scores), np.asarray(test_scores))


def run_experiment(
    flows: Sequence[FlowRecord],
    config: RunConfig,
    *,
    history: Sequence[FlowRecord] | None = None,
    fractions=(0.5, 0.25, 0.25),
    start: float = 0.0,
    relative_features: bool = True,
) -> BenchResult:
    """Both methods on the same chronologically split windows.

    The entity partition comes from ``history`` when given, otherwise from the
    training windows' flows. The estimator runs without risk measurements.
    """
    param = get_parameter(config.param)
    tau = config.graph_window
    count = window_count(flows, tau, start)
    labels = label_windows(flows, tau, start, count)
    train, val, test = chronological_split(count, fractions)
    buckets = bucket_flows(flows, tau, start, count)

    index = build_entity_index(flows)
    hist = history if history is not None else [f for b in buckets[train] for f in b]
    if not hist:
        raise ValueError("no flows available for partition discovery")
    partition = partition_to_size(history_graph(hist, config, index), config.max_group_size)
    run = run_stream(flows, [], config, index, partition, start=start, n_windows=count)

    y = np.array([lab == ATTACK for lab in labels])
    X = nre_features(run, relative=relative_features)
    nb = GaussianNB().fit(X[train], y[train])
    nre = _evaluate("NRE", nb.score(X[val]), y[val], nb.score(X[test]), y[test])

    train_flows = [f for b in buckets[train] for f in b]
    flow_clf = GaussianNB().fit(flow_features(train_flows, param), [f.is_attack for f in train_flows])
    likelihood = np.array([fbnsi_score(b, flow_clf, param).likelihood for b in buckets])
    fbnsi = _evaluate("FBNSI", likelihood[val], y[val], likelihood[test], y[test])
    return BenchResult(param.name, tau, labels, (train, val, test), nre, fbnsi, run)


def compare_parameters(flows, config: RunConfig, params: Sequence[str], **kwargs) -> list[dict]:
    """One summary row per connection parameter (errors recorded, not raised)."""
    rows = []
    for name in params:
        row = {"param": name}
        try:
            res = run_experiment(flows, replace(config, param=name), **kwargs)
        except (SingleClassError, ValueError) as exc:
            row["error"] = str(exc)
        else:
            for m in (res.nre, res.fbnsi):
                key = m.method.lower()
                row[f"{key}_val_auc"] = m.val_auc
                row[f"{key}_test_auc"] = m.test_auc
                row[f"{key}_val_peak_ba"] = m.val_peak_ba
                row[f"{key}_test_ba"] = m.test_ba
        rows.append(row)
    return rows


def tune_forget_factor(flows, config: RunConfig, grid=(0.25, 0.5, 0.75, 1.0), **kwargs) -> tuple[float, list[tuple[float, float]]]:
    """Forget factor maximizing NRE validation AUC over ``grid``.

    Returns the best value and the ``(forget_factor, val_auc)`` trace.
    """
    trace = []
    for rho in grid:
        res = run_experiment(flows, replace(config, forget_factor=rho), **kwargs)
        trace.append((rho, res.nre.val_auc))
    best = max(trace, key=lambda item: (item[1], item[0]))[0]
    return best, trace
