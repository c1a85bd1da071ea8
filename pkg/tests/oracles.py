"""Independent reference implementations used as test oracles.

Nothing here imports the package's numerical code; each oracle is the
slowest obvious way to compute the quantity.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def pearson_magnitude(Y, zero_rtol=1e-12):
    """Double loop over pairs with the textbook sample formulas."""
    Y = [list(map(float, row)) for row in Y]
    n = len(Y)
    N = len(Y[0])
    means = [sum(r) / N for r in Y]
    sds = [math.sqrt(sum((v - m) ** 2 for v in r) / (N - 1)) for r, m in zip(Y, means)]
    live = [sd > zero_rtol * max(max(abs(v) for v in r), 1e-300) for r, sd in zip(Y, sds)]
    F = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                F[i, j] = 1.0
            elif live[i] and live[j]:
                cov = sum((Y[i][k] - means[i]) * (Y[j][k] - means[j]) for k in range(N)) / (N - 1)
                F[i, j] = min(abs(cov / (sds[i] * sds[j])), 1.0)
    return F


def joint_gaussian_posterior(m0, P0, graphs, Q, measurements):
    """Posterior of the last state by conditioning the full joint Gaussian.

    ``graphs[t]`` propagates x_t -> x_{t+1}; ``measurements[t]`` is a list of
    (index, value, variance) observed on x_{t+1}. Builds X = A [x_0, w_1..w_T],
    Z = H X + v and conditions in one shot.
    """
    n = len(m0)
    T = len(graphs)
    dim = n * (T + 1)
    # x_t = Phi_t x_0 + sum_k Psi_{t,k} w_k, stacked as a linear map from (x_0, w_1..w_T)
    A = np.zeros((dim, dim))
    A[:n, :n] = np.eye(n)
    for t in range(1, T + 1):
        F = np.asarray(graphs[t - 1], dtype=float)
        prev = A[(t - 1) * n:t * n, :]
        A[t * n:(t + 1) * n, :] = F @ prev
        A[t * n:(t + 1) * n, t * n:(t + 1) * n] += np.eye(n)
    source_cov = np.zeros((dim, dim))
    source_cov[:n, :n] = P0
    for t in range(1, T + 1):
        source_cov[t * n:(t + 1) * n, t * n:(t + 1) * n] = Q
    source_mean = np.zeros(dim)
    source_mean[:n] = m0
    mu_X = A @ source_mean
    S_X = A @ source_cov @ A.T

    rows, z, r = [], [], []
    for t, batch in enumerate(measurements, start=1):
        for idx, value, var in batch:
            h = np.zeros(dim)
            h[t * n + idx] = 1.0
            rows.append(h)
            z.append(value)
            r.append(var)
    last = slice(T * n, (T + 1) * n)
    if not rows:
        return mu_X[last], S_X[last, last]
    H = np.array(rows)
    S_ZZ = H @ S_X @ H.T + np.diag(r)
    S_XZ = S_X[last, :] @ H.T
    gain = np.linalg.solve(S_ZZ, S_XZ.T).T
    mean = mu_X[last] + gain @ (np.array(z) - H @ mu_X)
    cov = S_X[last, last] - gain @ S_XZ.T
    return mean, cov


def simple_paths(adj, src, dst):
    """Every simple path from src to dst (DFS enumeration)."""
    out = []
    stack = [(src, (src,))]
    while stack:
        node, path = stack.pop()
        if node == dst:
            out.append(path)
            continue
        for nxt in adj[node]:
            if nxt not in path:
                stack.append((nxt, path + (nxt,)))
    return out


def best_path(adj, risks, src, dst, include_endpoints=True):
    """Min-max path by exhaustive enumeration with the fewest-hops, then
    lexicographic tie rule. Returns (path, risk) or None."""
    best = None
    for path in simple_paths(adj, src, dst):
        nodes = path if include_endpoints else path[1:-1]
        risk = max((risks[v] for v in nodes), default=-math.inf)
        key = (risk, len(path), path)
        if best is None or key < best:
            best = key
    if best is None:
        return None
    return best[2], best[0]


def cut(F, mask):
    F = np.asarray(F, dtype=float)
    total = 0.0
    n = len(mask)
    for i in range(n):
        for j in range(i + 1, n):
            if mask[i] != mask[j]:
                total += F[i, j]
    return total


def min_ratio_cut(F):
    """Exhaustive minimum of cut/|A| + cut/|B| over all bipartitions."""
    n = F.shape[0]
    best = (math.inf, None)
    for bits in itertools.product((0, 1), repeat=n - 1):
        mask = (0,) + bits  # fix node 0 on side 0 to skip mirror images
        size_b = sum(mask)
        if size_b == 0:
            continue
        c = cut(F, mask)
        value = c / (n - size_b) + c / size_b
        if value < best[0]:
            best = (value, mask)
    return best


def auc_by_pairs(scores, labels):
    """Probability a positive outscores a negative, ties counted half."""
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def gaussian_log_density(x, mean, var):
    return -0.5 * math.log(2 * math.pi * var) - (x - mean) ** 2 / (2 * var)
