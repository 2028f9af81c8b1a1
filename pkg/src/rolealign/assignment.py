"""Exact bipartite assignment and doubly-stochastic matrix normalization.

The Hungarian solver is the shortest-augmenting-path (Jonker-Volgenant style)
variant, O(n^3) for an n x n matrix, written in plain Python: it runs once per
frame inside the hard-assignment baseline, so its constant factor is part of
what the benchmarks measure.  Ties between equal-cost optima are broken
deterministically in favour of the lexicographically smallest row->column
mapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class SinkhornConvergenceError(RuntimeError):
    """Raised when a matrix has no doubly-stochastic scaling (zero row/col)."""


@dataclass(frozen=True)
class Assignment:
    """An injective row->column mapping and its total cost."""

    mapping: np.ndarray
    total_cost: float

    def __post_init__(self):
        m = np.array(self.mapping, dtype=int)
        m.flags.writeable = False
        object.__setattr__(self, "mapping", m)
        object.__setattr__(self, "total_cost", float(self.total_cost))


def _jv_square(cost: list[list[float]]) -> tuple[list[int], list[float], list[float]]:
    """Solve a square assignment problem; returns (row->col, row duals, col duals).

    Classic 1-indexed shortest-augmenting-path formulation; column 0 is the
    virtual start column.
    """
    n = len(cost)
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    matched = [0] * (n + 1)   # matched[j] = row occupying column j (1-based, 0 = free)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        matched[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = matched[j0]
            row = cost[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - ui0 - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[matched[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if matched[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            matched[j0] = matched[j1]
            j0 = j1
    mapping = [0] * n
    for j in range(1, n + 1):
        if matched[j]:
            mapping[matched[j] - 1] = j - 1
    return mapping, u[1:], v[1:]


def _find_augmenting(row, adj, row_to_col, col_to_row, visited, blocked):
    for j in adj[row]:
        if blocked[j] or visited[j]:
            continue
        visited[j] = True
        occupant = col_to_row[j]
        if occupant < 0 or _find_augmenting(occupant, adj, row_to_col,
                                            col_to_row, visited, blocked):
            row_to_col[row] = j
            col_to_row[j] = row
            return True
    return False


def _lex_refine(cost, mapping, u, v, n_real):
    """Rewrite ``mapping`` into the lexicographically smallest optimal one.

    Works on the tight subgraph (zero reduced cost edges) of the solved
    problem: by complementary slackness every perfect matching of tight edges
    is optimal.  Rows are fixed in order, each to the smallest column that
    still leaves the remaining rows matchable.
    """
    n = len(cost)
    arr = np.asarray(cost)
    scale = max(1.0, float(np.abs(arr).max()))
    tol = 1e-9 * scale
    tight = (arr - np.asarray(u)[:, None] - np.asarray(v)[None, :]) <= tol
    if int(tight.sum()) <= n:
        return mapping  # unique optimal matching, nothing to refine
    adj = [np.nonzero(tight[i])[0].tolist() for i in range(n)]
    row_to_col = list(mapping)
    col_to_row = [-1] * n
    for i, j in enumerate(row_to_col):
        col_to_row[j] = i
    blocked = [False] * n
    for i in range(n_real):
        current = row_to_col[i]
        for j in adj[i]:
            if blocked[j]:
                continue
            if j == current:
                break
            if j > current:
                break
            displaced = col_to_row[j]
            saved_rows = list(row_to_col)
            saved_cols = list(col_to_row)
            row_to_col[i] = j
            col_to_row[j] = i
            col_to_row[current] = -1   # the vacated column is free again
            row_to_col[displaced] = -1
            blocked[j] = True
            if _find_augmenting(displaced, adj, row_to_col, col_to_row,
                                [False] * n, blocked):
                blocked[j] = False
                break
            blocked[j] = False
            row_to_col[:] = saved_rows
            col_to_row[:] = saved_cols
        blocked[row_to_col[i]] = True
    refined_cost = sum(cost[i][row_to_col[i]] for i in range(n))
    original_cost = sum(cost[i][mapping[i]] for i in range(n))
    if refined_cost > original_cost + 1e-6 * scale:
        return mapping  # tolerance artifact; keep the provably optimal result
    return row_to_col


def hungarian(cost, lexicographic: bool = True) -> Assignment:
    """Minimum-cost injective assignment of rows to columns.

    ``cost`` is an n x m array-like with n <= m and finite entries.  Matrices
    with n < m are padded to square with a sentinel (max entry + 1); the
    padding rows are discarded from the result.  The returned assignment is
    exactly optimal; with ``lexicographic`` the mapping is additionally the
    lexicographically smallest among equal-cost optima.
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.shape[0] < 1:
        raise ValueError("cost must be a 2-D matrix with at least one row")
    n, m = c.shape
    if n > m:
        raise ValueError(f"cost matrix must have n <= m, got {n}x{m}")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix contains non-finite entries")
    rows = c.tolist()
    if n < m:
        sentinel = float(c.max()) + 1.0
        rows = rows + [[sentinel] * m for _ in range(m - n)]
    mapping, u, v = _jv_square(rows)
    if lexicographic:
        mapping = _lex_refine(rows, mapping, u, v, n)
    mapping = np.array(mapping[:n])
    total = float(c[np.arange(n), mapping].sum())
    return Assignment(mapping=mapping, total_cost=total)


@dataclass(frozen=True)
class SinkhornResult:
    matrix: np.ndarray
    iterations: int
    converged: bool


def sinkhorn_normalize(q, max_iters: int = 1000, tol: float = 1e-6) -> SinkhornResult:
    """Scale a non-negative square matrix towards doubly stochastic form.

    Alternates row and column normalization until every row and column sum is
    within ``tol`` of 1 or ``max_iters`` is reached (reported via
    ``converged``).  A zero row or column makes the target unreachable and
    raises ``SinkhornConvergenceError``; the zero pattern of the input is
    always preserved.
    """
    a = np.array(q, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if np.any(a < 0):
        raise ValueError("matrix entries must be non-negative")
    if np.any(a.sum(axis=1) == 0.0) or np.any(a.sum(axis=0) == 0.0):
        raise SinkhornConvergenceError("matrix has a zero row or column")

    def max_deviation(x):
        return max(np.abs(x.sum(axis=1) - 1.0).max(),
                   np.abs(x.sum(axis=0) - 1.0).max())

    for it in range(max_iters):
        if max_deviation(a) <= tol:
            return SinkhornResult(matrix=a, iterations=it, converged=True)
        a = a / a.sum(axis=1, keepdims=True)
        a = a / a.sum(axis=0, keepdims=True)
    return SinkhornResult(matrix=a, iterations=max_iters,
                          converged=max_deviation(a) <= tol)
