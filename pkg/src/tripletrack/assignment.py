"""Minimum-cost bipartite assignment with optional cost gating.

The solver returns a maximum-cardinality matching (min(rows, cols) pairs)
of minimum total cost. Costs must be finite and nonnegative; ``inf`` is
accepted as a "forbidden pair" marker, and forbidden pairs forced into
the matching by the cardinality requirement are dropped from the result.

Tie-breaking is canonical: among all minimum-cost matchings, the one
whose (row, column) pair list, sorted by row, is lexicographically
smallest is returned. Ties are judged by exact float equality of totals
(each total is the sum of chosen entries in ascending row order), which
resolves exactly on the integer-like matrices where ties actually occur.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CostMatrixError


@dataclass(frozen=True)
class Assignment:
    """Result of a bipartite matching.

    ``pairs`` is sorted by row index; each row and column appears at most
    once. Rows and columns left out of the matching (by shape, forbidden
    entries, or gating) are listed in the unmatched tuples.
    """

    pairs: tuple[tuple[int, int], ...]
    unmatched_rows: tuple[int, ...]
    unmatched_cols: tuple[int, ...]

    @property
    def row_to_col(self) -> dict[int, int]:
        return {r: c for r, c in self.pairs}


def assignment_total(costs: np.ndarray, pairs) -> float:
    """Total cost of a pair list, summed in ascending row order.

    All cost totals in this module (including test oracles) must go
    through this helper so that float comparisons between alternative
    matchings are order-consistent.
    """
    total = 0.0
    for r, c in sorted(pairs):
        total += float(costs[r, c])
    return total


def _validate(costs) -> np.ndarray:
    a = np.asarray(costs, dtype=np.float64)
    if a.ndim != 2:
        raise CostMatrixError(f"cost matrix must be 2-D, got shape {a.shape}")
    if np.any(np.isnan(a)):
        raise CostMatrixError("cost matrix contains NaN")
    finite = a[np.isfinite(a)]
    if finite.size and np.any(finite < 0.0):
        raise CostMatrixError("cost matrix contains negative entries")
    return a


def _augmenting_solve(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Shortest-augmenting-path assignment for a finite R <= C matrix.

    Returns (col_for_row, u, v) where u, v are the final dual potentials.
    Column scans run in increasing index order, so internal ties already
    lean toward low indices; exact canonicalization happens on top.
    """
    rows, cols = a.shape
    inf = np.inf
    u = np.zeros(rows)
    v = np.zeros(cols + 1)  # index `cols` is the virtual start column
    owner = np.full(cols + 1, -1, dtype=int)  # row matched to each column
    for i in range(rows):
        owner[cols] = i
        j0 = cols
        minv = np.full(cols + 1, inf)
        way = np.full(cols + 1, cols, dtype=int)
        used = np.zeros(cols + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            free = ~used[:cols]
            cand = a[i0, :] - u[i0] - v[:cols]
            improve = free & (cand < minv[:cols])
            minv[:cols][improve] = cand[improve]
            way[:cols][improve] = j0
            masked = np.where(free, minv[:cols], inf)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            used_cols = used[:cols]
            u[owner[:cols][used_cols]] += delta
            u[owner[cols]] += delta  # virtual column is always in the tree
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if owner[j0] < 0:
                break
        while j0 != cols:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    col_for_row = np.full(rows, -1, dtype=int)
    for j in range(cols):
        if owner[j] >= 0:
            col_for_row[owner[j]] = j
    return col_for_row, u, v[:cols]


def _min_cost_pairs(a: np.ndarray) -> tuple[list[tuple[int, int]], np.ndarray]:
    """Minimum-cost max-cardinality pairs plus the reduced-cost matrix."""
    rows, cols = a.shape
    if rows == 0 or cols == 0:
        return [], a.copy()
    if rows <= cols:
        col_for_row, u, v = _augmenting_solve(a)
        pairs = [(r, int(c)) for r, c in enumerate(col_for_row)]
        reduced = a - u[:, None] - v[None, :]
    else:
        row_for_col, u, v = _augmenting_solve(a.T)
        pairs = sorted((int(r), c) for c, r in enumerate(row_for_col))
        reduced = a - v[:, None] - u[None, :]
    return pairs, reduced


def _canonicalize(
    a: np.ndarray, witness: list[tuple[int, int]], reduced: np.ndarray
) -> list[tuple[int, int]]:
    """Lexicographically smallest pair list among minimum-cost matchings.

    Row by row, fixes the smallest feasible column; feasibility of a
    candidate pair means the constrained problem still reaches the
    optimal total exactly. Candidates are pre-filtered by complementary
    slackness (a pair in any optimal matching has zero reduced cost under
    optimal potentials), so on matrices with a unique optimum no
    sub-solves run at all.
    """
    rows, cols = a.shape
    target = min(rows, cols)
    if target == 0:
        return []
    best_total = assignment_total(a, witness)
    tol = 1e-8 * (1.0 + float(np.max(a)))

    fixed: list[tuple[int, int]] = []
    avail = list(range(cols))
    # Invariant: fixed + {(r, witness_map[r]) for remaining rows} is an
    # optimal matching; witness columns are therefore always feasible.
    witness_map: dict[int, int] = dict(witness)

    for r in range(rows):
        needed = target - len(fixed)
        if needed == 0:
            break
        witness_col = witness_map.get(r)
        candidates = [
            c for c in avail if reduced[r, c] <= tol or c == witness_col
        ]
        chosen = None
        for c in candidates:
            if c == witness_col:
                chosen = c
                break
            sub_rows = list(range(r + 1, rows))
            sub_cols = [x for x in avail if x != c]
            if sub_rows and sub_cols:
                sub_pairs, _ = _min_cost_pairs(a[np.ix_(sub_rows, sub_cols)])
            else:
                sub_pairs = []
            trial = fixed + [(r, c)] + [
                (sub_rows[i], sub_cols[j]) for i, j in sub_pairs
            ]
            if len(trial) == target and assignment_total(a, trial) == best_total:
                chosen = c
                witness_map = {sub_rows[i]: sub_cols[j] for i, j in sub_pairs}
                break
        if chosen is None:
            continue  # row unmatched in the canonical optimum (rows > cols)
        fixed.append((r, chosen))
        avail.remove(chosen)
    return fixed


def solve(costs) -> Assignment:
    """Minimum-cost assignment of min(R, C) cardinality.

    ``inf`` entries are forbidden pairs: the solver avoids them whenever
    a full-cardinality matching without them exists, and otherwise drops
    them from the result, reporting the affected rows/columns unmatched.
    An empty matrix yields an empty assignment.
    """
    a = _validate(costs)
    rows, cols = a.shape
    if rows == 0 or cols == 0:
        return Assignment(
            pairs=(),
            unmatched_rows=tuple(range(rows)),
            unmatched_cols=tuple(range(cols)),
        )
    forbidden = ~np.isfinite(a)
    work = a
    if np.any(forbidden):
        finite = a[~forbidden]
        top = float(finite.max()) if finite.size else 0.0
        big = top * min(rows, cols) + 1.0
        if not np.isfinite(big):
            raise CostMatrixError(
                "finite costs too large to combine with forbidden entries"
            )
        work = np.where(forbidden, big, a)
    pairs, reduced = _min_cost_pairs(work)
    pairs = _canonicalize(work, pairs, reduced)
    kept = tuple(sorted((r, c) for r, c in pairs if not forbidden[r, c]))
    matched_r = {r for r, _ in kept}
    matched_c = {c for _, c in kept}
    return Assignment(
        pairs=kept,
        unmatched_rows=tuple(r for r in range(rows) if r not in matched_r),
        unmatched_cols=tuple(c for c in range(cols) if c not in matched_c),
    )


def solve_gated(costs, threshold: float) -> Assignment:
    """Solve, then discard matched pairs whose cost exceeds the threshold.

    Gating prunes the already-optimal matching rather than capping entries
    before solving; a pair at exactly the threshold is kept (strictly
    "larger than" is discarded).
    """
    if threshold < 0:
        raise ValueError(f"threshold must be nonnegative, got {threshold}")
    a = _validate(costs)
    full = solve(a)
    kept = tuple((r, c) for r, c in full.pairs if a[r, c] <= threshold)
    matched_r = {r for r, _ in kept}
    matched_c = {c for _, c in kept}
    return Assignment(
        pairs=kept,
        unmatched_rows=tuple(r for r in range(a.shape[0]) if r not in matched_r),
        unmatched_cols=tuple(c for c in range(a.shape[1]) if c not in matched_c),
    )
