import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tripletrack.assignment import Assignment, assignment_total, solve, solve_gated
from tripletrack.errors import CostMatrixError


def brute_force_best(costs: np.ndarray) -> tuple[float, list[tuple[int, int]]]:
    """Exhaustive minimum over all max-cardinality matchings.

    Returns the minimal total (row-ordered sum) and the lexicographically
    smallest pair list achieving it. Independent of the solver.
    """
    rows, cols = costs.shape
    best_total = None
    best_pairs = None
    if rows <= cols:
        row_ids = list(range(rows))
        for perm in itertools.permutations(range(cols), rows):
            pairs = sorted(zip(row_ids, perm))
            total = assignment_total(costs, pairs)
            if best_total is None or total < best_total or (
                total == best_total and pairs < best_pairs
            ):
                best_total, best_pairs = total, pairs
    else:
        col_ids = list(range(cols))
        for perm in itertools.permutations(range(rows), cols):
            pairs = sorted(zip(perm, col_ids))
            total = assignment_total(costs, pairs)
            if best_total is None or total < best_total or (
                total == best_total and pairs < best_pairs
            ):
                best_total, best_pairs = total, pairs
    return best_total, best_pairs


def test_diagonal_zeros():
    a = solve([[0.0, 9.0], [9.0, 0.0]])
    assert a.pairs == ((0, 0), (1, 1))
    assert assignment_total(np.array([[0.0, 9.0], [9.0, 0.0]]), a.pairs) == 0.0


def test_small_hand_case():
    costs = np.array([[1.0, 2.0], [3.0, 0.0]])
    a = solve(costs)
    assert a.pairs == ((0, 0), (1, 1))
    assert assignment_total(costs, a.pairs) == 1.0


def test_rectangular_hand_case():
    costs = np.array([[5.0, 1.0, 9.0], [1.0, 5.0, 9.0]])
    a = solve(costs)
    assert a.pairs == ((0, 1), (1, 0))
    assert a.unmatched_cols == (2,)
    assert assignment_total(costs, a.pairs) == 2.0


def test_empty_matrix():
    a = solve(np.zeros((0, 3)))
    assert a.pairs == ()
    assert a.unmatched_cols == (0, 1, 2)
    b = solve(np.zeros((2, 0)))
    assert b.pairs == ()
    assert b.unmatched_rows == (0, 1)


def test_nan_rejected():
    with pytest.raises(CostMatrixError):
        solve([[np.nan]])


def test_negative_rejected():
    with pytest.raises(CostMatrixError):
        solve([[-1.0]])


def test_all_zero_ties_canonical():
    a = solve(np.zeros((3, 3)))
    assert a.pairs == ((0, 0), (1, 1), (2, 2))


def test_tie_prefers_low_column_for_first_row():
    # Both assignments cost 2; canonical picks (0,0),(1,1).
    costs = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert solve(costs).pairs == ((0, 0), (1, 1))


def test_tie_canonical_nontrivial():
    # Optima: {(0,1),(1,0)} and {(0,0),(1,1)} both total 3.
    costs = np.array([[1.0, 2.0], [1.0, 2.0]])
    assert solve(costs).pairs == ((0, 0), (1, 1))


def test_forbidden_pairs_dropped():
    costs = np.array([[np.inf, 1.0], [np.inf, np.inf]])
    a = solve(costs)
    assert a.pairs == ((0, 1),)
    assert a.unmatched_rows == (1,)
    assert a.unmatched_cols == (0,)


def test_forbidden_avoided_when_possible():
    costs = np.array([[np.inf, 5.0], [1.0, 0.5]])
    a = solve(costs)
    assert a.pairs == ((0, 1), (1, 0))


@pytest.mark.parametrize("rows,cols", [(1, 1), (2, 2), (3, 3), (2, 4), (4, 2), (3, 5)])
def test_oracle_equivalence_random(rows, cols):
    rng = np.random.default_rng(rows * 100 + cols)
    for _ in range(150):
        costs = rng.uniform(0.0, 10.0, size=(rows, cols))
        got = solve(costs)
        best_total, _ = brute_force_best(costs)
        assert assignment_total(costs, got.pairs) == best_total


@pytest.mark.parametrize("rows,cols", [(2, 2), (3, 3), (3, 2), (2, 3), (4, 3)])
def test_canonical_matches_bruteforce_on_ties(rows, cols):
    # Small integer costs force many exact ties.
    rng = np.random.default_rng(rows * 17 + cols)
    for _ in range(200):
        costs = rng.integers(0, 3, size=(rows, cols)).astype(float)
        got = solve(costs)
        best_total, best_pairs = brute_force_best(costs)
        assert assignment_total(costs, got.pairs) == best_total
        assert list(got.pairs) == best_pairs


@given(
    st.integers(min_value=1, max_value=5),
    st.integers(min_value=1, max_value=5),
    st.integers(min_value=0, max_value=2**32 - 1),
)
@settings(max_examples=60, deadline=None)
def test_oracle_equivalence_hypothesis(rows, cols, seed):
    costs = np.random.default_rng(seed).uniform(0.0, 1.0, size=(rows, cols))
    got = solve(costs)
    best_total, _ = brute_force_best(costs)
    assert assignment_total(costs, got.pairs) == best_total


def test_permutation_equivariance():
    rng = np.random.default_rng(11)
    costs = rng.uniform(0.0, 5.0, size=(4, 4))
    base = solve(costs)
    perm = [2, 0, 3, 1]
    permuted = solve(costs[perm, :])
    base_costs = sorted(costs[r, c] for r, c in base.pairs)
    perm_costs = sorted(costs[perm[r], c] for r, c in permuted.pairs)
    assert base_costs == pytest.approx(perm_costs)


def test_gate_threshold_examples():
    a = solve_gated([[0.3, 0.9], [0.9, 0.3]], 0.59)
    assert a.pairs == ((0, 0), (1, 1))

    b = solve_gated([[0.7]], 0.59)
    assert b.pairs == ()
    assert b.unmatched_rows == (0,)
    assert b.unmatched_cols == (0,)

    # The boundary itself is kept: only strictly larger costs are discarded.
    c = solve_gated([[0.59]], 0.59)
    assert c.pairs == ((0, 0),)


def test_gating_monotonic():
    rng = np.random.default_rng(5)
    costs = rng.uniform(0.0, 1.0, size=(5, 5))
    full = solve(costs)
    assert solve_gated(costs, np.inf).pairs == full.pairs
    sizes = [
        len(solve_gated(costs, t).pairs)
        for t in [1.0, 0.8, 0.6, 0.4, 0.2, 0.0]
    ]
    assert sizes == sorted(sizes, reverse=True)


def test_gate_negative_threshold_rejected():
    with pytest.raises(ValueError):
        solve_gated([[1.0]], -0.1)


def test_scipy_cross_check():
    scipy_opt = pytest.importorskip("scipy.optimize")
    rng = np.random.default_rng(23)
    for shape in [(8, 8), (12, 20), (20, 12), (30, 30)]:
        costs = rng.uniform(0.0, 1.0, size=shape)
        got = solve(costs)
        rows, cols = scipy_opt.linear_sum_assignment(costs)
        assert assignment_total(costs, got.pairs) == pytest.approx(
            float(costs[rows, cols].sum()), rel=1e-12
        )


def test_row_to_col_view():
    a = Assignment(pairs=((0, 1), (2, 0)), unmatched_rows=(1,), unmatched_cols=(2,))
    assert a.row_to_col == {0: 1, 2: 0}
