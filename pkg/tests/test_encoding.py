import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from freqdetect import encoding
from freqdetect.encoding import SelectionProblem, select_encoding
from freqdetect.errors import DimensionMismatch

from oracles import exhaustive_grid, feasible_direct, objective_direct


def test_normalize_examples():
    n = encoding.normalize_features([[0, 7, 3], [5, 7, 3], [10, 7, 3]])
    assert n[:, 0].tolist() == [0, 0.5, 1] and not n[:, 1].any()
    assert encoding.normalize_features([[3.0]]).tolist() == [[0.0]]


def test_objective_examples():
    assert encoding.objective([10, 100], [[0.5, 1.0]]) == pytest.approx(95)
    assert encoding.objective([42.0], np.random.default_rng(0).random((6, 1))) == 0
    with pytest.raises(DimensionMismatch):
        encoding.objective([1, 2, 3], [[0.1, 0.2]])


def test_objective_matches_direct_formula():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = rng.random((5, 3))
        w = rng.uniform(10, 1000, 3)
        assert encoding.objective(w, n) == pytest.approx(objective_direct(w, n), rel=1e-12)
    n = rng.random((7, 5))
    w = rng.uniform(10, 1000, 5)
    assert encoding.objective(w, n) == pytest.approx(objective_direct(w, n), rel=1e-12)


def test_check_constraints_examples():
    assert encoding.check_constraints([20, 30, 40], np.zeros((4, 3))) == 0
    assert encoding.check_constraints([2000, 30, 40], np.zeros((4, 3))) > 0
    assert encoding.check_constraints([10, 1000], [[1.0, 0.0]]) > 0
    # one row, M=2: 2 box + 1 budget + 1 order constraint; only the order one fails
    assert encoding.check_constraints([10, 1000], [[1.0, 0.0]]) == pytest.approx(1 / 4)


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 4)), elements=st.floats(0, 1)),
       st.lists(st.floats(1, 2000), min_size=4, max_size=4))
@settings(max_examples=150, deadline=None)
def test_zero_violation_iff_direct_feasible(n, w):
    w = np.array(w[:n.shape[1]])
    frac = encoding.check_constraints(w, n, 1e5, 10, 1e3)
    assert 0 <= frac <= 1
    assert (frac == 0) == feasible_direct(w, n, 1e5, 10, 1e3)


def test_m2_ordered_positive_columns_matches_exhaustive_grid():
    n = np.array([[0.2, 0.9], [0.4, 0.5], [0.1, 1.0]])
    p = SelectionProblem(n, budget=600.0)
    grid = np.geomspace(10, 1000, 64)
    best_obj, best_w = exhaustive_grid(grid, n, 600.0, 10, 1000)
    res = select_encoding(p, search_budget=64 * 64)
    assert res.feasible
    assert res.w.tolist() == pytest.approx(list(best_w), rel=1e-12)
    assert res.objective_value == pytest.approx(best_obj, rel=1e-9)
    assert res.w[0] == pytest.approx(10)
    # largest grid weight obeying the budget on the 1.0 row
    assert res.w[1] == grid[grid * 1.0 + 10 * 0.1 <= 600].max()


@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.just(2)), elements=st.floats(0, 1)),
       st.integers(2, 20), st.floats(50, 3000))
@settings(max_examples=40, deadline=None)
def test_tiny_instances_match_exhaustive_grid(n, g, budget):
    p = SelectionProblem(n, budget=budget)
    res = select_encoding(p, search_budget=g * g, grid_points=g)
    oracle = exhaustive_grid(np.geomspace(10, 1000, g), n, budget, 10, 1000)
    if oracle is None:
        assert not res.feasible
    else:
        assert res.feasible
        assert res.objective_value == pytest.approx(oracle[0], rel=1e-9, abs=1e-9)
        assert res.w.tolist() == pytest.approx(list(oracle[1]), rel=1e-12)


def test_m1_and_all_zero_degenerate_cases():
    res = select_encoding(SelectionProblem(np.random.default_rng(0).random((10, 1))), search_budget=50)
    assert res.w.tolist() == [10.0] and res.objective_value == 0 and res.feasible
    res = select_encoding(SelectionProblem(np.zeros((5, 3))), search_budget=300)
    assert res.w.tolist() == [10.0, 10.0, 10.0] and res.objective_value == 0 and res.feasible


def test_infeasible_reports_least_violating():
    n = np.array([[1.0, 0.0], [0.5, 0.0]])
    res = select_encoding(SelectionProblem(n), search_budget=500)
    assert not res.feasible and res.violated_constraint_fraction > 0
    grid = np.geomspace(10, 1000, 64)
    fracs = [encoding.check_constraints([a, b], n) for a in grid for b in grid]
    assert res.violated_constraint_fraction == pytest.approx(min(fracs))


def test_quantile_mode_accepts_mostly_satisfied_rows():
    n = np.vstack([np.tile([0.1, 0.5, 0.9], (99, 1)), [[1.0, 0.0, 0.0]]])
    hard = select_encoding(SelectionProblem(n), search_budget=800)
    soft = select_encoding(SelectionProblem(n, quantile=0.95), search_budget=800)
    assert not hard.feasible
    assert soft.feasible and soft.violated_constraint_fraction == 0


def _random_problem(seed, rows=40, m=3, quantile=None):
    rng = np.random.default_rng(seed)
    n = np.sort(rng.random((rows, m)), axis=1)
    return SelectionProblem(n, budget=2000.0, quantile=quantile)


@given(st.integers(0, 10_000), st.integers(1, 3000), st.integers(1, 3000))
@settings(max_examples=25, deadline=None)
def test_budget_monotone(seed, b1, b2):
    p = _random_problem(seed)
    lo, hi = sorted((b1, b2))
    r_lo = select_encoding(p, search_budget=lo, seed=seed)
    r_hi = select_encoding(p, search_budget=hi, seed=seed)
    if r_lo.feasible:
        assert r_hi.feasible and r_hi.objective_value >= r_lo.objective_value
    else:
        assert r_hi.feasible or r_hi.violated_constraint_fraction <= r_lo.violated_constraint_fraction


@given(st.integers(0, 10_000), st.sampled_from([None, 0.9]))
@settings(max_examples=25, deadline=None)
def test_result_invariants(seed, quantile):
    p = _random_problem(seed, quantile=quantile)
    r = select_encoding(p, search_budget=1500, seed=seed)
    assert r.objective_value == pytest.approx(encoding.objective(r.w, p.n), rel=1e-9)
    assert r.objective_value == pytest.approx(objective_direct(r.w, p.n), rel=1e-9)
    assert ((10 <= r.w) & (r.w <= 1000)).all()
    if r.feasible:
        assert r.violated_constraint_fraction == 0
        if quantile is None:
            assert encoding.check_constraints(r.w, p.n, p.budget) == 0


def test_deterministic_and_json_round_trip():
    p = _random_problem(3)
    a = select_encoding(p, search_budget=2000, seed=7)
    b = select_encoding(p, search_budget=2000, seed=7)
    assert a.to_json() == b.to_json()
    d = json.loads(a.to_json())
    assert set(d) >= {"w", "objective", "feasible"}
    back = encoding.SelectionResult.from_dict(d)
    assert back.w.tolist() == a.w.tolist() and back.objective_value == a.objective_value


def test_refinement_can_beat_the_grid():
    p = _random_problem(5)
    grid_only = select_encoding(p, search_budget=4096)
    refined = select_encoding(p, search_budget=6000)
    assert refined.objective_value >= grid_only.objective_value
