"""Selection of the encoding vector by constrained search.

Features are min-max normalized per column to ``n`` (rows are packets).  A
candidate ``w`` must satisfy, with ``x = n * w`` row-wise:

* box bounds          w_min <= w_i <= w_max
* budget              sum_i x_i <= B
* order preservation  x_i <= x_{i+1}
* spacing             2 x_i <= x_{i-1} + x_{i+1}   (1 <= i <= M-2, 0-based)

and the search maximizes

    sum_k (x_M - x_1) - sum_{i=2}^{M-1} sum_k (2 x_i - x_{i-1} - x_{i+1})

over a fixed log-spaced grid followed by seeded local refinement.  Real
traffic often cannot satisfy the row constraints on every packet, so a
quantile mode accepts candidates that satisfy them on a fraction ``q`` of rows.
"""
from __future__ import annotations

import dataclasses
import itertools
import json
from typing import Optional

import numpy as np

from .errors import DimensionMismatch

GRID_CAPACITY = 4096
OBJECTIVE_RTOL = 1e-9
_CHUNK_CELLS = 4_000_000


@dataclasses.dataclass(frozen=True)
class SelectionProblem:
    n: np.ndarray
    w_min: float = 10.0
    w_max: float = 1e3
    budget: float = 1e5
    quantile: Optional[float] = None  # None: every row must satisfy the constraints

    def __post_init__(self):
        n = np.asarray(self.n, dtype=np.float64)
        if n.ndim != 2 or n.shape[0] == 0 or n.shape[1] == 0:
            raise ValueError("normalized features must be a non-empty 2-D array")
        object.__setattr__(self, "n", n)
        if self.quantile is not None and not 0 < self.quantile <= 1:
            raise ValueError("quantile must lie in (0, 1]")

    @property
    def m(self) -> int:
        return self.n.shape[1]

    @classmethod
    def from_features(cls, S, **kw) -> "SelectionProblem":
        return cls(normalize_features(S), **kw)


@dataclasses.dataclass(frozen=True)
class SelectionResult:
    w: np.ndarray
    objective_value: float
    feasible: bool
    violated_constraint_fraction: float
    evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "w": [float(x) for x in self.w],
            "objective": float(self.objective_value),
            "feasible": bool(self.feasible),
            "violated_constraint_fraction": float(self.violated_constraint_fraction),
            "evaluations": int(self.evaluations),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionResult":
        return cls(np.asarray(d["w"], dtype=np.float64), float(d["objective"]),
                   bool(d["feasible"]), float(d.get("violated_constraint_fraction", 0.0)),
                   int(d.get("evaluations", 0)))


def normalize_features(S) -> np.ndarray:
    """Column-wise min-max scaling to [0, 1]; constant columns become 0."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] == 0:
        raise ValueError("feature matrix must be a non-empty 2-D array")
    lo = S.min(axis=0)
    span = S.max(axis=0) - lo
    out = np.zeros_like(S)
    ok = span > 0
    out[:, ok] = (S[:, ok] - lo[ok]) / span[ok]
    return out


def _objective_from_sums(W: np.ndarray, colsum: np.ndarray) -> np.ndarray:
    A = W * colsum
    obj = A[..., -1] - A[..., 0]
    if A.shape[-1] > 2:
        mid = 2 * A[..., 1:-1] - A[..., :-2] - A[..., 2:]
        obj = obj - mid.sum(axis=-1)
    return obj


def objective(w, n) -> float:
    w = np.asarray(w, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    if n.ndim != 2 or w.shape != (n.shape[1],):
        raise DimensionMismatch(f"w {w.shape} does not match features {n.shape}")
    return float(_objective_from_sums(w, n.sum(axis=0)))


def _row_violations(W: np.ndarray, n: np.ndarray, budget: float) -> np.ndarray:
    """Violated row constraints per (candidate, row), shape (C, N)."""
    # one contiguous (C, N) array per feature keeps the comparisons cache friendly
    X = [np.multiply.outer(W[:, i], n[:, i]) for i in range(n.shape[1])]
    total = X[0].copy()
    for x in X[1:]:
        total += x
    bad = (total > budget).astype(np.int64)
    for i in range(len(X) - 1):
        bad += X[i] > X[i + 1]
    for i in range(1, len(X) - 1):
        bad += 2 * X[i] > X[i - 1] + X[i + 1]
    return bad


def _n_row_constraints(m: int) -> int:
    return 1 + (m - 1) + max(m - 2, 0)


def check_constraints(w, n, budget: float = 1e5, w_min: float = 10.0,
                      w_max: float = 1e3) -> float:
    """Fraction of violated (row, constraint) pairs, box bounds included."""
    w = np.asarray(w, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    if n.ndim != 2 or w.shape != (n.shape[1],):
        raise DimensionMismatch(f"w {w.shape} does not match features {n.shape}")
    m = n.shape[1]
    box = int(np.sum((w < w_min) | (w > w_max)))
    rows = int(_row_violations(w[None, :], n, budget).sum())
    return (box + rows) / (m + n.shape[0] * _n_row_constraints(m))


class _Evaluator:
    def __init__(self, problem: SelectionProblem):
        self.p = problem
        self.colsum = problem.n.sum(axis=0)
        self.total = problem.m + problem.n.shape[0] * _n_row_constraints(problem.m)

    def __call__(self, W: np.ndarray):
        p = self.p
        obj = _objective_from_sums(W, self.colsum)
        box = np.sum((W < p.w_min) | (W > p.w_max), axis=1)
        n_rows = p.n.shape[0]
        chunk = max(1, _CHUNK_CELLS // (n_rows * p.m))
        viol = np.empty(len(W))
        row_ok = np.empty(len(W))
        for s in range(0, len(W), chunk):
            bad = _row_violations(W[s:s + chunk], p.n, p.budget)
            viol[s:s + chunk] = (box[s:s + chunk] + bad.sum(axis=1)) / self.total
            row_ok[s:s + chunk] = (bad == 0).mean(axis=1)
        if p.quantile is None:
            feasible = viol == 0
        else:
            feasible = (box == 0) & (row_ok >= p.quantile)
        return obj, feasible, viol


def _best_index(W, obj, feasible, viol) -> int:
    if feasible.any():
        idx = np.flatnonzero(feasible)
        scores = obj[idx]
    else:
        vmin = viol.min()
        idx = np.flatnonzero(viol == vmin)
        scores = obj[idx]
    top = scores.max()
    tied = idx[scores >= top - OBJECTIVE_RTOL * max(1.0, abs(top))]
    # lexicographically smallest w among the tied candidates
    order = np.lexsort(W[tied].T[::-1])
    return int(tied[order[0]])


def grid_values(w_min: float, w_max: float, m: int, points: Optional[int] = None) -> np.ndarray:
    """Log-spaced weights per dimension; by default the most with points**m <= 4096."""
    if points is None:
        points = min(64, max(2, int(round(GRID_CAPACITY ** (1.0 / m)))))
        while points > 2 and points ** m > GRID_CAPACITY:
            points -= 1
    if points < 1:
        raise ValueError("grid needs at least one point per dimension")
    return np.geomspace(w_min, w_max, points)


def select_encoding(problem: SelectionProblem, search_budget: int = 6000,
                    seed: int = 0, batch: int = 64,
                    grid_points: Optional[int] = None) -> SelectionResult:
    """Search for the best feasible encoding vector.

    Candidates form one fixed sequence: the full log-spaced grid in ascending
    lexicographic order, then batches of seeded log-normal perturbations around
    the best candidate so far.  ``search_budget`` evaluates a prefix of that
    sequence, so larger budgets see a superset of candidates.  When nothing is
    feasible the least-violating candidate is returned with ``feasible=False``.
    """
    if search_budget < 1:
        raise ValueError("search_budget must be >= 1")
    m = problem.m
    evaluate = _Evaluator(problem)
    grid = grid_values(problem.w_min, problem.w_max, m, grid_points)
    n_grid = len(grid) ** m
    take = min(search_budget, n_grid)
    W = np.array(list(itertools.islice(itertools.product(grid, repeat=m), take)),
                 dtype=np.float64).reshape(take, m)
    obj, feas, viol = evaluate(W)

    rng = np.random.default_rng(seed)
    lo, hi = np.log(problem.w_min), np.log(problem.w_max)
    step = (hi - lo) / len(grid)
    remaining = search_budget - take
    best = _best_index(W, obj, feas, viol)
    while remaining > 0:
        k = min(batch, remaining)
        centre = np.log(W[best])
        prop = np.exp(np.clip(centre + step * rng.standard_normal((batch, m)), lo, hi))[:k]
        o, f, v = evaluate(prop)
        W = np.vstack([W, prop])
        obj, feas, viol = np.concatenate([obj, o]), np.concatenate([feas, f]), np.concatenate([viol, v])
        new_best = _best_index(W, obj, feas, viol)
        if new_best == best:
            step *= 0.7
        best = new_best
        remaining -= k

    vfrac = 0.0 if feas[best] else float(viol[best])
    return SelectionResult(W[best].copy(), float(obj[best]), bool(feas[best]), vfrac, len(W))
