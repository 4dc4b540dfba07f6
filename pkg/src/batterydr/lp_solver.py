"""LP solving: HiGHS dual simplex for production sizes, plus a dense revised simplex with Bland's rule."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .lp_model import LpProblem

log = logging.getLogger(__name__)

OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"
FEAS_TOL = 1e-6


class SolverError(RuntimeError):
    pass


class IterationLimitError(SolverError):
    pass


@dataclass(eq=False)
class LpSolution:
    status: str
    objective: float
    values: np.ndarray
    iterations: int
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def solve(problem: LpProblem, tolerance: float = 1e-9, method: str = "highs", max_iter: int | None = None) -> LpSolution:
    """Minimize ``problem``; infeasible/unbounded come back as statuses, never silently.

    ``method="highs"`` uses HiGHS dual simplex (vertex solutions, deterministic);
    ``method="simplex"`` uses the dense Bland's-rule solver below, meant for small problems.
    """
    if max_iter is None:
        max_iter = 50 * max(problem.num_vars, 1)
    if method == "simplex":
        return _solve_bland(problem, tolerance, max_iter)
    if method != "highs":
        raise ValueError(f"unknown method {method!r}")
    return _solve_highs(problem, tolerance, max_iter)


def _solve_highs(problem: LpProblem, tolerance: float, max_iter: int) -> LpSolution:
    bounds = np.column_stack([problem.lb, problem.ub])
    bounds = [(None if np.isneginf(lo) else lo, None if np.isposinf(hi) else hi) for lo, hi in bounds]
    res = linprog(
        problem.c,
        A_ub=problem.A_ub if problem.A_ub.shape[0] else None,
        b_ub=problem.b_ub if problem.A_ub.shape[0] else None,
        A_eq=problem.A_eq if problem.A_eq.shape[0] else None,
        b_eq=problem.b_eq if problem.A_eq.shape[0] else None,
        bounds=bounds,
        method="highs-ds",
        options={
            "primal_feasibility_tolerance": min(tolerance, 1e-7),
            "dual_feasibility_tolerance": min(tolerance, 1e-7),
            "maxiter": max(max_iter, 1000),
        },
    )
    n = problem.num_vars
    if res.status == 0:
        x = np.asarray(res.x, dtype=float)
        return LpSolution(OPTIMAL, problem.objective_value(x), x, int(res.nit), res.message)
    if res.status == 2:
        return LpSolution(INFEASIBLE, np.nan, np.full(n, np.nan), int(res.nit), res.message)
    if res.status == 3:
        return LpSolution(UNBOUNDED, -np.inf, np.full(n, np.nan), int(res.nit), res.message)
    if res.status == 1:
        raise IterationLimitError(res.message)
    raise SolverError(f"HiGHS failed: {res.message}")


# ---------------------------------------------------------------------------
# Dense two-phase revised simplex, Bland's rule
# ---------------------------------------------------------------------------


def _to_standard_form(problem: LpProblem):
    """Rewrite as ``min c's + k`` s.t. ``A s = b``, ``s >= 0``, ``b >= 0``.

    Returns the data plus ``recover(s) -> x``.
    """
    n = problem.num_vars
    lb, ub = problem.lb, problem.ub
    cols = []  # (orig index, sign, offset-source) per standard column
    shift = np.zeros(n)
    for j in range(n):
        if np.isfinite(lb[j]):
            cols.append((j, 1.0))
            shift[j] = lb[j]
        elif np.isfinite(ub[j]):
            cols.append((j, -1.0))
            shift[j] = ub[j]
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    T = np.zeros((n, len(cols)))
    for k, (j, s) in enumerate(cols):
        T[j, k] = s

    Aub = problem.A_ub.toarray() if sp.issparse(problem.A_ub) else np.asarray(problem.A_ub)
    Aeq = problem.A_eq.toarray() if sp.issparse(problem.A_eq) else np.asarray(problem.A_eq)
    rows, rhs, slack_rows = [], [], []
    for A, b, is_ub in ((Aub, problem.b_ub, True), (Aeq, problem.b_eq, False)):
        for r in range(A.shape[0]):
            rows.append(A[r] @ T)
            rhs.append(b[r] - A[r] @ shift)
            slack_rows.append(is_ub)
    for j in range(n):
        if np.isfinite(lb[j]) and np.isfinite(ub[j]):
            k = next(k for k, (jj, _) in enumerate(cols) if jj == j)
            row = np.zeros(len(cols))
            row[k] = 1.0
            rows.append(row)
            rhs.append(ub[j] - lb[j])
            slack_rows.append(True)
    m = len(rows)
    n_slack = sum(slack_rows)
    A = np.zeros((m, len(cols) + n_slack))
    if m:
        A[:, : len(cols)] = np.vstack(rows)
    k = len(cols)
    for r, is_ub in enumerate(slack_rows):
        if is_ub:
            A[r, k] = 1.0
            k += 1
    b = np.asarray(rhs, dtype=float)
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    c = np.concatenate([problem.c @ T, np.zeros(n_slack)])
    const = problem.objective_constant + problem.c @ shift

    def recover(s):
        return shift + T @ s[: len(cols)]

    return c, A, b, const, recover


class _Tableau:
    def __init__(self, A, b, basis, tol, max_iter):
        self.A, self.b, self.basis = A, b, list(basis)
        self.tol, self.max_iter = tol, max_iter
        self.iterations = 0

    def x_basic(self):
        return np.linalg.solve(self.A[:, self.basis], self.b)

    def run(self, c, allowed) -> str:
        A = self.A
        m = A.shape[0]
        ctol = self.tol * max(1.0, float(np.max(np.abs(c))) if len(c) else 1.0)
        while True:
            if self.iterations >= self.max_iter:
                raise IterationLimitError(f"simplex hit the iteration cap ({self.max_iter})")
            B = A[:, self.basis]
            y = np.linalg.solve(B.T, c[self.basis])
            reduced = c - A.T @ y
            in_basis = set(self.basis)
            entering = next(
                (j for j in range(A.shape[1]) if allowed[j] and j not in in_basis and reduced[j] < -ctol), None
            )
            if entering is None:
                return OPTIMAL
            direction = np.linalg.solve(B, A[:, entering])
            xb = np.linalg.solve(B, self.b)
            best, leave = np.inf, None
            for r in range(m):
                if direction[r] > 1e-12:
                    ratio = max(xb[r], 0.0) / direction[r]
                    if ratio < best - 1e-12 or (abs(ratio - best) <= 1e-12 and self.basis[r] < self.basis[leave]):
                        best, leave = ratio, r
            if leave is None:
                return UNBOUNDED
            self.basis[leave] = entering
            self.iterations += 1


def _solve_bland(problem: LpProblem, tolerance: float, max_iter: int) -> LpSolution:
    c, A, b, const, recover = _to_standard_form(problem)
    m, n = A.shape
    if m == 0:
        if np.any(c < -tolerance):
            return LpSolution(UNBOUNDED, -np.inf, np.full(problem.num_vars, np.nan), 0)
        x = recover(np.zeros(n))
        return LpSolution(OPTIMAL, problem.objective_value(x), x, 0)

    # phase 1: one artificial per row
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    tab = _Tableau(A1, b, range(n, n + m), tolerance, max_iter)
    tab.run(c1, np.ones(n + m, dtype=bool))
    xb = tab.x_basic()
    infeas = sum(xb[r] for r, j in enumerate(tab.basis) if j >= n)
    if infeas > FEAS_TOL:
        return LpSolution(INFEASIBLE, np.nan, np.full(problem.num_vars, np.nan), tab.iterations)

    # drive zero-level artificials out; drop rows that are redundant
    keep = list(range(m))
    r = 0
    while r < len(tab.basis):
        j = tab.basis[r]
        if j >= n:
            B = A1[np.ix_(keep, tab.basis)]
            row = np.linalg.solve(B.T, np.eye(len(keep))[r]) @ A1[keep][:, :n]
            cand = next((k for k in range(n) if k not in tab.basis and abs(row[k]) > 1e-9), None)
            if cand is None:
                del keep[r]
                del tab.basis[r]
                tab.A = A1[keep]
                tab.b = b[keep]
                continue
            tab.basis[r] = cand
        r += 1
    tab.A = A1[keep][:, :n]
    tab.b = b[keep]
    if not tab.basis:
        x = recover(np.zeros(n))
        return LpSolution(OPTIMAL, problem.objective_value(x), x, tab.iterations)

    status = tab.run(c, np.ones(n, dtype=bool))
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, -np.inf, np.full(problem.num_vars, np.nan), tab.iterations)
    s = np.zeros(n)
    s[tab.basis] = np.maximum(tab.x_basic(), 0.0)
    x = recover(s)
    return LpSolution(OPTIMAL, problem.objective_value(x), x, tab.iterations)


def check_feasibility(problem: LpProblem, values, tol: float = FEAS_TOL) -> list[tuple[str, float]]:
    """Constraints (and bounds) violated by more than ``tol``, with their residuals."""
    x = np.asarray(values, dtype=float)
    if x.shape != (problem.num_vars,):
        raise ValueError(f"expected {problem.num_vars} values, got {x.shape}")
    report = []
    if problem.A_ub.shape[0]:
        excess = problem.A_ub @ x - problem.b_ub
        report += [(problem.ub_names[i], float(excess[i])) for i in np.flatnonzero(excess > tol)]
    if problem.A_eq.shape[0]:
        gap = np.abs(problem.A_eq @ x - problem.b_eq)
        report += [(problem.eq_names[i], float(gap[i])) for i in np.flatnonzero(gap > tol)]
    low = problem.lb - x
    high = x - problem.ub
    report += [(f"lower:{problem.var_names[j]}", float(low[j])) for j in np.flatnonzero(low > tol)]
    report += [(f"upper:{problem.var_names[j]}", float(high[j])) for j in np.flatnonzero(high > tol)]
    return report
