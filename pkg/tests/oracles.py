"""Reference implementations used only by the tests.

Nothing here imports batterydr: each oracle recomputes its answer from scratch
so a bug in the package cannot also hide in the check.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

FEAS = 1e-7


# ---------------------------------------------------------------------------
# LP by vertex enumeration
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _subsets(m: int, k: int) -> np.ndarray:
    if k == 0:
        return np.zeros((1, 0), dtype=int)
    return np.array(list(itertools.combinations(range(m), k)), dtype=int)


def vertex_oracle(c, A_ub, b_ub, A_eq, b_eq, lb, ub):
    """Minimize ``c x`` over a bounded polytope by checking every basic solution.

    Bounds must be finite so that the feasible set (when non-empty) has a vertex.
    Returns ``(objective, x)`` or ``(None, None)`` when infeasible.
    """
    c = np.asarray(c, float)
    n = len(c)
    G = [np.asarray(A_ub, float).reshape(-1, n), np.eye(n), -np.eye(n)]
    h = [np.asarray(b_ub, float).ravel(), np.asarray(ub, float), -np.asarray(lb, float)]
    G, h = np.vstack(G), np.concatenate(h)
    Aeq = np.asarray(A_eq, float).reshape(-1, n)
    beq = np.asarray(b_eq, float).ravel()
    k = n - len(beq)
    if k < 0:
        raise ValueError("more equalities than variables")
    subsets = _subsets(len(G), k)
    M = np.empty((len(subsets), n, n))
    rhs = np.empty((len(subsets), n))
    M[:, : len(beq)] = Aeq
    rhs[:, : len(beq)] = beq
    M[:, len(beq) :] = G[subsets]
    rhs[:, len(beq) :] = h[subsets]
    ok = np.abs(np.linalg.det(M)) > 1e-10
    M, rhs = M[ok], rhs[ok]
    if not len(M):
        return None, None
    X = np.linalg.solve(M, rhs[..., None])[..., 0]
    feas = np.all(X @ G.T <= h + FEAS, axis=1)
    if len(beq):
        feas &= np.all(np.abs(X @ Aeq.T - beq) <= FEAS, axis=1)
    if not feas.any():
        return None, None
    X = X[feas]
    vals = X @ c
    i = int(np.argmin(vals))
    return float(vals[i]), X[i]


def random_bounded_lp(rng: np.random.Generator, n_vars=None, n_cons=None, n_eq=None):
    """Random LP with a finite box; roughly one in ten instances is infeasible."""
    n = n_vars or int(rng.integers(1, 7))
    m = n_cons if n_cons is not None else int(rng.integers(0, 9))
    q = n_eq if n_eq is not None else int(rng.integers(0, min(n, m, 2) + 1))
    c = rng.normal(size=n).round(2)
    lb = np.where(rng.random(n) < 0.3, -rng.integers(1, 5, n), 0).astype(float)
    ub = lb + rng.integers(1, 8, n)
    A = rng.normal(size=(m, n)).round(2)
    x0 = lb + rng.random(n) * (ub - lb)
    slack = rng.exponential(1.0, m - q).round(2)
    if rng.random() < 0.1 and m - q > 0:
        slack[0] = -50.0  # push one row out of reach
    A_ub, A_eq = A[: m - q], A[m - q :]
    b_ub = A_ub @ x0 + slack
    b_eq = A_eq @ x0
    return c, A_ub, b_ub, A_eq, b_eq, lb, ub


# ---------------------------------------------------------------------------
# Settlement of a DR program, written out longhand
# ---------------------------------------------------------------------------


def settle_by_hand(loads, realization, rc, re, window, n_b, energy_rate, capacity_rate, intervals):
    """Total cost of hourly net loads: tariff minus energy and capacity payments.

    ``window`` holds 1-based hours; ``intervals`` 1-based inclusive day ranges.
    """
    T = len(realization)
    total = 0.0
    for x in loads:
        total += rc * x if x > 0 else re * x
    non_event = []
    red = {i: 0.0 for i in range(len(intervals))}
    hrs = {i: 0 for i in range(len(intervals))}
    for t in range(T):
        s = sum(loads[24 * t + h - 1] for h in window)
        if realization[t]:
            recent = non_event[-n_b:]
            base = sum(recent) / len(recent) if recent else 0.0
            delta = base - s
            total -= energy_rate * delta
            i = next(i for i, (a, b) in enumerate(intervals) if a <= t + 1 <= b)
            red[i] += delta
            hrs[i] += len(window)
        else:
            non_event.append(s)
    for i in red:
        if hrs[i]:
            total -= capacity_rate * red[i] / hrs[i]
    return total


def soc_path(start, charge, discharge, eta_c, eta_d):
    out, e = [], start
    for b_plus, b_minus in zip(charge, discharge):
        e = e + eta_c * b_plus - b_minus / eta_d
        out.append(e)
    return np.array(out)


# ---------------------------------------------------------------------------
# Two-day stochastic dispatch, written as one dense LP
# ---------------------------------------------------------------------------


def two_day_optimum(demand, solar, P, E, eta, rc, re, soc0, p2, rate, window=(18, 19, 20, 21)):
    """Expected cost of the best day-1 plan when day 1 has no event and day 2 is an event w.p. ``p2``.

    One-day baseline (day 1's window), one capacity interval covering both days.
    Blocks: day 1, day 2 if quiet, day 2 if event; each block has 24 hours of
    (charge, discharge, soc, import, export).
    """
    from scipy.optimize import linprog

    H, K = 24, 5
    nv = 3 * H * K

    def ix(block, h, k):
        return (block * H + h) * K + k

    A_eq, b_eq, A_ub, b_ub = [], [], [], []
    c = np.zeros(nv)
    weights = (1.0, 1.0 - p2, p2)
    for block in range(3):
        day = 0 if block == 0 else 1
        for h in range(H):
            g = day * H + h
            row = np.zeros(nv)
            row[ix(block, h, 2)] = 1.0
            row[ix(block, h, 0)] = -eta
            row[ix(block, h, 1)] = 1.0 / eta
            if h > 0:
                row[ix(block, h - 1, 2)] = -1.0
                rhs = 0.0
            elif block == 0:
                rhs = soc0
            else:
                row[ix(0, H - 1, 2)] = -1.0
                rhs = 0.0
            A_eq.append(row)
            b_eq.append(rhs)
            row = np.zeros(nv)
            row[ix(block, h, 3)], row[ix(block, h, 4)] = 1.0, -1.0
            row[ix(block, h, 0)], row[ix(block, h, 1)] = -1.0, 1.0
            A_eq.append(row)
            b_eq.append(demand[g] - solar[g])
            row = np.zeros(nv)
            row[ix(block, h, 0)] = row[ix(block, h, 1)] = 1.0
            A_ub.append(row)
            b_ub.append(P)
            c[ix(block, h, 3)] += weights[block] * rc
            c[ix(block, h, 4)] -= weights[block] * re
    # capacity payment p2 * rate * (s1 - s2) / |window|, paid as a negative cost
    k = p2 * rate / len(window)
    for h in window:
        c[ix(0, h - 1, 3)] -= k
        c[ix(0, h - 1, 4)] += k
        c[ix(2, h - 1, 3)] += k
        c[ix(2, h - 1, 4)] -= k
    bounds = []
    for _ in range(3 * H):
        bounds += [(0, P), (0, P), (0, E), (0, None), (0, None)]
    res = linprog(c, A_ub=np.array(A_ub), b_ub=b_ub, A_eq=np.array(A_eq), b_eq=b_eq, bounds=bounds, method="highs")
    assert res.status == 0, res.message
    return float(res.fun)
