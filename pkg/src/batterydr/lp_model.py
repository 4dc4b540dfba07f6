"""Deterministic-equivalent LP for one MPC day over a scenario tree.

Variables hang off tree nodes (one copy per node-hour), so scenarios that share
a node share its decisions and no explicit non-anticipativity rows are needed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .domain import (
    HOURS_PER_DAY,
    SIGNED,
    BatterySpec,
    CarryState,
    CustomerProfile,
    DaySchedule,
    DrProgramSpec,
    TariffSchedule,
    proration_factor,
)
from .scenario_tree import ScenarioTree

ROLES = ("charge", "discharge", "soc", "import", "export")


class LinExpr:
    """Sparse affine expression ``sum(coef * var) + constant``."""

    __slots__ = ("terms", "constant")

    def __init__(self, terms: dict | None = None, constant: float = 0.0):
        self.terms = dict(terms or {})
        self.constant = float(constant)

    def __add__(self, other):
        out = LinExpr(self.terms, self.constant)
        if isinstance(other, LinExpr):
            for k, v in other.terms.items():
                out.terms[k] = out.terms.get(k, 0.0) + v
            out.constant += other.constant
        else:
            out.constant += float(other)
        return out

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, k):
        k = float(k)
        return LinExpr({v: c * k for v, c in self.terms.items()}, self.constant * k)

    __rmul__ = __mul__

    def __truediv__(self, k):
        return self * (1.0 / float(k))

    def value(self, assignment) -> float:
        return self.constant + sum(c * assignment[v] for v, c in self.terms.items())

    def simplified(self, tol: float = 0.0) -> "LinExpr":
        return LinExpr({k: v for k, v in self.terms.items() if abs(v) > tol}, self.constant)

    def __repr__(self):
        body = " + ".join(f"{c:g}*{v}" for v, c in self.terms.items())
        return f"LinExpr({body or '0'} + {self.constant:g})"


@dataclass(eq=False)
class LpProblem:
    """``min c.x + objective_constant`` s.t. ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``lb <= x <= ub``."""

    c: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    var_names: list
    ub_names: list
    eq_names: list
    objective_constant: float = 0.0
    var_map: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.c)
        for name, arr in (("lb", self.lb), ("ub", self.ub), ("var_names", self.var_names)):
            if len(arr) != n:
                raise ValueError(f"{name} has {len(arr)} entries for {n} variables")
        for A, b, names, tag in ((self.A_ub, self.b_ub, self.ub_names, "ub"), (self.A_eq, self.b_eq, self.eq_names, "eq")):
            if A.shape != (len(b), n) or len(names) != len(b):
                raise ValueError(f"{tag} block shape {A.shape} does not match {len(b)} rows x {n} variables")
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)) or np.any(self.lb > self.ub):
            raise ValueError("invalid variable bounds")

    @property
    def num_vars(self) -> int:
        return len(self.c)

    @classmethod
    def from_dense(cls, c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lb=None, ub=None, constant=0.0) -> "LpProblem":
        c = np.asarray(c, dtype=float)
        n = len(c)

        def block(A, b):
            if A is None:
                return sp.csr_matrix((0, n)), np.zeros(0)
            A = np.atleast_2d(np.asarray(A, dtype=float))
            return sp.csr_matrix(A), np.asarray(b, dtype=float)

        Au, bu = block(A_ub, b_ub)
        Ae, be = block(A_eq, b_eq)
        lb = np.zeros(n) if lb is None else np.asarray(lb, dtype=float)
        ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
        return cls(
            c, Au, bu, Ae, be, lb, ub,
            [f"x{j}" for j in range(n)],
            [f"ub{i}" for i in range(len(bu))],
            [f"eq{i}" for i in range(len(be))],
            constant,
        )

    def objective_value(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=float) + self.objective_constant)


class LpBuilder:
    def __init__(self):
        self._lb, self._ub, self._names = [], [], []
        self._obj: dict = {}
        self._constant = 0.0
        self._rows = {"ub": ([], [], [], [], []), "eq": ([], [], [], [], [])}

    def add_var(self, name: str, lb: float = 0.0, ub: float = np.inf) -> int:
        self._lb.append(lb)
        self._ub.append(ub)
        self._names.append(name)
        return len(self._names) - 1

    def add_row(self, kind: str, coefs: dict, rhs: float, name: str):
        ri, ci, vals, b, names = self._rows[kind]
        r = len(b)
        for j, v in coefs.items():
            if v != 0.0:
                ri.append(r)
                ci.append(j)
                vals.append(v)
        b.append(rhs)
        names.append(name)

    def add_objective(self, expr: LinExpr, weight: float = 1.0):
        for j, v in expr.terms.items():
            self._obj[j] = self._obj.get(j, 0.0) + weight * v
        self._constant += weight * expr.constant

    def build(self, var_map=None) -> LpProblem:
        n = len(self._names)
        c = np.zeros(n)
        for j, v in self._obj.items():
            c[j] = v

        def mat(kind):
            ri, ci, vals, b, names = self._rows[kind]
            A = sp.csr_matrix((vals, (ri, ci)), shape=(len(b), n))
            A.sum_duplicates()
            return A, np.asarray(b, dtype=float), list(names)

        Au, bu, nu = mat("ub")
        Ae, be, ne = mat("eq")
        return LpProblem(
            c, Au, bu, Ae, be, np.asarray(self._lb, float), np.asarray(self._ub, float),
            list(self._names), nu, ne, self._constant, dict(var_map or {}),
        )


def baseline_expression(
    path: Sequence[int],
    event_day_offset: int,
    carry: CarryState,
    baseline_days: int,
    window_term: Callable[[int], LinExpr],
) -> LinExpr:
    """Baseline for the event at ``event_day_offset`` along a path of event flags.

    Recency order: in-horizon non-event days before the event (latest first),
    then the carried history (latest first). Averages over what is available.
    """
    terms: list = []
    for k in range(event_day_offset - 1, -1, -1):
        if len(terms) == baseline_days:
            break
        if not path[k]:
            terms.append(window_term(k))
    for s in reversed(carry.baseline_history):
        if len(terms) == baseline_days:
            break
        terms.append(LinExpr(constant=s))
    if not terms:
        return LinExpr()
    total = LinExpr()
    for term in terms:
        total = total + term
    return total / len(terms)


def capacity_expression(
    reductions: Sequence[LinExpr],
    event_hours: Sequence[int],
    rate: float,
    proration: float,
    prior_reduction: float = 0.0,
    prior_event_hours: int = 0,
) -> LinExpr:
    """Prorated capacity payment for one interval on one path; zero when no event hours are known."""
    hours = prior_event_hours + sum(event_hours)
    if hours == 0:
        return LinExpr()
    total = LinExpr(constant=prior_reduction)
    for r in reductions:
        total = total + r
    return total * (rate * proration / hours)


def build_stage_lp(
    tree: ScenarioTree,
    profile: CustomerProfile,
    tariff: TariffSchedule,
    dr_spec: DrProgramSpec,
    carry: CarryState,
    battery: BatterySpec,
) -> LpProblem:
    """Flatten ``tree`` rooted at ``carry.current_day`` into the deterministic-equivalent LP."""
    if dr_spec.reduction_mode != SIGNED:
        raise ValueError("the optimizer only supports signed reductions (clipped is non-convex)")
    t0 = carry.current_day
    horizon_days = max(node.day_offset for node in tree.nodes) + 1
    horizon_end = t0 + horizon_days - 1
    if horizon_days < 1 or t0 < 1:
        raise ValueError("empty horizon")
    if horizon_end > profile.horizon_days or horizon_end > dr_spec.days:
        raise ValueError(f"horizon days {t0}..{horizon_end} exceed the input data")
    h0, h1 = (t0 - 1) * HOURS_PER_DAY, horizon_end * HOURS_PER_DAY
    rc, re = tariff.purchase_rate[h0:h1], tariff.export_rate[h0:h1]
    if len(rc) != h1 - h0:
        raise ValueError("tariff does not cover the horizon")
    if np.any(re < 0) or np.any(rc < re):
        raise ValueError("tariff requires purchase_rate >= export_rate >= 0 over the horizon")

    P, E = battery.power_capacity_kw, battery.energy_capacity_kwh
    eta_c, eta_d = battery.charge_efficiency, battery.discharge_efficiency
    # without storage, charge and discharge could only cancel within the hour (burning
    # energy to lift a baseline); a battery that holds nothing moves nothing
    flow_cap = P if E > 0 else 0.0
    lp = LpBuilder()
    var_map: dict = {}
    for node in tree.nodes:
        day = t0 + node.day_offset
        base_h = (day - 1) * HOURS_PER_DAY
        for h in range(HOURS_PER_DAY):
            for role, hi in (("charge", flow_cap), ("discharge", flow_cap), ("soc", E), ("import", np.inf), ("export", np.inf)):
                var_map[node.id, h, role] = lp.add_var(f"{role}_n{node.id}_h{h + 1}", 0.0, hi)
        for h in range(HOURS_PER_DAY):
            v = lambda role: var_map[node.id, h, role]  # noqa: E731
            lp.add_row("ub", {v("charge"): 1.0, v("discharge"): 1.0}, P, f"power_n{node.id}_h{h + 1}")
            dyn = {v("soc"): 1.0, v("charge"): -eta_c, v("discharge"): 1.0 / eta_d}
            rhs = 0.0
            if h > 0:
                dyn[var_map[node.id, h - 1, "soc"]] = -1.0
            elif node.parent is not None:
                dyn[var_map[node.parent, HOURS_PER_DAY - 1, "soc"]] = -1.0
            else:
                rhs = carry.stored_energy
            lp.add_row("eq", dyn, rhs, f"soc_n{node.id}_h{h + 1}")
            g = base_h + h
            lp.add_row(
                "eq",
                {v("import"): 1.0, v("export"): -1.0, v("charge"): -1.0, v("discharge"): 1.0},
                profile.demand[g] - profile.solar[g],
                f"load_n{node.id}_h{h + 1}",
            )
            lp.add_objective(
                LinExpr({v("import"): rc[g - h0], v("export"): -re[g - h0]}), node.probability
            )

    def window_term_for(path_nodes):
        def window_term(k):
            node_id = path_nodes[k]
            terms = {}
            for h in dr_spec.window_index(t0 + k):
                terms[var_map[node_id, h, "import"]] = 1.0
                terms[var_map[node_id, h, "export"]] = -1.0
            return LinExpr(terms)

        return window_term

    start_interval = dr_spec.interval_of(t0)
    for path_nodes, prob in zip(tree.leaf_paths, tree.branch_probabilities):
        if prob == 0.0:
            continue
        flags = [tree.nodes[i].event_flag for i in path_nodes]
        window_term = window_term_for(path_nodes)
        per_interval: dict = {}
        for k, flag in enumerate(flags):
            if not flag:
                continue
            day = t0 + k
            delta = baseline_expression(flags, k, carry, dr_spec.baseline_days, window_term) - window_term(k)
            lp.add_objective(delta * dr_spec.energy_rate[day - 1], -prob)
            reds, hours = per_interval.setdefault(dr_spec.interval_of(day), ([], []))
            reds.append(delta)
            hours.append(len(dr_spec.window(day)))
        last_interval = dr_spec.interval_of(horizon_end)
        for i in range(start_interval, last_interval + 1):
            reds, hours = per_interval.get(i, ([], []))
            a, b = dr_spec.intervals[i]
            prior = (carry.prior_reduction, carry.prior_event_hours) if i == start_interval else (0.0, 0)
            pay = capacity_expression(
                reds, hours, dr_spec.capacity_rate[i], proration_factor(a, b, horizon_end), *prior
            )
            lp.add_objective(pay, -prob)
    return lp.build(var_map)


def extract_day_schedule(problem: LpProblem, solution, tree: ScenarioTree, clamp: float = 1e-9) -> DaySchedule:
    """Read the root node's 24 charge/discharge values from an optimal solution."""
    if getattr(solution, "status", "optimal") != "optimal":
        raise ValueError(f"cannot extract a schedule from a {solution.status} solution")
    values = np.asarray(getattr(solution, "values", solution), dtype=float)
    root = tree.root.id

    def read(role):
        x = np.array([values[problem.var_map[root, h, role]] for h in range(HOURS_PER_DAY)])
        x[np.abs(x) < clamp] = 0.0
        return np.maximum(x, 0.0)

    return DaySchedule(read("charge"), read("discharge"))


def _fmt(x: float) -> str:
    return repr(float(x))


def _row_text(row: sp.csr_matrix, names) -> str:
    parts = []
    for j, v in zip(row.indices, row.data):
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(v))} {names[j]}")
    text = " ".join(parts) or "0 " + names[0]
    return text[2:] if text.startswith("+ ") else text


def write_lp_format(problem: LpProblem, stream) -> None:
    """Write the problem in CPLEX LP text format."""
    names = problem.var_names
    stream.write("\\ objective constant: " + _fmt(problem.objective_constant) + "\n")
    stream.write("Minimize\n obj: ")
    obj = sp.csr_matrix(problem.c.reshape(1, -1))
    stream.write(_row_text(obj, names) + "\n")
    stream.write("Subject To\n")
    for A, b, rnames, op in ((problem.A_ub, problem.b_ub, problem.ub_names, "<="), (problem.A_eq, problem.b_eq, problem.eq_names, "=")):
        for r in range(A.shape[0]):
            stream.write(f" {rnames[r]}: {_row_text(A.getrow(r), names)} {op} {_fmt(b[r])}\n")
    stream.write("Bounds\n")
    for name, lo, hi in zip(names, problem.lb, problem.ub):
        lo_s = "-inf" if np.isneginf(lo) else _fmt(lo)
        hi_s = "+inf" if np.isposinf(hi) else _fmt(hi)
        stream.write(f" {lo_s} <= {name} <= {hi_s}\n")
    stream.write("End\n")
