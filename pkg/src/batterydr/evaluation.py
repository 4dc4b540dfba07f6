"""Policy evaluation: exact optimum, exhaustive and Monte-Carlo runs, counterfactual dispatch, metrics."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from .domain import HOURS_PER_DAY, BatterySpec, CustomerProfile
from .lp_model import build_stage_lp, extract_day_schedule
from .lp_solver import SolverError, solve
from .mpc import MpcConfig, ProblemInputs, SimulationTrace, advance_state, build_trace, run_day
from .scenario_tree import build_tree

log = logging.getLogger(__name__)

EXACT_MAX_DAYS = 12
PCT_EPS = 1e-9


class HorizonGuardError(ValueError):
    pass


def _guard(T: int):
    if T > EXACT_MAX_DAYS:
        raise HorizonGuardError(f"{T} days means 2^{T - 1} scenarios; exact methods allow at most {EXACT_MAX_DAYS} days")


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass
class Metrics:
    expected_customer_cost: float
    expected_tariff_cost: float
    expected_dr_payment: float
    dr_quantity: float
    baseline_load: float
    event_load: float
    baseline_inflation_kw: float | None = None
    baseline_inflation_pct: float | None = None
    expected_event_days: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Metrics":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown metrics fields: {sorted(unknown)}")
        return cls(**data)


def metrics_from_aggregates(
    tariff_cost: float,
    dr_payment: float,
    baseline_load: float,
    event_load: float,
    counterfactual_baseline_load: float | None = None,
    event_days: float = 0.0,
) -> Metrics:
    dr_quantity = baseline_load - event_load
    inflation_kw = pct = None
    if counterfactual_baseline_load is not None:
        inflation_kw = baseline_load - counterfactual_baseline_load
        pct = inflation_kw / dr_quantity if dr_quantity > PCT_EPS else None
    return Metrics(
        expected_customer_cost=tariff_cost - dr_payment,
        expected_tariff_cost=tariff_cost,
        expected_dr_payment=dr_payment,
        dr_quantity=dr_quantity,
        baseline_load=baseline_load,
        event_load=event_load,
        baseline_inflation_kw=inflation_kw,
        baseline_inflation_pct=pct,
        expected_event_days=event_days,
    )


@dataclass
class _LoadTotals:
    baseline: float = 0.0
    event: float = 0.0
    hours: float = 0.0
    days: float = 0.0

    def loads(self) -> tuple[float, float]:
        if self.hours == 0:
            return 0.0, 0.0
        return self.baseline / self.hours, self.event / self.hours


def _event_totals(traces, weights, windows_len, day_mask=None) -> _LoadTotals:
    acc = _LoadTotals()
    for tr, w in zip(traces, weights):
        flags = np.asarray(tr.event_flags, dtype=bool)
        if day_mask is not None:
            flags &= day_mask
        if not flags.any():
            continue
        acc.baseline += w * float(np.sum(tr.baseline[flags]))
        acc.event += w * float(np.sum(tr.window_consumption[flags]))
        acc.hours += w * float(np.sum(windows_len[flags]))
        acc.days += w * float(flags.sum())
    return acc


def compute_metrics(
    traces: Sequence[SimulationTrace],
    weights: Sequence[float],
    counterfactual: Sequence[SimulationTrace] | None = None,
    windows_len: np.ndarray | None = None,
) -> Metrics:
    """Expectation-weighted metrics.

    Baseline and event loads are pooled over event days (energy / window hours),
    so realizations without events add nothing. ``counterfactual`` holds the
    counterfactual schedule settled under the same realizations, aligned with ``traces``.
    """
    if not traces:
        raise ValueError("no traces")
    T = traces[0].days
    if any(tr.days != T for tr in traces) or len(weights) != len(traces):
        raise ValueError("traces disagree on the horizon or weights are misaligned")
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    if windows_len is None:
        windows_len = np.full(T, 4)
    tariff = float(sum(wi * tr.tariff_cost for wi, tr in zip(w, traces)))
    pay = float(sum(wi * tr.dr_payment for wi, tr in zip(w, traces)))
    tot = _event_totals(traces, w, windows_len)
    bl, ev = tot.loads()
    cf_bl = None
    if counterfactual is not None:
        if len(counterfactual) != len(traces) or any(c.days != T for c in counterfactual):
            raise ValueError("counterfactual traces misaligned with the policy traces")
        cf_bl = _event_totals(counterfactual, w, windows_len).loads()[0]
    return metrics_from_aggregates(tariff, pay, bl, ev, cf_bl, tot.days)


def monthly_breakdown(
    traces, weights, inputs: ProblemInputs, counterfactual=None
) -> list[dict]:
    """Per-interval metrics rows (expected event days, loads, payments, inflation)."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    dr = inputs.dr_spec
    wl = np.array([len(win) for win in dr.windows])
    rows = []
    for i, (a, b) in enumerate(dr.intervals):
        mask = np.zeros(dr.days, dtype=bool)
        mask[a - 1 : b] = True
        hs = slice((a - 1) * HOURS_PER_DAY, b * HOURS_PER_DAY)
        tot = _event_totals(traces, w, wl, mask)
        bl, ev = tot.loads()
        tariff = float(sum(wi * (tr.cost[hs].sum() - tr.export_payment[hs].sum()) for wi, tr in zip(w, traces)))
        pay = float(
            sum(wi * (tr.capacity_payment[i] + tr.energy_payment[a - 1 : b].sum()) for wi, tr in zip(w, traces))
        )
        cf_bl = _event_totals(counterfactual, w, wl, mask).loads()[0] if counterfactual is not None else None
        m = metrics_from_aggregates(tariff, pay, bl, ev, cf_bl, tot.days)
        rows.append({"interval": i + 1, "first_day": a, "last_day": b, **m.to_dict()})
    return rows


def inflation_summary(overall: Metrics, monthly: list[dict]) -> dict:
    """Inflation share pooled by event count, and the plain mean of monthly shares."""
    pcts = [r["baseline_inflation_pct"] for r in monthly if r["baseline_inflation_pct"] is not None]
    return {
        "baseline_inflation_pct_event_weighted": overall.baseline_inflation_pct,
        "baseline_inflation_pct_uniform_monthly": float(np.mean(pcts)) if pcts else None,
    }


# ---------------------------------------------------------------------------
# Exact optimum and exhaustive evaluation
# ---------------------------------------------------------------------------


def solve_exact(inputs: ProblemInputs, omega_first: int = 0, T: int | None = None):
    """Optimal expected cost over all ``2^(T-1)`` realizations, plus the day-1 schedule."""
    T = T or inputs.days
    _guard(T)
    carry = inputs.initial_carry()
    tree = build_tree(omega_first, inputs.events.probabilities[1:T], T, T)
    problem = build_stage_lp(tree, inputs.profile, inputs.tariff, inputs.dr_spec, carry, inputs.battery)
    sol = solve(problem)
    if not sol.optimal:
        raise SolverError(f"exact problem is {sol.status}")
    return sol.objective, extract_day_schedule(problem, sol, tree)


def exhaustive_traces(config: MpcConfig, inputs: ProblemInputs, omega_first: int = 0):
    """Run the MPC policy under every realization with ``omega_1`` fixed.

    Realizations sharing a prefix share day solves (the policy is causal and
    its sampling seed depends only on the day), so this walks the event tree
    depth-first instead of re-simulating each path. Zero-probability branches are skipped.
    """
    T = inputs.days
    _guard(T)
    p = inputs.events.probabilities
    out_traces, out_weights = [], []
    start = inputs.initial_carry()

    def walk(carry, prefix, weight, charges, discharges, diags):
        t = carry.current_day
        sched, diag = run_day(carry, prefix[-1], config, inputs)
        charges = charges + [sched.charge]
        discharges = discharges + [sched.discharge]
        diags = diags + [diag]
        if t == T:
            out_traces.append(
                build_trace(inputs, np.concatenate(charges), np.concatenate(discharges), prefix, start.stored_energy, diags)
            )
            out_weights.append(weight)
            return
        nxt = advance_state(carry, sched, prefix[-1], inputs.profile, inputs.dr_spec, inputs.battery)
        for w in (0, 1):
            pw = p[t] if w else 1.0 - p[t]
            if pw > 0.0:
                walk(nxt, prefix + (w,), weight * pw, charges, discharges, diags)

    walk(start, (int(omega_first),), 1.0, [], [], [])
    return out_traces, out_weights


def settle_schedule_under(traces, inputs: ProblemInputs, charge, discharge, mode=None) -> list:
    """Settle one fixed schedule under each trace's realization (e.g. the counterfactual)."""
    return [build_trace(inputs, charge, discharge, tr.event_flags, tr.initial_soc, mode=mode) for tr in traces]


def reprice(traces, inputs: ProblemInputs, mode: str) -> list:
    """Re-settle traces under another reduction mode (clipped sensitivity)."""
    return [build_trace(inputs, tr.charge, tr.discharge, tr.event_flags, tr.initial_soc, mode=mode) for tr in traces]


def evaluate_exhaustive(config: MpcConfig, inputs: ProblemInputs, omega_first: int = 0, with_counterfactual: bool = True) -> Metrics:
    traces, weights = exhaustive_traces(config, inputs, omega_first)
    cf = None
    if with_counterfactual:
        c, d = counterfactual_dispatch(inputs.profile, inputs.battery, inputs.initial_soc)
        cf = settle_schedule_under(traces, inputs, c, d)
    return compute_metrics(traces, weights, cf, _window_lengths(inputs))


def _window_lengths(inputs: ProblemInputs) -> np.ndarray:
    return np.array([len(w) for w in inputs.dr_spec.windows])


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


@dataclass
class MonteCarloResult:
    mean: Metrics
    std: Metrics
    runs: list  # per-run Metrics
    traces: list
    counterfactual: list
    monthly: list


def run_seed(master_seed: int, run: int) -> int:
    return int(np.random.SeedSequence([int(master_seed), int(run)]).generate_state(1)[0])


def _std_metrics(per_run: list) -> Metrics:
    vals = {}
    for f in fields(Metrics):
        xs = [getattr(m, f.name) for m in per_run if getattr(m, f.name) is not None]
        vals[f.name] = float(np.std(xs, ddof=1)) if len(xs) >= 2 else None
    return Metrics(**vals)


def evaluate_monte_carlo(config: MpcConfig, inputs: ProblemInputs, runs: int, master_seed: int = 0) -> MonteCarloResult:
    """Simulate ``runs`` sampled realizations.

    The mean is the pooled estimate over all runs (equal weights); the standard
    deviation is the sample std of per-run metrics. A fixed realization in
    ``inputs.events`` is reused for every run, leaving only the MPC sampling random.
    """
    if runs < 2:
        raise ValueError("need at least two runs for a standard deviation")
    from .mpc import simulate  # local: keeps the import graph flat for the CLI

    c, d = counterfactual_dispatch(inputs.profile, inputs.battery, inputs.initial_soc)
    wl = _window_lengths(inputs)
    traces, cfs, per_run = [], [], []
    for r in range(runs):
        seed = run_seed(master_seed, r)
        omega = inputs.events.realization or inputs.events.sample(np.random.default_rng([seed, 1]))
        cfg = MpcConfig(config.receding_horizon, config.branching_depth, seed, config.final_day)
        tr = simulate(inputs, omega, cfg)
        cf = build_trace(inputs, c, d, omega)
        traces.append(tr)
        cfs.append(cf)
        per_run.append(compute_metrics([tr], [1.0], [cf], wl))
        log.info("run %d/%d: cost %.4f", r + 1, runs, tr.total_cost)
    weights = [1.0] * runs
    mean = compute_metrics(traces, weights, cfs, wl)
    monthly = monthly_breakdown(traces, weights, inputs, cfs)
    return MonteCarloResult(mean, _std_metrics(per_run), per_run, traces, cfs, monthly)


# ---------------------------------------------------------------------------
# Counterfactual dispatch
# ---------------------------------------------------------------------------


def counterfactual_dispatch(profile: CustomerProfile, battery: BatterySpec, initial_soc: float | None = None):
    """Greedy self-consumption: soak up solar surplus, cover deficits from storage."""
    P, E = battery.power_capacity_kw, battery.energy_capacity_kwh
    eta_c, eta_d = battery.charge_efficiency, battery.discharge_efficiency
    stored = 0.5 * E if initial_soc is None else initial_soc
    charge = np.zeros(profile.hours)
    discharge = np.zeros(profile.hours)
    for h in range(profile.hours):
        surplus = profile.solar[h] - profile.demand[h]
        if surplus > 0:
            b = min(surplus, P, (E - stored) / eta_c)
            charge[h] = b
            stored = min(stored + b * eta_c, E)
        elif surplus < 0:
            b = min(-surplus, P, eta_d * stored)
            discharge[h] = b
            stored = max(stored - b / eta_d, 0.0)
    return charge, discharge


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------

APPROXIMATION_VARIANTS = ((2, 2), (4, 4), (4, 2), (None, 2))


@dataclass
class StudyRow:
    label: str
    N: int | None
    n: int | None
    cost: float
    cost_std: float | None
    gap: float
    dr_quantity: float
    dr_quantity_std: float | None
    baseline_load: float
    baseline_load_std: float | None
    event_load: float
    event_load_std: float | None


def _sd(xs):
    return float(np.std(xs, ddof=1)) if len(xs) >= 2 else None


def approximation_study(
    inputs: ProblemInputs, omega_first: int = 0, seeds: Sequence[int] = range(5), variants=APPROXIMATION_VARIANTS
) -> list[StudyRow]:
    """Compare MPC variants with the exact optimum on a short horizon; optimal row first."""
    T = inputs.days
    _guard(T)
    opt_cfg = MpcConfig(T, T, 0)
    opt = evaluate_exhaustive(opt_cfg, inputs, omega_first, with_counterfactual=False)
    best, _ = solve_exact(inputs, omega_first)
    rows = [
        StudyRow("optimal", T, T, best, None, 0.0, opt.dr_quantity, None, opt.baseline_load, None, opt.event_load, None)
    ]
    for N, n in variants:
        N = N or T
        n = min(n, N)
        cfg_seeds = list(seeds) if n < N else [0]
        ms = [evaluate_exhaustive(MpcConfig(N, n, s), inputs, omega_first, with_counterfactual=False) for s in cfg_seeds]
        cost = float(np.mean([m.expected_customer_cost for m in ms]))
        rows.append(
            StudyRow(
                f"N={N},n={n}", N, n, cost, _sd([m.expected_customer_cost for m in ms]),
                (cost - best) / abs(best) if best else math.nan,
                float(np.mean([m.dr_quantity for m in ms])), _sd([m.dr_quantity for m in ms]),
                float(np.mean([m.baseline_load for m in ms])), _sd([m.baseline_load for m in ms]),
                float(np.mean([m.event_load for m in ms])), _sd([m.event_load for m in ms]),
            )
        )
    return rows


def incentive_study(inputs: ProblemInputs, config: MpcConfig, rates: Sequence[float], runs: int, master_seed: int = 0):
    """Monte-Carlo metrics per capacity rate plus the no-DR counterfactual row.

    Returns ``(rows, results)`` where ``rows`` are flat dicts and ``results`` maps
    each rate to its :class:`MonteCarloResult`. Realizations are shared across rates.
    """
    results = {}
    for rate in rates:
        priced = inputs.with_dr(inputs.dr_spec.with_rates(capacity_rate=float(rate)))
        results[float(rate)] = evaluate_monte_carlo(config, priced, runs, master_seed)
    first = next(iter(results.values()))
    wl = _window_lengths(inputs)
    no_dr = inputs.with_dr(inputs.dr_spec.with_rates(energy_rate=0.0, capacity_rate=0.0))
    c, d = counterfactual_dispatch(inputs.profile, inputs.battery, inputs.initial_soc)
    cf_traces = settle_schedule_under(first.counterfactual, no_dr, c, d)
    cf_metrics = compute_metrics(cf_traces, [1.0] * len(cf_traces), cf_traces, wl)
    rows = [{"case": "counterfactual", "rate": 0.0, **cf_metrics.to_dict()}]
    for rate, res in results.items():
        row = {"case": f"rate={rate:g}", "rate": rate, **res.mean.to_dict()}
        row.update({f"{k}_std": v for k, v in res.std.to_dict().items()})
        row.update(inflation_summary(res.mean, res.monthly))
        rows.append(row)
    return rows, results
