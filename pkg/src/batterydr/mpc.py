"""Receding-horizon driver: one stochastic LP per day, commit the first day, roll the state forward."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .domain import (
    HOURS_PER_DAY,
    BatterySpec,
    CarryState,
    CustomerProfile,
    DaySchedule,
    DrProgramSpec,
    EventProcess,
    TariffSchedule,
    baseline,
    dr_window_consumption,
    reduction,
    settle,
)
from .lp_model import build_stage_lp, extract_day_schedule
from .lp_solver import SolverError, solve
from .scenario_tree import build_tree, clamp_to_final_day

log = logging.getLogger(__name__)

SOC_TOL = 1e-6


@dataclass(frozen=True)
class MpcConfig:
    receding_horizon: int
    branching_depth: int
    master_seed: int = 0
    final_day: int | None = None

    def __post_init__(self):
        if not 1 <= self.branching_depth <= self.receding_horizon:
            raise ValueError("need 1 <= branching_depth <= receding_horizon")
        if self.final_day is not None and self.receding_horizon > self.final_day:
            raise ValueError("receding horizon longer than the final day")

    @property
    def samples(self) -> bool:
        """True when the tree carries sampled (seed-dependent) branches."""
        return self.branching_depth < self.receding_horizon


@dataclass(frozen=True, eq=False)
class ProblemInputs:
    battery: BatterySpec
    profile: CustomerProfile
    tariff: TariffSchedule
    dr_spec: DrProgramSpec
    events: EventProcess
    initial_soc_fraction: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.initial_soc_fraction <= 1.0:
            raise ValueError("initial_soc_fraction must lie in [0, 1]")
        T = self.profile.horizon_days
        if self.dr_spec.days != T or self.events.days != T:
            raise ValueError(
                f"horizon mismatch: profile {T} days, DR program {self.dr_spec.days}, events {self.events.days}"
            )
        if len(self.tariff.purchase_rate) != self.profile.hours:
            raise ValueError("tariff length differs from the profile")

    @property
    def days(self) -> int:
        return self.profile.horizon_days

    def initial_carry(self) -> CarryState:
        return CarryState.initial(self.battery, self.initial_soc_fraction)

    @property
    def initial_soc(self) -> float:
        return self.initial_soc_fraction * self.battery.energy_capacity_kwh

    def with_dr(self, dr_spec: DrProgramSpec) -> "ProblemInputs":
        return replace(self, dr_spec=dr_spec)

    def with_events(self, realization) -> "ProblemInputs":
        return replace(self, events=EventProcess(self.events.probabilities, tuple(realization)))

    def truncated(self, days: int) -> "ProblemInputs":
        hours = days * HOURS_PER_DAY
        dr = self.dr_spec
        intervals = tuple((a, min(b, days)) for a, b in dr.intervals if a <= days)
        dr = DrProgramSpec(
            dr.windows[:days], dr.baseline_days, dr.energy_rate[:days],
            dr.capacity_rate[: len(intervals)], intervals, dr.reduction_mode,
        )
        real = self.events.realization[:days] if self.events.realization else None
        return ProblemInputs(
            self.battery,
            self.profile.truncate(days),
            TariffSchedule(self.tariff.purchase_rate[:hours], self.tariff.export_rate[:hours]),
            dr,
            EventProcess(self.events.probabilities[:days], real),
            self.initial_soc_fraction,
        )


@dataclass
class DayDiagnostics:
    day: int
    objective: float
    n: int
    N: int
    nodes: int
    leaves: int
    variables: int
    iterations: int
    carry_baseline: float


def day_seed(master_seed: int, day: int) -> list:
    """Seed material for the day-``day`` tree; independent across days, fixed by the master seed."""
    return [int(master_seed), int(day)]


def run_day(carry: CarryState, omega_today: int, config: MpcConfig, inputs: ProblemInputs):
    t = carry.current_day
    T = config.final_day or inputs.days
    n, N = clamp_to_final_day(config.branching_depth, config.receding_horizon, t, T)
    probs = inputs.events.probabilities[t : t + N - 1]
    tree = build_tree(omega_today, probs, n, N, day_seed(config.master_seed, t))
    problem = build_stage_lp(tree, inputs.profile, inputs.tariff, inputs.dr_spec, carry, inputs.battery)
    sol = solve(problem)
    if not sol.optimal:
        raise SolverError(f"day {t}: stage LP is {sol.status} ({sol.message})")
    schedule = extract_day_schedule(problem, sol, tree)
    diag = DayDiagnostics(
        day=t, objective=sol.objective, n=n, N=N, nodes=len(tree.nodes), leaves=len(tree.leaves),
        variables=problem.num_vars, iterations=sol.iterations,
        carry_baseline=baseline(carry.baseline_history, inputs.dr_spec.baseline_days),
    )
    log.debug("day %d: n=%d N=%d objective=%.6f", t, n, N, sol.objective)
    return schedule, diag


def _soc_path(start: float, schedule: DaySchedule, battery: BatterySpec) -> np.ndarray:
    steps = schedule.charge * battery.charge_efficiency - schedule.discharge / battery.discharge_efficiency
    return start + np.cumsum(steps)


def advance_state(
    carry: CarryState,
    committed: DaySchedule,
    omega_today: int,
    profile: CustomerProfile,
    dr_spec: DrProgramSpec,
    battery: BatterySpec,
) -> CarryState:
    t = carry.current_day
    soc = _soc_path(carry.stored_energy, committed, battery)
    E = battery.energy_capacity_kwh
    if soc.min() < -SOC_TOL or soc.max() > E + SOC_TOL:
        raise ValueError(f"day {t}: committed schedule drives stored energy to [{soc.min()}, {soc.max()}]")
    day = profile.day_slice(t)
    loads = profile.demand[day] + committed.charge - profile.solar[day] - committed.discharge
    s = dr_window_consumption(loads, dr_spec.window(t))
    history = carry.baseline_history
    hours, red = carry.prior_event_hours, carry.prior_reduction
    if omega_today:
        delta = reduction(baseline(history, dr_spec.baseline_days), s, dr_spec.reduction_mode)
        hours += len(dr_spec.window(t))
        red += delta
    else:
        history = (history + (s,))[-dr_spec.baseline_days :]
    if t < dr_spec.days and dr_spec.interval_of(t + 1) != dr_spec.interval_of(t):
        hours, red = 0, 0.0
    return CarryState(
        stored_energy=float(min(max(soc[-1], 0.0), E)),
        baseline_history=history,
        prior_event_hours=hours,
        prior_reduction=red,
        current_day=t + 1,
    )


@dataclass(eq=False)
class SimulationTrace:
    event_flags: tuple
    demand: np.ndarray
    solar: np.ndarray
    charge: np.ndarray
    discharge: np.ndarray
    soc: np.ndarray
    net_load: np.ndarray
    cost: np.ndarray
    export_payment: np.ndarray
    window_consumption: np.ndarray
    baseline: np.ndarray
    reduction: np.ndarray
    energy_payment: np.ndarray
    capacity_payment: np.ndarray
    interval_event_hours: np.ndarray
    tariff_cost: float
    dr_payment: float
    total_cost: float
    initial_soc: float = 0.0
    diagnostics: list = field(default_factory=list)

    @property
    def days(self) -> int:
        return len(self.event_flags)

    def day_schedule(self, day: int) -> DaySchedule:
        sl = slice((day - 1) * HOURS_PER_DAY, day * HOURS_PER_DAY)
        return DaySchedule(self.charge[sl], self.discharge[sl])


def build_trace(
    inputs: ProblemInputs,
    charge,
    discharge,
    realization: Sequence[int],
    initial_soc: float | None = None,
    diagnostics=(),
    mode: str | None = None,
) -> SimulationTrace:
    """Settle a fixed full-horizon schedule under one event realization."""
    charge = np.asarray(charge, dtype=float).ravel()
    discharge = np.asarray(discharge, dtype=float).ravel()
    b = inputs.battery
    if initial_soc is None:
        initial_soc = inputs.initial_soc
    prof = inputs.profile
    if charge.shape != (prof.hours,) or discharge.shape != (prof.hours,):
        raise ValueError("schedule does not cover every hour of the profile")
    soc = initial_soc + np.cumsum(charge * b.charge_efficiency - discharge / b.discharge_efficiency)
    loads = prof.demand + charge - prof.solar - discharge
    st = settle(loads, inputs.tariff, inputs.dr_spec, realization, mode)
    return SimulationTrace(
        event_flags=tuple(int(w) for w in realization),
        demand=prof.demand, solar=prof.solar, charge=charge, discharge=discharge, soc=soc,
        net_load=loads, cost=st.cost, export_payment=st.export_payment,
        window_consumption=st.window_consumption, baseline=st.baseline, reduction=st.reduction,
        energy_payment=st.energy_payment, capacity_payment=st.capacity_payment,
        interval_event_hours=st.interval_event_hours,
        tariff_cost=st.tariff_cost, dr_payment=st.dr_payment, total_cost=st.total_cost,
        initial_soc=float(initial_soc), diagnostics=list(diagnostics),
    )


def simulate(inputs: ProblemInputs, realization: Sequence[int] | None, config: MpcConfig) -> SimulationTrace:
    """Run the MPC loop over days ``1..T`` for one fixed event realization."""
    if realization is None:
        realization = inputs.events.realization
    T = inputs.days
    if realization is None or len(realization) != T:
        raise ValueError(f"need a realization of length {T}")
    carry = inputs.initial_carry()
    start = carry.stored_energy
    schedules, diags = [], []
    for t in range(1, T + 1):
        omega = int(realization[t - 1])
        try:
            sched, diag = run_day(carry, omega, config, inputs)
        except SolverError as exc:
            raise SolverError(f"simulation failed on day {t}: {exc}") from exc
        carry = advance_state(carry, sched, omega, inputs.profile, inputs.dr_spec, inputs.battery)
        schedules.append(sched)
        diags.append(diag)
    charge = np.concatenate([s.charge for s in schedules])
    discharge = np.concatenate([s.discharge for s in schedules])
    return build_trace(inputs, charge, discharge, realization, start, diags)
