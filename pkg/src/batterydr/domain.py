"""Core value types and the cost/payment arithmetic of a baseline-based DR program.

All per-hour quantities are kWh (one-hour steps, so kW and kWh coincide).
Days and hours-of-day are 1-based in every public signature; arrays are 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt
from typing import Iterable, Sequence

import numpy as np

HOURS_PER_DAY = 24
DEFAULT_WINDOW = (18, 19, 20, 21)  # 5 p.m. - 9 p.m.
SIGNED = "signed"
CLIPPED = "clipped"


def _as_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BatterySpec:
    power_capacity_kw: float
    energy_capacity_kwh: float
    charge_efficiency: float
    discharge_efficiency: float

    def __post_init__(self):
        if self.power_capacity_kw < 0 or self.energy_capacity_kwh < 0:
            raise ValueError("battery capacities must be non-negative")
        for name in ("charge_efficiency", "discharge_efficiency"):
            eta = getattr(self, name)
            if not 0 < eta <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {eta}")

    @classmethod
    def from_round_trip(cls, power_kw: float, energy_kwh: float, round_trip: float) -> "BatterySpec":
        eta = sqrt(round_trip)
        return cls(power_kw, energy_kwh, eta, eta)


@dataclass(frozen=True, eq=False)
class TariffSchedule:
    purchase_rate: np.ndarray
    export_rate: np.ndarray

    def __post_init__(self):
        rc = _as_array(self.purchase_rate, "purchase_rate")
        re = _as_array(self.export_rate, "export_rate")
        if rc.shape != re.shape:
            raise ValueError("purchase and export rate series differ in length")
        if np.any(re < 0) or np.any(rc < re):
            raise ValueError("tariff requires purchase_rate >= export_rate >= 0 every hour")
        object.__setattr__(self, "purchase_rate", rc)
        object.__setattr__(self, "export_rate", re)

    @classmethod
    def flat(cls, hours: int, purchase: float, export: float) -> "TariffSchedule":
        return cls(np.full(hours, purchase), np.full(hours, export))


@dataclass(frozen=True, eq=False)
class DrProgramSpec:
    """DR program: per-day windows, baseline rule, rates and payment intervals.

    ``windows[t-1]`` holds the 1-based hours of day ``t``; ``intervals`` are
    inclusive 1-based day ranges that partition ``1..T``.
    """

    windows: tuple
    baseline_days: int
    energy_rate: np.ndarray
    capacity_rate: np.ndarray
    intervals: tuple
    reduction_mode: str = SIGNED
    _interval_of: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        windows = tuple(tuple(int(h) for h in w) for w in self.windows)
        for t, w in enumerate(windows, start=1):
            if any(h < 1 or h > HOURS_PER_DAY for h in w):
                raise ValueError(f"day {t}: window hours must lie in 1..24")
            if len(set(w)) != len(w):
                raise ValueError(f"day {t}: duplicate window hours")
        object.__setattr__(self, "windows", windows)
        if self.baseline_days < 1:
            raise ValueError("baseline_days must be >= 1")
        if self.reduction_mode not in (SIGNED, CLIPPED):
            raise ValueError(f"unknown reduction_mode {self.reduction_mode!r}")
        n_days = len(windows)
        energy = _as_array(self.energy_rate, "energy_rate")
        capacity = _as_array(self.capacity_rate, "capacity_rate")
        if energy.shape != (n_days,):
            raise ValueError("energy_rate needs one value per day")
        intervals = tuple((int(a), int(b)) for a, b in self.intervals)
        if capacity.shape != (len(intervals),):
            raise ValueError("capacity_rate needs one value per interval")
        if np.any(energy < 0) or np.any(capacity < 0):
            raise ValueError("DR rates must be non-negative")
        expected = 1
        interval_of = np.empty(n_days, dtype=int)
        for i, (a, b) in enumerate(intervals):
            if a != expected or b < a:
                raise ValueError("intervals must partition the days 1..T in order")
            interval_of[a - 1 : b] = i
            expected = b + 1
        if expected != n_days + 1:
            raise ValueError("intervals must partition the days 1..T in order")
        interval_of.setflags(write=False)
        object.__setattr__(self, "intervals", intervals)
        object.__setattr__(self, "energy_rate", energy)
        object.__setattr__(self, "capacity_rate", capacity)
        object.__setattr__(self, "_interval_of", interval_of)

    @classmethod
    def uniform(
        cls,
        days: int,
        window: Sequence[int] = DEFAULT_WINDOW,
        baseline_days: int = 10,
        energy_rate: float = 0.0,
        capacity_rate: float = 0.0,
        interval_days: int | None = None,
        reduction_mode: str = SIGNED,
    ) -> "DrProgramSpec":
        """Same window and rates every day; fixed-length intervals (default: one)."""
        step = interval_days or days
        intervals = [(a, min(a + step - 1, days)) for a in range(1, days + 1, step)]
        return cls(
            windows=(tuple(window),) * days,
            baseline_days=baseline_days,
            energy_rate=np.full(days, float(energy_rate)),
            capacity_rate=np.full(len(intervals), float(capacity_rate)),
            intervals=tuple(intervals),
            reduction_mode=reduction_mode,
        )

    @property
    def days(self) -> int:
        return len(self.windows)

    def window(self, day: int) -> tuple:
        return self.windows[day - 1]

    def window_index(self, day: int) -> np.ndarray:
        """0-based offsets of the window hours within the day."""
        return np.asarray(self.windows[day - 1], dtype=int) - 1

    def interval_of(self, day: int) -> int:
        return int(self._interval_of[day - 1])

    def with_rates(self, energy_rate=None, capacity_rate=None, reduction_mode=None) -> "DrProgramSpec":
        return DrProgramSpec(
            windows=self.windows,
            baseline_days=self.baseline_days,
            energy_rate=self.energy_rate if energy_rate is None else np.broadcast_to(energy_rate, self.energy_rate.shape),
            capacity_rate=self.capacity_rate
            if capacity_rate is None
            else np.broadcast_to(capacity_rate, self.capacity_rate.shape),
            intervals=self.intervals,
            reduction_mode=reduction_mode or self.reduction_mode,
        )


@dataclass(frozen=True, eq=False)
class CustomerProfile:
    demand: np.ndarray
    solar: np.ndarray

    def __post_init__(self):
        d = _as_array(self.demand, "demand")
        s = _as_array(self.solar, "solar")
        if d.shape != s.shape:
            raise ValueError("demand and solar series differ in length")
        if len(d) % HOURS_PER_DAY:
            raise ValueError("profile length must be a whole number of days")
        if np.any(d < 0) or np.any(s < 0):
            raise ValueError("demand and solar must be non-negative")
        object.__setattr__(self, "demand", d)
        object.__setattr__(self, "solar", s)

    @property
    def hours(self) -> int:
        return len(self.demand)

    @property
    def horizon_days(self) -> int:
        return len(self.demand) // HOURS_PER_DAY

    def day_slice(self, day: int) -> slice:
        return slice((day - 1) * HOURS_PER_DAY, day * HOURS_PER_DAY)

    def truncate(self, days: int) -> "CustomerProfile":
        return CustomerProfile(self.demand[: days * HOURS_PER_DAY], self.solar[: days * HOURS_PER_DAY])


@dataclass(frozen=True, eq=False)
class EventProcess:
    """Independent Bernoulli event days, optionally with a fixed realization."""

    probabilities: np.ndarray
    realization: tuple | None = None

    def __post_init__(self):
        p = _as_array(self.probabilities, "probabilities")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("event probabilities must lie in [0, 1]")
        object.__setattr__(self, "probabilities", p)
        if self.realization is not None:
            omega = tuple(int(w) for w in self.realization)
            if len(omega) != len(p) or any(w not in (0, 1) for w in omega):
                raise ValueError("realization must be a 0/1 sequence with one entry per day")
            object.__setattr__(self, "realization", omega)

    @property
    def days(self) -> int:
        return len(self.probabilities)

    def sample(self, rng: np.random.Generator) -> tuple:
        return tuple(int(u < p) for u, p in zip(rng.random(self.days), self.probabilities))


@dataclass(frozen=True)
class CarryState:
    """State handed from one MPC day to the next."""

    stored_energy: float
    baseline_history: tuple = ()  # oldest first
    prior_event_hours: int = 0
    prior_reduction: float = 0.0
    current_day: int = 1

    def __post_init__(self):
        if self.stored_energy < 0:
            raise ValueError("stored energy must be non-negative")
        if self.prior_event_hours < 0:
            raise ValueError("prior_event_hours must be non-negative")
        object.__setattr__(self, "baseline_history", tuple(float(s) for s in self.baseline_history))

    @classmethod
    def initial(cls, battery: BatterySpec, soc_fraction: float = 0.5) -> "CarryState":
        return cls(stored_energy=soc_fraction * battery.energy_capacity_kwh)


@dataclass(frozen=True, eq=False)
class DaySchedule:
    charge: np.ndarray
    discharge: np.ndarray

    def __post_init__(self):
        c = _as_array(self.charge, "charge")
        d = _as_array(self.discharge, "discharge")
        if c.shape != (HOURS_PER_DAY,) or d.shape != (HOURS_PER_DAY,):
            raise ValueError("a day schedule has 24 charge and 24 discharge values")
        if np.any(c < 0) or np.any(d < 0):
            raise ValueError("charge and discharge must be non-negative")
        object.__setattr__(self, "charge", c)
        object.__setattr__(self, "discharge", d)

    @classmethod
    def idle(cls) -> "DaySchedule":
        return cls(np.zeros(HOURS_PER_DAY), np.zeros(HOURS_PER_DAY))

    def respects_power(self, battery: BatterySpec, tol: float = 1e-9) -> bool:
        return bool(np.all(self.charge + self.discharge <= battery.power_capacity_kw + tol))

    def __eq__(self, other):
        if not isinstance(other, DaySchedule):
            return NotImplemented
        return np.array_equal(self.charge, other.charge) and np.array_equal(self.discharge, other.discharge)


# ---------------------------------------------------------------------------
# Pure arithmetic
# ---------------------------------------------------------------------------


def net_load(d, rho, b_plus, b_minus):
    return d + b_plus - rho - b_minus


def hourly_cash_flow(load: float, r_c: float, r_e: float) -> tuple[float, float]:
    """Return ``(purchase cost, export payment)`` for one hour of net load."""
    if r_c < r_e:
        raise ValueError("purchase rate below export rate breaks the import/export split")
    if load >= 0:
        return r_c * load, 0.0
    return 0.0, r_e * -load


def dr_window_consumption(day_loads, window: Iterable[int]) -> float:
    """Sum of net load over the 1-based window hours of a single day."""
    hours = list(window)
    if not hours:
        raise ValueError("DR window is empty")
    loads = np.asarray(day_loads, dtype=float)
    if any(h < 1 or h > len(loads) for h in hours):
        raise ValueError("window hour outside the day")
    return float(sum(loads[h - 1] for h in hours))


def baseline(history: Sequence[float], n_b: int) -> float:
    """Mean of the most recent ``n_b`` non-event window consumptions (0 if none)."""
    recent = list(history)[-n_b:] if n_b > 0 else []
    if not recent:
        return 0.0
    return float(sum(recent) / len(recent))


def reduction(baseline_kwh: float, event_consumption: float, mode: str = SIGNED) -> float:
    delta = baseline_kwh - event_consumption
    if mode == SIGNED:
        return delta
    if mode == CLIPPED:
        return max(0.0, delta)
    raise ValueError(f"unknown reduction mode {mode!r}")


def energy_payment(delta: float, rate: float, is_event: bool) -> float:
    return rate * delta if is_event else 0.0


def interval_avg_reduction(reductions: Sequence[float], window_hours: Sequence[int]) -> float:
    if len(reductions) != len(window_hours):
        raise ValueError("reductions and window_hours must be aligned")
    hours = sum(window_hours)
    if hours == 0:
        return 0.0
    return float(sum(reductions) / hours)


def capacity_payment(avg_reduction: float, rate: float) -> float:
    return rate * avg_reduction


def proration_factor(interval_start: int, interval_end: int, horizon_end: int) -> float:
    if interval_end < interval_start:
        raise ValueError("interval ends before it starts")
    if horizon_end < interval_start:
        raise ValueError("horizon ends before the interval starts")
    covered = min(interval_end, horizon_end) - interval_start + 1
    return covered / (interval_end - interval_start + 1)


def prorate_capacity_payment(full_payment: float, interval_start: int, interval_end: int, horizon_end: int) -> float:
    return full_payment * proration_factor(interval_start, interval_end, horizon_end)


# ---------------------------------------------------------------------------
# Realized settlement over a full horizon
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Settlement:
    """Realized bills for one event realization.

    Daily arrays are indexed by day-1; baseline/reduction are NaN on non-event days.
    """

    cost: np.ndarray
    export_payment: np.ndarray
    window_consumption: np.ndarray
    baseline: np.ndarray
    reduction: np.ndarray
    energy_payment: np.ndarray
    capacity_payment: np.ndarray
    interval_event_hours: np.ndarray

    @property
    def tariff_cost(self) -> float:
        return float(self.cost.sum() - self.export_payment.sum())

    @property
    def dr_payment(self) -> float:
        return float(self.energy_payment.sum() + self.capacity_payment.sum())

    @property
    def total_cost(self) -> float:
        return self.tariff_cost - self.dr_payment


def settle(
    loads,
    tariff: TariffSchedule,
    dr_spec: DrProgramSpec,
    realization: Sequence[int],
    mode: str | None = None,
) -> Settlement:
    """Compute every cash flow and DR quantity from realized hourly net loads."""
    loads = np.asarray(loads, dtype=float)
    days = dr_spec.days
    if len(realization) != days or len(loads) != days * HOURS_PER_DAY:
        raise ValueError("loads, realization and DR program disagree on the horizon length")
    if len(tariff.purchase_rate) < len(loads):
        raise ValueError("tariff shorter than the load series")
    mode = mode or dr_spec.reduction_mode
    rc = tariff.purchase_rate[: len(loads)]
    re = tariff.export_rate[: len(loads)]
    cost = rc * np.maximum(loads, 0.0)
    export = re * np.maximum(-loads, 0.0)

    window_s = np.empty(days)
    base = np.full(days, np.nan)
    delta = np.full(days, np.nan)
    epay = np.zeros(days)
    history: list[float] = []
    n_int = len(dr_spec.intervals)
    red_sum = np.zeros(n_int)
    hour_sum = np.zeros(n_int, dtype=int)
    for t in range(1, days + 1):
        day_loads = loads[(t - 1) * HOURS_PER_DAY : t * HOURS_PER_DAY]
        s = dr_window_consumption(day_loads, dr_spec.window(t))
        window_s[t - 1] = s
        if realization[t - 1]:
            b = baseline(history, dr_spec.baseline_days)
            dl = reduction(b, s, mode)
            base[t - 1] = b
            delta[t - 1] = dl
            epay[t - 1] = energy_payment(dl, dr_spec.energy_rate[t - 1], True)
            i = dr_spec.interval_of(t)
            red_sum[i] += dl
            hour_sum[i] += len(dr_spec.window(t))
        else:
            history.append(s)
            del history[: -dr_spec.baseline_days]
    cpay = np.array(
        [capacity_payment(interval_avg_reduction([red_sum[i]], [hour_sum[i]]), dr_spec.capacity_rate[i]) for i in range(n_int)]
    )
    return Settlement(cost, export, window_s, base, delta, epay, cpay, hour_sum)


def realized_total_cost(trace, tariff: TariffSchedule, dr_spec: DrProgramSpec, realization: Sequence[int]) -> float:
    """Total net cost of a realized trace (or a bare hourly net-load series)."""
    loads = getattr(trace, "net_load", trace)
    recorded = getattr(trace, "event_flags", None)
    if recorded is not None and tuple(recorded) != tuple(realization):
        raise ValueError("realization disagrees with the trace's recorded event days")
    return settle(loads, tariff, dr_spec, realization).total_cost
