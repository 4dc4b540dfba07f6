"""Input files, run configuration and report output.

Config schema (YAML; every section optional except ``data``)::

    data:        {demand: PATH, solar: PATH, probabilities: PATH}   # relative to the config file
    battery:     {power_capacity_kw: 10, energy_capacity_kwh: 27, round_trip_efficiency: 0.9,
                  charge_efficiency: ..., discharge_efficiency: ..., initial_soc_fraction: 0.5}
    tariff:      {purchase_rate: 0.29, export_rate: 0.108}
    dr_program:  {window_hours: [18, 19, 20, 21], baseline_days: 10, reduction_mode: signed,
                  energy_rate: 0.0, capacity_rate: 2.0,
                  intervals: monthly | <days per interval> | [[first, last], ...]}
    mpc:         {receding_horizon: 35, branching_depth: 4, master_seed: 0}
    study:       {type: simulate|exact|evaluate|counterfactual, runs: 10, rates: [2, 10],
                  events: "0100110", first_day_event: 0}
    output_dir:  out
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .domain import DEFAULT_WINDOW, HOURS_PER_DAY, BatterySpec, DrProgramSpec, EventProcess, TariffSchedule, CustomerProfile
from .mpc import MpcConfig, ProblemInputs

MONTH_DAYS = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)
HOURLY_COLUMNS = (
    "hour", "day", "event_flag", "demand", "solar", "charge", "discharge", "soc", "net_load", "cost", "export_payment",
)
STUDY_TYPES = ("simulate", "exact", "evaluate", "counterfactual")


class InputFileError(ValueError):
    def __init__(self, path, row, reason):
        self.path, self.row, self.reason = str(path), row, reason
        where = f"{path}" + (f", row {row}" if row is not None else "")
        super().__init__(f"{where}: {reason}")


class ConfigError(ValueError):
    def __init__(self, field_path: str, reason: str, path=None):
        self.field_path, self.reason = field_path, reason
        prefix = f"{path}: " if path else ""
        super().__init__(f"{prefix}{field_path}: {reason}")


# ---------------------------------------------------------------------------
# CSV inputs
# ---------------------------------------------------------------------------


def _read_indexed_csv(path, key: str, value: str) -> list[float]:
    path = Path(path)
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise InputFileError(path, None, f"cannot open ({exc.strerror})") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != [key, value]:
            raise InputFileError(path, 1, f"header must be '{key},{value}'")
        values = []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise InputFileError(path, row_no, f"expected 2 columns, got {len(row)}")
            try:
                idx = int(row[0])
            except ValueError:
                raise InputFileError(path, row_no, f"{key} {row[0]!r} is not an integer") from None
            try:
                x = float(row[1])
            except ValueError:
                raise InputFileError(path, row_no, f"{value} {row[1]!r} is not numeric") from None
            expected = len(values) + 1
            if idx < expected:
                raise InputFileError(path, row_no, f"{key} {idx} duplicated or out of order (expected {expected})")
            if idx > expected:
                raise InputFileError(path, row_no, f"gap: {key} {expected} missing")
            if not math.isfinite(x):
                raise InputFileError(path, row_no, f"{value} is not finite")
            values.append((row_no, x))
    if not values:
        raise InputFileError(path, None, "no data rows")
    return values


def load_hourly_csv(path) -> np.ndarray:
    rows = _read_indexed_csv(path, "hour", "value")
    for row_no, x in rows:
        if x < 0:
            raise InputFileError(path, row_no, f"negative value {x}")
    if len(rows) % HOURS_PER_DAY:
        raise InputFileError(path, None, f"{len(rows)} hours is not a whole number of days")
    return np.array([x for _, x in rows])


def load_daily_probabilities_csv(path) -> np.ndarray:
    rows = _read_indexed_csv(path, "day", "probability")
    for row_no, x in rows:
        if not 0.0 <= x <= 1.0:
            raise InputFileError(path, row_no, f"probability {x} outside [0, 1]")
    return np.array([x for _, x in rows])


def write_indexed_csv(path, key: str, value: str, series) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([key, value])
        for i, x in enumerate(series, start=1):
            w.writerow([i, repr(float(x))])


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

_SCHEMA: dict[str, Any] = {
    "data": {"demand": None, "solar": None, "probabilities": None},
    "battery": {
        "power_capacity_kw": None, "energy_capacity_kwh": None, "round_trip_efficiency": None,
        "charge_efficiency": None, "discharge_efficiency": None, "initial_soc_fraction": None,
    },
    "tariff": {"purchase_rate": None, "export_rate": None},
    "dr_program": {
        "window_hours": None, "baseline_days": None, "reduction_mode": None,
        "energy_rate": None, "capacity_rate": None, "intervals": None,
    },
    "mpc": {"receding_horizon": None, "branching_depth": None, "master_seed": None},
    "study": {"type": None, "runs": None, "rates": None, "events": None, "first_day_event": None},
    "output_dir": None,
}


def _check_keys(data: dict, schema: dict, prefix: str, path):
    if not isinstance(data, dict):
        raise ConfigError(prefix or "<root>", "expected a mapping", path)
    for key, val in data.items():
        where = f"{prefix}.{key}" if prefix else str(key)
        if key not in schema:
            raise ConfigError(where, "unknown key", path)
        if isinstance(schema[key], dict):
            _check_keys(val or {}, schema[key], where, path)


@dataclass
class RunConfig:
    demand_path: Path
    solar_path: Path
    probabilities_path: Path
    battery: BatterySpec
    purchase_rate: float = 0.29
    export_rate: float = 0.108
    window_hours: tuple = DEFAULT_WINDOW
    baseline_days: int = 10
    reduction_mode: str = "signed"
    energy_rate: float = 0.0
    capacity_rate: float = 2.0
    intervals: Any = "monthly"
    receding_horizon: int = 35
    branching_depth: int = 4
    master_seed: int = 0
    study_type: str = "simulate"
    runs: int = 10
    rates: tuple = (2.0, 10.0)
    events: str | None = None
    first_day_event: int = 0
    output_dir: Path = field(default_factory=lambda: Path("out"))
    initial_soc_fraction: float = 0.5

    def interval_ranges(self, days: int) -> tuple:
        spec = self.intervals
        if spec == "monthly":
            out, start = [], 1
            for length in MONTH_DAYS * (days // 365 + 1):
                if start > days:
                    break
                out.append((start, min(start + length - 1, days)))
                start += length
            return tuple(out)
        if isinstance(spec, int):
            return tuple((a, min(a + spec - 1, days)) for a in range(1, days + 1, spec))
        return tuple((int(a), int(b)) for a, b in spec)

    def mpc_config(self, days: int | None = None, seed: int | None = None) -> MpcConfig:
        N = min(self.receding_horizon, days) if days else self.receding_horizon
        return MpcConfig(N, min(self.branching_depth, N), self.master_seed if seed is None else seed, days)

    def build_inputs(self) -> ProblemInputs:
        demand = load_hourly_csv(self.demand_path)
        solar = load_hourly_csv(self.solar_path)
        probs = load_daily_probabilities_csv(self.probabilities_path)
        if len(demand) != len(solar):
            raise ConfigError("data", f"demand has {len(demand)} hours but solar has {len(solar)}")
        days = len(demand) // HOURS_PER_DAY
        if len(probs) != days:
            raise ConfigError("data.probabilities", f"{len(probs)} days of probabilities for a {days}-day profile")
        intervals = self.interval_ranges(days)
        try:
            dr = DrProgramSpec(
                windows=(tuple(self.window_hours),) * days,
                baseline_days=self.baseline_days,
                energy_rate=np.full(days, float(self.energy_rate)),
                capacity_rate=np.full(len(intervals), float(self.capacity_rate)),
                intervals=intervals,
                reduction_mode=self.reduction_mode,
            )
        except ValueError as exc:
            raise ConfigError("dr_program", str(exc)) from exc
        realization = None
        if self.events is not None:
            realization = parse_events(self.events, days)
        try:
            tariff = TariffSchedule.flat(days * HOURS_PER_DAY, self.purchase_rate, self.export_rate)
        except ValueError as exc:
            raise ConfigError("tariff", str(exc)) from exc
        return ProblemInputs(
            self.battery, CustomerProfile(demand, solar), tariff, dr, EventProcess(probs, realization),
            self.initial_soc_fraction,
        )


def parse_events(bits: str, days: int) -> tuple:
    bits = str(bits).strip()
    if len(bits) != days or set(bits) - {"0", "1"}:
        raise ConfigError("study.events", f"expected a {days}-character 0/1 string, got {bits!r}")
    return tuple(int(c) for c in bits)


def _num(section: dict, key: str, where: str, default, kind=float, path=None):
    val = section.get(key, default)
    if val is None:
        return None
    try:
        if kind is int and (isinstance(val, bool) or float(val) != int(val)):
            raise ValueError
        return kind(val)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}", f"expected {kind.__name__}, got {val!r}", path) from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read ({exc.strerror})", path) from exc
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"invalid YAML: {exc}", path) from exc
    _check_keys(raw, _SCHEMA, "", path)
    base = path.parent

    data = raw.get("data") or {}
    paths = {}
    for key in ("demand", "solar", "probabilities"):
        if key not in data:
            raise ConfigError(f"data.{key}", "required", path)
        p = Path(str(data[key]))
        p = p if p.is_absolute() else base / p
        if not p.exists():
            raise ConfigError(f"data.{key}", f"file not found: {p}", path)
        paths[key] = p

    bat = raw.get("battery") or {}
    P = _num(bat, "power_capacity_kw", "battery", 10.0, path=path)
    E = _num(bat, "energy_capacity_kwh", "battery", 27.0, path=path)
    rt = _num(bat, "round_trip_efficiency", "battery", 0.9, path=path)
    eta_c = _num(bat, "charge_efficiency", "battery", None, path=path)
    eta_d = _num(bat, "discharge_efficiency", "battery", None, path=path)
    if (eta_c is None) != (eta_d is None):
        raise ConfigError("battery", "give both charge_efficiency and discharge_efficiency, or neither", path)
    try:
        battery = BatterySpec(P, E, eta_c, eta_d) if eta_c is not None else BatterySpec.from_round_trip(P, E, rt)
    except ValueError as exc:
        raise ConfigError("battery", str(exc), path) from exc

    tar = raw.get("tariff") or {}
    drp = raw.get("dr_program") or {}
    mpc = raw.get("mpc") or {}
    study = raw.get("study") or {}

    intervals = drp.get("intervals", "monthly")
    if not (intervals == "monthly" or (isinstance(intervals, int) and intervals > 0) or isinstance(intervals, list)):
        raise ConfigError("dr_program.intervals", "expected 'monthly', a positive day count or a list of [first, last]", path)
    window = drp.get("window_hours", list(DEFAULT_WINDOW))
    if not isinstance(window, list) or not window or not all(isinstance(h, int) and 1 <= h <= 24 for h in window):
        raise ConfigError("dr_program.window_hours", "expected a non-empty list of hours in 1..24", path)
    mode = drp.get("reduction_mode", "signed")
    if mode not in ("signed", "clipped"):
        raise ConfigError("dr_program.reduction_mode", f"expected signed or clipped, got {mode!r}", path)
    stype = study.get("type", "simulate")
    if stype not in STUDY_TYPES:
        raise ConfigError("study.type", f"expected one of {STUDY_TYPES}, got {stype!r}", path)
    rates = study.get("rates", [2.0, 10.0])
    if not isinstance(rates, list) or not all(isinstance(r, (int, float)) and r >= 0 for r in rates):
        raise ConfigError("study.rates", "expected a list of non-negative numbers", path)
    events = study.get("events")
    out = Path(str(raw.get("output_dir", "out")))

    cfg = RunConfig(
        demand_path=paths["demand"],
        solar_path=paths["solar"],
        probabilities_path=paths["probabilities"],
        battery=battery,
        purchase_rate=_num(tar, "purchase_rate", "tariff", 0.29, path=path),
        export_rate=_num(tar, "export_rate", "tariff", 0.108, path=path),
        window_hours=tuple(window),
        baseline_days=_num(drp, "baseline_days", "dr_program", 10, int, path),
        reduction_mode=mode,
        energy_rate=_num(drp, "energy_rate", "dr_program", 0.0, path=path),
        capacity_rate=_num(drp, "capacity_rate", "dr_program", 2.0, path=path),
        intervals=intervals,
        receding_horizon=_num(mpc, "receding_horizon", "mpc", 35, int, path),
        branching_depth=_num(mpc, "branching_depth", "mpc", 4, int, path),
        master_seed=_num(mpc, "master_seed", "mpc", 0, int, path),
        study_type=stype,
        runs=_num(study, "runs", "study", 10, int, path),
        rates=tuple(float(r) for r in rates),
        events=None if events is None else str(events),
        first_day_event=_num(study, "first_day_event", "study", 0, int, path),
        output_dir=out if out.is_absolute() else base / out,
        initial_soc_fraction=_num(bat, "initial_soc_fraction", "battery", 0.5, path=path),
    )
    if cfg.baseline_days < 1:
        raise ConfigError("dr_program.baseline_days", "must be >= 1", path)
    if not 1 <= cfg.branching_depth <= cfg.receding_horizon:
        raise ConfigError("mpc", "need 1 <= branching_depth <= receding_horizon", path)
    if cfg.runs < 1:
        raise ConfigError("study.runs", "must be >= 1", path)
    if cfg.first_day_event not in (0, 1):
        raise ConfigError("study.first_day_event", "must be 0 or 1", path)
    if not 0 <= cfg.initial_soc_fraction <= 1:
        raise ConfigError("battery.initial_soc_fraction", "must lie in [0, 1]", path)
    if cfg.export_rate < 0 or cfg.purchase_rate < cfg.export_rate:
        raise ConfigError("tariff", "need purchase_rate >= export_rate >= 0", path)
    return cfg


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _clean(value):
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return "" if not math.isfinite(x) else repr(float(x))
    return str(x)


def write_rows_csv(path, rows: list[dict], columns=None) -> None:
    if columns is None:
        columns = list(dict.fromkeys(k for r in rows for k in r))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in columns])


def write_hourly_trace(path, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HOURLY_COLUMNS)
        for h in range(len(trace.net_load)):
            day = h // HOURS_PER_DAY
            w.writerow(
                [h + 1, day + 1, trace.event_flags[day]]
                + [_cell(float(getattr(trace, col)[h])) for col in HOURLY_COLUMNS[3:]]
            )


def write_report(summary: dict, traces, out_dir, monthly: list[dict] | None = None) -> list[Path]:
    """Write ``summary.json``, ``monthly.csv`` and ``hourly_trace.csv`` (first trace) into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "summary.json"]
    with open(written[0], "w") as fh:
        json.dump(_clean(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if monthly is not None:
        written.append(out / "monthly.csv")
        write_rows_csv(written[-1], monthly)
    traces = list(traces or [])
    if traces:
        written.append(out / "hourly_trace.csv")
        write_hourly_trace(written[-1], traces[0])
    return written


def read_summary(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
