"""Regenerate the bundled synthetic reference instances under src/batterydr/data/.

Residential demand with morning and evening peaks, scaled to ~38 kWh/day so
that it roughly matches the yearly yield of a 9.5 kW rooftop array
(~1,480 kWh/kW-yr). Solar is a clear-sky bell scaled by a per-day cloud factor.
"""
from pathlib import Path

import numpy as np

from batterydr.io_config import write_indexed_csv

DATA = Path(__file__).resolve().parents[1] / "src" / "batterydr" / "data"

DEMAND_SHAPE = np.array([
    0.62, 0.55, 0.52, 0.50, 0.52, 0.70, 1.05, 1.20, 0.95, 0.80, 0.78, 0.82,
    0.85, 0.82, 0.80, 0.88, 1.15, 1.75, 2.20, 2.30, 2.05, 1.60, 1.10, 0.80,
]) * 1.6


def solar_shape(peak_kw: float = 5.0) -> np.ndarray:
    hours = np.arange(24) + 0.5
    bell = np.sin(np.pi * (hours - 6.0) / 12.0)
    return peak_kw * np.clip(bell, 0.0, None)


def make(days: int, clouds: tuple, probs, seed: int):
    rng = np.random.default_rng(seed)
    demand, solar = [], []
    for t in range(days):
        scale = rng.normal(1.0, 0.08)
        noise = rng.normal(1.0, 0.05, 24)
        demand.append(np.round(DEMAND_SHAPE * scale * noise, 4))
        cloud = rng.uniform(*clouds)
        solar.append(np.round(solar_shape() * cloud * rng.normal(1.0, 0.05, 24).clip(0.8, 1.2), 4))
    return np.concatenate(demand).clip(0), np.concatenate(solar).clip(0), np.asarray(probs)


def write(name: str, demand, solar, probs, config: str):
    out = DATA / name
    out.mkdir(parents=True, exist_ok=True)
    write_indexed_csv(out / "demand.csv", "hour", "value", demand)
    write_indexed_csv(out / "solar.csv", "hour", "value", solar)
    write_indexed_csv(out / "probabilities.csv", "day", "probability", probs)
    (out / "config.yaml").write_text(config)


CONFIG7 = """\
# 7-day reference instance (winter week): one 7-day payment interval, 3-day baseline.
data:
  demand: demand.csv
  solar: solar.csv
  probabilities: probabilities.csv
dr_program:
  baseline_days: 3
  capacity_rate: 2.0
  intervals: 7
mpc:
  receding_horizon: 7
  branching_depth: 2
  master_seed: 0
study:
  type: simulate
  runs: 5
  first_day_event: 0
output_dir: out
"""

CONFIG28 = """\
# 28-day reference instance (hot-season month): one 28-day payment interval, 5-day baseline.
data:
  demand: demand.csv
  solar: solar.csv
  probabilities: probabilities.csv
dr_program:
  baseline_days: 5
  capacity_rate: 10.0
  intervals: 28
mpc:
  receding_horizon: 10
  branching_depth: 2
  master_seed: 0
study:
  type: evaluate
  runs: 10
  rates: [2, 10]
output_dir: out
"""

if __name__ == "__main__":
    # winter week: weaker sun, low event probabilities
    d, s, _ = make(7, (0.5, 0.9), [], seed=7)
    write("desk7", d, s, [0.05, 0.08, 0.1, 0.12, 0.1, 0.08, 0.05], CONFIG7)
    rng = np.random.default_rng(28)
    p28 = np.round(np.clip(0.25 + 0.2 * np.sin(np.arange(28) / 4.0) + rng.normal(0, 0.05, 28), 0.02, 0.6), 3)
    # hot-season month: stronger sun, higher event probabilities
    d, s, _ = make(28, (0.6, 1.0), [], seed=28)
    write("desk28", d, s, p28, CONFIG28)
