import sys
from pathlib import Path

import numpy as np
import pytest

from batterydr.domain import BatterySpec, CustomerProfile, DrProgramSpec, EventProcess, TariffSchedule
from batterydr.mpc import ProblemInputs

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).resolve().parents[1] / "src" / "batterydr" / "data"
DESK7 = DATA / "desk7" / "config.yaml"
DESK28 = DATA / "desk28" / "config.yaml"


def toy_profile(days, seed=0, solar_peak=4.0, demand_scale=1.0):
    """Evening-heavy household with a midday solar bump; reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    hours = np.arange(24)
    demand = 0.6 + 1.4 * np.exp(-0.5 * ((hours - 19) / 2.0) ** 2)
    solar = solar_peak * np.clip(np.sin(np.pi * (hours - 6) / 12), 0, None)
    d = np.concatenate([demand_scale * demand * rng.uniform(0.8, 1.2, 24) for _ in range(days)])
    s = np.concatenate([solar * rng.uniform(0.4, 1.0) for _ in range(days)])
    return CustomerProfile(d.round(4), s.round(4))


def toy_inputs(
    days=3,
    seed=0,
    probabilities=0.5,
    capacity_rate=5.0,
    energy_rate=0.0,
    baseline_days=2,
    battery=None,
    interval_days=None,
    realization=None,
    rc=0.29,
    re=0.108,
):
    probs = np.broadcast_to(np.asarray(probabilities, dtype=float), (days,))
    return ProblemInputs(
        battery or BatterySpec.from_round_trip(5.0, 10.0, 0.9),
        toy_profile(days, seed),
        TariffSchedule.flat(24 * days, rc, re),
        DrProgramSpec.uniform(
            days, baseline_days=baseline_days, energy_rate=energy_rate, capacity_rate=capacity_rate,
            interval_days=interval_days,
        ),
        EventProcess(probs, realization),
    )


@pytest.fixture
def desk7_config():
    from batterydr.io_config import load_config

    return load_config(DESK7)


@pytest.fixture
def desk7_inputs(desk7_config):
    return desk7_config.build_inputs()


def pytest_terminal_summary(terminalreporter):
    import sys as _sys

    module = _sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
