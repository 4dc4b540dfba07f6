import math
from pathlib import Path

import numpy as np
import pytest
import yaml

from batterydr.evaluation import metrics_from_aggregates
from batterydr.io_config import (
    ConfigError,
    InputFileError,
    load_config,
    load_daily_probabilities_csv,
    load_hourly_csv,
    read_summary,
    write_hourly_trace,
    write_indexed_csv,
    write_report,
)
from batterydr.mpc import MpcConfig, simulate
from conftest import DESK7, toy_inputs

MALFORMED = Path(__file__).parent / "fixtures" / "malformed"


def write_csv(path, header, values):
    path.write_text(header + "\n" + "".join(f"{i},{v}\n" for i, v in enumerate(values, start=1)))
    return path


def test_hourly_series(tmp_path):
    assert np.array_equal(load_hourly_csv(write_csv(tmp_path / "d.csv", "hour,value", [1.0] * 24)), np.ones(24))


def test_daily_probabilities(tmp_path):
    p = load_daily_probabilities_csv(write_csv(tmp_path / "p.csv", "day,probability", [0.5] * 7))
    assert list(p) == [0.5] * 7
    edge = load_daily_probabilities_csv(write_csv(tmp_path / "q.csv", "day,probability", [0, 1]))
    assert list(edge) == [0.0, 1.0]


@pytest.mark.parametrize(
    "name, row, needle",
    [
        ("gap_hour5.csv", 6, "hour 5 missing"),
        ("negative_value.csv", 3, "negative"),
        ("duplicate_hour.csv", 3, "duplicated"),
        ("non_numeric.csv", 3, "not numeric"),
        ("bad_header.csv", 1, "header"),
        ("extra_column.csv", 2, "2 columns"),
        ("no_rows.csv", None, "no data"),
        ("not_finite.csv", 2, "finite"),
    ],
)
def test_malformed_hourly_files(name, row, needle):
    with pytest.raises(InputFileError) as err:
        load_hourly_csv(MALFORMED / name)
    e = err.value
    assert e.path.endswith(name) and e.row == row and needle in e.reason
    assert name in str(e)


@pytest.mark.parametrize(
    "name, row, needle",
    [("probability_above_one.csv", 3, "[0, 1]"), ("probability_gap.csv", 3, "day 2 missing")],
)
def test_malformed_probability_files(name, row, needle):
    with pytest.raises(InputFileError) as err:
        load_daily_probabilities_csv(MALFORMED / name)
    assert err.value.row == row and needle in err.value.reason


def test_missing_file():
    with pytest.raises(InputFileError):
        load_hourly_csv(MALFORMED / "absent.csv")


def minimal_config(tmp_path, **extra):
    for name, header, values in (
        ("demand.csv", "hour,value", [1.0] * 48),
        ("solar.csv", "hour,value", [0.0] * 48),
        ("probabilities.csv", "day,probability", [0.5, 0.5]),
    ):
        write_csv(tmp_path / name, header, values)
    body = {"data": {"demand": "demand.csv", "solar": "solar.csv", "probabilities": "probabilities.csv"}, **extra}
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(body))
    return path


def test_minimal_config_gets_the_case_study_defaults(tmp_path):
    cfg = load_config(minimal_config(tmp_path))
    b = cfg.battery
    assert (b.power_capacity_kw, b.energy_capacity_kwh) == (10.0, 27.0)
    assert b.charge_efficiency == pytest.approx(math.sqrt(0.9)) == b.discharge_efficiency
    assert (cfg.purchase_rate, cfg.export_rate) == (0.29, 0.108)
    assert cfg.window_hours == (18, 19, 20, 21)
    assert cfg.rates == (2.0, 10.0) and cfg.runs == 10
    assert (cfg.receding_horizon, cfg.branching_depth) == (35, 4)
    inputs = cfg.build_inputs()
    assert inputs.days == 2 and inputs.initial_soc == 13.5
    # a horizon longer than the data is clamped to it
    assert cfg.mpc_config(inputs.days).receding_horizon == 2


def test_efficiency_override(tmp_path):
    cfg = load_config(minimal_config(tmp_path, battery={"charge_efficiency": 0.9, "discharge_efficiency": 0.8}))
    assert (cfg.battery.charge_efficiency, cfg.battery.discharge_efficiency) == (0.9, 0.8)


@pytest.mark.parametrize(
    "extra, field",
    [
        ({"batery": {}}, "batery"),
        ({"battery": {"voltage": 3}}, "battery.voltage"),
        ({"battery": {"power_capacity_kw": "lots"}}, "battery.power_capacity_kw"),
        ({"mpc": {"receding_horizon": 2, "branching_depth": 3}}, "mpc"),
        ({"study": {"type": "optimize"}}, "study.type"),
        ({"study": {"rates": [2, -1]}}, "study.rates"),
        ({"tariff": {"purchase_rate": 0.1, "export_rate": 0.2}}, "tariff"),
        ({"dr_program": {"window_hours": [0, 25]}}, "dr_program.window_hours"),
        ({"dr_program": {"reduction_mode": "both"}}, "dr_program.reduction_mode"),
        ({"battery": {"charge_efficiency": 0.9}}, "battery"),
    ],
)
def test_config_errors_name_the_field(tmp_path, extra, field):
    with pytest.raises(ConfigError) as err:
        load_config(minimal_config(tmp_path, **extra))
    assert err.value.field_path == field
    assert "config.yaml" in str(err.value)


def test_config_data_problems(tmp_path):
    path = minimal_config(tmp_path)
    write_csv(tmp_path / "probabilities.csv", "day,probability", [0.5] * 3)
    with pytest.raises(ConfigError) as err:
        load_config(path).build_inputs()
    assert err.value.field_path == "data.probabilities"
    with pytest.raises(ConfigError):
        load_config(MALFORMED / "broken_yaml.yaml")
    (tmp_path / "solar.csv").unlink()
    with pytest.raises(ConfigError) as err:
        load_config(path)
    assert err.value.field_path == "data.solar"


def test_events_string_is_checked(tmp_path):
    with pytest.raises(ConfigError):
        load_config(minimal_config(tmp_path, study={"events": "0110"})).build_inputs()
    inputs = load_config(minimal_config(tmp_path, study={"events": "01"})).build_inputs()
    assert inputs.events.realization == (0, 1)


def test_interval_forms(tmp_path):
    cfg = load_config(minimal_config(tmp_path))
    assert cfg.interval_ranges(365)[:2] == ((1, 31), (32, 59)) and cfg.interval_ranges(365)[-1] == (335, 365)
    assert cfg.interval_ranges(40)[-1] == (32, 40)
    cfg = load_config(minimal_config(tmp_path, dr_program={"intervals": [[1, 1], [2, 2]]}))
    assert cfg.build_inputs().dr_spec.intervals == ((1, 1), (2, 2))


def test_summary_round_trip(tmp_path):
    m = metrics_from_aggregates(12.5, 3.25, 1.1, -0.4, 0.1, 2.0)
    write_report({"metrics": m.to_dict()}, [], tmp_path)
    assert read_summary(tmp_path / "summary.json")["metrics"] == m.to_dict()


def test_series_round_trip_is_lossless(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.random(96) * 7
    write_indexed_csv(tmp_path / "x.csv", "hour", "value", x)
    assert np.array_equal(load_hourly_csv(tmp_path / "x.csv"), x)


def test_hourly_trace_file(tmp_path):
    inputs = toy_inputs(days=2)
    trace = simulate(inputs, (0, 1), MpcConfig(2, 2))
    write_hourly_trace(tmp_path / "t.csv", trace)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert len(lines) == 49
    assert lines[0].startswith("hour,day,event_flag")
    soc = np.array([float(line.split(",")[7]) for line in lines[1:]])
    assert np.array_equal(soc, trace.soc)


def test_bundled_desk_configs_load():
    cfg = load_config(DESK7)
    assert cfg.build_inputs().days == 7
