"""``batterydr`` command line: simulate one realization, or run the approximation / incentive studies.

Exit codes: 0 success, 1 bad input or configuration, 2 solver failure.
All output lands under ``--out`` (default: the config's ``output_dir``).
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .evaluation import (
    HorizonGuardError,
    approximation_study,
    compute_metrics,
    counterfactual_dispatch,
    incentive_study,
    inflation_summary,
    monthly_breakdown,
    run_seed,
)
from .io_config import ConfigError, InputFileError, load_config, parse_events, write_report, write_rows_csv
from .lp_solver import SolverError
from .mpc import build_trace, simulate

log = logging.getLogger("batterydr")

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; 2 is reserved for solver failures here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _rates(text: str) -> tuple:
    try:
        rates = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not rates or any(r < 0 for r in rates):
        raise argparse.ArgumentTypeError("rates must be non-negative and at least one is needed")
    return rates


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="YAML run configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides mpc.master_seed)")
    common.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = _Parser(prog="batterydr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="run the MPC loop over one event realization")
    p.add_argument("--events", help="force the realization, e.g. 0100110 (one digit per day)")

    p = sub.add_parser(
        "study-approximation", parents=[common], help="compare MPC variants with the exact optimum (short horizons)"
    )
    p.add_argument("--runs", type=_positive, help="number of tree-sampling seeds per sampled variant (default 5)")

    p = sub.add_parser(
        "study-incentives", parents=[common], help="Monte-Carlo metrics per capacity rate and the no-DR counterfactual"
    )
    p.add_argument("--runs", type=_positive, help="Monte-Carlo runs per rate (overrides study.runs)")
    p.add_argument("--rates", type=_rates, help="capacity rates in $/kW, comma separated (overrides study.rates)")
    p.add_argument("--events", help="fix the realization for every run instead of sampling")
    return parser


def _daily_rows(trace) -> list[dict]:
    rows = []
    for t in range(trace.days):
        d = trace.diagnostics[t] if t < len(trace.diagnostics) else None
        rows.append({
            "day": t + 1,
            "event_flag": trace.event_flags[t],
            "window_consumption": float(trace.window_consumption[t]),
            "baseline": float(trace.baseline[t]),
            "reduction": float(trace.reduction[t]),
            "energy_payment": float(trace.energy_payment[t]),
            "stage_objective": d.objective if d else None,
            "N": d.N if d else None,
            "n": d.n if d else None,
            "variables": d.variables if d else None,
        })
    return rows


def cmd_simulate(args, cfg) -> int:
    inputs = cfg.build_inputs()
    seed = cfg.master_seed if args.seed is None else args.seed
    if args.events is not None:
        omega = parse_events(args.events, inputs.days)
    elif inputs.events.realization is not None:
        omega = inputs.events.realization
    else:
        omega = inputs.events.sample(np.random.default_rng([run_seed(seed, 0), 1]))
    config = cfg.mpc_config(inputs.days, seed)
    trace = simulate(inputs, omega, config)
    c, d = counterfactual_dispatch(inputs.profile, inputs.battery, inputs.initial_soc)
    cf = build_trace(inputs, c, d, omega, inputs.initial_soc)
    wl = np.array([len(w) for w in inputs.dr_spec.windows])
    metrics = compute_metrics([trace], [1.0], [cf], wl)
    monthly = monthly_breakdown([trace], [1.0], inputs, [cf])
    summary = {
        "command": "simulate",
        "days": inputs.days,
        "seed": seed,
        "receding_horizon": config.receding_horizon,
        "branching_depth": config.branching_depth,
        "events": "".join(str(w) for w in omega),
        "capacity_payment": [float(x) for x in trace.capacity_payment],
        "metrics": metrics.to_dict(),
    }
    out = args.out
    write_report(summary, [trace], out, monthly)
    write_rows_csv(out / "daily.csv", _daily_rows(trace))
    print(f"simulated {inputs.days} days, total cost {trace.total_cost:.4f}; wrote {out}")
    return EXIT_OK


def cmd_study_approximation(args, cfg) -> int:
    inputs = cfg.build_inputs()
    seed = cfg.master_seed if args.seed is None else args.seed
    n_seeds = args.runs or 5
    seeds = [seed + k for k in range(n_seeds)]
    rows = approximation_study(inputs, cfg.first_day_event, seeds)
    table = [asdict(r) for r in rows]
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    write_rows_csv(out / "approximation.csv", table)
    write_report(
        {"command": "study-approximation", "days": inputs.days, "seed": seed, "seeds": seeds,
         "first_day_event": cfg.first_day_event, "rows": table},
        [], out,
    )
    for r in rows:
        print(f"{r.label:>10}  cost {r.cost:10.4f}  gap {100 * r.gap:7.3f}%")
    return EXIT_OK


def cmd_study_incentives(args, cfg) -> int:
    inputs = cfg.build_inputs()
    if args.events is not None:
        inputs = inputs.with_events(parse_events(args.events, inputs.days))
    seed = cfg.master_seed if args.seed is None else args.seed
    runs = args.runs or cfg.runs
    rates = args.rates or cfg.rates
    if runs < 2:
        raise ConfigError("study.runs", "need at least two runs for a standard deviation")
    rows, results = incentive_study(inputs, cfg.mpc_config(inputs.days, seed), rates, runs, seed)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    write_rows_csv(out / "incentives.csv", rows)
    monthly = []
    for rate, res in results.items():
        monthly += [{"rate": rate, **m} for m in res.monthly]
    top = results[max(results)]
    write_report(
        {"command": "study-incentives", "days": inputs.days, "seed": seed, "runs": runs, "rates": list(rates),
         "receding_horizon": cfg.mpc_config(inputs.days).receding_horizon,
         "branching_depth": cfg.mpc_config(inputs.days).branching_depth,
         "rows": rows, **{f"rate={r:g}": inflation_summary(res.mean, res.monthly) for r, res in results.items()}},
        top.traces[:1], out, monthly,
    )
    for r in rows:
        pct = r.get("baseline_inflation_pct")
        print(f"{r['case']:>15}  baseline {r['baseline_load']:7.3f} kW  event {r['event_load']:7.3f} kW  "
              f"inflation {'-' if pct is None else f'{100 * pct:.1f}%'}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "study-approximation": cmd_study_approximation,
    "study-incentives": cmd_study_incentives,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        args.out = args.out or cfg.output_dir
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, InputFileError, HorizonGuardError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
