"""Command line entry point: ``fcp2p {fit,step,simulate,scale-bench,report}``.

Exit codes: 0 success, 2 invalid input, 3 a market step did not converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from fcp2p import fc_chp
from fcp2p.admm import run_step
from fcp2p.errors import ValidationError
from fcp2p.harness.bench import growth_exponent, scale_benchmark, write_bench_csv
from fcp2p.harness.demand import canonical_demand_path, load_demand_csv
from fcp2p.harness.report import balance_residual, load_report, write_report
from fcp2p.harness.scenario import canonical_scenario_path, load_scenario
from fcp2p.harness.simulate import DayReport, simulate_day

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 2, 3


def _scenario(args):
    return load_scenario(args.scenario or canonical_scenario_path())


def _demand(args):
    return load_demand_csv(args.demand or canonical_demand_path())


def cmd_fit(args) -> int:
    sc = _scenario(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result, rows = [], []
    for k, (d, fits) in enumerate(zip(sc.dwellings, sc.fits), start=1):
        curve = d.curve
        rng = sc.fit_range or fc_chp.default_fit_range(curve)
        gas_s = fc_chp.gas_ratio_samples(curve, rng)
        hw_s = fc_chp.hot_water_ratio_samples(curve, rng)
        p_all = np.linspace(0.0, curve.p_fc_max, 71)
        gas_exact = fc_chp.gas_energy(curve, sc.thermal, p_all, "exact")
        gas_lin = fc_chp.gas_energy(curve, sc.thermal, p_all, "linearized", fits.gas)
        hw_exact = fc_chp.hot_water_charged(curve, sc.thermal, p_all, "exact")
        hw_lin = fc_chp.hot_water_charged(curve, sc.thermal, p_all, "linearized", fits.hot_water)
        rows += [[k, *map(float, r)] for r in zip(p_all, gas_exact, gas_lin, hw_exact, hw_lin)]
        result.append({
            "house": k,
            "gas": fits.gas.to_dict() | {"max_relative_error": fc_chp.max_relative_error(fits.gas, gas_s)},
            "hot_water": fits.hot_water.to_dict()
            | {"max_relative_error": fc_chp.max_relative_error(fits.hot_water, hw_s)},
            "gas_slope_jpy_per_kw": fc_chp.gas_slope(fits.gas, sc.thermal, curve.eta_g2h),
            "unit_gas_cost_at_eta_e_0": fc_chp.unit_gas_cost(curve, sc.thermal, curve.eta_e_0),
            "unit_gas_cost_at_eta_e_max": fc_chp.unit_gas_cost(curve, sc.thermal, curve.eta_e_max),
        })
    with open(out / "fits.json", "w") as fh:
        json.dump(result, fh, indent=2)
    with open(out / "fit_curves.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["house", "p_kw", "gas_mj_exact", "gas_mj_linearized", "hot_water_l_exact",
                     "hot_water_l_linearized"])
        w.writerows(rows)
    print(json.dumps(result, indent=2))
    return EXIT_OK


def cmd_step(args) -> int:
    sc = _scenario(args)
    series = _demand(args)
    if not 1 <= args.step <= series.steps:
        raise ValidationError(f"--step must be in 1..{series.steps}")
    market = sc.market_step(args.step, series.at(args.step))
    sol = run_step(market, sc.admm)
    p_max = np.array([d.curve.p_fc_max for d in sc.dwellings])
    report = DayReport([sol], series.dt, True, p_max, tuple(d.label for d in sc.dwellings))
    write_report(report, args.out, trace=True)
    print(f"step {args.step}: {len(sol.edges)} edges, {sol.iterations} iterations, "
          f"converged={sol.converged}")
    return EXIT_OK if sol.converged else EXIT_NONCONVERGED


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    series = _demand(args)
    report = simulate_day(series, sc, p2p=not args.no_p2p)
    write_report(report, args.out, trace=args.trace)
    print(f"p2p={'on' if report.p2p else 'off'}: grid {report.grid_energy:.4f} kWh, "
          f"{report.market_invocations} market steps, {len(report.nonconverged)} non-converged")
    return EXIT_NONCONVERGED if report.nonconverged else EXIT_OK


def cmd_scale_bench(args) -> int:
    sc = _scenario(args)
    try:
        factors = [int(f) for f in args.factors.split(",")]
    except ValueError as exc:
        raise ValidationError(f"--factors must be comma-separated integers ({exc})") from exc
    if any(f < 1 for f in factors):
        raise ValidationError("--factors must be >= 1")
    rows = scale_benchmark(sc, factors, step=args.step, penalty_scaling=args.penalty_scaling)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_bench_csv(rows, out / "scale_bench.csv")
    for r in rows:
        print(f"n={r.n_agents:4d} iterations={r.iterations:5d} "
              f"per-agent={r.seconds_per_agent:.4f}s centralized={r.centralized_seconds:.4f}s")
    if len(rows) > 1:
        exp = growth_exponent([r.n_agents for r in rows], [r.seconds_per_agent for r in rows])
        print(f"per-agent time growth exponent: {exp:.2f}")
    return EXIT_OK if all(r.converged for r in rows) else EXIT_NONCONVERGED


def cmd_report(args) -> int:
    d = Path(args.input)
    if not (d / "summary.json").exists():
        raise ValidationError(f"{d} has no summary.json")
    data = load_report(d)
    s = data["summary"]
    print(json.dumps({k: s[k] for k in ("p2p", "steps", "market_invocations", "grid_energy_kwh",
                                        "fc_utilization_active", "nonconverged_steps")}, indent=2))
    print(f"max power-balance residual: {balance_residual(data['supplies']):.3e} kW")
    return EXIT_NONCONVERGED if s["nonconverged_steps"] else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fcp2p",
        description="Fuel-cell CHP dwellings trading electricity peer to peer.",
        epilog="exit codes: 0 success, 2 invalid input, 3 a market step did not converge")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, demand=True):
        sp.add_argument("--scenario", help="scenario YAML (default: shipped 6-house scenario)")
        if demand:
            sp.add_argument("--demand", help="demand CSV (default: shipped canonical day)")

    sp = sub.add_parser("fit", help="fit the FC linearizations of every dwelling")
    common(sp, demand=False)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("step", help="solve one market step")
    common(sp)
    sp.add_argument("--step", type=int, required=True, help="1-based step")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_step)

    sp = sub.add_parser("simulate", help="simulate a whole day")
    common(sp)
    sp.add_argument("--no-p2p", action="store_true", help="disable trading")
    sp.add_argument("--trace", action="store_true", help="also write per-iteration residuals")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("scale-bench", help="time one step on duplicated dwellings")
    common(sp, demand=False)
    sp.add_argument("--factors", default="1,2,4,8")
    sp.add_argument("--step", type=int, default=8)
    sp.add_argument("--penalty-scaling", choices=("degree", "fixed"), default="degree")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_scale_bench)

    sp = sub.add_parser("report", help="summarize a written report directory")
    sp.add_argument("--in", dest="input", required=True)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
