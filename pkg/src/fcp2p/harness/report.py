"""Plot-ready CSV/JSON output of a simulated day and the matching loader.

House ids in every file are 1-based.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from fcp2p.harness.simulate import DayReport

TRADES_HEADER = ["step", "i", "j", "P_ij", "lambda_ij"]
PRICES_HEADER = ["step", "i", "j", "lambda_ij", "indicative_settlement_jpy"]
SUPPLIES_HEADER = ["step", "house", "demand", "p_fc", "p_tr", "p_grid"]
CONVERGENCE_HEADER = ["step", "iterations", "primal_residual", "dual_residual", "converged"]
TRACE_HEADER = ["step", "iter", "primal_res", "dual_res", "price_mismatch"]


def _write(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _f(x) -> str:
    return repr(float(x))


def _clean(obj):
    """JSON-safe copy: arrays to lists, non-finite floats to None."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def summary_dict(report: DayReport) -> dict:
    return _clean({
        "p2p": report.p2p,
        "steps": len(report.steps),
        "dt_hours": report.dt,
        "houses": list(report.labels),
        "active_steps": report.active_steps,
        "market_invocations": report.market_invocations,
        "nonconverged_steps": report.nonconverged,
        "grid_energy_kwh": report.grid_energy,
        "fc_utilization_active": report.fc_utilization() if report.active_steps else None,
        "totals": {k: v for k, v in report.totals.items()},
        "iterations": {str(k): v for k, v in report.iterations.items()},
    })


def write_report(report: DayReport, out_dir, trace: bool = False) -> dict[str, Path]:
    """
    Write ``trades.csv``, ``prices.csv``, ``supplies.csv``,
    ``convergence.csv`` and ``summary.json`` into `out_dir`
    (plus ``trace.csv`` with per-iteration residuals when `trace`).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trades, prices, supplies, conv, tr = [], [], [], [], []
    for s in report.steps:
        for k, (i, j) in enumerate(s.edges):
            trades.append([s.step, i + 1, j + 1, _f(s.trades[k]), _f(s.prices[k])])
            pay = s.prices[k] * s.trades[k] * report.dt
            prices.append([s.step, i + 1, j + 1, _f(s.prices[k]), _f(pay)])
        for h in range(len(s.p_tr)):
            supplies.append([s.step, h + 1, _f(s.demand[h]), _f(s.p_fc[h]), _f(s.p_tr[h]),
                             _f(s.p_grid[h])])
        conv.append([s.step, s.iterations, _f(s.primal_residual), _f(s.dual_residual),
                     int(bool(s.converged))])
        if trace:
            for h in s.history:
                tr.append([s.step, h.iter, _f(h.primal_residual), _f(h.dual_residual),
                           _f(h.price_mismatch)])
    paths = {name: out / f"{name}.csv" for name in ("trades", "prices", "supplies", "convergence")}
    _write(paths["trades"], TRADES_HEADER, trades)
    _write(paths["prices"], PRICES_HEADER, prices)
    _write(paths["supplies"], SUPPLIES_HEADER, supplies)
    _write(paths["convergence"], CONVERGENCE_HEADER, conv)
    if trace:
        paths["trace"] = out / "trace.csv"
        _write(paths["trace"], TRACE_HEADER, tr)
    paths["summary"] = out / "summary.json"
    with open(paths["summary"], "w") as fh:
        json.dump(summary_dict(report), fh, indent=2)
    return paths


def _read(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = list(zip(*body)) if body else [[] for _ in header]
    return {h: np.array(c, dtype=float) for h, c in zip(header, cols)}


def load_report(in_dir) -> dict:
    """Read back the files of :func:`write_report` as column arrays plus the summary."""
    d = Path(in_dir)
    out = {name: _read(d / f"{name}.csv")
           for name in ("trades", "prices", "supplies", "convergence")}
    if (d / "trace.csv").exists():
        out["trace"] = _read(d / "trace.csv")
    with open(d / "summary.json") as fh:
        out["summary"] = json.load(fh)
    return out


def balance_residual(supplies: dict[str, np.ndarray]) -> float:
    """Largest ``|demand - p_fc - p_tr - p_grid|`` over all supply rows."""
    if len(supplies["demand"]) == 0:
        return 0.0
    r = supplies["demand"] - supplies["p_fc"] - supplies["p_tr"] - supplies["p_grid"]
    return float(np.abs(r).max())
