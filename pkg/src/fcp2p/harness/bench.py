"""Scalability benchmark: duplicate the dwellings and time one market step."""

from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from fcp2p.admm import AdmmParams, run_step
from fcp2p.harness.demand import SLOT8_DEMAND
from fcp2p.harness.scenario import Scenario
from fcp2p.oracle import EdgeQp, solve_centralized


@dataclass(frozen=True)
class BenchRow:
    factor: int
    n_agents: int
    n_edges: int
    iterations: int
    converged: bool
    seconds_per_agent: float  # mean local compute time per agent
    max_agent_seconds: float  # slowest agent, the parallel critical path
    wall_seconds: float  # simulated run on one core, messaging included
    centralized_seconds: float  # oracle solve of the same QP


def scale_benchmark(base: Scenario, factors: Sequence[int] = (1, 2, 4, 8), demand=None,
                    params: Optional[AdmmParams] = None, step: int = 8,
                    centralized: bool = True, penalty_scaling: str = "degree") -> list[BenchRow]:
    """
    Time one step for every duplication factor.

    Parameters
    ----------
    base : Scenario
    factors : sequence of int
    demand : array_like, optional
        One demand row for the base dwellings (default: the canonical step 8).
    params : AdmmParams, optional
        Defaults to the scenario's settings.
    centralized : bool
        Also time the centralized oracle on the same QP.
    penalty_scaling : {"degree", "fixed"}
        ``"degree"`` multiplies ``rho``, ``phi`` and ``psi`` by the growth of
        the mean graph degree relative to the base step, which keeps both the
        Jacobi contraction ``n_i / (n_i + (rho + phi) / a_i)`` and the ADMM
        iteration count roughly constant. ``"fixed"`` keeps `params` as is.
    """
    if penalty_scaling not in ("degree", "fixed"):
        raise ValueError(f"unknown penalty_scaling {penalty_scaling!r}")
    demand = np.asarray(SLOT8_DEMAND if demand is None else demand, dtype=float)
    params = params or base.admm
    base_degree = base.market_step(step, demand).graph.degrees.mean()
    rows = []
    for f in factors:
        sc = base.duplicated(f)
        market = sc.market_step(step, np.tile(demand, f))
        p = params
        if penalty_scaling == "degree" and base_degree > 0:
            s = market.graph.degrees.mean() / base_degree
            p = params.replace(rho=params.rho * s, phi=params.phi * s, psi=params.psi * s)
        t0 = time.perf_counter()
        sol = run_step(market, p, diagnostics=False)
        wall = time.perf_counter() - t0
        secs = sol.agent_seconds
        central = float("nan")
        if centralized and market.has_trades:
            qp = EdgeQp.from_market(market)
            t0 = time.perf_counter()
            solve_centralized(qp)
            central = time.perf_counter() - t0
        rows.append(BenchRow(int(f), market.n, len(market.graph.edges), sol.iterations,
                             sol.converged, float(secs.mean()), float(secs.max()), wall, central))
    return rows


def write_bench_csv(rows: Sequence[BenchRow], path) -> None:
    names = list(BenchRow.__dataclass_fields__)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=names)
        w.writeheader()
        for r in rows:
            w.writerow(asdict(r))


def growth_exponent(n, seconds) -> float:
    """Least-squares slope of ``log(seconds)`` against ``log(n)``."""
    return float(np.polyfit(np.log(n), np.log(seconds), 1)[0])
