"""Run a whole day step by step, with or without the P2P market."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from fcp2p.admm import AdmmParams, run_step
from fcp2p.errors import ValidationError
from fcp2p.harness.demand import DemandSeries
from fcp2p.harness.scenario import Scenario
from fcp2p.market import GRID_TOL, StepSolution, no_trade_solution

log = logging.getLogger(__name__)


@dataclass
class DayReport:
    """Per-step solutions plus per-dwelling energy (kWh) and cost (JPY) totals."""

    steps: list[StepSolution]
    dt: float
    p2p: bool
    p_fc_max: np.ndarray
    labels: tuple = ()
    totals: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.totals:
            self.totals = self._totals()

    def _stack(self, attr: str) -> np.ndarray:
        if not self.steps:
            return np.zeros((0, len(self.p_fc_max)))
        return np.array([getattr(s, attr) for s in self.steps])

    def _totals(self) -> dict:
        n = len(self.p_fc_max)
        gas = np.array([s.costs["gas"] for s in self.steps]) if self.steps else np.zeros((0, n))
        trade = np.array([s.costs["trade"] for s in self.steps]) if self.steps else np.zeros((0, n))
        return {
            "fc_energy": self._stack("p_fc").sum(axis=0) * self.dt,
            "traded_energy": self._stack("p_tr").sum(axis=0) * self.dt,
            "grid_energy": self._stack("p_grid").sum(axis=0) * self.dt,
            "gas_cost": gas.sum(axis=0),
            "trade_cost": trade.sum(axis=0),
        }

    @property
    def active_steps(self) -> list[int]:
        """Steps where at least one buyer-seller pair could trade."""
        return [s.step for s in self.steps if len(s.edges) > 0]

    @property
    def market_invocations(self) -> int:
        return sum(1 for s in self.steps if s.iterations > 0)

    @property
    def iterations(self) -> dict[int, int]:
        return {s.step: s.iterations for s in self.steps}

    @property
    def nonconverged(self) -> list[int]:
        return [s.step for s in self.steps if not s.converged]

    @property
    def grid_energy(self) -> float:
        return float(self.totals["grid_energy"].sum())

    def fc_utilization(self, steps: Optional[list[int]] = None) -> float:
        """Mean ``P_fc / p_fc_max`` over `steps` (default: the active ones)."""
        steps = self.active_steps if steps is None else steps
        rows = [s.p_fc / self.p_fc_max for s in self.steps if s.step in set(steps)]
        return float(np.mean(rows)) if rows else float("nan")

    def agent_seconds(self) -> np.ndarray:
        """Local compute seconds per step and dwelling, shape ``(steps, n)``."""
        n = len(self.p_fc_max)
        return np.array([s.agent_seconds if s.agent_seconds is not None else np.zeros(n)
                         for s in self.steps]).reshape(len(self.steps), n)


def simulate_day(series: DemandSeries, scenario: Scenario, params: Optional[AdmmParams] = None,
                 p2p: bool = True, scheduler=None, steps=None) -> DayReport:
    """
    Solve every step of `series` independently.

    Steps without a buyer-seller pair skip the solver. With ``p2p=False``
    every trade is zero, so buyers run at rated power and import their
    deficit while sellers just cover their own demand.

    Non-converged steps are kept (best iterate, flagged) and logged.
    """
    if series.n != scenario.n:
        raise ValidationError(f"demand has {series.n} houses, scenario has {scenario.n}")
    params = params or scenario.admm
    out = []
    for step in (steps or range(1, series.steps + 1)):
        market = scenario.market_step(step, series.at(step))
        if p2p and market.has_trades:
            sol = run_step(market, params, scheduler=scheduler, diagnostics=False)
            if not sol.converged:
                log.warning("step %d did not converge", step)
        else:
            sol = no_trade_solution(market, iterations=0, agent_seconds=np.zeros(market.n))
        floor = np.array([d.curve.p_fc_hw_min for d in market.dwellings])
        covered = series.at(step) >= floor
        if np.any(sol.p_grid[covered] < -GRID_TOL):
            raise RuntimeError(f"step {step}: negative grid purchase {sol.p_grid.min()}")
        out.append(sol)
    p_max = np.array([d.curve.p_fc_max for d in scenario.dwellings])
    return DayReport(out, series.dt, p2p, p_max, tuple(d.label for d in scenario.dwellings))
