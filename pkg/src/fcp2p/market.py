"""
Per-timestep market construction and settlement.

A :class:`MarketStep` fixes every dwelling's role, FC and trade bounds and the
effective QP coefficients for one step, together with the buyer/seller
trading graph. After the trades are solved, :func:`settle` turns the agent
totals into FC setpoints, grid purchases and cost breakdowns.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Optional, Sequence

import numpy as np

from fcp2p import fc_chp
from fcp2p.errors import ValidationError
from fcp2p.fc_chp import FuelCellCurve, LinearFit, ThermalParams

# grid residuals with |r| below this are treated as exact zeros
GRID_TOL = 1e-9


class Role(enum.Enum):
    BUYER = "buyer"
    SELLER = "seller"
    INACTIVE = "inactive"

    @property
    def sign(self) -> int:
        return {Role.BUYER: 1, Role.SELLER: -1, Role.INACTIVE: 0}[self]


def assign_role(demand: float, p_fc_max: float) -> Role:
    if demand < 0:
        raise ValidationError(f"demand must be >= 0, got {demand}")
    if demand > p_fc_max:
        return Role.BUYER
    if demand < p_fc_max:
        return Role.SELLER
    return Role.INACTIVE


def fc_min_bound(demand: float, curve: FuelCellCurve) -> float:
    """Lowest admissible FC setpoint: the demand, capped at rated power, floored at the hardware minimum."""
    return float(np.clip(min(demand, curve.p_fc_max), curve.p_fc_hw_min, curve.p_fc_max))


def trade_bounds(demand: float, p_fc_max: float) -> tuple[float, float]:
    gap = demand - p_fc_max
    return (min(0.0, gap), max(0.0, gap))


def effective_coeffs(role: Role, b_hat: float, fit: LinearFit, thermal: ThermalParams,
                     eta_g2h: float) -> float:
    """Linear coefficient of the trading QP for one dwelling.

    Sellers are charged the gas-cost slope of the FC output they sell
    (``P_fc = P_dem - P_tr``); buyers run at rated power so their gas term
    is constant and drops out.
    """
    if role is Role.SELLER:
        return b_hat - fc_chp.gas_slope(fit, thermal, eta_g2h)
    return b_hat


@dataclass(frozen=True)
class TradingGraph:
    """Undirected simple graph over ``n`` agents, stored as sorted ``(i, j)`` edges with ``i < j``."""

    n: int
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        norm = []
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValidationError(f"self loop at agent {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValidationError(f"edge ({i}, {j}) out of range for n={self.n}")
            norm.append((min(i, j), max(i, j)))
        if len(set(norm)) != len(norm):
            raise ValidationError("duplicate edges")
        object.__setattr__(self, "edges", tuple(sorted(norm)))

    @classmethod
    def from_adjacency(cls, adjacency) -> "TradingGraph":
        adj = np.asarray(adjacency)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValidationError("adjacency must be square")
        if not np.array_equal(adj, adj.T):
            raise ValidationError("adjacency must be symmetric")
        if np.any(np.diag(adj) != 0):
            raise ValidationError("adjacency must have a zero diagonal")
        if not np.all(np.isin(adj, (0, 1))):
            raise ValidationError("adjacency entries must be 0/1")
        i, j = np.nonzero(np.triu(adj))
        return cls(adj.shape[0], tuple(zip(i.tolist(), j.tolist())))

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        nb = [[] for _ in range(self.n)]
        for i, j in self.edges:
            nb[i].append(j)
            nb[j].append(i)
        return tuple(tuple(sorted(x)) for x in nb)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(x) for x in self.neighbors], dtype=int)

    @property
    def m(self) -> int:
        """Number of directed trade variables, i.e. the sum of degrees."""
        return 2 * len(self.edges)

    @cached_property
    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=int)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = 1
        return adj

    @cached_property
    def laplacian(self) -> np.ndarray:
        return np.diag(self.degrees).astype(float) - self.adjacency

    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: k for k, e in enumerate(self.edges)}


def build_trading_graph(roles: Sequence[Role], adjacency=None) -> TradingGraph:
    """Complete bipartite buyers x sellers graph, or a validated custom one.

    A custom `adjacency` (matrix or iterable of edges) must only connect
    buyers to sellers.
    """
    n = len(roles)
    if adjacency is None:
        buyers = [i for i, r in enumerate(roles) if r is Role.BUYER]
        sellers = [i for i, r in enumerate(roles) if r is Role.SELLER]
        return TradingGraph(n, tuple((b, s) for b in buyers for s in sellers))
    arr = np.asarray(adjacency)
    if arr.ndim == 2 and arr.shape == (n, n):
        graph = TradingGraph.from_adjacency(arr)
    else:
        graph = TradingGraph(n, tuple(tuple(e) for e in adjacency))
    for i, j in graph.edges:
        if {roles[i], roles[j]} != {Role.BUYER, Role.SELLER}:
            raise ValidationError(
                f"edge ({i}, {j}) joins {roles[i].value} and {roles[j].value}; "
                "trades must be buyer-seller")
    return graph


def grid_residual(demand: float, p_fc: float, p_tr: float) -> float:
    return demand - p_fc - p_tr


@dataclass(frozen=True)
class DwellingStep:
    id: int
    demand: float
    role: Role
    p_fc_min: float
    p_fc_max: float
    p_tr_min: float
    p_tr_max: float
    a: float
    b_hat: float
    b_eff: float
    c: float = 0.0
    curve: FuelCellCurve = field(default_factory=FuelCellCurve)
    gas_fit: Optional[LinearFit] = None

    def __post_init__(self):
        if self.a <= 0:
            raise ValidationError(f"dwelling {self.id}: a must be > 0")
        if not self.p_tr_min <= 0 <= self.p_tr_max:
            raise ValidationError(f"dwelling {self.id}: trade bounds must bracket 0")
        if self.p_tr_min != 0 and self.p_tr_max != 0:
            raise ValidationError(f"dwelling {self.id}: cannot both buy and sell")
        if self.p_fc_min > self.p_fc_max:
            raise ValidationError(f"dwelling {self.id}: p_fc_min > p_fc_max")


def make_dwelling_step(idx: int, demand: float, curve: FuelCellCurve, thermal: ThermalParams,
                       gas_fit: LinearFit, a: float, b_hat: float, c: float = 0.0) -> DwellingStep:
    """Role, bounds and effective coefficient for one dwelling at one step."""
    role = assign_role(demand, curve.p_fc_max)
    lo, hi = trade_bounds(demand, curve.p_fc_max)
    return DwellingStep(
        id=idx, demand=float(demand), role=role,
        p_fc_min=fc_min_bound(demand, curve), p_fc_max=curve.p_fc_max,
        p_tr_min=lo, p_tr_max=hi, a=float(a), b_hat=float(b_hat),
        b_eff=effective_coeffs(role, b_hat, gas_fit, thermal, curve.eta_g2h),
        c=float(c), curve=curve, gas_fit=gas_fit,
    )


@dataclass(frozen=True)
class MarketStep:
    """Everything the solver needs for one timestep; immutable once built."""

    step: int
    dwellings: tuple[DwellingStep, ...]
    graph: TradingGraph
    thermal: ThermalParams = field(default_factory=ThermalParams)
    surcharge: Mapping[tuple[int, int], float] = field(default_factory=dict)
    sign_mode: str = "componentwise"

    def __post_init__(self):
        if self.graph.n != len(self.dwellings):
            raise ValidationError("graph size does not match dwelling count")
        if self.sign_mode not in ("componentwise", "total"):
            raise ValidationError(f"unknown sign_mode {self.sign_mode!r}")
        for i, j in self.graph.edges:
            ri, rj = self.dwellings[i].role, self.dwellings[j].role
            if {ri, rj} != {Role.BUYER, Role.SELLER}:
                raise ValidationError(f"edge ({i}, {j}) is not buyer-seller")

    @property
    def n(self) -> int:
        return len(self.dwellings)

    @cached_property
    def a(self) -> np.ndarray:
        return np.array([d.a for d in self.dwellings])

    @cached_property
    def b_eff(self) -> np.ndarray:
        return np.array([d.b_eff for d in self.dwellings])

    @cached_property
    def lo(self) -> np.ndarray:
        return np.array([d.p_tr_min for d in self.dwellings])

    @cached_property
    def hi(self) -> np.ndarray:
        return np.array([d.p_tr_max for d in self.dwellings])

    @cached_property
    def signs(self) -> np.ndarray:
        return np.array([d.role.sign for d in self.dwellings], dtype=int)

    @property
    def has_trades(self) -> bool:
        return bool(self.graph.edges)

    def d(self, i: int, j: int) -> float:
        return float(self.surcharge.get((i, j), 0.0))


def build_market_step(step: int, demands: Sequence[float], curves: Sequence[FuelCellCurve],
                      thermal: ThermalParams, gas_fits: Sequence[LinearFit], a: Sequence[float],
                      b_hat_buyer: Sequence[float], b_hat_seller: Sequence[float],
                      c: Optional[Sequence[float]] = None, adjacency=None,
                      surcharge: Optional[Mapping] = None,
                      sign_mode: str = "componentwise") -> MarketStep:
    """Assemble a :class:`MarketStep`; `b_hat_*` pick the coefficient by role."""
    n = len(demands)
    c = [0.0] * n if c is None else c
    dwellings = []
    for i in range(n):
        role = assign_role(demands[i], curves[i].p_fc_max)
        b_hat = b_hat_buyer[i] if role is Role.BUYER else b_hat_seller[i]
        dwellings.append(make_dwelling_step(i, demands[i], curves[i], thermal, gas_fits[i],
                                            a[i], b_hat, c[i]))
    graph = build_trading_graph([d.role for d in dwellings], adjacency)
    return MarketStep(step, tuple(dwellings), graph, thermal, dict(surcharge or {}), sign_mode)


@dataclass
class StepSolution:
    """Solved step: trades per undirected edge ``(i, j)`` (value is ``P_ij``), prices, balances, costs."""

    step: int
    edges: tuple[tuple[int, int], ...]
    trades: np.ndarray
    prices: np.ndarray
    p_tr: np.ndarray
    p_fc: np.ndarray
    p_grid: np.ndarray
    costs: dict
    iterations: int = 0
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    converged: bool = True
    history: list = field(default_factory=list)
    agent_seconds: Optional[np.ndarray] = None
    demand: Optional[np.ndarray] = None
    roles: tuple = ()

    def trade(self, i: int, j: int) -> float:
        for k, e in enumerate(self.edges):
            if e == (i, j):
                return float(self.trades[k])
            if e == (j, i):
                return -float(self.trades[k])
        return 0.0

    def price(self, i: int, j: int) -> float:
        key = (min(i, j), max(i, j))
        return float(self.prices[self.edges.index(key)])

    def settlement(self, dt: float) -> np.ndarray:
        """Indicative JPY paid per dwelling: sum of price * P_ij * dt over its edges."""
        pay = np.zeros(len(self.p_tr))
        for k, (i, j) in enumerate(self.edges):
            amount = self.prices[k] * self.trades[k] * dt
            pay[i] += amount
            pay[j] -= amount
        return pay


def dispatch(market: MarketStep, p_tr) -> tuple[np.ndarray, np.ndarray]:
    """FC setpoints and grid purchases for given trade totals.

    The FC covers demand net of trades up to rated power, the grid takes the
    rest. Below the hardware floor the FC idles at the floor and the surplus
    shows up as negative grid power.
    """
    p_tr = np.asarray(p_tr, dtype=float)
    p_fc = np.empty(market.n)
    p_grid = np.empty(market.n)
    for i, d in enumerate(market.dwellings):
        net = d.demand - p_tr[i]
        fc = min(net, d.p_fc_max)
        fc = max(fc, d.curve.p_fc_hw_min)
        grid = grid_residual(d.demand, fc, p_tr[i])
        if abs(grid) < GRID_TOL and grid != 0.0:
            # absorb rounding-level residue into the FC setpoint
            fc += grid
            grid = 0.0
        p_fc[i], p_grid[i] = fc, grid
    return p_fc, p_grid


def step_cost(market: MarketStep, p_tr, p_fc) -> dict:
    """Per-dwelling JPY: trading utility ``a P^2 + b_hat P + c`` plus linearized gas cost."""
    p_tr = np.asarray(p_tr, dtype=float)
    p_fc = np.asarray(p_fc, dtype=float)
    trade = np.empty(market.n)
    gas = np.empty(market.n)
    for i, d in enumerate(market.dwellings):
        trade[i] = d.a * p_tr[i] ** 2 + d.b_hat * p_tr[i] + d.c
        p = float(np.clip(p_fc[i], 0.0, d.curve.p_fc_max))
        energy = fc_chp.gas_energy(d.curve, market.thermal, p, "linearized", d.gas_fit)
        gas[i] = fc_chp.gas_cost(market.thermal, energy)
    return {"trade": trade, "gas": gas, "total": trade + gas}


def settle(market: MarketStep, trades, prices, **diagnostics) -> StepSolution:
    """Build a :class:`StepSolution` from per-edge trades and prices."""
    trades = np.asarray(trades, dtype=float)
    p_tr = np.zeros(market.n)
    for k, (i, j) in enumerate(market.graph.edges):
        p_tr[i] += trades[k]
        p_tr[j] -= trades[k]
    p_fc, p_grid = dispatch(market, p_tr)
    return StepSolution(
        step=market.step, edges=market.graph.edges, trades=trades,
        prices=np.asarray(prices, dtype=float), p_tr=p_tr, p_fc=p_fc, p_grid=p_grid,
        costs=step_cost(market, p_tr, p_fc),
        demand=np.array([d.demand for d in market.dwellings]),
        roles=tuple(d.role for d in market.dwellings), **diagnostics,
    )


def no_trade_solution(market: MarketStep, **diagnostics) -> StepSolution:
    nedges = len(market.graph.edges)
    return settle(market, np.zeros(nedges), np.zeros(nedges), **diagnostics)


def market_from_arrays(demands, a, b_eff, curve: Optional[FuelCellCurve] = None,
                       thermal: Optional[ThermalParams] = None, adjacency=None, step: int = 0,
                       sign_mode: str = "componentwise") -> MarketStep:
    """
    Build a :class:`MarketStep` straight from effective coefficients.

    Handy for randomized tests: roles and bounds still come from `demands`,
    but ``b_eff`` is taken as given (``b_hat`` is set equal to it).
    """
    curve = curve or FuelCellCurve()
    thermal = thermal or ThermalParams()
    fit = fc_chp.fit_curves(curve).gas
    dwellings = []
    for i, (dem, ai, bi) in enumerate(zip(demands, a, b_eff)):
        role = assign_role(dem, curve.p_fc_max)
        lo, hi = trade_bounds(dem, curve.p_fc_max)
        dwellings.append(DwellingStep(
            id=i, demand=float(dem), role=role, p_fc_min=fc_min_bound(dem, curve),
            p_fc_max=curve.p_fc_max, p_tr_min=lo, p_tr_max=hi, a=float(ai), b_hat=float(bi),
            b_eff=float(bi), curve=curve, gas_fit=fit))
    graph = build_trading_graph([d.role for d in dwellings], adjacency)
    return MarketStep(step, tuple(dwellings), graph, thermal, {}, sign_mode)
