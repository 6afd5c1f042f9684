"""
Coordinator for the parallel proximal ADMM.

The coordinator only sequences synchronous rounds and reduces scalar
diagnostics (max residuals) at the barriers; every numerical update happens
inside an agent from its own state and mailbox.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from fcp2p.admm.agents import Agent, JacobiAgent
from fcp2p.admm.network import Network, SequentialScheduler
from fcp2p.admm.params import AdmmParams, validate_params
from fcp2p.errors import ValidationError
from fcp2p.market import MarketStep, StepSolution, TradingGraph, no_trade_solution, settle

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class IterationReport:
    iter: int
    primal_residual: float
    dual_residual: float
    price_mismatch: float
    jacobi_sweeps: int
    jacobi_residual: float
    reciprocity: float = 0.0
    conservation: float = 0.0


@dataclass(frozen=True)
class JacobiInfo:
    sweeps: int
    residual: float
    converged: bool
    residual_inf: tuple = ()
    residual_l1: tuple = ()


def _jacobi(agents: Sequence[JacobiAgent], network: Network, scheduler, tol: float,
            max_sweeps: int, rnd: int = 0, record: bool = False) -> JacobiInfo:
    """Distributed Jacobi on ``(L + Gamma) t = rhs``; one neighbor exchange per sweep."""
    hist_inf, hist_l1 = [], []
    worst = np.inf
    sweeps = 0
    for sweep in range(max_sweeps + 1):
        scheduler.run(lambda ag: ag.send_t(rnd), agents)
        network.route(agents)
        scheduler.run(JacobiAgent.jacobi_residual, agents)
        worst = max((abs(ag.residual) for ag in agents), default=0.0)
        if record:
            hist_inf.append(worst)
            hist_l1.append(sum(abs(ag.residual) for ag in agents))
        if worst < tol or sweep == max_sweeps:
            break
        scheduler.run(JacobiAgent.jacobi_advance, agents)
        sweeps += 1
    return JacobiInfo(sweeps, worst, worst < tol, tuple(hist_inf), tuple(hist_l1))


def solve_totals(graph: TradingGraph, a, rho: float, phi: float, rhs, tol: float = 1e-10,
                 max_sweeps: int = 10000, t0=None, scheduler=None, record: bool = False):
    """
    Solve ``(L + Gamma) t = rhs`` with ``Gamma = (rho + phi) diag(1/a)`` by
    distributed Jacobi sweeps and return the agent totals ``P_tr = t / (2a)``.

    Parameters
    ----------
    graph : TradingGraph
    a : array_like
        Quadratic cost coefficients, all strictly positive.
    rho, phi : float
        ADMM penalty and P-proximal weight.
    rhs : array_like
        Right-hand side ``v_hat - v_tilde``.

    Returns
    -------
    p_tr : ndarray
    info : JacobiInfo

    Raises
    ------
    ValidationError
        If any ``a_i <= 0``.
    ConvergenceError
        If the sweep budget runs out before the residual drops below `tol`.
    """
    a = np.asarray(a, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if np.any(a <= 0):
        raise ValidationError("all a_i must be > 0")
    if len(a) != graph.n or len(rhs) != graph.n:
        raise ValidationError("a and rhs must have one entry per agent")
    agents = [JacobiAgent(i, graph.neighbors[i], a[i], rho + phi) for i in range(graph.n)]
    for ag in agents:
        ag.rhs = float(rhs[ag.index])
        ag.t = 0.0 if t0 is None else float(t0[ag.index])
    network = Network(graph.neighbors)
    info = _jacobi(agents, network, scheduler or SequentialScheduler(), tol, max_sweeps,
                   record=record)
    if not info.converged:
        raise ConvergenceError(f"Jacobi budget of {max_sweeps} sweeps exhausted, "
                               f"residual {info.residual:.3e}", info.residual)
    t = np.array([ag.t for ag in agents])
    return t / (2.0 * a), info


def make_agents(market: MarketStep, params: AdmmParams) -> list[Agent]:
    g = market.graph
    agents = []
    for i, dw in enumerate(market.dwellings):
        nb = g.neighbors[i]
        d = [market.d(i, j) for j in nb]
        agents.append(Agent(i, nb, dw.a, dw.b_eff, dw.p_tr_min, dw.p_tr_max, dw.role.sign, params,
                            d=d, componentwise=market.sign_mode == "componentwise"))
    return agents


def _edge_arrays(agents: Sequence[Agent], graph: TradingGraph):
    trades = np.empty(len(graph.edges))
    prices = np.empty(len(graph.edges))
    for k, (i, j) in enumerate(graph.edges):
        pos = agents[i].neighbors.index(j)
        trades[k] = agents[i].P[pos]
        prices[k] = agents[i].lam[pos]
    return trades, prices


def structural_check(agents: Sequence[Agent], graph: TradingGraph) -> tuple[float, float, float]:
    """Max ``|P_ij + P_ji|``, max ``|lambda_ij - lambda_ji|`` and ``|sum_i P_i,tr|``."""
    recip = mismatch = 0.0
    for i, j in graph.edges:
        pi, pj = agents[i].neighbors.index(j), agents[j].neighbors.index(i)
        recip = max(recip, abs(agents[i].P[pi] + agents[j].P[pj]))
        mismatch = max(mismatch, abs(agents[i].lam[pi] - agents[j].lam[pj]))
    conservation = abs(sum(float(ag.P.sum()) for ag in agents))
    return recip, mismatch, conservation


BALANCE_RATIO = 10.0  # residual imbalance that triggers a penalty change
BALANCE_FACTOR = 2.0
PENALTY_RANGE = 1e3  # rho stays within [rho0 / range, rho0 * range]


def _balance_penalty(agents, params: AdmmParams, rho0: float, primal: float,
                     dual: float) -> AdmmParams:
    """
    Scale ``rho, phi, psi`` up when the primal residual dominates ``rho``
    times the dual one, and down in the opposite case.

    The scaled duals are rescaled so ``rho * u`` (and hence every price)
    is unchanged. Every agent applies the same factor in the same round;
    the decision uses the global residuals the stopping test needs anyway.
    """
    s = params.rho * dual
    if primal > BALANCE_RATIO * s and params.rho * BALANCE_FACTOR <= rho0 * PENALTY_RANGE:
        f = BALANCE_FACTOR
    elif s > BALANCE_RATIO * primal and params.rho / BALANCE_FACTOR >= rho0 / PENALTY_RANGE:
        f = 1.0 / BALANCE_FACTOR
    else:
        return params
    new = params.replace(rho=params.rho * f, phi=params.phi * f, psi=params.psi * f)
    for ag in agents:
        ag.set_params(new)
    return new


def run_step(market: MarketStep, params: Optional[AdmmParams] = None, scheduler=None,
             network_trace: bool = False, diagnostics: bool = True,
             callback=None) -> StepSolution:
    """
    Solve one timestep's trading QP with the parallel proximal ADMM.

    Each outer iteration is a set of synchronous rounds: local X-update and
    ``v`` (one ``V`` exchange), the distributed totals solve (one
    ``JACOBI`` exchange per sweep), then the local edge/price/dual update.
    Stops once the primal residual ``max|P - X|`` and the dual residual
    ``max|X^k - X^(k-1)|`` are below their tolerances.

    With ``params.adaptive`` a run still going at ``adapt_start`` has its
    penalty rebalanced every ``adapt_interval`` iterations until
    ``adapt_until``. A fixed penalty
    can stall for thousands of iterations when nearly every capacity bound
    binds at once, because prices then drift at a rate proportional to
    ``rho``.

    Parameters
    ----------
    market : MarketStep
    params : AdmmParams, optional
        Defaults to ``AdmmParams()``.
    scheduler : optional
        ``SequentialScheduler`` (default) or ``ThreadScheduler``; results do
        not depend on the choice.
    network_trace : bool
        Keep every message; available as ``solution.messages``.
    diagnostics : bool
        Gather reciprocity / price-symmetry / conservation every iteration.
    callback : callable, optional
        Called as ``callback(report, agents)`` after every iteration.

    Returns
    -------
    StepSolution
        Flagged ``converged=False`` (holding the best iterate seen) when
        `max_iter` runs out. ``solution.duals`` holds the scaled duals and
        ``solution.params`` the parameters in force at the end.
    """
    params = params or AdmmParams()
    problems = validate_params(params)
    if problems:
        raise ValidationError("invalid ADMM parameters: " + "; ".join(problems))
    if not market.has_trades:
        return no_trade_solution(market, iterations=0, converged=True,
                                 agent_seconds=np.zeros(market.n))

    scheduler = scheduler or SequentialScheduler()
    rho0 = params.rho
    agents = make_agents(market, params)
    network = Network(market.graph.neighbors, trace=network_trace)
    history: list[IterationReport] = []
    best = None
    best_score = np.inf
    converged = False
    rnd = 0
    primal = dual = np.inf

    for k in range(1, params.max_iter + 1):
        rnd += 1
        scheduler.run(lambda ag: ag.local_x_and_v(rnd), agents)
        network.route(agents)
        scheduler.run(Agent.compute_rhs, agents)
        jac = _jacobi(agents, network, scheduler, params.jacobi_tol, params.jacobi_max_sweeps, rnd)
        rnd += jac.sweeps + 1
        scheduler.run(Agent.local_p_price_dual, agents)

        primal = max(ag.primal_res for ag in agents)
        dual = max(ag.dual_res for ag in agents)
        recip = mismatch = cons = 0.0
        if diagnostics:
            recip, mismatch, cons = structural_check(agents, market.graph)
        report = IterationReport(k, primal, dual, mismatch, jac.sweeps, jac.residual, recip, cons)
        history.append(report)
        if callback is not None:
            callback(report, agents)

        if primal < params.eps_primal and dual < params.eps_dual:
            converged = True
            break
        score = max(primal / params.eps_primal, dual / params.eps_dual)
        if score < best_score:
            best_score = score
            best = (k, primal, dual, _edge_arrays(agents, market.graph))
        if (params.adaptive and params.adapt_start <= k <= params.adapt_until
                and k % params.adapt_interval == 0):
            params = _balance_penalty(agents, params, rho0, primal, dual)

    if converged or best is None:
        trades, prices = _edge_arrays(agents, market.graph)
        iters = len(history)
    else:
        iters, primal, dual, (trades, prices) = best
        log.warning("step %s: ADMM did not converge in %d iterations (best primal %.2e, dual %.2e)",
                    market.step, params.max_iter, primal, dual)

    solution = settle(market, trades, prices, iterations=iters, primal_residual=primal,
                      dual_residual=dual, converged=converged, history=history,
                      agent_seconds=np.array([ag.seconds for ag in agents]))
    if network_trace:
        solution.messages = network.log
    solution.duals = {i: dict(zip(ag.neighbors, ag.u.tolist())) for i, ag in enumerate(agents)}
    solution.params = params  # final penalty; prices satisfy lambda = 2aP_tr + b + d + rho u
    return solution
