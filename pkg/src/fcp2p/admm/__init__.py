"""Parallel proximal ADMM over a simulated synchronous neighbor network."""

from fcp2p.admm.agents import Agent, compute_v, dual_update, edge_update, p_update, price_update, x_update
from fcp2p.admm.network import Message, Network, SequentialScheduler, ThreadScheduler
from fcp2p.admm.params import AdmmParams, validate_params
from fcp2p.admm.projection import project_sum_box
from fcp2p.admm.solver import (ConvergenceError, IterationReport, JacobiInfo, run_step,
                               solve_totals, structural_check)

__all__ = [
    "Agent", "AdmmParams", "ConvergenceError", "IterationReport", "JacobiInfo", "Message",
    "Network", "SequentialScheduler", "ThreadScheduler", "compute_v", "dual_update",
    "edge_update", "p_update", "price_update", "project_sum_box", "run_step", "solve_totals",
    "structural_check", "validate_params", "x_update",
]
