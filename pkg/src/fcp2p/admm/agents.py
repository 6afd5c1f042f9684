"""
Per-dwelling agent state and the local update rules of the parallel ADMM.

Every rule reads only the agent's own state and its mailbox, so all agents
of a round can run in any order or concurrently.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from fcp2p.admm.network import Message
from fcp2p.admm.params import AdmmParams
from fcp2p.admm.projection import project_sum_box


class JacobiAgent:
    """Holds one row of ``(L + Gamma) t = rhs`` and iterates it by neighbor exchange."""

    def __init__(self, index: int, neighbors: Sequence[int], a: float, rho_phi: float):
        self.index = index
        self.neighbors = tuple(neighbors)
        self.a = float(a)
        self.diag = len(self.neighbors) + rho_phi / self.a
        self.t = 0.0
        self.rhs = 0.0
        self.residual = 0.0
        self._nb_sum = 0.0
        self.mailbox: dict[str, dict[int, float]] = {"V": {}, "JACOBI": {}}
        self.outbox: list[Message] = []
        self.seconds = 0.0

    def send_t(self, rnd: int) -> None:
        self.outbox = [Message(rnd, "JACOBI", self.index, j, self.t) for j in self.neighbors]

    def jacobi_residual(self) -> None:
        inbox = self.mailbox["JACOBI"]
        s = 0.0
        for j in self.neighbors:
            s += inbox[j]
        self._nb_sum = s
        self.residual = self.rhs + s - self.diag * self.t

    def jacobi_advance(self) -> None:
        self.t = (self._nb_sum + self.rhs) / self.diag

    def neighbor_t(self) -> np.ndarray:
        inbox = self.mailbox["JACOBI"]
        return np.array([inbox[j] for j in self.neighbors], dtype=float)


class Agent(JacobiAgent):
    """
    ADMM worker for one dwelling.

    Attributes
    ----------
    P, X, u : ndarray
        Trade vector, its auxiliary copy and the scaled dual, one entry per
        neighbor (ordered like :attr:`neighbors`).
    t : float
        Scaled total ``2 a P_tr`` used by the Jacobi totals solve.
    """

    def __init__(self, index: int, neighbors: Sequence[int], a: float, b: float, lo: float,
                 hi: float, sign: int, params: AdmmParams, d: Optional[Sequence[float]] = None,
                 componentwise: bool = True):
        super().__init__(index, neighbors, a, params.rho + params.phi)
        self.b = float(b)
        self.lo, self.hi = float(lo), float(hi)
        self.sign = int(sign)
        self.componentwise = componentwise
        self.params = params
        k = len(self.neighbors)
        self.d = np.zeros(k) if d is None else np.asarray(d, dtype=float)
        self.P = np.zeros(k)
        self.X = np.zeros(k)
        self.u = np.zeros(k)
        self.lam = np.zeros(k)
        self.v = np.zeros(k)
        self._X_next = np.zeros(k)
        self.primal_res = 0.0
        self.dual_res = 0.0

    # round 1: local X-update and v, then broadcast v_ij to j
    def local_x_and_v(self, rnd: int) -> None:
        p = self.params
        self._X_next = x_update(self, p.rho, p.psi)
        self.v = compute_v(self, p.rho, p.phi)
        self.outbox = [Message(rnd, "V", self.index, j, float(self.v[k]))
                       for k, j in enumerate(self.neighbors)]

    def compute_rhs(self) -> None:
        inbox = self.mailbox["V"]
        incoming = 0.0
        for j in self.neighbors:
            incoming += inbox[j]
        self.rhs = incoming - float(self.v.sum())

    # after the totals solve: edge trades, prices, dual, commit
    def local_p_price_dual(self) -> None:
        p = self.params
        inbox = self.mailbox["V"]
        v_in = np.array([inbox[j] for j in self.neighbors], dtype=float)
        P_next, lam = edge_update(self.v, v_in, self.t, self.neighbor_t(), p.rho, p.phi)
        u_next = dual_update(self, p)
        X_next = self._X_next
        self.primal_res = float(np.abs(P_next - X_next).max()) if len(P_next) else 0.0
        self.dual_res = float(np.abs(X_next - self.X).max()) if len(P_next) else 0.0
        self.P, self.X, self.u, self.lam = P_next, X_next, u_next, lam

    def set_params(self, params: AdmmParams) -> None:
        """Switch to a rescaled penalty, keeping the unscaled dual ``rho * u``."""
        self.u = self.u * (self.params.rho / params.rho)
        self.diag = len(self.neighbors) + (params.rho + params.phi) / self.a
        self.params = params

    def snapshot(self) -> tuple:
        return (self.P.copy(), self.X.copy(), self.u.copy(), self.lam.copy(), self.t)


def x_update(agent: Agent, rho: float, psi: float) -> np.ndarray:
    """Proximal X-step: project the weighted average of ``P + u`` and ``X`` onto the local set."""
    z = (rho * (agent.P + agent.u) + psi * agent.X) / (rho + psi)
    sign = agent.sign if agent.componentwise else 0
    return project_sum_box(z, agent.lo, agent.hi, sign)


def compute_v(agent: Agent, rho: float, phi: float, d=None) -> np.ndarray:
    """``v_ij = b_i + d_ij + rho (u_ij - X_ij) - phi P_ij`` for every neighbor."""
    d = agent.d if d is None else d
    return agent.b + d + rho * (agent.u - agent.X) - phi * agent.P


def edge_update(v_out, v_in, t_own: float, t_nb, rho: float, phi: float):
    """Closed-form P-step and price for each edge.

    With ``s_i = v_ij + t_i`` and ``s_j = v_ji + t_j`` the trade is
    ``(s_j - s_i) / (2 (rho + phi))`` and the price ``(s_i + s_j) / 2``;
    both endpoints evaluate the same floats, so reciprocity and price
    symmetry hold bit for bit.
    """
    s_own = np.asarray(v_out, dtype=float) + t_own
    s_nb = np.asarray(v_in, dtype=float) + np.asarray(t_nb, dtype=float)
    return (s_nb - s_own) / (2.0 * (rho + phi)), (s_own + s_nb) / 2.0


def p_update(v_out, v_in, t_own, t_nb, rho, phi) -> np.ndarray:
    return edge_update(v_out, v_in, t_own, t_nb, rho, phi)[0]


def price_update(v_out, v_in, t_own, t_nb, rho, phi) -> np.ndarray:
    return edge_update(v_out, v_in, t_own, t_nb, rho, phi)[1]


def dual_update(agent: Agent, params: AdmmParams) -> np.ndarray:
    """Scaled dual step on the current (pre-update) primal residual ``P - X``."""
    return agent.u + params.dual_sign * params.kappa * (agent.P - agent.X)
