"""
Centralized reference solvers for the per-step trading QP.

The QP is written over one variable per undirected edge, ``y_e = P_ij`` for
``e = (i, j)``, so reciprocity ``P_ji = -P_ij`` holds by construction and
agent totals are ``P_tr = B y`` with the signed incidence matrix ``B``.
Nothing in here is used by the distributed solver.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from fcp2p.errors import ValidationError


@dataclass(frozen=True)
class EdgeQp:
    """
    ``min sum_i a_i P_i^2 + b_i P_i + sum_(i,j) d_ij P_ij`` over edge trades.

    Parameters
    ----------
    edges : sequence of (i, j)
        Oriented edges; variable ``k`` is ``P_ij`` of ``edges[k]``.
    a, b, lo, hi : array_like
        Per-agent quadratic and linear coefficients and total-trade bounds.
    signs : array_like, optional
        Per-agent role sign (+1 buyer, -1 seller, 0 free). With
        ``componentwise=True`` every edge trade of agent ``i`` must carry its
        sign, otherwise only the totals are bounded.
    d : dict, optional
        Directed surcharges ``{(i, j): d_ij}``.
    """

    edges: tuple
    a: np.ndarray
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    signs: Optional[np.ndarray] = None
    componentwise: bool = True
    d: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("a", "b", "lo", "hi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "edges", tuple((int(i), int(j)) for i, j in self.edges))
        n = len(self.a)
        if not (len(self.b) == len(self.lo) == len(self.hi) == n):
            raise ValidationError("a, b, lo, hi must have equal length")
        if np.any(self.a <= 0):
            raise ValidationError("all a_i must be > 0")
        if np.any(self.lo > self.hi):
            raise ValidationError("lo > hi for some agent")
        if np.any(self.lo > 0) or np.any(self.hi < 0):
            raise ValidationError("total bounds must contain 0")
        signs = np.zeros(n, dtype=int) if self.signs is None else np.asarray(self.signs, dtype=int)
        object.__setattr__(self, "signs", signs)
        for i, j in self.edges:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValidationError(f"bad edge ({i}, {j})")

    @classmethod
    def from_market(cls, market) -> "EdgeQp":
        g = market.graph
        d = {(i, j): market.d(i, j) for i, j in g.edges}
        d.update({(j, i): market.d(j, i) for i, j in g.edges})
        return cls(g.edges, market.a, market.b_eff, market.lo, market.hi, market.signs,
                   market.sign_mode == "componentwise", d)

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def incidence(self) -> np.ndarray:
        B = np.zeros((self.n, len(self.edges)))
        for k, (i, j) in enumerate(self.edges):
            B[i, k] = 1.0
            B[j, k] = -1.0
        return B

    @property
    def edge_cost(self) -> np.ndarray:
        return np.array([self.d.get((i, j), 0.0) - self.d.get((j, i), 0.0) for i, j in self.edges])

    def edge_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-edge bounds implied by the role signs of both endpoints."""
        m = len(self.edges)
        ylo, yhi = np.full(m, -np.inf), np.full(m, np.inf)
        if not self.componentwise:
            return ylo, yhi
        for k, (i, j) in enumerate(self.edges):
            # P_ij carries sign_i, P_ji = -P_ij carries sign_j
            for s in (self.signs[i], -self.signs[j]):
                if s > 0:
                    ylo[k] = max(ylo[k], 0.0)
                elif s < 0:
                    yhi[k] = min(yhi[k], 0.0)
        return ylo, yhi

    def totals(self, y) -> np.ndarray:
        return self.incidence @ np.asarray(y, dtype=float)

    def objective(self, y) -> float:
        y = np.asarray(y, dtype=float)
        p = self.totals(y)
        return float(self.a @ p**2 + self.b @ p + self.edge_cost @ y)

    def constraints(self) -> tuple[np.ndarray, np.ndarray, list[str]]:
        """All inequalities as ``G y <= h`` with a label per row."""
        m = len(self.edges)
        B = self.incidence
        rows, rhs, labels = [], [], []
        ylo, yhi = self.edge_bounds()
        eye = np.eye(m)
        for k in range(m):
            if np.isfinite(yhi[k]):
                rows.append(eye[k]); rhs.append(yhi[k]); labels.append(f"edge{k}_hi")
            if np.isfinite(ylo[k]):
                rows.append(-eye[k]); rhs.append(-ylo[k]); labels.append(f"edge{k}_lo")
        for i in range(self.n):
            if not B[i].any():
                continue
            rows.append(B[i]); rhs.append(self.hi[i]); labels.append(f"agent{i}_hi")
            rows.append(-B[i]); rhs.append(-self.lo[i]); labels.append(f"agent{i}_lo")
        G = np.array(rows).reshape(len(rows), m)
        return G, np.array(rhs, dtype=float), labels


@dataclass
class KktReport:
    stationarity: float
    primal_infeasibility: float
    complementarity: float
    dual_sign: float
    active: list = field(default_factory=list)

    @property
    def residual(self) -> float:
        return max(self.stationarity, self.primal_infeasibility, self.complementarity,
                   max(0.0, -self.dual_sign))

    def to_json(self) -> str:
        return json.dumps({**asdict(self), "residual": self.residual}, indent=2)

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())


@dataclass
class OracleSolution:
    trades: np.ndarray
    totals: np.ndarray
    multipliers: dict
    objective: float
    kkt: KktReport
    iterations: int


def kkt_report(qp: EdgeQp, y, lam, tol: float = 1e-9) -> KktReport:
    """Check the KKT conditions of `qp` at ``(y, lam)``; `lam` indexes the rows of ``qp.constraints()``."""
    G, h, labels = qp.constraints()
    B = qp.incidence
    y = np.asarray(y, dtype=float)
    lam = np.asarray(lam, dtype=float)
    grad = B.T @ (2 * qp.a * (B @ y) + qp.b) + qp.edge_cost
    stat = grad + G.T @ lam if len(h) else grad
    slack = G @ y - h if len(h) else np.zeros(0)
    scale = max(1.0, float(np.abs(grad).max(initial=0.0)))
    return KktReport(
        stationarity=float(np.abs(stat).max(initial=0.0)) / scale,
        primal_infeasibility=float(np.maximum(slack, 0.0).max(initial=0.0)),
        complementarity=float(np.abs(lam * slack).max(initial=0.0)),
        dual_sign=float(lam.min(initial=0.0)),
        active=[labels[k] for k in np.flatnonzero(np.abs(slack) <= tol)],
    )


def _eqp_step(H, grad, Gw):
    """Solve ``min 1/2 p'Hp + grad'p`` s.t. ``Gw p = 0``; returns ``(p, multipliers)``."""
    m = H.shape[0]
    w = Gw.shape[0]
    K = np.zeros((m + w, m + w))
    K[:m, :m] = H
    K[:m, m:] = Gw.T
    K[m:, :m] = Gw
    sol = np.linalg.lstsq(K, np.concatenate([-grad, np.zeros(w)]), rcond=None)[0]
    return sol[:m], sol[m:]


def _reduced_step(H, grad, G, work, n_edge_rows, edge_of_row):
    """
    :func:`_eqp_step` with the working edge bounds eliminated.

    Working edge-bound rows pin single variables, so those are dropped from
    the KKT system and their multipliers recovered from stationarity.
    Multipliers are returned in the order of `work`.
    """
    m = H.shape[0]
    fixed = np.zeros(m, dtype=bool)
    agent_rows = []
    for r in work:
        if r < n_edge_rows:
            fixed[edge_of_row[r]] = True
        else:
            agent_rows.append(r)
    free = ~fixed
    p = np.zeros(m)
    Ga = G[agent_rows] if agent_rows else np.zeros((0, m))
    p_f, lam_a = _eqp_step(H[np.ix_(free, free)], grad[free], Ga[:, free])
    p[free] = p_f
    # stationarity on the pinned coordinates gives the bound multipliers
    r = H @ p + grad + Ga.T @ lam_a
    lam = np.empty(len(work))
    a = iter(lam_a)
    for k, row in enumerate(work):
        if row < n_edge_rows:
            e = edge_of_row[row]
            lam[k] = -r[e] / G[row, e]
        else:
            lam[k] = next(a)
    return p, lam


def solve_centralized(qp: EdgeQp, tol: float = 1e-10, max_iter: int = 1000,
                      regularization: float = 0.0) -> OracleSolution:
    """
    Primal active-set solve of the edge QP, started at the feasible point 0.

    The edge Hessian ``2 B' diag(a) B`` is singular whenever the graph has a
    cycle (edge flows are not unique). Each equality-constrained step is the
    least-squares minimum-norm solution of its KKT system, so no step moves
    along flow circulations and the edge split stays near minimum norm.
    An optional Tikhonov term ``regularization * max(diag)`` can be added.

    Returns
    -------
    OracleSolution
        Trades, totals ``B y``, multipliers keyed by constraint label, and a
        :class:`KktReport` on the unregularized problem.
    """
    m = len(qp.edges)
    if m == 0:
        empty = KktReport(0.0, 0.0, 0.0, 0.0)
        return OracleSolution(np.zeros(0), np.zeros(qp.n), {}, 0.0, empty, 0)
    B = qp.incidence
    H = 2.0 * B.T @ (qp.a[:, None] * B)
    H += regularization * max(1.0, float(np.diag(H).max())) * np.eye(m)
    g = B.T @ qp.b + qp.edge_cost
    G, h, labels = qp.constraints()
    scale = max(1.0, float(np.abs(g).max()), float(np.abs(H).max()))

    n_edge_rows = sum(1 for lab in labels if lab.startswith("edge"))
    edge_of_row = np.abs(G[:n_edge_rows]).argmax(axis=1)

    y = np.zeros(m)
    work: list[int] = []
    lam_w = np.zeros(0)
    it = 0
    for it in range(1, max_iter + 1):
        grad = H @ y + g
        p, lam_w = _reduced_step(H, grad, G, work, n_edge_rows, edge_of_row)
        # a step is zero if it is tiny or only buys rounding-level decrease
        decrease = -(grad @ p + 0.5 * p @ H @ p)
        if (np.abs(p).max() <= tol * max(1.0, np.abs(y).max())
                or decrease <= 1e-15 * scale * max(1.0, np.abs(y).max())):
            if not work or lam_w.min() >= -tol * scale:
                break
            work.pop(int(np.argmin(lam_w)))
            continue
        alpha, block = 1.0, None
        Gp = G @ p
        cand = Gp > 1e-14
        cand[work] = False
        if cand.any():
            idx = np.flatnonzero(cand)
            steps = (h[idx] - G[idx] @ y) / Gp[idx]
            k = int(np.argmin(steps))  # first minimizer, same tie-break as a scan
            if steps[k] < alpha:
                alpha, block = max(float(steps[k]), 0.0), int(idx[k])
        y = y + alpha * p
        if block is not None:
            work.append(block)
    else:
        raise RuntimeError(f"active-set did not terminate in {max_iter} iterations")

    lam = np.zeros(len(h))
    if work:
        lam[work] = np.maximum(lam_w, 0.0)
    mult = {labels[k]: float(lam[k]) for k in range(len(h)) if lam[k] != 0.0}
    return OracleSolution(y, B @ y, mult, qp.objective(y), kkt_report(qp, y, lam), it)


def brute_force_minimize(objective: Callable[[np.ndarray], np.ndarray], bounds: Sequence,
                         step: float, feasible: Optional[Callable[[np.ndarray], np.ndarray]] = None):
    """
    Exhaustive grid search over a box, vectorized.

    Grid points are the multiples of `step` inside each ``(lo, hi)`` plus the
    endpoints. `objective` and `feasible` receive an ``(npoints, dim)`` array.

    Returns
    -------
    x : ndarray or None
        Best feasible grid point (``None`` if no point is feasible).
    value : float
    """
    if len(bounds) == 0:
        return np.zeros(0), float(objective(np.zeros((1, 0)))[0])
    axes = []
    for lo, hi in bounds:
        k = np.arange(np.ceil(lo / step), np.floor(hi / step) + 1) * step
        axes.append(np.union1d(k[(k >= lo) & (k <= hi)], [lo, hi]))
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(bounds))
    vals = np.asarray(objective(mesh), dtype=float)
    if feasible is not None:
        vals = np.where(feasible(mesh), vals, np.inf)
    k = int(np.argmin(vals))
    if not np.isfinite(vals[k]):
        return None, np.inf
    return mesh[k], float(vals[k])


def brute_force(qp: EdgeQp, grid_step: float):
    """Grid-search reference for tiny instances (at most 3 edges).

    Returns ``(trades, objective)``.
    """
    m = len(qp.edges)
    if m > 3:
        raise ValidationError("brute_force supports at most 3 edges")
    if m == 0:
        return np.zeros(0), 0.0
    B = qp.incidence
    ylo, yhi = qp.edge_bounds()
    reach = float(np.abs(np.concatenate([qp.lo, qp.hi])).max())
    bounds = [(max(lo, -reach), min(hi, reach)) for lo, hi in zip(ylo, yhi)]
    c = qp.edge_cost
    tol = 1e-12

    def objective(Y):
        P = Y @ B.T
        return P**2 @ qp.a + P @ qp.b + Y @ c

    def feasible(Y):
        P = Y @ B.T
        return np.all((P >= qp.lo - tol) & (P <= qp.hi + tol), axis=1)

    y, val = brute_force_minimize(objective, bounds, grid_step, feasible)
    return y, val


def exhaustive_active_sets(qp: EdgeQp):
    """Enumerate bound patterns of the totals QP; independent check for small n.

    Valid when the graph is connected and every edge trade is free to take
    any total split, e.g. complete bipartite with sign-definite role bounds.
    Returns the optimal totals, which are unique for ``a > 0``.
    """
    # totals QP: min sum a P^2 + b P  s.t.  sum P = 0, lo <= P <= hi
    n = qp.n
    best, best_val = None, np.inf
    for pattern in itertools.product((0, 1, 2), repeat=n):
        fixed = {i: (qp.lo[i] if s == 1 else qp.hi[i]) for i, s in enumerate(pattern) if s}
        free = [i for i in range(n) if i not in fixed]
        P = np.zeros(n)
        for i, v in fixed.items():
            P[i] = v
        if free:
            # common multiplier nu: 2 a_i P_i + b_i = nu on free agents
            rest = -sum(fixed.values())
            w = 1.0 / (2 * qp.a[free])
            nu = (rest + np.sum(qp.b[free] * w)) / np.sum(w)
            P[free] = (nu - qp.b[free]) * w
        elif abs(sum(fixed.values())) > 1e-12:
            continue
        if np.any(P < qp.lo - 1e-12) or np.any(P > qp.hi + 1e-12):
            continue
        val = float(qp.a @ P**2 + qp.b @ P)
        if val < best_val:
            best, best_val = P, val
    return best, best_val
