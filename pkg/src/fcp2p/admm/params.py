from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class AdmmParams:
    """Penalty, step and proximal weights plus stopping rules for the parallel ADMM.

    Convergence is guaranteed when ``phi > rho (1/mu1 - 1)``,
    ``psi > rho (1/mu2 - 1)`` and ``mu1 + mu2 < 2 - kappa`` for some
    positive certificates ``mu1, mu2``; see :func:`validate_params`.
    These conditions are invariant under scaling ``rho, phi, psi`` by one
    common factor, which is what the optional residual balancing does.
    """

    rho: float = 10.0
    kappa: float = 0.5
    phi: float = 5.0
    psi: float = 5.0
    mu1: float = 0.7
    mu2: float = 0.7
    eps_primal: float = 1e-6
    eps_dual: float = 1e-6
    max_iter: int = 5000
    jacobi_tol: float = 1e-10
    jacobi_max_sweeps: int = 10000
    dual_sign: int = 1
    # residual balancing for slow runs: from `adapt_start` to `adapt_until`,
    # every `adapt_interval` iterations, rescale rho, phi, psi together
    adaptive: bool = True
    adapt_start: int = 300
    adapt_interval: int = 20
    adapt_until: int = 2500

    def replace(self, **changes) -> "AdmmParams":
        return AdmmParams(**{**asdict(self), **changes})

    @classmethod
    def from_dict(cls, data: dict) -> "AdmmParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            from fcp2p.errors import ValidationError
            raise ValidationError(f"unknown ADMM parameters: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


def validate_params(p: AdmmParams) -> list[str]:
    """Return every violated condition; an empty list means the set is admissible."""
    out = []
    if not p.rho > 0:
        out.append(f"rho must be > 0 (got {p.rho})")
    if not p.kappa > 0:
        out.append(f"kappa must be > 0 (got {p.kappa})")
    if not (p.mu1 > 0 and p.mu2 > 0):
        out.append(f"mu1, mu2 must be > 0 (got {p.mu1}, {p.mu2})")
    else:
        need_phi = p.rho * (1.0 / p.mu1 - 1.0)
        need_psi = p.rho * (1.0 / p.mu2 - 1.0)
        if not p.phi > need_phi:
            out.append(f"phi > rho(1/mu1 - 1) violated: {p.phi} <= {need_phi}")
        if not p.psi > need_psi:
            out.append(f"psi > rho(1/mu2 - 1) violated: {p.psi} <= {need_psi}")
    if not p.mu1 + p.mu2 < 2.0 - p.kappa:
        out.append(f"mu1 + mu2 < 2 - kappa violated: {p.mu1 + p.mu2} >= {2.0 - p.kappa}")
    for name in ("eps_primal", "eps_dual", "jacobi_tol"):
        if not getattr(p, name) > 0:
            out.append(f"{name} must be > 0")
    if p.max_iter < 1 or p.jacobi_max_sweeps < 1:
        out.append("max_iter and jacobi_max_sweeps must be >= 1")
    if p.adapt_interval < 1 or not 0 <= p.adapt_start <= p.adapt_until:
        out.append("need adapt_interval >= 1 and 0 <= adapt_start <= adapt_until")
    if p.dual_sign not in (1, -1):
        out.append(f"dual_sign must be +1 or -1 (got {p.dual_sign})")
    return out
