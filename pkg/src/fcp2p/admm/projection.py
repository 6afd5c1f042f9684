"""Euclidean projection onto a sign-constrained box with a bounded coordinate sum."""

from __future__ import annotations

import numpy as np

from fcp2p.errors import ValidationError


def _clamp(y: np.ndarray, sign: int) -> np.ndarray:
    if sign > 0:
        return np.maximum(y, 0.0)
    if sign < 0:
        return np.minimum(y, 0.0)
    return y


def project_sum_box(z, lo: float, hi: float, sign: int = 0, max_bisect: int = 200) -> np.ndarray:
    """
    Project `z` onto ``{x : sign * x >= 0 componentwise, lo <= sum(x) <= hi}``.

    The minimizer has the form ``x(nu) = clamp(z - nu)`` where ``sum(x(nu))``
    is nonincreasing in the scalar multiplier ``nu``. Bisection on ``nu``
    locates the set of unclamped coordinates; ``nu`` is then solved in
    closed form on that set so the returned sum hits the bound to rounding.

    Parameters
    ----------
    z : array_like
        Point to project.
    lo, hi : float
        Bounds on the coordinate sum, ``lo <= hi``.
    sign : {1, -1, 0}
        ``1`` keeps coordinates nonnegative, ``-1`` nonpositive, ``0`` free.

    Returns
    -------
    x : ndarray
        The projection.
    """
    z = np.asarray(z, dtype=float)
    if lo > hi:
        raise ValidationError(f"infeasible sum bounds [{lo}, {hi}]")
    if sign > 0 and hi < 0 or sign < 0 and lo > 0:
        raise ValidationError(f"sum bounds [{lo}, {hi}] incompatible with sign {sign}")
    if z.size == 0:
        return z.copy()
    x = _clamp(z, sign)
    total = x.sum()
    if lo <= total <= hi:
        return x
    target = hi if total > hi else lo

    if sign == 0:
        return z - (z.sum() - target) / z.size

    # bracket nu: s(left) >= target >= s(right)
    span = max(1.0, float(np.abs(z).max()) + abs(target))
    left, right = (0.0, span) if total > target else (-span, 0.0)
    while _clamp(z - right, sign).sum() > target:
        right += 2 * (right - left)
    while _clamp(z - left, sign).sum() < target:
        left -= 2 * (right - left)

    for _ in range(max_bisect):
        mid = 0.5 * (left + right)
        if mid == left or mid == right:
            break
        if _clamp(z - mid, sign).sum() > target:
            left = mid
        else:
            right = mid
        free = (z - left) * sign > 0
        if np.array_equal(free, (z - right) * sign > 0):
            # same free set on the whole bracket: sum is affine there
            break

    mid = 0.5 * (left + right)
    free = (z - mid) * sign > 0
    if free.any():
        nu = (z[free].sum() - target) / free.sum()
        cand = _clamp(z - nu, sign)
        if np.array_equal((z - nu) * sign > 0, free) or abs(cand.sum() - target) <= 1e-12 * max(1.0, abs(target)):
            return cand
    return _clamp(z - mid, sign)
