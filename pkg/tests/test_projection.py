import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from fcp2p.admm import AdmmParams, x_update
from fcp2p.admm.agents import Agent
from fcp2p.admm.projection import project_sum_box
from fcp2p.errors import ValidationError


def test_one_dimensional_clamp():
    assert_allclose(project_sum_box([0.3], 0.0, 0.254, 1), [0.254])


def test_equal_shift():
    assert_allclose(project_sum_box([0.2, 0.2], 0.0, 0.254, 1), [0.127, 0.127], atol=1e-15)


def test_interior_point_unchanged():
    z = np.array([0.05, 0.1])
    assert_allclose(project_sum_box(z, 0.0, 0.254, 1), z)


def test_seller_orthant():
    x = project_sum_box([0.3, -0.8], -0.492, 0.0, -1)
    assert_allclose(x, [0.0, -0.492])


def test_rejects_bad_bounds():
    with pytest.raises(ValidationError):
        project_sum_box([0.1], 0.2, 0.1)
    with pytest.raises(ValidationError):
        project_sum_box([0.1], -1.0, -0.5, 1)


def test_x_update_uses_weighted_average():
    p = AdmmParams(rho=1.0, psi=3.0, phi=3.0)
    ag = Agent(0, [1, 2], 1.0, 0.0, 0.0, 0.254, 1, p)
    ag.P[:] = [0.4, 0.4]
    ag.u[:] = [0.0, 0.0]
    ag.X[:] = [0.0, 0.0]
    # z = (0.4 + 0) / 4 = 0.1 each, sum 0.2 inside the bound
    assert_allclose(x_update(ag, p.rho, p.psi), [0.1, 0.1])


def test_total_mode_ignores_component_signs():
    p = AdmmParams()
    ag = Agent(0, [1, 2], 1.0, 0.0, 0.0, 0.254, 1, p, componentwise=False)
    ag.X[:] = [0.3, -0.2]
    out = x_update(ag, p.rho, p.psi)
    assert out[1] < 0
    assert 0 <= out.sum() <= 0.254 + 1e-15


def _kkt_ok(z, x, lo, hi, sign, tol=1e-9):
    """Projection optimality: x - z = -nu*1 + mu with mu in the normal cone of the orthant."""
    s = x.sum()
    assert lo - tol <= s <= hi + tol
    if sign:
        assert np.all(sign * x >= -tol)
    g = z - x
    free = np.abs(x) > tol if sign else np.ones_like(x, bool)
    if free.any():
        nu = g[free].mean()
    else:
        # every coordinate clamped: the smallest admissible multiplier
        nu = sign * max(0.0, float(np.max(sign * z))) if sign else 0.0
    assert_allclose(g[free], nu, atol=1e-8)
    if sign:
        # clamped coordinates: z - nu pushes outside the orthant
        assert np.all(sign * (z[~free] - nu) <= 1e-8)
    if nu > 1e-8:
        assert s == pytest.approx(hi, abs=1e-9)
    if nu < -1e-8:
        assert s == pytest.approx(lo, abs=1e-9)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=12), st.floats(0, 2),
       st.sampled_from([1, -1, 0]))
def test_projection_kkt(z, width, sign):
    z = np.array(z)
    lo, hi = (0.0, width) if sign > 0 else (-width, 0.0) if sign < 0 else (-width, width)
    x = project_sum_box(z, lo, hi, sign)
    _kkt_ok(z, x, lo, hi, sign)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=8), st.floats(0, 2),
       st.sampled_from([1, -1]))
def test_projection_is_idempotent_and_nonexpansive(z, width, sign):
    z = np.array(z)
    lo, hi = (0.0, width) if sign > 0 else (-width, 0.0)
    x = project_sum_box(z, lo, hi, sign)
    assert_allclose(project_sum_box(x, lo, hi, sign), x, atol=1e-12)
    w = z + 0.1
    assert np.linalg.norm(project_sum_box(w, lo, hi, sign) - x) <= np.linalg.norm(w - z) + 1e-12
