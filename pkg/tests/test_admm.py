import numpy as np
import pytest
from numpy.testing import assert_allclose

from fcp2p.admm import (AdmmParams, SequentialScheduler, ThreadScheduler, compute_v, dual_update,
                        p_update, price_update, run_step, validate_params)
from fcp2p.admm.agents import Agent
from fcp2p.errors import ValidationError
from fcp2p.fc_chp import FuelCellCurve
from fcp2p.market import MarketStep, market_from_arrays
from fcp2p.oracle import EdgeQp, solve_centralized

from conftest import random_market


def two_agent(b_seller=1.0, b_buyer=-1.0, a=1.0):
    # seller has 0.6 kW spare, buyer lacks 0.6 kW: the optimum is interior
    return market_from_arrays([0.1, 1.3], [a, a], [b_seller, b_buyer])


def test_validate_params_examples():
    ok = AdmmParams(rho=1, kappa=0.5, mu1=0.7, mu2=0.7, phi=2, psi=2)
    assert validate_params(ok) == []
    assert validate_params(ok.replace(kappa=2.0))
    edge = ok.replace(phi=1.0 * (1 / 0.7 - 1))
    assert any("phi" in msg for msg in validate_params(edge))
    assert validate_params(ok.replace(mu1=0.75, mu2=0.75))  # 1.5 == 2 - 0.5
    assert validate_params(ok.replace(eps_primal=0.0))
    assert validate_params(ok.replace(dual_sign=0))


def test_default_params_are_admissible():
    assert validate_params(AdmmParams()) == []


def test_params_from_dict_rejects_unknown():
    with pytest.raises(ValidationError):
        AdmmParams.from_dict({"rho": 1.0, "sigma": 2.0})


def _agent(**state):
    ag = Agent(0, [1], 1.0, state.pop("b", 1.0), 0.0, 1.0, 1, AdmmParams())
    for k, v in state.items():
        getattr(ag, k)[:] = v
    return ag


def test_compute_v_examples():
    assert_allclose(compute_v(_agent(b=-3.0), 1.0, 2.0), [-3.0])
    ag = _agent(b=1.0, X=0.1, u=0.05, P=0.2)
    assert_allclose(compute_v(ag, 1.0, 2.0), [0.55])


def test_compute_v_is_affine_in_state():
    base = compute_v(_agent(b=0.0), 3.0, 2.0)
    parts = [compute_v(_agent(b=0.0, X=0.4), 3.0, 2.0) - base,
             compute_v(_agent(b=0.0, u=-0.7), 3.0, 2.0) - base,
             compute_v(_agent(b=0.0, P=0.25), 3.0, 2.0) - base]
    both = compute_v(_agent(b=0.0, X=0.4, u=-0.7, P=0.25), 3.0, 2.0) - base
    assert_allclose(both, sum(parts), atol=1e-15)


def test_dual_update_examples():
    ag = _agent(P=0.3, X=0.3, u=0.2)
    assert_allclose(dual_update(ag, AdmmParams()), [0.2])
    ag = _agent(P=0.5, X=0.0, u=0.0)
    p = AdmmParams(rho=1.0, kappa=1.0, mu1=0.4, mu2=0.4, phi=2.0, psi=2.0, dual_sign=-1)
    assert_allclose(dual_update(ag, p), [-0.5])


def test_edge_formulas_symmetric_state():
    v = np.array([0.3])
    assert_allclose(p_update(v, v, 1.2, [1.2], 1.0, 1.0), [0.0])
    assert_allclose(price_update([2.0], [2.0], 0.0, [0.0], 1.0, 1.0), [2.0])


def test_two_agent_analytic():
    sol = run_step(two_agent(), AdmmParams(eps_primal=1e-9, eps_dual=1e-9))
    assert sol.converged
    # P_buyer = (b_s - b_b) / (4a), lambda = (b_s + b_b) / 2
    assert sol.trade(1, 0) == pytest.approx(0.5, abs=1e-5)
    assert sol.price(0, 1) == pytest.approx(0.0, abs=1e-5)


def test_two_agent_asymmetric_coefficients():
    sol = run_step(two_agent(b_seller=3.0, b_buyer=2.2, a=2.0), AdmmParams(eps_primal=1e-9, eps_dual=1e-9))
    assert sol.trade(1, 0) == pytest.approx(0.8 / 8, abs=1e-5)
    assert sol.price(0, 1) == pytest.approx(2.6, abs=1e-5)


def test_price_stationarity_identity_at_convergence():
    rng = np.random.default_rng(5)
    m = random_market(rng, 4, 8)
    p = AdmmParams(eps_primal=1e-9, eps_dual=1e-9)
    sol = run_step(m, p)
    assert sol.converged
    for k, (i, j) in enumerate(sol.edges):
        for own in (i, j):
            rho = sol.params.rho
            lam = 2 * m.a[own] * sol.p_tr[own] + m.b_eff[own] + rho * sol.duals[own][j if own == i else i]
            assert lam == pytest.approx(sol.prices[k], abs=1e-5)


def test_single_inactive_agent():
    m = market_from_arrays([0.7], [1.0], [0.0])
    sol = run_step(m)
    assert sol.iterations == 0 and sol.converged
    assert_allclose(sol.p_tr, [0.0])


def test_no_buyers_means_no_iterations():
    sol = run_step(market_from_arrays([0.2, 0.3, 0.4], [1, 1, 1], [0, 1, 2]))
    assert sol.iterations == 0 and len(sol.trades) == 0


def test_dual_sign_choice():
    m = two_agent()
    plus = run_step(m, AdmmParams(max_iter=400))
    minus = run_step(m, AdmmParams(max_iter=400, dual_sign=-1))
    assert plus.converged
    assert not minus.converged
    # +1 residuals shrink over the run
    pr = np.array([h.primal_residual for h in plus.history])
    assert pr[-1] < 1e-3 * pr[:5].max()


def test_invalid_params_rejected():
    with pytest.raises(ValidationError):
        run_step(two_agent(), AdmmParams(kappa=2.0))


def test_nonconvergence_returns_flagged_best_iterate():
    sol = run_step(two_agent(), AdmmParams(max_iter=3))
    assert not sol.converged
    assert sol.iterations <= 3
    assert np.isfinite(sol.trades).all()
    assert_allclose(sol.p_tr.sum(), 0.0, atol=1e-15)


def test_structural_invariants_every_iteration():
    rng = np.random.default_rng(8)
    m = random_market(rng, 6, 10)
    seen = []

    def check(report, agents):
        seen.append(report)
        assert report.reciprocity == 0.0
        assert report.price_mismatch == 0.0
        assert report.conservation < 1e-12

    sol = run_step(m, callback=check)
    assert len(seen) == sol.iterations > 0


def test_schedulers_are_bitwise_identical():
    rng = np.random.default_rng(21)
    m = random_market(rng, 6, 10)
    ref = run_step(m)
    shuffled = run_step(m, scheduler=SequentialScheduler(shuffle_seed=4))
    reverse = run_step(m, scheduler=SequentialScheduler(order=list(range(m.n))[::-1]))
    pool = ThreadScheduler(4)
    try:
        threaded = run_step(m, scheduler=pool)
    finally:
        pool.close()
    for other in (shuffled, reverse, threaded):
        assert other.iterations == ref.iterations
        assert np.array_equal(other.trades, ref.trades)
        assert np.array_equal(other.prices, ref.prices)


def test_message_trace_respects_graph():
    m = two_agent()
    sol = run_step(m, AdmmParams(max_iter=5), network_trace=True)
    phases = {msg.phase for msg in sol.messages}
    assert phases == {"V", "JACOBI"}
    assert all({msg.sender, msg.receiver} == {0, 1} for msg in sol.messages)
    rounds = [msg.round for msg in sol.messages]
    assert rounds == sorted(rounds)


@pytest.mark.parametrize("seed", range(8))
def test_matches_oracle_totals(seed):
    rng = np.random.default_rng(100 + seed)
    m = random_market(rng)
    sol = run_step(m)
    ref = solve_centralized(EdgeQp.from_market(m))
    assert sol.converged
    assert_allclose(sol.p_tr, ref.totals, atol=1e-4)


def test_total_sign_mode_matches_oracle():
    rng = np.random.default_rng(44)
    base = random_market(rng, 5, 8)
    m = MarketStep(base.step, base.dwellings, base.graph, base.thermal, {}, "total")
    sol = run_step(m)
    ref = solve_centralized(EdgeQp.from_market(m))
    assert_allclose(sol.p_tr, ref.totals, atol=1e-4)


def test_surcharge_matches_oracle():
    rng = np.random.default_rng(45)
    base = random_market(rng, 5, 8)
    d = {e: float(rng.uniform(-2, 2)) for e in base.graph.edges}
    m = MarketStep(base.step, base.dwellings, base.graph, base.thermal, d, base.sign_mode)
    sol = run_step(m, AdmmParams(eps_primal=1e-8, eps_dual=1e-8))
    ref = solve_centralized(EdgeQp.from_market(m))
    assert_allclose(sol.p_tr, ref.totals, atol=1e-4)
    assert EdgeQp.from_market(m).objective(sol.trades) == pytest.approx(ref.objective, abs=1e-5)


def test_wide_bounds_curve():
    # larger rated power leaves the two-agent optimum interior for bigger gaps
    curve = FuelCellCurve(p_fc_max=5.0, p_fc_hw_min=0.1)
    m = market_from_arrays([1.0, 9.0], [1.0, 1.0], [4.0, -2.0], curve=curve)
    sol = run_step(m, AdmmParams(eps_primal=1e-9, eps_dual=1e-9))
    assert sol.trade(1, 0) == pytest.approx(1.5, abs=1e-5)
    assert sol.price(0, 1) == pytest.approx(1.0, abs=1e-5)


def stalling_market():
    # buyer caps sum to 4e-4 kW less than the sellers' spare capacity, so
    # almost every bound binds and fixed-penalty prices creep for thousands
    # of iterations
    rng = np.random.default_rng(2024)
    for _ in range(60):
        m = random_market(rng)
    return m


def test_residual_balancing_rescues_stall():
    m = stalling_market()
    fixed = run_step(m, AdmmParams(adaptive=False, max_iter=1500), diagnostics=False)
    assert not fixed.converged and fixed.primal_residual > 1e-5
    seen = []
    sol = run_step(m, callback=lambda r, agents: seen.append(agents[0].params.rho))
    assert sol.converged and sol.iterations < 1500
    # the penalty climbs during the stall and is balanced back down afterwards
    assert max(seen) > 100.0 and seen[-1] == sol.params.rho
    assert validate_params(sol.params) == []
    ref = solve_centralized(EdgeQp.from_market(m))
    assert_allclose(sol.p_tr, ref.totals, atol=1e-4)
    # prices still satisfy the stationarity identity with the final penalty
    for k, (i, j) in enumerate(sol.edges):
        lam = 2 * m.a[i] * sol.p_tr[i] + m.b_eff[i] + sol.params.rho * sol.duals[i][j]
        assert lam == pytest.approx(sol.prices[k], abs=1e-4)


def test_balancing_does_not_touch_fast_runs():
    m = two_agent()
    a = run_step(m)
    b = run_step(m, AdmmParams(adaptive=False))
    assert a.iterations < AdmmParams().adapt_start
    assert np.array_equal(a.trades, b.trades)


def test_set_params_keeps_unscaled_dual():
    p = AdmmParams()
    ag = Agent(0, [1, 2], 2.0, 0.0, 0.0, 1.0, 1, p)
    ag.u = np.array([0.3, -0.1])
    ag.set_params(p.replace(rho=40.0, phi=20.0, psi=20.0))
    assert_allclose(40.0 * ag.u, 10.0 * np.array([0.3, -0.1]))
    assert ag.diag == pytest.approx(2 + 60.0 / 2.0)


def test_adaptive_params_validated():
    assert validate_params(AdmmParams(adapt_start=3000))
    assert validate_params(AdmmParams(adapt_interval=0))
