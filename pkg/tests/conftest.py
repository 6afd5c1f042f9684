import numpy as np
import pytest

from fcp2p.harness.demand import canonical_day_demand
from fcp2p.harness.scenario import canonical_scenario
from fcp2p.market import market_from_arrays


@pytest.fixture(scope="session")
def scenario():
    return canonical_scenario()


@pytest.fixture(scope="session")
def day():
    return canonical_day_demand()


def random_market(rng, n_min=2, n_max=10, a_range=(0.1, 10.0), b_range=(-30.0, 30.0)):
    """Random step with at least one buyer and one seller."""
    while True:
        n = int(rng.integers(n_min, n_max + 1))
        demand = rng.uniform(0.05, 1.4, n)
        if (demand > 0.7).any() and (demand < 0.7).any():
            break
    return market_from_arrays(demand, rng.uniform(*a_range, n), rng.uniform(*b_range, n))


# one pass/fail line per acceptance criterion in the terminal summary

_ACCEPTANCE: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    number, title = mark.args
    ok, _, detail = _ACCEPTANCE.get(number, (True, title, ""))
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail") or detail
    _ACCEPTANCE[number] = (ok and rep.passed, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, title, detail = _ACCEPTANCE[number]
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
