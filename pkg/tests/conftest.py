import pytest

from harvest_opt import SimConfig, make_builtin, simulate_reflected, solve_ergodic

MU, GAMMA = 0.1, 0.001

_criteria: dict[int, list[tuple[str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    n = getattr(report, "criterion", None)
    if n is not None:
        _criteria.setdefault(n, []).append((report.nodeid.split("::")[-1], report.outcome))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_criteria):
        results = _criteria[n]
        ok = all(outcome == "passed" for _, outcome in results)
        failed = [name for name, outcome in results if outcome != "passed"]
        detail = f" ({', '.join(failed)})" if failed else ""
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {len(results)} check(s){detail}")


@pytest.fixture(scope="session")
def vp():
    return make_builtin("verhulst_pearl", MU, GAMMA, 0.05)


@pytest.fixture(scope="session")
def logistic():
    return make_builtin("logistic", MU, GAMMA, 0.05)


@pytest.fixture(scope="session")
def vp_sol(vp):
    return solve_ergodic(vp)


@pytest.fixture(scope="session")
def logistic_sol(logistic):
    return solve_ergodic(logistic)


@pytest.fixture(scope="session")
def long_path(vp, vp_sol):
    """Single reflected path at b*, T = 1e5, dt = 1e-3."""
    b = vp_sol.b_star
    return simulate_reflected(vp, SimConfig(b, b, 1e-3, 1e5, seed=20240601))
