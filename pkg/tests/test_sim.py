import math
import numpy as np
import pytest

from harvest_opt.discounted import stationary_mass
from harvest_opt.errors import InvalidParameter
from harvest_opt.model import DiffusionModel, make_builtin, make_custom, total_drift
from harvest_opt.sim import (SimConfig, _advance, average_yield, drift_average, mc_expected_yield,
                             occupation_histogram, simulate_reflected)


@pytest.mark.parametrize("kw", [dict(x0=0.0), dict(b=-1.0), dict(dt=math.nan), dict(horizon=math.inf),
                                dict(dt=2.0, horizon=1.0), dict(seed=-1), dict(seed=1.5), dict(n_paths=0)])
def test_config_validation(kw):
    base = dict(x0=1.0, b=1.0, dt=0.1, horizon=1.0)
    with pytest.raises(InvalidParameter):
        SimConfig(**{**base, **kw})


def test_initial_jump(vp):
    path = simulate_reflected(vp, SimConfig(1000.0, 500.0, 1e-2, 10.0, seed=3))
    assert path.harvest[0] == 500.0 and path.states[0] == 500.0
    below = simulate_reflected(vp, SimConfig(250.0, 500.0, 1e-2, 10.0, seed=3))
    assert below.harvest[0] == 0.0 and below.states[0] == 250.0


def test_deterministic_flow_reaches_drift_at_threshold():
    m = make_builtin("verhulst_pearl", 0.1, 0.001, 0.05)
    b = 800.0
    path = simulate_reflected(m, SimConfig(b / 2, b, 1e-3, 2e4, seed=0), noise=0.0)
    # logistic flow x' = mu x (1 - gamma x) from b/2 reaches b at this time
    t_hit = math.log((b / (1 - 0.001 * b)) / ((b / 2) / (1 - 0.001 * b / 2))) / 0.1
    before = path.times < t_hit - 0.1
    assert np.all(path.harvest[before] == 0.0)
    assert np.all(np.diff(path.states[before]) > 0)
    expected = total_drift(m, b)
    assert average_yield(path) == pytest.approx(expected * (1 - t_hit / 2e4), rel=1e-3)
    assert average_yield(path) == pytest.approx(expected, rel=0.01)


def test_fixed_seed_is_reproducible(vp):
    cfg = SimConfig(400.0, 512.0, 1e-3, 200.0, seed=11)
    a, b = simulate_reflected(vp, cfg), simulate_reflected(vp, cfg)
    for name in ("times", "states", "harvest"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    other = simulate_reflected(vp, SimConfig(400.0, 512.0, 1e-3, 200.0, seed=12))
    assert other.states.tobytes() != a.states.tobytes()


def test_path_invariants(long_path):
    p = long_path
    assert np.all(p.states[1:] <= p.b) and np.all(p.states[1:] > 0)
    assert np.all(np.diff(p.harvest) >= 0)
    assert p.clamp_events == 0 and p.local_time_events > 0
    assert p.times.size == 1_000_001 and p.times[-1] == pytest.approx(1e5)
    assert math.isnan(p.running_avg[0])


def test_single_path_yield(long_path, vp_sol):
    assert abs(average_yield(long_path) - vp_sol.ell_star) / vp_sol.ell_star < 0.03
    # the drift integral identity holds up to Monte Carlo error
    assert drift_average(long_path) == pytest.approx(average_yield(long_path), rel=0.01)


def test_running_average_stabilises(long_path):
    tail = long_path.running_avg[long_path.times >= long_path.horizon / 10]
    assert (tail.max() - tail.min()) / long_path.running_avg[-1] < 0.05


def test_occupation_histogram(long_path, vp, vp_sol):
    h = occupation_histogram(long_path, 50)
    assert math.fsum(h.mass) == pytest.approx(1.0, abs=1e-12)
    assert np.sum(h.density * np.diff(h.edges)) == pytest.approx(1.0, abs=1e-12)
    pi = [stationary_mass(vp, vp_sol.b_star, float(lo), float(hi)) for lo, hi in zip(h.edges, h.edges[1:])]
    assert np.max(np.abs(h.mass - pi)) < 0.05
    mids = 0.5 * (h.edges[1:] + h.edges[:-1])
    mean_drift = float(np.sum(h.mass * [total_drift(vp, float(x)) for x in mids]))
    assert mean_drift == pytest.approx(vp_sol.ell_star, rel=0.03)
    with pytest.raises(InvalidParameter):
        occupation_histogram(long_path, 5)


def test_mc_minimal_run(vp):
    mean, se = mc_expected_yield(vp, SimConfig(500.0, 500.0, 1e-2, 100.0, seed=5, n_paths=2))
    assert math.isfinite(mean) and math.isfinite(se) and se > 0
    with pytest.raises(InvalidParameter):
        mc_expected_yield(vp, SimConfig(500.0, 500.0, 1e-2, 100.0, seed=5, n_paths=1))


def test_mc_is_schedule_independent(vp, monkeypatch):
    cfg = SimConfig(500.0, 500.0, 1e-2, 200.0, seed=5, n_paths=4)
    monkeypatch.setenv("HARVEST_OPT_THREADS", "1")
    serial = mc_expected_yield(vp, cfg)
    monkeypatch.setenv("HARVEST_OPT_THREADS", "3")
    assert mc_expected_yield(vp, cfg) == serial


@pytest.mark.slow
def test_mc_forgets_initial_state(vp, vp_sol):
    b = vp_sol.b_star
    runs = [mc_expected_yield(vp, SimConfig(x0, b, 1e-3, 2e4, seed=300, n_paths=8)) for x0 in (b / 4, b, 4 * b)]
    ref_mean, ref_se = runs[1]
    for mean, se in runs:
        assert abs(mean - ref_mean) < 3 * max(se, ref_se)


@pytest.mark.slow
def test_halving_dt_changes_yield_little(vp, vp_sol):
    b = vp_sol.b_star
    coarse, _ = mc_expected_yield(vp, SimConfig(b, b, 1e-3, 1e4, seed=500, n_paths=16))
    fine, _ = mc_expected_yield(vp, SimConfig(b, b, 5e-4, 1e4, seed=500, n_paths=16))
    assert abs(coarse - fine) / fine < 0.01


def test_coarse_step_warns(vp):
    with pytest.warns(RuntimeWarning, match="coarse"):
        simulate_reflected(vp, SimConfig(500.0, 500.0, 1.0, 10.0))


def test_zero_crossings_are_clamped_and_reported():
    m = make_builtin("verhulst_pearl", 0.1, 0.001, 3.0)
    with pytest.warns(RuntimeWarning) as caught:
        path = simulate_reflected(m, SimConfig(10.0, 10.0, 0.5, 200.0, seed=2))
    assert any("clamped" in str(w.message) for w in caught)
    assert path.clamp_events > 0
    assert np.all(path.states > 0)


def test_kernel_reports_nonfinite_step():
    state = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
    counts = np.zeros(2, dtype=np.int64)
    xi = np.array([0.1, math.nan, 0.2])
    rec = np.zeros(4)
    bad = _advance(0, np.array([0.1, 0.001, 0.05]), 1.0, 2.0, 1e-12, 0.01, xi, 10, 1000, state, counts, rec, rec)
    assert bad == 12


def test_custom_and_unsupported_models():
    m = make_custom("linear", mu0=0.2, mu1=0.001, sigma=0.05)
    path = simulate_reflected(m, SimConfig(50.0, 100.0, 1e-2, 100.0, seed=1))
    assert path.states.max() <= 100.0
    odd = DiffusionModel("custom", {}, lambda x: 0.1, lambda x: 0.05 * x, family="bespoke")
    with pytest.raises(InvalidParameter):
        simulate_reflected(odd, SimConfig(50.0, 100.0, 1e-2, 100.0))
