"""Acceptance criteria 1-13, each at its stated tolerance.

Every test carries ``@pytest.mark.criterion(n)``; the terminal summary prints
one PASS/FAIL line per criterion. Run with ``pytest tests/test_acceptance.py``.
"""

import csv
import math

import mpmath as mp
import numpy as np
import pytest

from harvest_opt import cli
from harvest_opt.calculus import ScaleSpeed
from harvest_opt.discounted import abelian_sweep, psi_solve, solve_discounted, stationary_mass, value
from harvest_opt.ergodic import audit_as_conditions, solve_ergodic, yield_at
from harvest_opt.model import audit_assumptions, make_builtin, total_drift, x_zero, xhat
from harvest_opt.sim import SimConfig, average_yield, mc_expected_yield, occupation_histogram
from harvest_opt.special import log_incomplete_beta, log_lower_incomplete_gamma

from oracle_values import ERGODIC, GRID_CELL

MU, GAMMA = 0.1, 0.001
KINDS = ("verhulst_pearl", "logistic")
mp.mp.dps = 30


def model(kind, sigma=0.05, gamma=GAMMA):
    return make_builtin(kind, MU, gamma, sigma)


_solutions = {}


def sol(kind, sigma=0.05, gamma=GAMMA):
    key = (kind, sigma, gamma)
    if key not in _solutions:
        _solutions[key] = solve_ergodic(model(kind, sigma, gamma))
    return _solutions[key]


# 1 ------------------------------------------------------------------------

@pytest.mark.criterion(1)
@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("sigma", [0.05, 0.1])
def test_c01_optimality_system(kind, sigma):
    s = sol(kind, sigma)
    m = model(kind, sigma)
    product = total_drift(m, s.b_star) * math.exp(s.scale_speed.log_scale_speed(s.b_star))
    assert abs(product - 1.0) < 1e-6


# 2 ------------------------------------------------------------------------

@pytest.mark.criterion(2)
@pytest.mark.parametrize("kind", KINDS)
def test_c02_root_matches_grid_search(kind):
    s, m = sol(kind), model(kind)
    lo, hi = 500.0, 1000.0
    grid = [lo + (hi - lo) * (i + 1) / 2001 for i in range(2000)]
    vals = [yield_at(m, s.scale_speed, b) for b in grid]
    best = grid[int(np.argmax(vals))]
    assert abs(s.b_star - best) <= GRID_CELL
    # independent high-precision grid search
    assert abs(s.b_star - ERGODIC[kind][0.05][0]) <= GRID_CELL


def _closed_log_mass(kind, sigma, c, x):
    n = 2 * MU / sigma**2
    if kind == "verhulst_pearl":
        k = n * GAMMA
        return (math.log(2 / sigma**2) - n * math.log(c) + k * c - (n - 1) * math.log(k)
                + log_lower_incomplete_gamma(n - 1, k * x))
    return (math.log(2 / sigma**2) - n * math.log(c / (1 - GAMMA * c)) + (1 - n) * math.log(GAMMA)
            + log_incomplete_beta(GAMMA * x, n - 1, -n - 1))


@pytest.mark.criterion(2)
@pytest.mark.parametrize("kind", KINDS)
def test_c02_closed_form_speed_mass(kind):
    m = model(kind)
    ss = ScaleSpeed(m)
    worst = 0.0
    for x in np.geomspace(1e-3 * x_zero(m), 0.95 * x_zero(m), 20):
        quad = ss.log_speed_mass(float(x))
        closed = _closed_log_mass(kind, 0.05, ss.base_point, float(x))
        worst = max(worst, abs(math.expm1(quad - closed)))
    assert worst < 1e-8


# 3 ------------------------------------------------------------------------

@pytest.mark.criterion(3)
@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("sigma", [0.05, 0.1])
def test_c03_bracket(kind, sigma):
    s, m = sol(kind, sigma), model(kind, sigma)
    assert xhat(m) == 500.0 and x_zero(m) == 1000.0
    assert xhat(m) < s.b_star < x_zero(m)
    assert s.ell_star < MU / (4 * GAMMA)


# 4 ------------------------------------------------------------------------

@pytest.mark.criterion(4)
def test_c04_volatility_statics():
    sigmas = [0.02, 0.05, 0.1, 0.2]
    sols = [sol("verhulst_pearl", s) for s in sigmas]
    b = [s.b_star for s in sols]
    ell = [s.ell_star for s in sols]
    assert all(x < y for x, y in zip(b, b[1:]))
    assert all(x > y for x, y in zip(ell, ell[1:]))
    # towards the deterministic optimum as sigma decreases
    assert all(abs(x - 500) > abs(y - 500) for x, y in zip(b[1:], b))
    assert all(abs(x - 25) > abs(y - 25) for x, y in zip(ell[1:], ell))
    assert abs(b[0] - 500) / 500 < 0.05 and abs(ell[0] - 25) / 25 < 0.05
    for s, got in zip(sigmas, sols):
        _, b_ref, ell_ref = ERGODIC["verhulst_pearl"][s]
        assert got.b_star == pytest.approx(b_ref, rel=1e-9)
        assert got.ell_star == pytest.approx(ell_ref, rel=1e-9)


# 5 ------------------------------------------------------------------------

@pytest.mark.criterion(5)
@pytest.mark.parametrize("kind", KINDS)
def test_c05_carrying_capacity_scaling(kind):
    assert abs(sol(kind, 0.05, 0.001).rho_star - sol(kind, 0.05, 0.002).rho_star) < 1e-8


# 6 ------------------------------------------------------------------------

@pytest.mark.criterion(6)
@pytest.mark.parametrize("kind", KINDS)
def test_c06_discount_monotonicity_and_limit(kind):
    m = model(kind)
    xs = [solve_discounted(m, r).x_r_star for r in (1e-2, 5e-3, 1e-3, 1e-4)]
    assert all(x < y for x, y in zip(xs, xs[1:]))
    assert abs(xs[-1] - sol(kind).b_star) / sol(kind).b_star < 0.01


# 7 ------------------------------------------------------------------------

@pytest.mark.criterion(7)
def test_c07_abelian_limit():
    m, s = model("verhulst_pearl"), sol("verhulst_pearl")
    d = solve_discounted(m, 1e-4)
    for x in (100.0, 500.0, 900.0):
        assert abs(1e-4 * value(d, x) / s.ell_star - 1) < 0.02
    rows = abelian_sweep(m, [1e-2, 1e-3, 1e-4], [100.0, 500.0, 900.0], s)
    gaps = [r.abelian_gap for r in rows]
    assert all(x > y for x, y in zip(gaps, gaps[1:]))


# 8 ------------------------------------------------------------------------

def _exponents(r, sigma):
    d = mp.mpf(1) / 2 - mp.mpf(MU) / sigma**2
    q = mp.sqrt(d**2 + 2 * mp.mpf(r) / sigma**2)
    return d + q, d - q


def _psi_closed(kind, x, r, sigma=mp.mpf("0.05")):
    a1, a2 = _exponents(r, sigma)
    g, x = mp.mpf(GAMMA), mp.mpf(x)
    if kind == "verhulst_pearl":
        return (g * x) ** a1 * mp.hyp1f1(a1, 1 + a1 - a2, 2 * mp.mpf(MU) * g * x / sigma**2)
    q = mp.sqrt(a2**2 - 2 * a2 * (2 + a1) + (2 - a1) ** 2)
    a, b, c = 1 - a2 / 2 + a1 / 2 - q / 2, 1 - a2 / 2 + a1 / 2 + q / 2, 1 - a2 + a1
    y = g * x / (1 - g * x)
    return y**a1 * mp.hyp2f1(a, b, c, -y)


@pytest.mark.criterion(8)
@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("r", [0.01, 0.05])
def test_c08_psi_against_hypergeometric(kind, r):
    psi = psi_solve(model(kind), r)
    xs = np.linspace(50.0, 950.0, 10)
    ref = _psi_closed(kind, xs[0], r)
    for x in xs:
        ratio = math.exp(psi.log_psi(float(x)) - psi.log_psi(float(xs[0])))
        assert abs(ratio / float(_psi_closed(kind, x, r) / ref) - 1) < 1e-6


# 9 ------------------------------------------------------------------------

@pytest.mark.criterion(9)
def test_c09_single_path_yield(long_path):
    ell = sol("verhulst_pearl").ell_star
    assert abs(average_yield(long_path) - ell) / ell < 0.03


@pytest.fixture(scope="module")
def mc_runs():
    m, s = model("verhulst_pearl"), sol("verhulst_pearl")
    out = {}
    for f in (0.7, 1.0, 1.3):
        b = f * s.b_star
        out[f] = mc_expected_yield(m, SimConfig(b, b, 1e-3, 1e4, seed=9000, n_paths=32))
    return out


@pytest.mark.criterion(9)
def test_c09_monte_carlo_yield(mc_runs):
    ell = sol("verhulst_pearl").ell_star
    mean, se = mc_runs[1.0]
    assert abs(mean - ell) < 3 * se + 0.02 * ell


@pytest.mark.criterion(9)
@pytest.mark.parametrize("factor", [0.7, 1.3])
def test_c09_suboptimal_thresholds(mc_runs, factor):
    best, se_best = mc_runs[1.0]
    other, se_other = mc_runs[factor]
    assert best - other > 3 * math.hypot(se_best, se_other)


# 10 -----------------------------------------------------------------------

@pytest.mark.criterion(10)
def test_c10_occupation_measure(long_path):
    m, s = model("verhulst_pearl"), sol("verhulst_pearl")
    h = occupation_histogram(long_path, 50)
    pi = np.array([stationary_mass(m, s.b_star, float(a), float(b)) for a, b in zip(h.edges, h.edges[1:])])
    assert np.max(np.abs(h.mass - pi)) < 0.05


# 11 -----------------------------------------------------------------------

@pytest.mark.criterion(11)
@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("check", ["g_monotone", "g_square_integrable"])
def test_c11_value_gradient_conditions(kind, check):
    m = model(kind)
    rep = audit_as_conditions(m, sol(kind), audit_assumptions(m))
    result = getattr(rep, check)
    assert result.passed, f"{kind} {check}: {result.detail} (at x={result.where})"


# 12 -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def figure_dirs(tmp_path_factory):
    dirs = {}
    for kind in KINDS:
        d = tmp_path_factory.mktemp(f"fig_{kind}")
        cfg = d / "fig.cfg"
        cfg.write_text(f"kind={kind}\n")
        assert cli.main(["reproduce-figures", "--config", str(cfg), "--out", str(d / "out")]) == 0
        dirs[kind] = (cfg, d / "out")
    return dirs


def _curve(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return [float(r["r"]) for r in rows], [float(r["x_r_star"]) for r in rows], float(rows[0]["b_star"])


@pytest.mark.criterion(12)
@pytest.mark.parametrize("kind", KINDS)
def test_c12_figure_shape(figure_dirs, kind):
    out = figure_dirs[kind][1]
    rs_lo, lo, b_lo = _curve(out / "figure_sigma_0.05.csv")
    rs_hi, hi, b_hi = _curve(out / "figure_sigma_0.1.csv")
    assert rs_lo == rs_hi and rs_lo == sorted(rs_lo) and rs_lo[0] == 1e-4
    for xs, b in ((lo, b_lo), (hi, b_hi)):
        assert all(x > y for x, y in zip(xs, xs[1:]))
        gaps = [b - x for x in xs]
        assert all(0 < g1 < g2 for g1, g2 in zip(gaps, gaps[1:]))
        assert gaps[0] / b < 0.01
    assert all(h > l for h, l in zip(hi, lo))
    svg = (out / "figure.svg").read_text()
    assert svg.count("<polyline") == 2 and svg.count('class="asymptote"') == 2


# 13 -----------------------------------------------------------------------

RUNS = [
    ("solve-ergodic", "kind=verhulst_pearl\nmu=0.1\ngamma=0.001\nsigma=0.05\n"),
    ("solve-ergodic", "kind=logistic\nmu=0.1\ngamma=0.001\nsigma=0.1\n"),
    ("sweep-volatility", "kind=verhulst_pearl\nmu=0.1\ngamma=0.001\nsigmas=0.02,0.05,0.1,0.2\n"),
    ("sweep-discount", "kind=verhulst_pearl\nmu=0.1\ngamma=0.001\nsigma=0.05\nrs=1e-2,1e-3,1e-4\n"
                       "probes=100,500,900\n"),
    ("simulate", "kind=verhulst_pearl\nmu=0.1\ngamma=0.001\nsigma=0.05\ndt=1e-3\nhorizon=1e4\nseed=9000\n"
                 "n_paths=4\nn_bins=50\n"),
    ("audit", "kind=logistic\nmu=0.1\ngamma=0.001\nsigma=0.05\n"),
]


@pytest.mark.criterion(13)
@pytest.mark.parametrize("command,text", RUNS, ids=[f"{c}-{i}" for i, (c, _) in enumerate(RUNS)])
def test_c13_byte_identical_reruns(tmp_path, monkeypatch, command, text):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(text)
    codes = []
    for i, threads in enumerate(("1", "2")):
        monkeypatch.setenv("HARVEST_OPT_THREADS", threads)
        codes.append(cli.main([command, "--config", str(cfg), "--out", str(tmp_path / f"run{i}")]))
    assert codes[0] == codes[1]
    files = sorted(p.name for p in (tmp_path / "run0").iterdir())
    assert files and files == sorted(p.name for p in (tmp_path / "run1").iterdir())
    for name in files:
        assert (tmp_path / "run0" / name).read_bytes() == (tmp_path / "run1" / name).read_bytes(), name


@pytest.mark.criterion(13)
def test_c13_figures_rerun_identical(figure_dirs, tmp_path):
    for kind, (cfg, first) in figure_dirs.items():
        again = tmp_path / kind
        assert cli.main(["reproduce-figures", "--config", str(cfg), "--out", str(again)]) == 0
        for p in sorted(first.iterdir()):
            assert p.read_bytes() == (again / p.name).read_bytes(), p.name


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
