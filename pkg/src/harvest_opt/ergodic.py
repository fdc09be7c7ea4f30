"""Optimal sustainable (ergodic) harvesting threshold and yield.

The threshold b* is the unique root in (xhat, x0) of

    f(x) = 1/S'(x) - mu(x) x m((0, x)),

and the maximal long-run yield is l* = mu(b*) b* = 1/(S'(b*) m((0,b*))).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calculus import DEFAULT_QUAD, Quadrature, ScaleSpeed, _log_integral, _logsumexp, bracketed_root
from .errors import AssumptionViolation, BracketError, HarvestError
from .model import (BUILTIN_KINDS, AssumptionReport, Check, DiffusionModel, audit_assumptions,
                    audit_grid, make_builtin, x_zero, xhat)
from .parallel import parallel_map


@dataclass(frozen=True)
class ErgodicSolution:
    b_star: float
    ell_star: float
    rho_star: float | None
    bracket: tuple[float, float]
    consistency_gap: float
    model: DiffusionModel = field(repr=False, compare=False)
    scale_speed: ScaleSpeed = field(repr=False, compare=False)


def _exp_or_inf(v: float) -> float:
    return math.exp(v) if v < 709.0 else math.inf


def scaled_objective(model: DiffusionModel, ss: ScaleSpeed, x: float) -> float:
    """S'(x) f(x) = 1 - mu(x) x S'(x) m((0,x)); same sign as f and never overflows."""
    drift = model.percap_drift(x) * x
    log_sm = ss.log_scale_speed(x)
    if drift <= 0.0:
        return 1.0 - drift * _exp_or_inf(log_sm)
    return -math.expm1(math.log(drift) + log_sm)


def f_objective(model: DiffusionModel, ss: ScaleSpeed, x: float) -> float:
    h = scaled_objective(model, ss, x)
    if h == 0.0:
        return 0.0
    return math.copysign(_exp_or_inf(-ss.log_scale_density(x) + math.log(abs(h))), h)


def yield_at(model: DiffusionModel, ss: ScaleSpeed, b: float) -> float:
    """Long-run average yield 1/(S'(b) m((0,b))) of reflection at b."""
    return math.exp(-ss.log_scale_speed(b))


def solve_ergodic(model: DiffusionModel, quad: Quadrature = DEFAULT_QUAD, root_tol: float = 1e-10,
                  c: float | None = None, check: bool = True) -> ErgodicSolution:
    if check:
        report = audit_assumptions(model, 128)
        failed = [name for name, chk in report.items() if chk.passed is False]
        if failed:
            raise AssumptionViolation(f"model fails {', '.join(failed)}")
    x_hat, x0 = xhat(model), x_zero(model)
    ss = ScaleSpeed(model, c, quad)
    lo, hi = x_hat * (1 + 1e-9), x0 * (1 - 1e-9)

    def h(x):
        return scaled_objective(model, ss, x)

    h_lo, h_hi = h(lo), h(hi)
    if abs(h_lo) < 1e-14 and abs(h_hi) < 1e-14:
        raise AssumptionViolation("objective is flat across the bracket; threshold is not identified")
    try:
        b = bracketed_root(h, lo, hi, tol=root_tol)
    except BracketError as exc:
        raise AssumptionViolation(f"no optimal threshold in (xhat, x0) = ({x_hat:.6g}, {x0:.6g}): {exc}") from exc
    ell = model.percap_drift(b) * b
    gap = abs(h(b))
    rho = model.params["gamma"] * b if model.kind in BUILTIN_KINDS else None
    return ErgodicSolution(b, ell, rho, (x_hat, x0), gap, model, ss)


def u_prime(model: DiffusionModel, sol: ErgodicSolution, x: float) -> float:
    """Marginal value l* S'(x) m((0,x)) below the threshold, 1 at or above it."""
    model.check_state(x)
    if x >= sol.b_star:
        return 1.0
    return sol.ell_star * math.exp(sol.scale_speed.log_scale_speed(x))


def _log_g(model: DiffusionModel, sol: ErgodicSolution, x: float) -> float:
    log_sigma = math.log(model.diffusion(x))
    if x >= sol.b_star:
        return log_sigma
    return log_sigma + math.log(sol.ell_star) + sol.scale_speed.log_scale_speed(x)


def _log_g2_speed(model: DiffusionModel, sol: ErgodicSolution, x: float) -> float:
    # g^2 m' = 2 u'^2 / S'
    ss = sol.scale_speed
    lu = 0.0 if x >= sol.b_star else math.log(sol.ell_star) + ss.log_scale_speed(x)
    return math.log(2.0) + 2.0 * lu - ss.log_scale_density(x)


def audit_as_conditions(model: DiffusionModel, sol: ErgodicSolution,
                        report: AssumptionReport, grid_points: int = 512) -> AssumptionReport:
    """Fill the g-monotonicity and g-square-integrability checks, g = sigma * u'."""
    grid = audit_grid(model, sol.bracket[1], grid_points)
    log_g = np.array([_log_g(model, sol, float(x)) for x in grid])
    steps = np.diff(log_g)
    j = int(np.argmin(steps))
    if steps[j] < -1e-9:
        mono = Check(False, "g decreases on grid", float(steps[j]), float(grid[j + 1]))
    else:
        mono = Check(True, "g nondecreasing on grid", float(steps[j]))

    lf = lambda x: _log_g2_speed(model, sol, x)  # noqa: E731
    ss = sol.scale_speed
    lo, top, b = float(grid[0]), float(grid[-1]), sol.b_star
    # m' ~ x^p at 0 and u' ~ const there, so g^2 m' shares the speed density exponent
    p = ss.zero_exponent
    pieces = [lf(lo) + math.log(lo / (p + 1.0))]
    for a, c in ((lo, b), (b, top)):
        pieces.append(_log_integral(lambda u: lf(math.exp(u)) + u, math.log(a), math.log(c), ss.quad))
    log_total = _logsumexp(pieces)
    if model.bounded:
        U = model.state_upper
        w1, w2 = U - top, 10.0 * (U - top)
        slope = (lf(U - w2) - lf(U - w1)) / (math.log(w2) - math.log(w1))
        ok = slope > -1.0
        what = f"g^2 m' ~ (U-x)^{slope:.4g} at the upper end"
    else:
        slope = (lf(top) - lf(top / 2)) / math.log(2.0)
        ok = slope < -1.0
        what = f"log-slope {slope:.4g} of g^2 m' at x={top:.4g}"
    sq = Check(bool(ok and math.isfinite(log_total)),
               f"{what}; log of integral up to {top:.6g} is {log_total:.6g}", log_total,
               None if ok else top)
    return dataclasses.replace(report, g_monotone=mono, g_square_integrable=sq)


@dataclass(frozen=True)
class SweepRow:
    sigma: float
    solution: ErgodicSolution | None = None
    error: HarvestError | None = None


def volatility_sweep(kind: str, mu: float, gamma: float, sigmas: Sequence[float],
                     quad: Quadrature = DEFAULT_QUAD, root_tol: float = 1e-10) -> list[SweepRow]:
    """Solve the ergodic problem for each volatility; failures are kept per row."""
    sigmas = [float(s) for s in sigmas]
    if any(b <= a for a, b in zip(sigmas, sigmas[1:])):
        raise ValueError("sigmas must be strictly increasing")

    def one(sigma):
        try:
            if not mu > sigma * sigma / 2.0:
                raise AssumptionViolation(f"mu={mu!r} <= sigma^2/2 for sigma={sigma!r}")
            return SweepRow(sigma, solve_ergodic(make_builtin(kind, mu, gamma, sigma), quad, root_tol))
        except HarvestError as exc:
            return SweepRow(sigma, error=exc)

    return parallel_map(one, sigmas)
