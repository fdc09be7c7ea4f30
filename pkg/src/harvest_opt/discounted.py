"""Discounted harvesting: fundamental solution psi_r, boundary x_r*, value V_r.

psi_r is the increasing solution of (1/2) sigma^2 psi'' + mu(x) x psi' = r psi.
It is integrated in s = ln x through the logarithmic derivative
W = x psi'/psi, which obeys the Riccati equation

    dW/ds = W - W^2 + 2 x^2 (r - mu(x) W) / sigma^2(x),    d(log psi)/ds = W.

psi is positive and spans many orders of magnitude, so only log psi is stored.
Since psi'' = 2 psi (r - mu W) / sigma^2, the optimality condition
psi''(x_r*) = 0 reads r = mu(x_r*) W(x_r*).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.integrate import solve_ivp

from .calculus import DEFAULT_QUAD, Quadrature, ScaleSpeed, _log_integral, bracketed_root
from .ergodic import ErgodicSolution, solve_ergodic
from .errors import AssumptionViolation, BracketError, DomainError, HarvestError, NumericalError
from .model import DiffusionModel, _golden_max, argmax_unimodal, x_zero
from .parallel import parallel_map


def theta(model: DiffusionModel, r: float, x: float) -> float:
    model.check_state(x)
    return (model.percap_drift(x) - r) * x


def _exponents(s0: float, m0: float, r: float) -> tuple[float, float]:
    # roots of (1/2) s0 a (a - 1) + m0 a - r = 0, written without cancellation
    k = m0 - 0.5 * s0
    disc = math.sqrt(k * k + 2.0 * s0 * r)
    a1 = 2.0 * r / (k + disc) if k > 0 else (disc - k) / s0
    return a1, -2.0 * r / (s0 * a1)


class Psi:
    """Dense evaluator of the increasing fundamental solution, normalised by psi(x_eps) = x_eps**alpha1."""

    def __init__(self, model: DiffusionModel, r: float, x_eps: float, x_end: float,
                 rel_tol: float = 1e-10):
        if not r > 0:
            raise ValueError(f"discount rate must be positive, got {r!r}")
        self.model, self.r = model, float(r)
        self.x_eps, self.x_end = float(x_eps), float(x_end)
        mu, sig = model.percap_drift, model.diffusion
        s0 = (sig(x_eps) / x_eps) ** 2
        self.alpha1, self.alpha2 = _exponents(s0, mu(x_eps), self.r)

        def rhs(s, y):
            x = math.exp(s)
            w = y[0]
            q = 2.0 * x * x / sig(x) ** 2
            return [w - w * w + q * (self.r - mu(x) * w), w]

        def jac(s, y):
            x = math.exp(s)
            q = 2.0 * x * x / sig(x) ** 2
            return [[1.0 - 2.0 * y[0] - q * mu(x), 0.0], [1.0, 0.0]]

        s0_, s1 = math.log(x_eps), math.log(x_end)
        y0 = [self.alpha1, self.alpha1 * s0_]
        # the Riccati equation is stiff where sigma(x)/x vanishes, as at a finite upper end
        method = "Radau" if model.bounded else "DOP853"
        kw = {"jac": jac} if method == "Radau" else {}
        sol = solve_ivp(rhs, (s0_, s1), y0, method=method, **kw,
                        rtol=rel_tol, atol=1e-12 * max(1.0, abs(y0[1])), dense_output=True)
        if not sol.success:
            raise NumericalError(f"psi integration failed for r={r!r}: {sol.message}")
        if np.any(sol.y[0] <= 0.0) or not np.all(np.isfinite(sol.y)):
            raise NumericalError(f"psi is not increasing on the solve grid for r={r!r}")
        self._dense = sol.sol
        self.n_steps = sol.t.size

    def _state(self, x: float) -> tuple[float, float]:
        self.model.check_state(x)
        if x > self.x_end * (1 + 1e-12):
            raise DomainError(f"x={x!r} is beyond the psi solve range (x_end={self.x_end!r})")
        if x <= self.x_eps:
            # power-law extension below the start point
            return self.alpha1, self.alpha1 * math.log(x)
        w, lp = self._dense(math.log(x))
        return float(w), float(lp)

    def log_psi(self, x: float) -> float:
        return self._state(x)[1]

    def psi(self, x: float) -> float:
        return math.exp(self.log_psi(x))

    def log_derivative(self, x: float) -> float:
        """W(x) = x psi'(x) / psi(x)."""
        return self._state(x)[0]

    def log_dpsi(self, x: float) -> float:
        w, lp = self._state(x)
        return lp + math.log(w / x)

    def dpsi(self, x: float) -> float:
        return math.exp(self.log_dpsi(x))

    def curvature_sign(self, x: float) -> float:
        """r - mu(x) W(x), which has the sign of psi''(x)."""
        return self.r - self.model.percap_drift(x) * self.log_derivative(x)


def psi_solve(model: DiffusionModel, r: float, rel_tol: float = 1e-10, eps: float = 1e-6,
              x_end: float | None = None) -> Psi:
    """psi_r from x0*eps up to 2*x0, or close to a finite upper end."""
    x0 = x_zero(model)
    if x_end is None:
        x_end = model.state_upper * (1 - 1e-3) if model.bounded else 2.0 * x0
    return Psi(model, r, x0 * eps, x_end, rel_tol)


@dataclass(frozen=True)
class DiscountedSolution:
    r: float
    x_r_star: float
    alpha1: float
    alpha2: float
    x_hat_r: float
    x_zero_r: float
    argmin_check: float
    psi: Psi = field(repr=False, compare=False)
    model: DiffusionModel = field(repr=False, compare=False)

    def value_at(self, x: float) -> float:
        return value(self, x)


def _g_integral(model: DiffusionModel, psi: Psi, ss: ScaleSpeed, r: float, x: float) -> float:
    """G_r(x) = int_0^x psi(z) (theta_r(z) - theta_r(x)) m'(z) dz, up to a positive factor."""
    th_x = theta(model, r, x)

    def log_weight(u):
        z = math.exp(u)
        return psi.log_psi(z) + ss.log_speed_density(z) + u

    lo, hi = math.log(psi.x_eps), math.log(x)
    grid = np.linspace(lo, hi, 129)
    logw = np.array([log_weight(float(u)) for u in grid])
    i = int(np.argmax(logw))
    ref = float(logw[i])
    # G vanishes at the root by cancellation, so the tolerance is set against the size of its terms
    th_z = np.array([abs(theta(model, r, math.exp(float(u)))) for u in grid])
    size = float(np.sum(np.exp(logw - ref) * (th_z + abs(th_x)))) * (grid[1] - grid[0])
    points = [float(grid[j]) for j in (i - 1, i, i + 1) if 0 < j < grid.size - 1]

    def integrand(u):
        z = math.exp(u)
        return math.exp(log_weight(u) - ref) * (theta(model, r, z) - th_x)

    res = integrate.quad(integrand, lo, hi, epsabs=ss.quad.rel_tol * max(size, 1e-300), epsrel=0.0,
                         limit=ss.quad.max_subdivisions, points=points or None, full_output=1)
    val, err = res[0], res[1]
    if not math.isfinite(val) or err > 1e-6 * max(size, 1e-300):
        raise NumericalError(f"G_r quadrature at x={x!r} failed: value={val!r}, error={err!r}")
    # below x_eps the weight is a power law and theta_r(z) -> 0
    p = ss.zero_exponent + psi.alpha1
    return val - th_x * math.exp(float(logw[0]) - ref) / (p + 1.0)


def _check_b2(model: DiffusionModel, r: float, lo: float, hi: float) -> float:
    try:
        return argmax_unimodal(lambda x: theta(model, r, x), lo, hi)
    except AssumptionViolation as exc:
        raise AssumptionViolation(f"theta_r is not single-peaked for r={r!r}") from exc


def solve_discounted(model: DiffusionModel, r: float, quad: Quadrature = DEFAULT_QUAD,
                     root_tol: float = 1e-10, rel_tol: float = 1e-10, eps: float = 1e-6) -> DiscountedSolution:
    if not r > 0:
        raise ValueError(f"discount rate must be positive, got {r!r}")
    x0 = x_zero(model)
    x_eps = x0 * eps
    mu0 = model.percap_drift(x_eps)
    if not r < mu0:
        raise AssumptionViolation(f"r={r!r} >= mu(0+)={mu0!r}: theta_r is negative near 0 and harvesting "
                                  "immediately is trivially optimal")
    try:
        x0_r = bracketed_root(lambda x: model.percap_drift(x) - r, x_eps, x0, tol=1e-14)
    except BracketError as exc:
        raise AssumptionViolation(f"theta_r has no root below x0 for r={r!r}") from exc
    xh_r = _check_b2(model, r, x_eps, x0_r)
    x_end = None
    if model.bounded:
        # reach past x0_r, which approaches the upper end as r -> 0
        U = model.state_upper
        x_end = max(U * (1 - 1e-3), U - 0.5 * (U - x0_r))
    psi = psi_solve(model, r, rel_tol, eps, x_end)
    ss = ScaleSpeed(model, quad=quad)
    lo, hi = xh_r * (1 + 1e-9), x0_r * (1 - 1e-9)
    try:
        x_star = bracketed_root(lambda x: _g_integral(model, psi, ss, r, x), lo, hi, tol=root_tol)
    except BracketError as exc:
        raise AssumptionViolation(f"no discounted boundary in ({xh_r:.6g}, {x0_r:.6g}) for r={r!r}") from exc
    x_min = _golden_max(lambda x: -psi.log_dpsi(x), lo, hi, 1e-10)
    if abs(x_min - x_star) > 1e-3 * x_star:
        raise NumericalError(f"G_r root {x_star!r} and argmin of psi' {x_min!r} disagree for r={r!r}")
    return DiscountedSolution(float(r), x_star, psi.alpha1, psi.alpha2, xh_r, x0_r, x_min, psi, model)


def value(sol: DiscountedSolution, x: float) -> float:
    sol.model.check_state(x)
    xs = sol.x_r_star
    if x >= xs:
        return x + theta(sol.model, sol.r, xs) / sol.r
    return math.exp(sol.psi.log_psi(x) - sol.psi.log_dpsi(xs))


@dataclass(frozen=True)
class AbelianRow:
    r: float
    x_r_star: float = math.nan
    abelian_gap: float = math.nan
    probe_spread: float = math.nan
    error: HarvestError | None = None


def abelian_sweep(model: DiffusionModel, rs: Sequence[float], probes: Sequence[float],
                  ergodic: ErgodicSolution | None = None, quad: Quadrature = DEFAULT_QUAD) -> list[AbelianRow]:
    """Rows (r, x_r*, max_x |r V_r(x)/l* - 1|) for decreasing r; failures are kept per row."""
    rs = [float(r) for r in rs]
    if any(b >= a for a, b in zip(rs, rs[1:])):
        raise ValueError("rs must be strictly decreasing")
    probes = [float(x) for x in probes]
    for x in probes:
        model.check_state(x)
    erg = ergodic if ergodic is not None else solve_ergodic(model, quad)

    def one(r):
        try:
            sol = solve_discounted(model, r, quad)
            scaled = [r * value(sol, x) / erg.ell_star for x in probes]
            gap = max(abs(v - 1.0) for v in scaled)
            return AbelianRow(r, sol.x_r_star, gap, max(scaled) - min(scaled))
        except HarvestError as exc:
            return AbelianRow(r, error=exc)

    return parallel_map(one, rs)


def stationary_density(model: DiffusionModel, b: float, x: float, ss: ScaleSpeed | None = None) -> float:
    """Invariant density m'(x)/m((0,b)) of the diffusion reflected at b."""
    model.check_state(b)
    if not 0.0 < x < b:
        raise DomainError(f"x={x!r} is outside (0, b) with b={b!r}")
    ss = ss if ss is not None else ScaleSpeed(model)
    return math.exp(ss.log_speed_density(x) - ss.log_speed_mass(b))


def stationary_mass(model: DiffusionModel, b: float, lo: float, hi: float, ss: ScaleSpeed | None = None) -> float:
    """pi((lo, hi)) for the diffusion reflected at b."""
    if not 0.0 <= lo < hi <= b:
        raise DomainError(f"interval ({lo!r}, {hi!r}) is not inside (0, b] with b={b!r}")
    ss = ss if ss is not None else ScaleSpeed(model)
    total = ss.log_speed_mass(b)
    upper = ss.log_speed_mass(hi) if hi < b else total
    if lo == 0.0:
        return math.exp(upper - total)
    lower = ss.log_speed_mass(lo)
    if upper - lower < 1e-3:
        # direct quadrature avoids cancelling two nearly equal masses
        lm = _log_integral(lambda u: ss.log_speed_density(math.exp(u)) + u, math.log(lo), math.log(hi), ss.quad)
        return math.exp(lm - total)
    return math.exp(upper - total) * -math.expm1(lower - upper)
