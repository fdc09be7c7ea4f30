"""Scale and speed of a one-dimensional diffusion, plus the numerical kernels they need.

Densities are handled in log space throughout: with 2*mu/sigma^2 = 80 the
scale density already spans hundreds of orders of magnitude over the state
interval, so only c-invariant combinations such as S'(b) m((0,b)) are ever
exponentiated.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Callable

from scipy import integrate

from .errors import AssumptionViolation, BracketError, NumericalError
from .model import DiffusionModel, local_exponent, x_zero, xhat


@dataclass(frozen=True)
class Quadrature:
    abs_tol: float = 1e-14
    rel_tol: float = 1e-10
    max_subdivisions: int = 500

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be at least 1")


DEFAULT_QUAD = Quadrature()


def integrate_1d(f: Callable[[float], float], a: float, b: float,
                 quad: Quadrature = DEFAULT_QUAD) -> tuple[float, float]:
    """Adaptive Gauss-Kronrod quadrature; returns (value, error estimate)."""
    if a == b:
        return 0.0, 0.0
    res = integrate.quad(f, a, b, epsabs=quad.abs_tol, epsrel=quad.rel_tol,
                         limit=quad.max_subdivisions, full_output=1)
    value, err, info = res[0], res[1], res[2]
    if len(res) > 3:
        # roundoff-limited results are accepted when the error bound is still tight
        if not (math.isfinite(value) and err <= max(1e-8 * abs(value), quad.abs_tol)):
            raise NumericalError(
                f"quadrature on [{a:.6g}, {b:.6g}] failed after {info['last']} subdivisions: "
                f"value={value:.6g}, error={err:.3g}; {res[3].splitlines()[0]}"
            )
    if not math.isfinite(value):
        raise NumericalError(f"quadrature on [{a:.6g}, {b:.6g}] returned {value}")
    return value, err


def _logsumexp(values):
    top = max(values)
    if top == -math.inf:
        return top
    return top + math.log(sum(math.exp(v - top) for v in values))


def _log_integral(logf: Callable[[float], float], a: float, b: float,
                  quad: Quadrature, n_scan: int = 65) -> float:
    """log of the integral of exp(logf) over (a, b).

    The integrand is scaled by its peak on a scan that includes both ends,
    and the cells around an interior peak become quadrature breakpoints.
    """
    grid = [a + (b - a) * i / (n_scan + 1) for i in range(n_scan + 2)]
    vals = [logf(t) for t in grid]
    i = max(range(len(vals)), key=vals.__getitem__)
    ref = vals[i]
    if ref == -math.inf:
        return ref
    points = [grid[j] for j in (i - 1, i, i + 1) if 0 < j < len(grid) - 1]

    def f(t):
        return math.exp(logf(t) - ref)

    if a == b:
        return -math.inf
    res = integrate.quad(f, a, b, epsabs=quad.abs_tol, epsrel=quad.rel_tol,
                         limit=quad.max_subdivisions, full_output=1, points=points or None)
    value, err = res[0], res[1]
    if len(res) > 3 and not (math.isfinite(value) and err <= max(1e-8 * abs(value), quad.abs_tol)):
        raise NumericalError(
            f"quadrature on [{a:.6g}, {b:.6g}] failed after {res[2]['last']} subdivisions: "
            f"value={value:.6g}, error={err:.3g}; {res[3].splitlines()[0]}"
        )
    if not value > 0.0:
        raise NumericalError(f"integral of a positive function on [{a:.6g}, {b:.6g}] is {value!r}")
    return ref + math.log(value)


def bracketed_root(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12,
                   ftol: float = 0.0, max_iter: int = 400) -> float:
    """Root of ``f`` in [lo, hi] by bisection with secant acceleration.

    A secant step is taken whenever the previous step at least halved the
    bracket; otherwise the step is a plain bisection, so convergence is never
    slower than twice bisection. Stops when |f(x)| <= ftol or the bracket is
    narrower than tol*max(1, |x|).
    """
    a, b = float(lo), float(hi)
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if not (math.isfinite(fa) and math.isfinite(fb)) or (fa > 0) == (fb > 0):
        raise BracketError(f"no sign change on [{a!r}, {b!r}]: f(lo)={fa!r}, f(hi)={fb!r}")
    bisect = False
    for _ in range(max_iter):
        width = abs(b - a)
        x = b - fb * (b - a) / (fb - fa)
        if bisect or not (min(a, b) < x < max(a, b)):
            x = 0.5 * (a + b)
        fx = f(x)
        if fx == 0.0 or abs(fx) <= ftol:
            return x
        if (fx > 0) == (fa > 0):
            a, fa = x, fx
        else:
            b, fb = x, fx
        bisect = abs(b - a) > 0.5 * width
        if abs(b - a) <= tol * max(1.0, abs(x)):
            return a if abs(fa) < abs(fb) else b
    raise NumericalError(f"bracketed_root did not converge in {max_iter} iterations on [{lo!r}, {hi!r}]")


class ScaleSpeed:
    """Scale density, speed density and speed mass of a model, normalised by S'(c) = 1.

    The default base point is the drift maximiser. Speed masses are memoised
    per instance behind a lock, so one instance can be shared by threads.
    """

    def __init__(self, model: DiffusionModel, c: float | None = None,
                 quad: Quadrature = DEFAULT_QUAD):
        self.model = model
        self.quad = quad
        self.base_point = float(c) if c is not None else xhat(model)
        model.check_state(self.base_point)
        self._lock = threading.Lock()
        self._mass_cache: dict[float, float] = {}
        self._scale_cache: dict[float, float] = {}
        try:
            scale = x_zero(model)
        except AssumptionViolation:
            scale = self.base_point
        self.x_eps = scale * 1e-6
        self.zero_exponent = local_exponent(self.log_speed_density, self.x_eps / 10, self.x_eps)

    # -- scale density ------------------------------------------------------

    def scale_exponent(self, x: float) -> float:
        """The integral of 2 mu(y) y / sigma^2(y) from c to x."""
        m = self.model
        c = self.base_point
        if m.kind == "verhulst_pearl":
            p = m.params
            n = 2.0 * p["mu"] / p["sigma"] ** 2
            return n * (math.log(x / c) - p["gamma"] * (x - c))
        if m.kind == "logistic":
            p = m.params
            n = 2.0 * p["mu"] / p["sigma"] ** 2
            g = p["gamma"]
            return n * (math.log(x / (1.0 - g * x)) - math.log(c / (1.0 - g * c)))
        with self._lock:
            hit = self._scale_cache.get(x)
        if hit is not None:
            return hit
        mu, sig = m.percap_drift, m.diffusion

        def integrand(u):
            y = math.exp(u)
            return 2.0 * mu(y) * y * y / sig(y) ** 2

        value, _ = integrate_1d(integrand, math.log(c), math.log(x), self.quad)
        with self._lock:
            self._scale_cache[x] = value
        return value

    def log_scale_density(self, x: float) -> float:
        self.model.check_state(x)
        return -self.scale_exponent(x)

    def scale_density(self, x: float) -> float:
        return math.exp(self.log_scale_density(x))

    # -- speed density and mass ---------------------------------------------

    def log_speed_density(self, x: float) -> float:
        self.model.check_state(x)
        return math.log(2.0) - 2.0 * math.log(self.model.diffusion(x)) + self.scale_exponent(x)

    def speed_density(self, x: float) -> float:
        return math.exp(self.log_speed_density(x))

    def _log_speed_density_gap(self, w: float) -> float:
        # log m'(U - w) for a finite upper end U, without forming 1 - gamma*(U - w)
        m = self.model
        U = m.state_upper
        if m.kind != "logistic":
            return self.log_speed_density(U - w)
        p = m.params
        n = 2.0 * p["mu"] / p["sigma"] ** 2
        g = p["gamma"]
        y = U - w
        c = self.base_point
        expo = n * (math.log(y / (g * w)) - math.log(c / (1.0 - g * c)))
        return math.log(2.0) - 2.0 * math.log(p["sigma"] * y * g * w) + expo

    def log_speed_mass(self, x: float) -> float:
        """log m((0, x)), with the power-law endpoint at 0 removed by substitution."""
        self.model.check_state(x)
        with self._lock:
            hit = self._mass_cache.get(x)
        if hit is not None:
            return hit
        value = self._log_speed_mass(x)
        with self._lock:
            if len(self._mass_cache) > 200_000:
                self._mass_cache.clear()
            self._mass_cache[x] = value
        return value

    def _log_speed_mass(self, x: float) -> float:
        p = self.zero_exponent
        if not p > -1.0:
            raise AssumptionViolation(f"speed measure diverges at 0: local exponent {p:.6g} <= -1")
        lm = self.log_speed_density
        xs = 0.5 * x
        # below x_eps, m'(y) ~ m'(x_eps) (y/x_eps)^p integrates in closed form
        x_eps = min(self.x_eps, xs * 1e-3)
        pieces = [lm(x_eps) + math.log(x_eps / (p + 1.0))]

        def log_lower(u):
            y = math.exp(u)
            return lm(y) + u

        pieces.append(_log_integral(log_lower, math.log(x_eps), math.log(xs), self.quad))
        U = self.model.state_upper
        if x > 0.5 * U:
            # y = U - (U - x) e^s resolves the blow-up of m' at a finite upper end
            d = U - x

            def log_upper(s):
                w = d * math.exp(s)
                return self._log_speed_density_gap(w) + math.log(w)

            pieces.append(_log_integral(log_upper, 0.0, math.log((U - xs) / d), self.quad))
        else:
            pieces.append(_log_integral(log_lower, math.log(xs), math.log(x), self.quad))
        return _logsumexp(pieces)

    def speed_mass(self, x: float) -> float:
        return math.exp(self.log_speed_mass(x))

    def log_scale_speed(self, b: float) -> float:
        """log(S'(b) m((0,b))); independent of the base point."""
        return self.log_scale_density(b) + self.log_speed_mass(b)


def scale_density(model: DiffusionModel, c: float, x: float, quad: Quadrature = DEFAULT_QUAD) -> float:
    return ScaleSpeed(model, c, quad).scale_density(x)


def speed_density(model: DiffusionModel, ss: ScaleSpeed, x: float) -> float:
    return ss.speed_density(x)


def speed_mass(model: DiffusionModel, ss: ScaleSpeed, x: float) -> float:
    return ss.speed_mass(x)
