"""Diffusion population models and numerical audits of their standing assumptions.

A model is the pair (per-capita drift mu(x), dispersion sigma(x)) of

    dX = X mu(X) dt + sigma(X) dB

on the state interval (0, state_upper). Two built-in kinds are provided
(Verhulst-Pearl and the logistic diffusion with vanishing noise at capacity)
plus a small registry of named closed-form custom families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Callable, Mapping

import numpy as np

from .errors import AssumptionViolation, DomainError, InvalidParameter

BUILTIN_KINDS = ("verhulst_pearl", "logistic")
KINDS = BUILTIN_KINDS + ("custom",)


@dataclass(frozen=True)
class DiffusionModel:
    kind: str
    params: Mapping[str, float] = field(hash=False)
    percap_drift: Callable[[float], float] = field(compare=False, repr=False)
    diffusion: Callable[[float], float] = field(compare=False, repr=False)
    state_upper: float = math.inf
    family: str | None = None

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.state_upper)

    @property
    def gamma(self) -> float | None:
        return self.params.get("gamma")

    def check_state(self, x: float) -> None:
        if not (0.0 < x < self.state_upper):
            raise DomainError(f"x={x!r} outside the state interval (0, {self.state_upper!r})")

    def with_params(self, **updates: float) -> "DiffusionModel":
        """Rebuild the model with some parameters replaced."""
        params = {**self.params, **updates}
        if self.kind == "custom":
            return make_custom(self.family, **params)
        return make_builtin(self.kind, **params)


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (value > 0.0 and math.isfinite(value)):
        raise InvalidParameter(f"{name} must be a positive finite number, got {value!r}")
    return value


def make_builtin(kind: str, mu: float, gamma: float, sigma: float) -> DiffusionModel:
    """Verhulst-Pearl (sigma(x) = sigma*x) or logistic (sigma(x) = sigma*x*(1-gamma*x)) model."""
    mu, gamma, sigma = _positive("mu", mu), _positive("gamma", gamma), _positive("sigma", sigma)

    def percap(x):
        return mu * (1.0 - gamma * x)

    if kind == "verhulst_pearl":
        def diffusion(x):
            return sigma * x
        upper = math.inf
    elif kind == "logistic":
        def diffusion(x):
            return sigma * x * (1.0 - gamma * x)
        upper = 1.0 / gamma
    else:
        raise InvalidParameter(f"unknown built-in kind {kind!r}; expected one of {BUILTIN_KINDS}")
    return DiffusionModel(kind, {"mu": mu, "gamma": gamma, "sigma": sigma}, percap, diffusion, upper)


# Custom families: name -> (parameter names, builder returning (mu, sigma)).
# All use sigma(x) = sigma*x so that 0 is a power-law boundary.

def _linear(mu0, mu1, sigma):
    return (lambda x: mu0 - mu1 * x), (lambda x: sigma * x)


def _theta_logistic(mu, gamma, theta, sigma):
    return (lambda x: mu * (1.0 - (gamma * x) ** theta)), (lambda x: sigma * x)


def _constant(mu, sigma):
    return (lambda x: mu + 0.0 * x), (lambda x: sigma * x)


CUSTOM_FAMILIES: dict[str, tuple[tuple[str, ...], Callable]] = {
    "linear": (("mu0", "mu1", "sigma"), _linear),
    "theta_logistic": (("mu", "gamma", "theta", "sigma"), _theta_logistic),
    "constant": (("mu", "sigma"), _constant),
}


def make_custom(family: str, **params: float) -> DiffusionModel:
    """Instantiate a registered closed-form family, e.g. ``make_custom("linear", mu0=0.3, mu1=0.01, sigma=0.05)``."""
    if family not in CUSTOM_FAMILIES:
        raise InvalidParameter(f"unknown custom family {family!r}; expected one of {sorted(CUSTOM_FAMILIES)}")
    names, builder = CUSTOM_FAMILIES[family]
    if set(params) != set(names):
        raise InvalidParameter(f"family {family!r} takes parameters {names}, got {sorted(params)}")
    values = {k: _positive(k, params[k]) for k in names}
    drift, diffusion = builder(**values)
    return DiffusionModel("custom", values, drift, diffusion, math.inf, family)


def total_drift(model: DiffusionModel, x: float) -> float:
    """Population growth rate mu(x)*x."""
    model.check_state(x)
    return model.percap_drift(x) * x


def _percap_closure(model: DiffusionModel, x: float) -> float:
    # continuous extension of mu to the closed interval, used for probing only
    return model.percap_drift(x)


def x_zero(model: DiffusionModel) -> float:
    """Root of the per-capita growth rate (carrying capacity)."""
    from .calculus import bracketed_root

    mu = model.percap_drift
    if model.kind in BUILTIN_KINDS:
        return 1.0 / model.params["gamma"]
    top = model.state_upper if model.bounded else 1e12
    grid = np.geomspace(1e-12, top, 241)
    vals = [_percap_closure(model, float(x)) for x in grid]
    for lo, hi, flo, fhi in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if flo > 0.0 and fhi == 0.0:
            return float(hi)
        if flo > 0.0 and fhi < 0.0:
            return bracketed_root(mu, float(lo), float(hi), tol=1e-12)
    raise AssumptionViolation(
        f"per-capita drift has no sign change on [1e-12, {top:g}] (mu(lo)={vals[0]:.6g}, mu(hi)={vals[-1]:.6g})"
    )


def _golden_max(f: Callable[[float], float], lo: float, hi: float, rtol: float) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > rtol * max(1.0, abs(a) + abs(b)) / 2:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def argmax_unimodal(f: Callable[[float], float], lo: float, hi: float,
                    rtol: float = 1e-10, n_scan: int = 400) -> float:
    """Maximiser of a single-peaked function on [lo, hi].

    A log-spaced scan locates the peak cell and checks unimodality; golden
    section then refines it. Raises AssumptionViolation on a second peak.
    """
    grid = np.geomspace(lo, hi, n_scan)
    vals = np.array([f(float(x)) for x in grid])
    i = int(np.argmax(vals))
    scale = np.max(np.abs(vals)) or 1.0
    slack = 1e-12 * scale
    if np.any(np.diff(vals[: i + 1]) < -slack) or np.any(np.diff(vals[i:]) > slack):
        raise AssumptionViolation("function is not single-peaked on the scan grid")
    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, n_scan - 1)])
    return _golden_max(f, a, b, rtol)


def xhat(model: DiffusionModel) -> float:
    """Maximiser of the total drift mu(x)*x."""
    if model.kind in BUILTIN_KINDS:
        return 0.5 / model.params["gamma"]
    from .calculus import bracketed_root

    x0 = x_zero(model)
    t = lambda x: model.percap_drift(x) * x  # noqa: E731
    x = argmax_unimodal(t, x0 * 1e-6, x0)
    # golden section stalls at sqrt(eps) on a flat peak; polish on a central-difference slope
    h = 1e-5 * x

    def slope(y):
        return t(y + h) - t(y - h)

    lo, hi = x * (1 - 1e-6), x * (1 + 1e-6)
    if lo > h and hi < x0 and slope(lo) > 0 > slope(hi):
        return bracketed_root(slope, lo, hi, tol=1e-14)
    return x


@dataclass(frozen=True)
class Check:
    """Outcome of one audited condition. ``passed is None`` means not yet evaluated."""

    passed: bool | None
    detail: str = ""
    value: float | None = None
    where: float | None = None

    def __bool__(self) -> bool:
        return bool(self.passed)


PENDING = Check(None, "pending: requires an ergodic solution")


@dataclass(frozen=True)
class AssumptionReport:
    a1_monotone: Check
    a1_limits: Check
    a2_unimodal: Check
    a3_finite_speed: Check
    es_condition: Check
    sigma_half_condition: Check
    g_monotone: Check = PENDING
    g_square_integrable: Check = PENDING
    grid: tuple[float, float] = (math.nan, math.nan)

    FIELDS = ("a1_monotone", "a1_limits", "a2_unimodal", "a3_finite_speed",
              "es_condition", "sigma_half_condition", "g_monotone", "g_square_integrable")

    def items(self):
        return [(name, getattr(self, name)) for name in self.FIELDS]

    @property
    def standing_ok(self) -> bool:
        """All conditions needed by the solvers (everything except the g-audit)."""
        return all(bool(c) for name, c in self.items() if not name.startswith("g_"))


def audit_grid(model: DiffusionModel, x0: float, n: int) -> np.ndarray:
    upper = min(model.state_upper * (1 - 1e-6), 100.0 * x0)
    return np.geomspace(x0 * 1e-6, upper, n)


def local_exponent(logf: Callable[[float], float], x1: float, x2: float) -> float:
    """Power-law exponent d log f / d log x from two probe points."""
    return (logf(x2) - logf(x1)) / (math.log(x2) - math.log(x1))


def audit_assumptions(model: DiffusionModel, grid_points: int = 256) -> AssumptionReport:
    if grid_points < 64:
        raise InvalidParameter("grid_points must be at least 64")
    mu, sig = model.percap_drift, model.diffusion

    try:
        x0 = x_zero(model)
        root_ok = True
    except AssumptionViolation:
        x0, root_ok = (1.0 if not model.bounded else model.state_upper), False
    grid = audit_grid(model, x0, grid_points)
    mvals = np.array([mu(float(x)) for x in grid])
    svals = np.array([sig(float(x)) for x in grid])

    # A1: monotone and sign limits
    incr = np.diff(mvals)
    worst = float(np.max(incr)) if incr.size else 0.0
    tol = 1e-12 * max(1.0, float(np.max(np.abs(mvals))))
    if worst > tol:
        j = int(np.argmax(incr))
        a1m = Check(False, "mu increases on grid", worst, float(grid[j + 1]))
    else:
        a1m = Check(True, "mu nonincreasing on grid", max(worst, 0.0))
    lo_val = mvals[0]
    if model.bounded:
        hi_x = model.state_upper
        hi_val = _percap_closure(model, hi_x)
        hi_ok = hi_val <= 0.0
    else:
        hi_x = float(grid[-1])
        hi_val = mvals[-1]
        hi_ok = hi_val < 0.0
    lim_ok = bool(lo_val > 0.0 and hi_ok and root_ok)
    a1l = Check(lim_ok, f"mu({grid[0]:.3g})={lo_val:.6g}, mu({hi_x:.6g})={hi_val:.6g}",
                float(lo_val), None if lim_ok else (float(grid[0]) if lo_val <= 0 else hi_x))

    # A2: total drift single-peaked
    tvals = mvals * grid
    i = int(np.argmax(tvals))
    slack = 1e-12 * float(np.max(np.abs(tvals)))
    up = np.diff(tvals[: i + 1])
    down = np.diff(tvals[i:])
    if np.any(up < -slack) or np.any(down > slack):
        bad = int(np.argmin(up)) + 1 if np.any(up < -slack) else i + int(np.argmax(down)) + 1
        a2 = Check(False, "mu(x)x has more than one local maximum", float(grid[i]), float(grid[bad]))
    elif i == 0 or i == len(grid) - 1:
        a2 = Check(False, "maximum of mu(x)x at the audit boundary", float(grid[i]), float(grid[i]))
    else:
        a2 = Check(True, "mu(x)x single-peaked", xhat(model) if root_ok else float(grid[i]))

    # Engelbert-Schmidt: positive sigma and locally integrable (1+|y mu|)/sigma^2
    es_vals = (1.0 + np.abs(grid * mvals)) / svals**2
    if np.any(svals <= 0.0) or not np.all(np.isfinite(es_vals)):
        k = int(np.argmax((svals <= 0.0) | ~np.isfinite(es_vals)))
        es = Check(False, "sigma vanishes or integrand not finite", float(svals[k]), float(grid[k]))
    else:
        es = Check(True, "sigma > 0 and local integrand finite", float(np.min(svals)))

    # A3 via the local exponent of the speed density at 0
    xa, xb = float(grid[0]), float(grid[1])
    s0 = (sig(xa) / xa) ** 2
    m0 = mu(xa)
    # m'(x) ~ x^(2 m0/s0 - 2) near 0
    p = 2.0 * m0 / s0 - 2.0
    if p > -1.0:
        from .calculus import ScaleSpeed

        try:
            ss = ScaleSpeed(model, c=float(grid[len(grid) // 2]))
            p = local_exponent(ss.log_speed_density, xa, xb)
            y = float(grid[len(grid) // 2])
            val = ss.log_speed_mass(y)
            a3 = Check(bool(p > -1.0 and math.isfinite(val)), f"speed density exponent {p:.6g} at 0+", p)
        except Exception as exc:  # quadrature failure is a finding, not an error
            a3 = Check(False, f"speed mass probe failed: {exc}", p, xa)
    else:
        a3 = Check(False, f"speed density exponent {p:.6g} <= -1 at 0+", p, xa)

    if model.kind in BUILTIN_KINDS:
        m, s = model.params["mu"], model.params["sigma"]
        sh = Check(m > s * s / 2.0, f"mu={m:g} vs sigma^2/2={s * s / 2:g}", m - s * s / 2.0)
    else:
        sh = Check(bool(m0 > s0 / 2.0), f"mu(0+)={m0:.6g} vs s0/2={s0 / 2:.6g}", m0 - s0 / 2.0)

    return AssumptionReport(a1m, a1l, a2, a3, es, sh, grid=(float(grid[0]), float(grid[-1])))


# ---------------------------------------------------------------------------
# model specification files


MODEL_KEYS = ("kind", "family", "mu", "gamma", "sigma", "mu0", "mu1", "theta")


def parse_number(key: str, text: str) -> float:
    try:
        value = float(Decimal(text.strip()))
    except Exception:
        raise InvalidParameter(f"{key}: cannot parse {text!r} as a number") from None
    return value


def model_from_mapping(entries: Mapping[str, str]) -> DiffusionModel:
    """Build a model from string key/value pairs (already split from a config file)."""
    unknown = set(entries) - set(MODEL_KEYS)
    if unknown:
        raise InvalidParameter(f"unknown model keys: {sorted(unknown)}")
    kind = entries.get("kind", "verhulst_pearl").strip()
    nums = {k: parse_number(k, v) for k, v in entries.items() if k not in ("kind", "family")}
    for k, v in nums.items():
        if not (v > 0 and math.isfinite(v)):
            raise InvalidParameter(f"{k} must be a positive finite number, got {entries[k].strip()!r}")
    if kind in BUILTIN_KINDS:
        missing = {"mu", "gamma", "sigma"} - set(nums)
        extra = set(nums) - {"mu", "gamma", "sigma"}
        if missing or extra or "family" in entries:
            raise InvalidParameter(f"{kind} needs exactly mu, gamma, sigma (missing {sorted(missing)}, extra {sorted(extra)})")
        return make_builtin(kind, **nums)
    if kind == "custom":
        if "family" not in entries:
            raise InvalidParameter("custom model needs a family key")
        return make_custom(entries["family"].strip(), **nums)
    raise InvalidParameter(f"kind: unknown model kind {kind!r}")


def read_key_values(text: str) -> dict[str, str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameter(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise InvalidParameter(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_model(path) -> DiffusionModel:
    with open(path) as fh:
        return model_from_mapping(read_key_values(fh.read()))


def format_model(model: DiffusionModel) -> str:
    lines = [f"kind={model.kind}"]
    if model.family:
        lines.append(f"family={model.family}")
    lines += [f"{k}={v!r}" for k, v in model.params.items()]
    return "\n".join(lines) + "\n"
