"""Special functions behind the closed forms of the two built-in models.

Only what the closed-form oracles need: the lower incomplete gamma function,
the (generalised) incomplete beta integral, Kummer's M and Gauss's 2F1.
Log-scale variants are provided where the built-in closed forms overflow.
"""

from __future__ import annotations

import math

from scipy import integrate

from .errors import DomainError, NumericalError

MAX_TERMS = 100_000
EPS = 1e-16


def log_lower_incomplete_gamma(a: float, z: float) -> float:
    """log of gamma(a, z) = int_0^z t^(a-1) e^(-t) dt."""
    if not a > 0:
        raise DomainError(f"lower incomplete gamma needs a > 0, got {a!r}")
    if z < 0:
        raise DomainError(f"lower incomplete gamma needs z >= 0, got {z!r}")
    if z == 0:
        return -math.inf
    if z < a + 1.0:
        term = total = 1.0 / a
        for n in range(1, MAX_TERMS):
            term *= z / (a + n)
            total += term
            if abs(term) < abs(total) * EPS:
                return a * math.log(z) - z + math.log(total)
        raise NumericalError(f"incomplete gamma series did not converge (a={a!r}, z={z!r})")
    # modified Lentz evaluation of the continued fraction for the upper function
    tiny = 1e-300
    b = z + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, MAX_TERMS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            log_upper = a * math.log(z) - z + math.log(h)
            lg = math.lgamma(a)
            return lg + math.log1p(-math.exp(log_upper - lg))
    raise NumericalError(f"incomplete gamma continued fraction did not converge (a={a!r}, z={z!r})")


def lower_incomplete_gamma(a: float, z: float) -> float:
    """gamma(a, z): series for z < a+1, continued fraction for the complement otherwise."""
    return math.exp(log_lower_incomplete_gamma(a, z))


def log_incomplete_beta(z: float, a: float, b: float) -> float:
    """log of int_0^z t^(a-1) (1-t)^(b-1) dt for 0 <= z < 1, a > 0 and any real b."""
    if not a > 0:
        raise DomainError(f"incomplete beta needs a > 0, got {a!r}")
    if not 0.0 <= z < 1.0:
        raise DomainError(f"incomplete beta needs 0 <= z < 1, got {z!r}")
    if z == 0.0:
        return -math.inf
    h = z if z <= 0.5 else 0.5 * z
    # [0, h]: t = h u^(1/a) absorbs t^(a-1); the rest is scaled by its value at u = 1
    top = math.log1p(-h)

    def lower(u):
        return math.exp((b - 1.0) * (math.log1p(-h * u ** (1.0 / a)) - top))

    # [h, z]: t = 1 - (1-z) e^s, scaled by the integrand at t = z
    smax = math.log((1.0 - h) / (1.0 - z))
    lz = math.log(z)

    def upper(s):
        t = 1.0 - (1.0 - z) * math.exp(s)
        return math.exp((a - 1.0) * (math.log(t) - lz) + b * s)

    v1 = _quad(lower, 0.0, 1.0, (z, a, b))
    log1 = a * math.log(h) - math.log(a) + (b - 1.0) * top + math.log(v1)
    if h == z:
        return log1
    v2 = _quad(upper, 0.0, smax, (z, a, b))
    log2 = (a - 1.0) * lz + b * math.log1p(-z) + math.log(v2)
    hi = max(log1, log2)
    return hi + math.log(math.exp(log1 - hi) + math.exp(log2 - hi))


def _quad(f, lo, hi, args):
    val, err, *rest = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=500, full_output=1)
    if (rest[1:] and err > 1e-9 * abs(val)) or not val > 0:
        raise NumericalError(f"incomplete beta quadrature failed (z, a, b = {args!r})")
    return val


def incomplete_beta(z: float, a: float, b: float) -> float:
    return math.exp(log_incomplete_beta(z, a, b))


def _nonpositive_int(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def kummer_m(a: float, b: float, z: float) -> float:
    """Confluent hypergeometric M(a, b, z) by its ascending series.

    Negative arguments go through Kummer's transformation so that the
    summed terms do not alternate.
    """
    if _nonpositive_int(b):
        raise DomainError(f"kummer_m undefined for b={b!r}")
    if z < 0:
        return math.exp(z) * kummer_m(b - a, b, -z)
    term = total = 1.0
    for n in range(MAX_TERMS):
        term *= (a + n) * z / ((b + n) * (n + 1))
        total += term
        if term == 0.0 or abs(term) <= abs(total) * EPS:
            return total
    raise NumericalError(f"kummer_m series did not converge (a={a!r}, b={b!r}, z={z!r})")


def _series_2f1(a, b, c, z):
    term = total = 1.0
    for n in range(MAX_TERMS):
        term *= (a + n) * (b + n) * z / ((c + n) * (n + 1))
        total += term
        if term == 0.0 or abs(term) <= abs(total) * EPS:
            return total
    raise NumericalError(f"2F1 series did not converge (a={a!r}, b={b!r}, c={c!r}, z={z!r})")


def gauss_2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric F(a, b; c; z) for z < 1.

    Series for |z| < 0.9; for z <= -0.9 the Pfaff transformation
    F = (1-z)^(-a) F(a, c-b; c; z/(z-1)) maps the argument into (0.47, 1).
    """
    if _nonpositive_int(c):
        raise DomainError(f"gauss_2f1 undefined for c={c!r}")
    if not z < 1.0:
        raise DomainError(f"gauss_2f1 needs z < 1, got {z!r}")
    if z <= -0.9:
        return (1.0 - z) ** (-a) * _series_2f1(a, c - b, c, z / (z - 1.0))
    return _series_2f1(a, b, c, z)
