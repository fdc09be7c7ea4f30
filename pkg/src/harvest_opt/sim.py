"""Monte Carlo simulation of threshold (local-time push) harvesting.

The harvested diffusion is stepped by Euler-Maruyama and reflected at b by
projection: any overshoot above b is harvested immediately, so the
cumulative harvest Z grows exactly by the projected amounts. Normal variates
come from numpy's ziggurat sampler on a Philox counter-based stream, so a
path is a deterministic function of its seed on every platform.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import InvalidParameter, NumericalError
from .model import CUSTOM_FAMILIES, DiffusionModel
from .parallel import parallel_map

CHUNK = 1 << 20
MAX_RECORDS = 1_000_000
FLOOR_REL = 1e-12

_CODES = {"verhulst_pearl": 0, "logistic": 1, "linear": 2, "theta_logistic": 3, "constant": 4}


@dataclass(frozen=True)
class SimConfig:
    x0: float
    b: float
    dt: float
    horizon: float
    seed: int = 0
    n_paths: int = 1

    def __post_init__(self):
        for name in ("x0", "b", "dt", "horizon"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidParameter(f"{name} must be a positive finite number, got {v!r}")
        if self.dt > self.horizon:
            raise InvalidParameter(f"dt={self.dt!r} exceeds horizon={self.horizon!r}")
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool) or self.seed < 0:
            raise InvalidParameter(f"seed must be a nonnegative integer, got {self.seed!r}")
        if not isinstance(self.n_paths, (int, np.integer)) or self.n_paths < 1:
            raise InvalidParameter(f"n_paths must be a positive integer, got {self.n_paths!r}")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))


@dataclass(frozen=True)
class HarvestPath:
    times: np.ndarray
    states: np.ndarray
    harvest: np.ndarray
    running_avg: np.ndarray
    local_time_events: int
    clamp_events: int
    drift_integral: float
    horizon: float
    b: float


def _model_code(model: DiffusionModel) -> tuple[int, np.ndarray]:
    key = model.family if model.kind == "custom" else model.kind
    if key not in _CODES:
        raise InvalidParameter(f"no simulation kernel for model {key!r}")
    names = CUSTOM_FAMILIES[key][0] if model.kind == "custom" else ("mu", "gamma", "sigma")
    return _CODES[key], np.array([model.params[k] for k in names], dtype=np.float64)


@njit(cache=True, nogil=True)
def _coeffs(code, p, x):
    # (total drift mu(x) x, diffusion sigma(x)) for each supported model
    if code == 0:
        return p[0] * (1.0 - p[1] * x) * x, p[2] * x
    if code == 1:
        return p[0] * (1.0 - p[1] * x) * x, p[2] * x * (1.0 - p[1] * x)
    if code == 2:
        return (p[0] - p[1] * x) * x, p[2] * x
    if code == 3:
        return p[0] * (1.0 - (p[1] * x) ** p[2]) * x, p[3] * x
    return p[0] * x, p[1] * x


@njit(cache=True, nogil=True)
def _advance(code, p, noise, b, floor, dt, xi, step0, rec_every, state, counts, rec_x, rec_z):
    """Advance len(xi) steps. state = [x, z, z_comp, drift_int, drift_comp].

    Returns the global index of the first step with a non-finite state, or -1.
    """
    sq = math.sqrt(dt)
    x, z, zc, it, ic = state[0], state[1], state[2], state[3], state[4]
    for k in range(xi.shape[0]):
        a, s = _coeffs(code, p, x)
        # Kahan summation of the drift integral
        y = a * dt - ic
        t = it + y
        ic = (t - it) - y
        it = t
        xn = x + a * dt + noise * s * sq * xi[k]
        if not math.isfinite(xn):
            state[0], state[1], state[2], state[3], state[4] = x, z, zc, it, ic
            return step0 + k + 1
        if xn > b:
            y = (xn - b) - zc
            t = z + y
            zc = (t - z) - y
            z = t
            xn = b
            counts[0] += 1
        elif xn <= 0.0:
            xn = floor
            counts[1] += 1
        x = xn
        g = step0 + k + 1
        if g % rec_every == 0:
            j = g // rec_every
            rec_x[j] = x
            rec_z[j] = z
    state[0], state[1], state[2], state[3], state[4] = x, z, zc, it, ic
    return -1


def _max_drift(model: DiffusionModel, b: float) -> float:
    grid = np.geomspace(b * 1e-6, b, 256)
    return max(abs(model.percap_drift(float(x)) * float(x)) for x in grid)


def simulate_reflected(model: DiffusionModel, cfg: SimConfig, record: bool = True,
                       noise: float = 1.0) -> HarvestPath:
    """One path reflected at cfg.b, seeded by cfg.seed.

    With record=False only the start and end are kept. noise scales sigma(x);
    noise=0 gives the deterministic reflected flow.
    """
    model.check_state(cfg.b)
    if cfg.dt * _max_drift(model, cfg.b) > 0.01 * cfg.b:
        warnings.warn(f"dt={cfg.dt!r} is coarse: one drift step can move more than 1% of b", RuntimeWarning,
                      stacklevel=2)
    code, p = _model_code(model)
    n = cfg.n_steps
    dt = cfg.horizon / n
    rec_every = max(1, math.ceil(n / MAX_RECORDS)) if record else n
    n_rec = n // rec_every + 1
    rec_x = np.empty(n_rec)
    rec_z = np.empty(n_rec)
    jump = max(cfg.x0 - cfg.b, 0.0)
    x_start = min(cfg.x0, cfg.b)
    rec_x[0], rec_z[0] = x_start, jump
    state = np.array([x_start, jump, 0.0, 0.0, 0.0])
    counts = np.zeros(2, dtype=np.int64)
    rng = np.random.Generator(np.random.Philox(int(cfg.seed)))
    floor = cfg.b * FLOOR_REL
    done = 0
    while done < n:
        m = min(CHUNK, n - done)
        xi = rng.standard_normal(m)
        bad = _advance(code, p, float(noise), cfg.b, floor, dt, xi, done, rec_every, state, counts, rec_x, rec_z)
        if bad >= 0:
            raise NumericalError(f"non-finite state at step {bad} (t={bad * dt:.6g})")
        done += m
    times = np.arange(n_rec) * (rec_every * dt)
    if n % rec_every:
        # the final step is always kept
        times = np.append(times, n * dt)
        rec_x = np.append(rec_x, state[0])
        rec_z = np.append(rec_z, state[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        avg = np.where(times > 0, rec_z / np.where(times > 0, times, 1.0), np.nan)
    if counts[1]:
        warnings.warn(f"{int(counts[1])} steps crossed 0 and were clamped to {floor:.3g}", RuntimeWarning,
                      stacklevel=2)
    return HarvestPath(times, rec_x, rec_z, avg, int(counts[0]), int(counts[1]), float(state[3]),
                       n * dt, cfg.b)


def average_yield(path: HarvestPath) -> float:
    """Z_T / T."""
    return float(path.harvest[-1]) / path.horizon


def drift_average(path: HarvestPath) -> float:
    """(1/T) times the integral of mu(X_t) X_t dt along the path."""
    return path.drift_integral / path.horizon


def mc_expected_yield(model: DiffusionModel, cfg: SimConfig) -> tuple[float, float]:
    """Mean and standard error of Z_T/T over paths seeded cfg.seed, cfg.seed+1, ..."""
    if cfg.n_paths < 2:
        raise InvalidParameter("mc_expected_yield needs n_paths >= 2")
    seeds = [cfg.seed + i for i in range(cfg.n_paths)]

    def one(seed):
        path = simulate_reflected(model, SimConfig(cfg.x0, cfg.b, cfg.dt, cfg.horizon, seed, 1), record=False)
        return average_yield(path)

    ys = parallel_map(one, seeds)
    n = len(ys)
    mean = math.fsum(ys) / n
    var = math.fsum((y - mean) ** 2 for y in ys) / (n - 1)
    return mean, math.sqrt(var / n)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    density: np.ndarray
    mass: np.ndarray


def occupation_histogram(path: HarvestPath, n_bins: int) -> Histogram:
    """Time-weighted occupation density of the path on (0, b], in equal-width bins."""
    if n_bins < 10:
        raise InvalidParameter(f"n_bins must be at least 10, got {n_bins!r}")
    if path.times.size < 2:
        raise InvalidParameter("path has no recorded steps")
    edges = np.linspace(0.0, path.b, n_bins + 1)
    weights = np.diff(path.times)
    # each sample stands for the interval that ends at it
    mass, _ = np.histogram(path.states[1:], bins=edges, weights=weights)
    mass = mass / math.fsum(mass)
    return Histogram(edges, mass / np.diff(edges), mass)
