"""Command-line front end: ``harvest-opt <command> --config FILE [--out DIR] [--seed N] [--override k=v ...]``.

Exit status: 0 success, 2 configuration error, 3 assumption violation,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import discounted, ergodic, report, sim
from .calculus import Quadrature, ScaleSpeed
from .errors import AssumptionViolation, HarvestError, InvalidParameter
from .model import (BUILTIN_KINDS, MODEL_KEYS, DiffusionModel, audit_assumptions, model_from_mapping,
                    parse_number, read_key_values, x_zero)
from .parallel import parallel_map

COMMANDS = ("solve-ergodic", "solve-discounted", "sweep-volatility", "sweep-discount",
            "simulate", "reproduce-figures", "audit")

EXIT_OK, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_NUMERIC = 0, 2, 3, 4

FIGURE_RS = (1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2)
FIGURE_SIGMAS = (0.05, 0.1)


class ConfigError(InvalidParameter):
    """The run configuration is malformed or incomplete."""


def _float(key: str, text: str) -> float:
    v = parse_number(key, text)
    if not (v > 0 and math.isfinite(v)):
        raise ConfigError(f"{key} must be a positive finite number, got {text!r}")
    return v


def _floats(key: str, text: str) -> tuple[float, ...]:
    parts = [t for t in text.split(",") if t.strip()]
    if not parts:
        raise ConfigError(f"{key} must be a comma-separated list of numbers")
    return tuple(_float(key, t) for t in parts)


def _int(lowest: int) -> Callable[[str, str], int]:
    def parse(key: str, text: str) -> int:
        try:
            v = int(text.strip())
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {text!r}") from None
        if v < lowest:
            raise ConfigError(f"{key} must be at least {lowest}, got {v}")
        return v
    return parse


def _text(key: str, text: str) -> str:
    if not text.strip():
        raise ConfigError(f"{key} must not be empty")
    return text.strip()


OPTION_PARSERS: dict[str, Callable[[str, str], object]] = {
    "r": _float, "rs": _floats, "sigmas": _floats, "probes": _floats,
    "b": _float, "x0": _float, "dt": _float, "horizon": _float,
    "seed": _int(0), "n_paths": _int(1), "n_bins": _int(10), "grid_points": _int(64),
    "out_dir": _text, "quad.rel_tol": _float, "quad.abs_tol": _float, "root.tol": _float,
}

REQUIRED = {
    "solve-discounted": ("r",),
    "sweep-volatility": ("sigmas",),
    "sweep-discount": ("rs",),
    "simulate": ("dt", "horizon"),
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    model_entries: Mapping[str, str]
    options: Mapping[str, object] = field(default_factory=dict)
    out_dir: str = "harvest_out"

    def get(self, key: str, default=None):
        return self.options.get(key, default)

    @property
    def quad(self) -> Quadrature:
        return Quadrature(abs_tol=self.get("quad.abs_tol", 1e-14), rel_tol=self.get("quad.rel_tol", 1e-10))

    @property
    def root_tol(self) -> float:
        return self.get("root.tol", 1e-10)

    def model(self, sigma: float | None = None) -> DiffusionModel:
        entries = dict(self.model_entries)
        if sigma is not None:
            entries["sigma"] = repr(sigma)
        return model_from_mapping(entries)


def build_config(command: str, entries: Mapping[str, str], out: str | None = None,
                 seed: int | None = None) -> RunConfig:
    """Validate every key and value before any computation starts."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    unknown = sorted(set(entries) - set(MODEL_KEYS) - set(OPTION_PARSERS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    options = {k: OPTION_PARSERS[k](k, v) for k, v in entries.items() if k in OPTION_PARSERS}
    if seed is not None:
        if seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {seed}")
        options["seed"] = seed
    model_entries = {k: v for k, v in entries.items() if k in MODEL_KEYS}
    missing = [k for k in REQUIRED.get(command, ()) if k not in options]
    if missing:
        raise ConfigError(f"{command} needs {', '.join(missing)}")
    if "sigmas" in options and any(b <= a for a, b in zip(options["sigmas"], options["sigmas"][1:])):
        raise ConfigError("sigmas must be strictly increasing")
    if "rs" in options and len(set(options["rs"])) != len(options["rs"]):
        raise ConfigError("rs must not repeat")
    if command in ("sweep-volatility", "reproduce-figures"):
        if "sigma" in model_entries:
            raise ConfigError(f"{command} takes its volatilities from sigmas, not sigma")
        kind = model_entries.get("kind", "verhulst_pearl").strip()
        if kind not in BUILTIN_KINDS:
            raise ConfigError(f"kind: {command} needs a built-in model kind, got {kind!r}")
        if command == "reproduce-figures":
            model_entries.setdefault("mu", "0.1")
            model_entries.setdefault("gamma", "0.001")
        cfg = RunConfig(command, model_entries, options, out or options.get("out_dir", "harvest_out"))
        for s in options.get("sigmas", FIGURE_SIGMAS):
            cfg.model(s)
    else:
        cfg = RunConfig(command, model_entries, options, out or options.get("out_dir", "harvest_out"))
        model = cfg.model()
        for key in ("b", "x0", "probes"):
            for x in np.atleast_1d(options.get(key, ())):
                if not 0 < x < model.state_upper:
                    raise ConfigError(f"{key}={x!r} is outside the state interval (0, {model.state_upper!r})")
    if command == "simulate":
        if options["dt"] > options["horizon"]:
            raise ConfigError("dt must not exceed horizon")
    cfg.quad  # noqa: B018  (validates tolerances)
    threads = os.environ.get("HARVEST_OPT_THREADS")
    if threads is not None:
        try:
            if int(threads) < 1:
                raise ValueError
        except ValueError:
            raise ConfigError(f"HARVEST_OPT_THREADS must be a positive integer, got {threads!r}") from None
    return cfg


def _apply_overrides(entries: dict[str, str], overrides: Sequence[str]) -> dict[str, str]:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--override expects key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        if not key:
            raise ConfigError(f"--override has an empty key: {item!r}")
        entries[key] = value
    return entries


# ---------------------------------------------------------------------------
# commands


def _path(cfg: RunConfig, name: str) -> str:
    return os.path.join(report.ensure_dir(cfg.out_dir), name)


def cmd_solve_ergodic(cfg: RunConfig) -> tuple[str, bool]:
    model = cfg.model()
    sol = ergodic.solve_ergodic(model, cfg.quad, cfg.root_tol)
    report.write_csv(_path(cfg, "ergodic.csv"), report.ERGODIC_HEADER,
                     [(model.params.get("sigma"), sol.b_star, sol.ell_star, sol.rho_star, sol.consistency_gap)])
    return report.report_summary(sol), True


def cmd_solve_discounted(cfg: RunConfig) -> tuple[str, bool]:
    model = cfg.model()
    sol = discounted.solve_discounted(model, cfg.get("r"), cfg.quad, cfg.root_tol)
    report.write_csv(_path(cfg, "discounted.csv"), ("r", "x_r_star", "x_hat_r", "x_zero_r", "alpha1", "alpha2"),
                     [(sol.r, sol.x_r_star, sol.x_hat_r, sol.x_zero_r, sol.alpha1, sol.alpha2)])
    top = min(2.0 * sol.x_r_star, sol.psi.x_end)
    xs = np.linspace(top / 200, top, 200)
    report.write_csv(_path(cfg, "value.csv"), ("x", "value"),
                     [(float(x), discounted.value(sol, float(x))) for x in xs])
    return report.report_summary(sol), True


def cmd_sweep_volatility(cfg: RunConfig) -> tuple[str, bool]:
    base = cfg.model(cfg.get("sigmas")[0])
    rows = ergodic.volatility_sweep(base.kind, base.params["mu"], base.params["gamma"], cfg.get("sigmas"),
                                    cfg.quad, cfg.root_tol)
    report.write_csv(_path(cfg, "volatility_sweep.csv"), report.ERGODIC_HEADER, report.ergodic_rows(rows))
    _raise_if_all_failed(rows)
    return report.report_summary(rows), True


def _default_probes(model: DiffusionModel) -> tuple[float, ...]:
    x0 = x_zero(model)
    return (0.1 * x0, 0.5 * x0, 0.9 * x0)


def cmd_sweep_discount(cfg: RunConfig) -> tuple[str, bool]:
    model = cfg.model()
    rs = sorted(cfg.get("rs"), reverse=True)
    probes = cfg.get("probes") or _default_probes(model)
    erg = ergodic.solve_ergodic(model, cfg.quad, cfg.root_tol)
    rows = discounted.abelian_sweep(model, rs, probes, erg, cfg.quad)
    sigma = model.params.get("sigma")
    report.write_csv(_path(cfg, "abelian.csv"), report.ABELIAN_HEADER,
                     [(r.r, r.x_r_star, r.abelian_gap, sigma) for r in rows])
    _raise_if_all_failed(rows)
    return report.report_summary(rows), True


def cmd_simulate(cfg: RunConfig) -> tuple[str, bool]:
    model = cfg.model()
    ss = ScaleSpeed(model, quad=cfg.quad)
    b = cfg.get("b")
    if b is None:
        b = ergodic.solve_ergodic(model, cfg.quad, cfg.root_tol).b_star
    simcfg = sim.SimConfig(cfg.get("x0", b), b, cfg.get("dt"), cfg.get("horizon"),
                           cfg.get("seed", 0), cfg.get("n_paths", 1))
    path = sim.simulate_reflected(model, simcfg)
    report.write_csv(_path(cfg, "path.csv"), report.PATH_HEADER,
                     zip(path.times.tolist(), path.states.tolist(), path.harvest.tolist(),
                         path.running_avg.tolist()))
    hist = sim.occupation_histogram(path, cfg.get("n_bins", 50))
    edges = hist.edges.tolist()
    theory = [discounted.stationary_mass(model, b, lo, hi, ss) / (hi - lo) for lo, hi in zip(edges, edges[1:])]
    report.write_csv(_path(cfg, "histogram.csv"), report.HISTOGRAM_HEADER,
                     zip(edges[:-1], edges[1:], hist.density.tolist(), theory))
    summary = {"b": b, "x0": simcfg.x0, "average_yield": sim.average_yield(path),
               "theoretical_yield": ergodic.yield_at(model, ss, b), "drift_average": sim.drift_average(path),
               "local_time_events": path.local_time_events, "clamp_events": path.clamp_events}
    if simcfg.n_paths >= 2:
        mean, se = sim.mc_expected_yield(model, simcfg)
        report.write_csv(_path(cfg, "mc.csv"), ("n_paths", "mean", "std_err"), [(simcfg.n_paths, mean, se)])
        summary.update(mc_mean=mean, mc_std_err=se)
    return report.report_summary(summary), True


def cmd_reproduce_figures(cfg: RunConfig) -> tuple[str, bool]:
    sigmas = cfg.get("sigmas") or FIGURE_SIGMAS
    rs = sorted(cfg.get("rs") or FIGURE_RS)
    curves, lines = [], []
    for sigma in sigmas:
        model = cfg.model(sigma)
        erg = ergodic.solve_ergodic(model, cfg.quad, cfg.root_tol)
        sols = parallel_map(lambda r: discounted.solve_discounted(model, r, cfg.quad, cfg.root_tol), rs)
        xs = [s.x_r_star for s in sols]
        report.write_csv(_path(cfg, f"figure_sigma_{sigma!r}.csv"), report.FIGURE_HEADER,
                         [(r, x, erg.b_star, sigma) for r, x in zip(rs, xs)])
        curves.append((f"sigma = {sigma:g}", rs, xs, erg.b_star))
        lines += [(sigma, r, x, erg.b_star) for r, x in zip(rs, xs)]
    kind = cfg.model_entries.get("kind", "verhulst_pearl")
    svg = report.svg_overlay(curves, title=f"optimal harvesting boundary against discount rate ({kind})")
    with open(_path(cfg, "figure.svg"), "w") as fh:
        fh.write(svg)
    return report.table(("sigma", "r", "x_r_star", "b_star"), lines), True


def cmd_audit(cfg: RunConfig) -> tuple[str, bool]:
    model = cfg.model()
    rep = audit_assumptions(model, cfg.get("grid_points", 256))
    if rep.standing_ok:
        sol = ergodic.solve_ergodic(model, cfg.quad, cfg.root_tol, check=False)
        rep = ergodic.audit_as_conditions(model, sol, rep)
    report.write_csv(_path(cfg, "audit.csv"), ("check", "passed", "value", "where", "detail"),
                     [(name, chk.passed, chk.value, chk.where, chk.detail) for name, chk in rep.items()])
    ok = all(chk.passed is not False for _, chk in rep.items())
    return report.report_summary(rep), ok


def _raise_if_all_failed(rows) -> None:
    errors = [r.error for r in rows if r.error is not None]
    if rows and len(errors) == len(rows):
        raise errors[0]
    for r in rows:
        if r.error is not None:
            print(f"warning: row failed: {r.error}", file=sys.stderr)


HANDLERS = {
    "solve-ergodic": cmd_solve_ergodic, "solve-discounted": cmd_solve_discounted,
    "sweep-volatility": cmd_sweep_volatility, "sweep-discount": cmd_sweep_discount,
    "simulate": cmd_simulate, "reproduce-figures": cmd_reproduce_figures, "audit": cmd_audit,
}


def run(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    text, ok = HANDLERS[cfg.command](cfg)
    stdout.write(text)
    return EXIT_OK if ok else EXIT_ASSUMPTION


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="harvest-opt", description="Optimal ergodic harvesting of stochastic populations.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="key=value configuration file")
    p.add_argument("--out", help="output directory (overrides out_dir)")
    p.add_argument("--seed", type=int, help="random seed (overrides seed)")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="replace or add one configuration entry; may be repeated")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        with open(args.config) as fh:
            entries = read_key_values(fh.read())
        entries = _apply_overrides(entries, args.override)
        cfg = build_config(args.command, entries, args.out, args.seed)
    except (OSError, InvalidParameter) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionViolation as exc:
        print(f"assumption violation: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    try:
        return run(cfg)
    except AssumptionViolation as exc:
        print(f"assumption violation: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except InvalidParameter as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HarvestError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"config error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
