"""Plain-text summaries, CSV tables and the SVG overlay plot."""

from __future__ import annotations

import csv
import math
import os
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

from .discounted import AbelianRow, DiscountedSolution
from .ergodic import ErgodicSolution, SweepRow
from .model import AssumptionReport


def fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, tuple):
        return "(" + ", ".join(fmt(x) for x in v) + ")"
    return str(v)


def table(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    cells = [list(header)] + [[fmt(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def report_summary(results) -> str:
    """Fixed-width table for any solver output, 6 significant digits."""
    if isinstance(results, ErgodicSolution):
        return table(("quantity", "value"), [
            ("b_star", results.b_star), ("ell_star", results.ell_star), ("rho_star", results.rho_star),
            ("bracket", results.bracket), ("consistency_gap", results.consistency_gap)])
    if isinstance(results, DiscountedSolution):
        return table(("quantity", "value"), [
            ("r", results.r), ("x_r_star", results.x_r_star), ("alpha1", results.alpha1),
            ("alpha2", results.alpha2), ("bracket", (results.x_hat_r, results.x_zero_r)),
            ("value(x_r_star)", results.value_at(results.x_r_star))])
    if isinstance(results, AssumptionReport):
        return table(("check", "passed", "value", "where"),
                     [(name, chk.passed, chk.value, chk.where) for name, chk in results.items()])
    if isinstance(results, dict):
        return table(("quantity", "value"), list(results.items()))
    rows = list(results)
    if rows and isinstance(rows[0], AbelianRow):
        return table(("r", "x_r_star", "abelian_gap", "error"),
                     [(r.r, r.x_r_star, r.abelian_gap, _err(r.error)) for r in rows])
    return table(("sigma", "b_star", "ell_star", "rho_star", "consistency_gap", "error"),
                 [_sweep_cells(r) + (_err(r.error),) for r in rows])


def _err(e) -> str:
    return "" if e is None else type(e).__name__


def _sweep_cells(row: SweepRow) -> tuple:
    s = row.solution
    if s is None:
        return (row.sigma, math.nan, math.nan, math.nan, math.nan)
    return (row.sigma, s.b_star, s.ell_star, s.rho_star, s.consistency_gap)


def _cell(v) -> str:
    # shortest round-trip representation for floats
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def ergodic_rows(rows: Iterable[SweepRow]) -> list[tuple]:
    return [_sweep_cells(r) for r in rows]


ERGODIC_HEADER = ("sigma", "b_star", "ell_star", "rho_star", "consistency_gap")
ABELIAN_HEADER = ("r", "x_r_star", "abelian_gap", "sigma")
FIGURE_HEADER = ("r", "x_r_star", "b_star", "sigma")
PATH_HEADER = ("t", "x", "z", "running_avg")
HISTOGRAM_HEADER = ("bin_lo", "bin_hi", "empirical", "theoretical")


def svg_overlay(curves: Sequence[tuple[str, Sequence[float], Sequence[float], float]],
                width: int = 640, height: int = 420, title: str = "") -> str:
    """Overlay of x_r* against log r: one polyline and one horizontal asymptote per curve.

    curves: (label, rs, xs, asymptote). Axis ranges come from the data with 5% padding.
    """
    pad_l, pad_r, pad_t, pad_b = 70, 20, 30, 50
    lr = [math.log10(r) for _, rs, _, _ in curves for r in rs]
    ys = [y for _, _, xs, _ in curves for y in xs if math.isfinite(y)] + [a for *_, a in curves]
    if not lr or not ys:
        raise ValueError("nothing to plot")
    x_lo, x_hi = _padded(min(lr), max(lr))
    y_lo, y_hi = _padded(min(ys), max(ys))
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def px(lx):
        return pad_l + (lx - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        return pad_t + (y_hi - y) / (y_hi - y_lo) * ph

    palette = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<g class="axes" stroke="black" stroke-width="1">'
           f'<path d="M{pad_l},{pad_t} V{pad_t + ph} H{pad_l + pw}" fill="none"/></g>']
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    for k in range(math.ceil(x_lo), math.floor(x_hi) + 1):
        out.append(f'<text x="{px(k):.3f}" y="{pad_t + ph + 18}" text-anchor="middle" font-size="11">1e{k}</text>')
    for i in range(5):
        y = y_lo + (y_hi - y_lo) * i / 4
        out.append(f'<text x="{pad_l - 6}" y="{py(y) + 4:.3f}" text-anchor="end" font-size="11">{y:.4g}</text>')
    out.append(f'<text x="{pad_l + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-size="12">'
               'discount rate r (log scale)</text>')
    out.append(f'<text x="16" y="{pad_t + ph / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {pad_t + ph / 2:.1f})">optimal boundary x_r*</text>')
    for i, (label, rs, xs, asym) in enumerate(curves):
        color = palette[i % len(palette)]
        pts = " ".join(f"{px(math.log10(r)):.3f},{py(x):.3f}" for r, x in zip(rs, xs) if math.isfinite(x))
        out.append(f'<polyline class="curve" fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<line class="asymptote" x1="{pad_l}" y1="{py(asym):.3f}" x2="{pad_l + pw}" '
                   f'y2="{py(asym):.3f}" stroke="{color}" stroke-dasharray="5,4"/>')
        out.append(f'<text x="{pad_l + pw - 4}" y="{pad_t + 14 + 14 * i}" text-anchor="end" font-size="11" '
                   f'fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _padded(lo: float, hi: float) -> tuple[float, float]:
    span = hi - lo
    if span == 0:
        span = abs(lo) or 1.0
    return lo - 0.05 * span, hi + 0.05 * span


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return str(path)
