"""Plot data and standalone SVG output.

Two figure types are produced: contour surfaces comparing the three
estimators over (instrument strength, violation) and sensitivity line plots.
Each is available as a JSON-ready dict and as SVG text. The SVG is written by
hand so the bytes depend only on the numbers.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from html import escape

import numpy as np

from .errors import EmptyGridError, InfeasibleError, WeakDenominatorError
from .scenarios import Kind, ScenarioSpec, closed_form
from .sensitivity import SensitivityReport

__all__ = [
    "ContourGrid",
    "contour_grid",
    "contour_plot_data",
    "contour_svg",
    "sensitivity_plot_data",
    "sensitivity_svg",
]

ESTIMATOR_LABELS = ("OLS without Z", "OLS with Z", "2SLS with Z")
_LAMBDA_NAMES = ("lambda2", "lambda3", "lambda4")
_WINNER_COLOURS = ("#4c72b0", "#dd8452", "#55a868")
_MASK_COLOUR = "#d9d9d9"
_LINE_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2")


@dataclass(frozen=True)
class ContourGrid:
    """Closed-form inconsistencies over a (strength, violation) grid.

    ``lambdas[name][i, j]`` belongs to ``strength[i]`` and ``violation[j]``;
    it is NaN where the cell is masked (infeasible weights or an irrelevant
    instrument) or where the estimator has no closed form. ``winner`` holds
    the index into :data:`ESTIMATOR_LABELS` of the smallest inconsistency, or
    -1 on masked cells. Ties go to the lower index.
    """

    spec: ScenarioSpec
    strength_key: str
    violation_key: str
    strength: np.ndarray
    violation: np.ndarray
    lambdas: Mapping[str, np.ndarray]
    winner: np.ndarray

    @property
    def feasible(self) -> np.ndarray:
        return self.winner >= 0


def _axis(values: Sequence[float] | None, lo: float, hi: float, step: float) -> np.ndarray:
    if values is not None:
        return np.asarray(values, dtype=np.float64)
    count = int(round((hi - lo) / step)) + 1
    return np.round(lo + step * np.arange(count), 10)


def contour_grid(
    spec: ScenarioSpec,
    strength: Sequence[float] | None = None,
    violation: Sequence[float] | None = None,
    step: float = 0.05,
    strength_key: str | None = None,
    violation_key: str | None = None,
) -> ContourGrid:
    """Evaluate the closed forms at every grid cell, holding the other weights of ``spec``.

    Default axes run from 0 to 0.95 in steps of ``step``.

    Raises
    ------
    EmptyGridError
        No cell of the grid is feasible.
    """
    s_key = strength_key or spec.kind.strength_key
    v_key = violation_key or spec.kind.violation_key
    if v_key is None:
        raise ValueError(f"{spec.kind.value} has no violation weight; pass violation_key")
    s_axis = _axis(strength, 0.0, 0.95, step)
    v_axis = _axis(violation, 0.0, 0.95, step)
    shape = (s_axis.size, v_axis.size)
    lam = {name: np.full(shape, np.nan) for name in _LAMBDA_NAMES}
    winner = np.full(shape, -1, dtype=np.int64)
    for i, s in enumerate(s_axis):
        for j, v in enumerate(v_axis):
            try:
                cf = closed_form(spec.replace(**{s_key: float(s), v_key: float(v)}))
            except (InfeasibleError, WeakDenominatorError, ValueError):
                continue
            values = cf.lambdas()
            for name, value in zip(_LAMBDA_NAMES, values):
                if value is not None:
                    lam[name][i, j] = value
            best = min((val, k) for k, val in enumerate(values) if val is not None)
            winner[i, j] = best[1]
    if not (winner >= 0).any():
        raise EmptyGridError(f"no feasible cell over {s_key} x {v_key} for the fixed weights")
    return ContourGrid(spec, s_key, v_key, s_axis, v_axis, lam, winner)


def _nan_to_none(arr: np.ndarray) -> list:
    return [[None if math.isnan(v) else float(v) for v in row] for row in arr]


def contour_plot_data(grid: ContourGrid) -> dict:
    return {
        "kind": "contour3d",
        "scenario": grid.spec.to_dict(),
        "axes": {
            "x": {"label": grid.violation_key, "values": [float(v) for v in grid.violation]},
            "y": {"label": grid.strength_key, "values": [float(v) for v in grid.strength]},
        },
        "estimators": list(ESTIMATOR_LABELS),
        "series": {name: _nan_to_none(grid.lambdas[name]) for name in _LAMBDA_NAMES},
        "winner": [[int(w) if w >= 0 else None for w in row] for row in grid.winner],
        "legend": [f"{label}: smallest inconsistency" for label in ESTIMATOR_LABELS],
    }


# ---------------------------------------------------------------------------
# SVG helpers

_W, _H = 640, 440
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 200, 40, 60


def _num(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".") if v == v else "0"


def _open_svg(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:g}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
    ]


def _axes(lines: list[str], x_label: str, y_label: str, x_range, y_range, ticks: int = 5) -> None:
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM
    lines.append(f'<rect x="{_LEFT}" y="{_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for k in range(ticks + 1):
        fx = x_range[0] + (x_range[1] - x_range[0]) * k / ticks
        fy = y_range[0] + (y_range[1] - y_range[0]) * k / ticks
        px = _LEFT + pw * k / ticks
        py = _TOP + ph - ph * k / ticks
        lines.append(
            f'<text x="{_num(px)}" y="{_H - _BOTTOM + 16}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="11">{fx:.2f}</text>'
        )
        lines.append(
            f'<text x="{_LEFT - 6}" y="{_num(py + 4)}" text-anchor="end" font-family="sans-serif" '
            f'font-size="11">{fy:.2f}</text>'
        )
    lines.append(
        f'<text x="{_LEFT + pw / 2:g}" y="{_H - 18}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13">{escape(x_label)}</text>'
    )
    lines.append(
        f'<text x="18" y="{_TOP + ph / 2:g}" text-anchor="middle" font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {_TOP + ph / 2:g})">{escape(y_label)}</text>'
    )


def _legend(lines: list[str], entries: Sequence[tuple[str, str, str]]) -> None:
    """``entries`` are (colour, dash pattern or "", text)."""
    x = _W - _RIGHT + 12
    y = _TOP + 6
    for colour, dash, text in entries:
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        lines.append(f'<line x1="{x}" y1="{y}" x2="{x + 18}" y2="{y}" stroke="{colour}" stroke-width="2"{dash_attr}/>')
        for k, part in enumerate(text.split("; ")):
            lines.append(
                f'<text x="{x + 24}" y="{y + 4 + 12 * k}" font-family="sans-serif" font-size="10" '
                f'class="legend">{escape(part)}</text>'
            )
        y += 14 + 12 * len(text.split("; "))


def contour_svg(grid: ContourGrid) -> str:
    """Winner heatmap: each cell coloured by the estimator with the smallest inconsistency."""
    lines = _open_svg(f"{grid.spec.kind.value}: least inconsistent estimator")
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM
    nx, ny = grid.violation.size, grid.strength.size
    cw, ch = pw / nx, ph / ny
    for i in range(ny):
        for j in range(nx):
            w = grid.winner[i, j]
            colour = _WINNER_COLOURS[w] if w >= 0 else _MASK_COLOUR
            x = _LEFT + j * cw
            y = _TOP + ph - (i + 1) * ch
            lines.append(
                f'<rect x="{_num(x)}" y="{_num(y)}" width="{_num(cw + 0.01)}" height="{_num(ch + 0.01)}" '
                f'fill="{colour}"/>'
            )
    _axes(
        lines,
        grid.violation_key,
        grid.strength_key,
        (float(grid.violation[0]), float(grid.violation[-1])),
        (float(grid.strength[0]), float(grid.strength[-1])),
    )
    entries = [(c, "", label) for c, label in zip(_WINNER_COLOURS, ESTIMATOR_LABELS)]
    entries.append((_MASK_COLOUR, "", "infeasible"))
    _legend(lines, entries)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _y_top(report: SensitivityReport) -> float:
    finite = [v for v in report.ir_per_multiplier if math.isfinite(v)]
    return max(2.0, math.ceil(max(finite, default=1.0) * 1.25 * 2) / 2)


def sensitivity_plot_data(report: SensitivityReport) -> dict:
    return {
        "kind": "sensitivity_lines",
        "violation_kind": report.kind.value,
        "sign_case": report.sign_case,
        "axes": {
            "x": {"label": "violation factor (theta)"},
            "y": {"label": "inconsistency ratio (IR)", "range": [0.0, _y_top(report)]},
        },
        "series": [c.to_dict() for c in report.curves],
        "legend": list(report.legend),
        "true_ir": report.true_ir,
        "ir_per_multiplier": list(report.ir_per_multiplier),
        "required_violation_per_multiplier": list(report.required_violation_per_multiplier),
        "benchmarked_violation": report.benchmarked_violation,
    }


def sensitivity_svg(report: SensitivityReport) -> str:
    """IR against the violation factor, one line per multiplier plus the anchor.

    The dashed horizontal line marks IR = 1; below it 2SLS is expected to be
    less inconsistent. The vertical marker is the benchmarked violation.
    """
    title = report.kind.value + (f" ({report.sign_case.replace('_', ' ')})" if report.sign_case else "")
    lines = _open_svg(title)
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM
    x_max = max((c.violation[-1] for c in report.curves), default=1.0) or 1.0
    y_max = _y_top(report)

    def px(v: float) -> float:
        return _LEFT + pw * v / x_max

    def py(v: float) -> float:
        return _TOP + ph - ph * min(max(v, 0.0), y_max) / y_max

    _axes(lines, "violation factor (theta)", "inconsistency ratio (IR)", (0.0, x_max), (0.0, y_max))
    lines.append(
        f'<line x1="{_LEFT}" y1="{_num(py(1.0))}" x2="{_LEFT + pw}" y2="{_num(py(1.0))}" stroke="grey" '
        'stroke-dasharray="6 4"/>'
    )
    theta_b = report.decomposition.theta
    lines.append(
        f'<line x1="{_num(px(theta_b))}" y1="{_TOP}" x2="{_num(px(theta_b))}" y2="{_TOP + ph}" stroke="grey" '
        'stroke-dasharray="2 3"/>'
    )
    entries = []
    colour_iter = iter(_LINE_COLOURS * 4)
    legend_iter = iter(report.legend)
    for curve in report.curves:
        anchor = curve.multiplier is None
        colour = "black" if anchor else next(colour_iter)
        dash = "3 3" if anchor else ""
        pts = " ".join(
            f"{_num(px(v))},{_num(py(r))}" for v, r in zip(curve.violation, curve.ir) if math.isfinite(r)
        )
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        lines.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="2"{dash_attr}/>')
        text = f"anchor: implied gamma {curve.gamma:.3f}" if anchor else next(legend_iter)
        entries.append((colour, dash, text))
    if report.true_ir is not None:
        entries.append(("white", "", f"True IR = {report.true_ir:.3f}"))
    _legend(lines, entries)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
