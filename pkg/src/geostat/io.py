"""Serialization of trajectories, portraits, potentials and reports.

CSV numbers use 17 significant digits so they re-parse to the exact same
doubles; JSON relies on Python's shortest round-trip float repr. SVG is
emitted by hand with fixed formatting so identical inputs give identical
bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Iterable, Sequence

import numpy as np

from .analysis import PhasePortrait, PotentialProfile, UncertaintySeries
from .integrator import IntegratorConfig, Trajectory
from .models import ConservedSet, ModelId, entropy_of_radial

SVG_WIDTH, SVG_HEIGHT = 800, 600
_PLOT_LEFT, _PLOT_RIGHT, _PLOT_TOP, _PLOT_BOTTOM = 80, 780, 40, 540
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def _opt(value: float | None) -> str:
    return "" if value is None else fmt(value)


def _parse_opt(text: str) -> float | None:
    return None if text == "" else float(text)


# ---------------------------------------------------------------------------
# trajectories


def trajectory_columns(model: ModelId) -> list[str]:
    return ["t", *model.coordinates, *(f"{c}dot" for c in model.coordinates), "A", "B", "C", "entropy"]


def _sample_rows(t: Trajectory):
    series = t.conserved_series()
    entropy = t.entropy_series()
    for i in range(len(t)):
        yield (
            float(t.times[i]),
            [float(c) for c in t.coords[i]],
            [float(c) for c in t.velocities[i]],
            {k: (float(series[k][i]) if k in series else None) for k in ("A", "B", "C")},
            float(entropy[i]),
        )


def trajectory_to_csv(t: Trajectory) -> str:
    buf = io.StringIO()
    buf.write(f"# model={t.model.value}\n")
    buf.write(f"# stop_reason={t.stop_reason}\n")
    buf.write("# drift=" + ",".join(f"{k}:{fmt(v)}" for k, v in sorted(t.conserved_drift.items())) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(trajectory_columns(t.model))
    for time, coords, vel, cons, ent in _sample_rows(t):
        writer.writerow(
            [fmt(time), *map(fmt, coords), *map(fmt, vel), _opt(cons["A"]), _opt(cons["B"]), _opt(cons["C"]), fmt(ent)]
        )
    return buf.getvalue()


def read_csv_table(text: str) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Split a geostat CSV into its ``# key=value`` header, column names and rows."""
    meta: dict[str, str] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
        elif line.strip():
            body.append(line)
    reader = csv.reader(body)
    header = next(reader)
    return meta, header, list(reader)


def trajectory_from_csv(text: str) -> dict[str, np.ndarray]:
    """Columns of a trajectory CSV as float arrays (absent values become NaN)."""
    _, header, rows = read_csv_table(text)
    cols = {name: np.array([(_parse_opt(r[j]) if r[j] != "" else math.nan) for r in rows]) for j, name in enumerate(header)}
    return cols


def trajectory_to_dict(t: Trajectory) -> dict:
    samples = [
        {"t": time, "coords": coords, "velocity": vel, "conserved": cons, "entropy": ent}
        for time, coords, vel, cons, ent in _sample_rows(t)
    ]
    return {
        "model": t.model.value,
        "config": t.config.as_dict(),
        "samples": samples,
        "stop_reason": t.stop_reason,
        "drift": dict(sorted(t.conserved_drift.items())),
        "conserved_initial": t.conserved_initial.as_dict(),
    }


def trajectory_to_json(t: Trajectory) -> str:
    return json.dumps(trajectory_to_dict(t), indent=1) + "\n"


def trajectory_from_json(text: str) -> Trajectory:
    data = json.loads(text)
    model = ModelId.parse(data["model"])
    samples = data["samples"]
    return Trajectory(
        model=model,
        times=np.array([s["t"] for s in samples], dtype=float),
        coords=np.array([s["coords"] for s in samples], dtype=float).reshape(len(samples), model.dim),
        velocities=np.array([s["velocity"] for s in samples], dtype=float).reshape(len(samples), model.dim),
        conserved_initial=ConservedSet(**data["conserved_initial"]),
        conserved_drift={k: float(v) for k, v in data["drift"].items()},
        stop_reason=data["stop_reason"],
        config=IntegratorConfig(**data["config"]),
    )


def trajectories_equal(a: Trajectory, b: Trajectory) -> bool:
    return (
        a.model is b.model
        and a.stop_reason == b.stop_reason
        and a.conserved_initial == b.conserved_initial
        and a.conserved_drift == b.conserved_drift
        and a.config == b.config
        and np.array_equal(a.times, b.times)
        and np.array_equal(a.coords, b.coords)
        and np.array_equal(a.velocities, b.velocities)
    )


def entropy_to_csv(t: Trajectory, uncertainty: UncertaintySeries | None = None) -> str:
    buf = io.StringIO()
    buf.write(f"# model={t.model.value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    header = ["t", "entropy"]
    if uncertainty is not None:
        header += ["delta_x", "delta_p", "product"]
    writer.writerow(header)
    entropy = entropy_of_radial(t.model, t.radial)
    for i in range(len(t)):
        row = [fmt(t.times[i]), fmt(entropy[i])]
        if uncertainty is not None:
            row += [fmt(uncertainty.delta_x[i]), fmt(uncertainty.delta_p[i]), fmt(uncertainty.product[i])]
        writer.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# portraits and potentials


def _constants_label(cs: ConservedSet, energy: bool = True) -> str:
    return " ".join(f"{k}={fmt(v)}" for k, v in cs.as_dict().items() if v is not None and (energy or k != "C"))


def _shape_constants(cs: ConservedSet) -> dict:
    # the potential depends on the momenta only, never on C
    return {k: v for k, v in cs.as_dict().items() if k != "C"}


def portrait_to_csv(p: PhasePortrait) -> str:
    blocks = [f"# model={p.model.value} plane={p.plane[0]},{p.plane[1]}\n"]
    for k, c in enumerate(p.curves):
        lines = [
            f"# curve={k} {_constants_label(c.constants)} stop_reason={c.stop_reason} dashed={str(c.dashed).lower()}",
            f"{p.plane[0]},{p.plane[1]}",
        ]
        lines += [f"{fmt(a)},{fmt(b)}" for a, b in zip(c.x, c.xdot)]
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def portrait_to_dict(p: PhasePortrait) -> dict:
    return {
        "model": p.model.value,
        "plane": list(p.plane),
        "curves": [
            {
                "constants": c.constants.as_dict(),
                "stop_reason": c.stop_reason,
                "dashed": c.dashed,
                "x": [float(v) for v in c.x],
                "xdot": [float(v) for v in c.xdot],
            }
            for c in p.curves
        ],
    }


def potentials_to_csv(profiles: Sequence[PotentialProfile]) -> str:
    blocks = []
    for k, prof in enumerate(profiles):
        head = f"# curve={k} model={prof.model.value} {_constants_label(prof.constants, energy=False)} normalization={prof.normalization.value}"
        if prof.minimum is not None:
            head += f" y_min={fmt(prof.minimum[0])} U_min={fmt(prof.minimum[1])}"
        lines = [head, "y,U"] + [f"{fmt(y)},{fmt(u)}" for y, u in zip(prof.y_grid, prof.u_values)]
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def potentials_to_dict(profiles: Sequence[PotentialProfile]) -> dict:
    return {
        "curves": [
            {
                "model": prof.model.value,
                "constants": _shape_constants(prof.constants),
                "normalization": prof.normalization.value,
                "minimum": None if prof.minimum is None else list(prof.minimum),
                "y": [float(v) for v in prof.y_grid],
                "U": [float(v) for v in prof.u_values],
            }
            for prof in profiles
        ]
    }


# ---------------------------------------------------------------------------
# SVG


def _coord(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    text = f"{v:.3g}"
    return "0" if text in ("-0", "0") else text


def _padded(lo: float, hi: float) -> tuple[float, float]:
    if not hi > lo:
        pad = max(abs(lo), 1.0) * 0.05
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _linear_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def svg_plot(
    curves: Iterable[dict],
    xlabel: str,
    ylabel: str,
    title: str = "",
    log_y: bool = False,
) -> str:
    """Line plot in a fixed 800x600 viewport.

    Each curve is a dict with ``x``, ``y`` and optional ``dashed``/``label``.
    With ``log_y`` the value axis shows log10 of strictly positive values.
    """
    curves = list(curves)
    xs = [np.asarray(c["x"], dtype=float) for c in curves]
    ys = [np.asarray(c["y"], dtype=float) for c in curves]
    if log_y:
        if any(np.any(y <= 0) for y in ys):
            raise ValueError("log axis requires strictly positive values")
        ys = [np.log10(y) for y in ys]
    if curves:
        x_lo, x_hi = _padded(min(float(x.min()) for x in xs), max(float(x.max()) for x in xs))
        y_lo, y_hi = _padded(min(float(y.min()) for y in ys), max(float(y.max()) for y in ys))
    else:
        x_lo, x_hi, y_lo, y_hi = 0.0, 1.0, 0.0, 1.0

    def px(v):
        return _PLOT_LEFT + (v - x_lo) / (x_hi - x_lo) * (_PLOT_RIGHT - _PLOT_LEFT)

    def py(v):
        return _PLOT_BOTTOM - (v - y_lo) / (y_hi - y_lo) * (_PLOT_BOTTOM - _PLOT_TOP)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
        f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
        f'<rect x="{_PLOT_LEFT}" y="{_PLOT_TOP}" width="{_PLOT_RIGHT - _PLOT_LEFT}" '
        f'height="{_PLOT_BOTTOM - _PLOT_TOP}" fill="none" stroke="black" stroke-width="1"/>',
    ]
    if title:
        out.append(f'<text x="{SVG_WIDTH // 2}" y="24" text-anchor="middle" font-size="16">{_escape(title)}</text>')
    for v in _linear_ticks(x_lo, x_hi):
        x = _coord(px(v))
        out.append(f'<line x1="{x}" y1="{_PLOT_BOTTOM}" x2="{x}" y2="{_PLOT_BOTTOM + 6}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{_PLOT_BOTTOM + 22}" text-anchor="middle" font-size="12">{_tick_label(v)}</text>')
    for v in _linear_ticks(y_lo, y_hi):
        y = _coord(py(v))
        label = f"1e{v:.2f}" if log_y else _tick_label(v)
        out.append(f'<line x1="{_PLOT_LEFT - 6}" y1="{y}" x2="{_PLOT_LEFT}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{_PLOT_LEFT - 10}" y="{y}" text-anchor="end" dominant-baseline="middle" font-size="12">{label}</text>')
    out.append(f'<text x="{(_PLOT_LEFT + _PLOT_RIGHT) // 2}" y="{SVG_HEIGHT - 20}" text-anchor="middle" font-size="14">{_escape(xlabel)}</text>')
    ytitle = f"log10 {ylabel}" if log_y else ylabel
    out.append(
        f'<text x="20" y="{(_PLOT_TOP + _PLOT_BOTTOM) // 2}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 20 {(_PLOT_TOP + _PLOT_BOTTOM) // 2})">{_escape(ytitle)}</text>'
    )
    for k, (c, x, y) in enumerate(zip(curves, xs, ys)):
        pts = " ".join(f"{_coord(px(a))},{_coord(py(b))}" for a, b in zip(x, y))
        dash = ' stroke-dasharray="6,4"' if c.get("dashed") else ""
        label = f' data-label="{_escape(c["label"])}"' if c.get("label") else ""
        out.append(
            f'<polyline fill="none" stroke="{_PALETTE[k % len(_PALETTE)]}" stroke-width="1.5"{dash}{label} points="{pts}"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def portrait_to_svg(p: PhasePortrait) -> str:
    curves = [
        {"x": c.x, "y": c.xdot, "dashed": c.dashed, "label": _constants_label(c.constants)} for c in p.curves
    ]
    return svg_plot(curves, p.plane[0], p.plane[1], title=f"{p.model.value} phase portrait")


def potentials_to_svg(profiles: Sequence[PotentialProfile], log_axis: bool = False) -> str:
    curves = [{"x": prof.y_grid, "y": prof.u_values, "label": _constants_label(prof.constants)} for prof in profiles]
    model = profiles[0].model.value if profiles else ""
    return svg_plot(curves, "y", "U", title=f"{model} effective potential", log_y=log_axis)


def trajectory_to_svg(t: Trajectory) -> str:
    name = t.model.radial_name
    curve = {"x": t.radial, "y": t.radial_velocity, "label": _constants_label(t.conserved_initial)}
    return svg_plot([curve], name, f"{name}dot", title=f"{t.model.value} geodesic")
