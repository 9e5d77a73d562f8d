"""Fixed-step RK4 integration of geodesic flows with a conserved-quantity audit.

Integration happens in the natural chart (p or sigma). Two boundary
safeguards keep the classical flows, which reach ``p in {0, 1}`` in finite
affine time, accurate up to the stop margin:

* on the p charts a nominal step is split into substeps, each covering at
  most ``BOUNDARY_SUBSTEP_FRACTION`` of the local time scale
  ``dist / |v_radial|``; away from the edges this is a single step;
* the substep that would cross the margin is shortened by bisection so the
  last sample lands on it.

Samples are recorded once per nominal step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import GeodesicState
from .errors import DimensionMismatch, DriftExceeded, InvalidInitialState, OutOfDomain
from .models import (
    ConservedSet,
    ModelId,
    acceleration,
    boundary_distance,
    check_domain,
    conserved_arrays,
    entropy_of_radial,
)

BOUNDARY_SUBSTEP_FRACTION = 0.01
MAX_SUBSTEPS = 100_000
BISECTION_ITERATIONS = 200
TWO_PI = 2.0 * math.pi

STOP_BOUNDARY = "boundary"
STOP_MAX_STEPS = "max_steps"
STOP_HORIZON = "user_horizon"


@dataclass(frozen=True)
class IntegratorConfig:
    step_size: float = 1e-3
    max_steps: int = 1_000_000
    boundary_margin: float = 1e-6
    drift_tolerance: float = 1e-6
    method: str = "rk4"
    # None turns off boundary-layer refinement (plain fixed-step RK4)
    substep_fraction: float | None = BOUNDARY_SUBSTEP_FRACTION

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if not self.boundary_margin > 0:
            raise ValueError("boundary_margin must be positive")
        if not self.drift_tolerance > 0:
            raise ValueError("drift_tolerance must be positive")
        if int(self.max_steps) < 1:
            raise ValueError("max_steps must be at least 1")
        if self.substep_fraction is not None and not 0 < self.substep_fraction <= 1:
            raise ValueError("substep_fraction must lie in (0, 1] or be None")
        if self.method != "rk4":
            raise ValueError(f"unsupported method {self.method!r}")

    def as_dict(self) -> dict:
        return {
            "step_size": self.step_size,
            "max_steps": int(self.max_steps),
            "boundary_margin": self.boundary_margin,
            "drift_tolerance": self.drift_tolerance,
            "method": self.method,
            "substep_fraction": self.substep_fraction,
        }


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Immutable record of an integrated geodesic.

    ``times`` has shape (n,), ``coords`` and ``velocities`` shape (n, d).
    """

    model: ModelId
    times: np.ndarray
    coords: np.ndarray
    velocities: np.ndarray
    conserved_initial: ConservedSet
    conserved_drift: dict[str, float]
    stop_reason: str
    config: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self):
        for name in ("times", "coords", "velocities"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.times.size

    @property
    def samples(self) -> list[GeodesicState]:
        return [self.state(i) for i in range(len(self))]

    def state(self, i: int) -> GeodesicState:
        return GeodesicState.from_arrays(self.model.value, self.coords[i], self.velocities[i], self.times[i])

    def coordinate(self, name: str | int) -> np.ndarray:
        return self.coords[:, _index(self.model, name)]

    def velocity(self, name: str | int) -> np.ndarray:
        return self.velocities[:, _index(self.model, name)]

    @property
    def radial(self) -> np.ndarray:
        return self.coords[:, self.model.radial_index]

    @property
    def radial_velocity(self) -> np.ndarray:
        return self.velocities[:, self.model.radial_index]

    def conserved_series(self) -> dict[str, np.ndarray]:
        return conserved_arrays(self.model, self.coords, self.velocities)

    def entropy_series(self) -> np.ndarray:
        return entropy_of_radial(self.model, self.radial)


@dataclass(frozen=True)
class TurningEvent:
    time: float
    coordinate: str
    value: float


def _index(model: ModelId, name: str | int) -> int:
    if isinstance(name, (int, np.integer)):
        if not 0 <= name < model.dim:
            raise DimensionMismatch(f"{model.value} has no coordinate index {name}")
        return int(name)
    try:
        return model.coordinates.index(name)
    except ValueError:
        raise DimensionMismatch(f"{model.value} has no coordinate {name!r}") from None


def _rk4(model: ModelId, x: list, v: list, h: float) -> tuple[list, list]:
    n = len(x)
    half = 0.5 * h
    a1 = acceleration(model, x, v)
    x2 = [x[i] + half * v[i] for i in range(n)]
    v2 = [v[i] + half * a1[i] for i in range(n)]
    a2 = acceleration(model, x2, v2)
    x3 = [x[i] + half * v2[i] for i in range(n)]
    v3 = [v[i] + half * a2[i] for i in range(n)]
    a3 = acceleration(model, x3, v3)
    x4 = [x[i] + h * v3[i] for i in range(n)]
    v4 = [v[i] + h * a3[i] for i in range(n)]
    a4 = acceleration(model, x4, v4)
    sixth = h / 6.0
    xn = [x[i] + sixth * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]) for i in range(n)]
    vn = [v[i] + sixth * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]) for i in range(n)]
    return xn, vn


def _advance(
    model: ModelId, x: list, v: list, h: float, margin: float, fraction: float | None = BOUNDARY_SUBSTEP_FRACTION
) -> tuple[list, list, float, float | None]:
    """One nominal step, returning ``(x, v, elapsed, crossing)``.

    ``crossing`` is None when the whole step stayed clear of the margin.
    Otherwise it is the length of the substep that entered the margin, and
    ``(x, v)`` is the last clear state, reached after ``elapsed``.

    On the probability charts the substep is capped at ``fraction`` of the
    local time scale ``dist / |v_radial|``, re-evaluated after every substep,
    so the flow cannot skip across the thin margin layer. The Gaussian charts
    are scale invariant and need no refinement.
    """
    if model.is_gaussian or fraction is None:
        xn, vn = _rk4(model, x, v, h)
        if _clear_of(model, xn, vn, margin):
            return xn, vn, h, None
        return x, v, 0.0, h
    r = model.radial_index
    floor = h / MAX_SUBSTEPS
    elapsed = 0.0
    remaining = h
    while remaining > 0.0:
        hs = remaining
        speed = abs(v[r])
        if speed > 0.0:
            hs = min(remaining, max(floor, fraction * boundary_distance(model, x) / speed))
        xn, vn = _rk4(model, x, v, hs)
        if not _clear_of(model, xn, vn, margin):
            return x, v, elapsed, hs
        x, v = xn, vn
        elapsed += hs
        remaining = remaining - hs if hs < remaining else 0.0
    return x, v, h, None


def _clear_of(model: ModelId, x: list, v: list, margin: float) -> bool:
    if not all(math.isfinite(c) for c in x) or not all(math.isfinite(c) for c in v):
        return False
    return boundary_distance(model, x) > margin


def _land_on_margin(model: ModelId, x: list, v: list, h: float, margin: float):
    """Longest single RK4 step below ``h`` that keeps the state clear of ``margin``."""
    lo, hi = 0.0, h
    best = (0.0, x, v)
    for _ in range(BISECTION_ITERATIONS):
        mid = 0.5 * (lo + hi)
        xm, vm = _rk4(model, x, v, mid)
        if _clear_of(model, xm, vm, margin):
            lo = mid
            best = (mid, xm, vm)
            if boundary_distance(model, xm) - margin <= 1e-9 * margin:
                break
        else:
            hi = mid
        if hi - lo <= 1e-16 * h:
            break
    return best


def _wrap(model: ModelId, x: list) -> list:
    if model is ModelId.QUBIT:
        x[1] = math.fmod(x[1], TWO_PI)
        if x[1] < 0.0:
            x[1] += TWO_PI
    return x


def _drift(model: ModelId, coords: np.ndarray, velocities: np.ndarray) -> tuple[dict, dict]:
    series = conserved_arrays(model, coords, velocities)
    initial = {k: float(v[0]) for k, v in series.items()}
    drift = {k: float(np.max(np.abs(v - v[0])) / max(1.0, abs(v[0]))) for k, v in series.items()}
    return initial, drift


def integrate(
    model: ModelId | str,
    s0: GeodesicState,
    cfg: IntegratorConfig | None = None,
    horizon: float | None = None,
) -> Trajectory:
    """Integrate the geodesic through ``s0`` until a boundary, ``max_steps`` or ``horizon``.

    Raises InvalidInitialState when ``s0`` is outside the domain or closer
    to its edge than ``boundary_margin``, and DriftExceeded when any
    conserved quantity deviates by more than ``drift_tolerance`` (relative,
    floored at 1) from its initial value.
    """
    model = ModelId.parse(model)
    cfg = IntegratorConfig() if cfg is None else cfg
    if s0.chart_id != model.value:
        raise InvalidInitialState(f"state lives in chart {s0.chart_id!r}, expected {model.value!r}")
    try:
        x0 = check_domain(model, s0.point)
    except (OutOfDomain, DimensionMismatch) as exc:
        raise InvalidInitialState(str(exc)) from exc
    v0 = s0.velocity.array
    if v0.size != model.dim or not np.all(np.isfinite(v0)):
        raise InvalidInitialState(f"velocity must be {model.dim} finite components")
    margin = cfg.boundary_margin
    if boundary_distance(model, x0) < margin:
        raise InvalidInitialState(f"initial point lies within the boundary margin {margin}")
    if horizon is not None and not horizon > 0:
        raise ValueError("horizon must be positive")

    h = cfg.step_size
    t0 = s0.time
    x = _wrap(model, [float(c) for c in x0])
    v = [float(c) for c in v0]
    times, xs, vs = [t0], [list(x)], [list(v)]
    stop = STOP_MAX_STEPS
    t_end = None if horizon is None else t0 + horizon
    for k in range(1, int(cfg.max_steps) + 1):
        step = h
        last = False
        if t_end is not None:
            remaining = t_end - times[-1]
            if remaining <= h * (1.0 + 1e-9):
                step, last = remaining, True
        xn, vn, elapsed, crossing = _advance(model, x, v, step, margin, cfg.substep_fraction)
        if crossing is not None:
            tail, xn, vn = _land_on_margin(model, xn, vn, crossing, margin)
            if elapsed + tail > 0.0:
                times.append(times[-1] + elapsed + tail)
                xs.append(_wrap(model, xn))
                vs.append(vn)
            stop = STOP_BOUNDARY
            break
        x, v = _wrap(model, xn), vn
        times.append(t_end if last else t0 + k * h)
        xs.append(list(x))
        vs.append(list(v))
        if last:
            stop = STOP_HORIZON
            break

    coords = np.array(xs)
    velocities = np.array(vs)
    initial, drift = _drift(model, coords, velocities)
    traj = Trajectory(
        model=model,
        times=np.array(times),
        coords=coords,
        velocities=velocities,
        conserved_initial=ConservedSet(**initial),
        conserved_drift=drift,
        stop_reason=stop,
        config=cfg,
    )
    worst = max(drift, key=drift.get)
    if drift[worst] > cfg.drift_tolerance:
        raise DriftExceeded(
            f"{model.value}: {worst} drifted by {drift[worst]:.3e} (tolerance {cfg.drift_tolerance:.1e}); "
            f"reduce step_size {h}",
            trajectory=traj,
        )
    return traj


def drift_report(t: Trajectory) -> dict[str, float]:
    """Max relative deviation ``|Q - Q0| / max(1, |Q0|)`` of every conserved quantity."""
    if len(t) == 0:
        raise ValueError("empty trajectory")
    return _drift(t.model, t.coords, t.velocities)[1]


def detect_turning_points(t: Trajectory, coordinate: str | int) -> list[TurningEvent]:
    """Velocity sign changes of ``coordinate``, located by linear interpolation."""
    i = _index(t.model, coordinate)
    name = t.model.coordinates[i]
    x = t.coords[:, i]
    v = t.velocities[:, i]
    nonzero = np.flatnonzero(v != 0.0)
    events = []
    for a, b in zip(nonzero[:-1], nonzero[1:]):
        if v[a] * v[b] < 0.0:
            frac = v[a] / (v[a] - v[b])
            events.append(
                TurningEvent(
                    time=float(t.times[a] + frac * (t.times[b] - t.times[a])),
                    coordinate=name,
                    value=float(x[a] + frac * (x[b] - x[a])),
                )
            )
    return events
