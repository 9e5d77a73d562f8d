"""Figure-level analyses built on integrated trajectories."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import GeodesicState
from .errors import NotApplicable, OutOfDomain, Unclassifiable
from .integrator import STOP_BOUNDARY, IntegratorConfig, Trajectory, detect_turning_points, integrate
from .models import (
    ConservedSet,
    ModelId,
    Normalization,
    effective_potential,
    energy_scale,
    entropy_of_radial,
    kinetic_term,
    potential_minimum,
    y_velocity,
)

MAX_CURVE_POINTS = 2000
SIGMA_CAP_FACTOR = 1e3
EQUILIBRIUM_EXCURSION = 1e-8
ASYMPTOTE_CLEARANCE = 1e-3


class EndpointClass(str, enum.Enum):
    MIN_ENTROPY_BOUNDARY = "min-entropy-boundary"
    BOUNDED_OSCILLATION = "bounded-oscillation"
    EQUILIBRIUM = "equilibrium"
    SIGMA_DIVERGENT = "sigma-divergent"

    def __str__(self) -> str:
        return self.value


# orbit_bounds kind -> endpoint class that a long enough trajectory shows
KIND_TO_ENDPOINT = {
    "boundary-reaching": EndpointClass.MIN_ENTROPY_BOUNDARY,
    "bounded-oscillation": EndpointClass.BOUNDED_OSCILLATION,
    "equilibrium": EndpointClass.EQUILIBRIUM,
    "divergent": EndpointClass.SIGMA_DIVERGENT,
}


@dataclass(frozen=True, eq=False)
class PortraitCurve:
    x: np.ndarray
    xdot: np.ndarray
    constants: ConservedSet
    stop_reason: str
    dashed: bool = False


@dataclass(frozen=True, eq=False)
class PhasePortrait:
    model: ModelId
    plane: tuple[str, str]
    curves: list[PortraitCurve] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class PotentialProfile:
    model: ModelId
    y_grid: np.ndarray
    u_values: np.ndarray
    constants: ConservedSet
    normalization: Normalization
    minimum: tuple[float, float] | None = None


@dataclass(frozen=True, eq=False)
class UncertaintySeries:
    times: np.ndarray
    delta_x: np.ndarray
    delta_p: np.ndarray
    product: np.ndarray


def _turning_indices(v: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)
    return np.unique(np.concatenate([idx, idx + 1]))


def decimate(x: np.ndarray, xdot: np.ndarray, max_points: int = MAX_CURVE_POINTS) -> np.ndarray:
    """Indices of a uniform-stride subsample that keeps the endpoints and extrema.

    Samples bracketing sign changes of ``xdot`` (turning points of ``x``) and
    of its increments (extrema of ``xdot``) are always retained, so the
    curve's extreme values survive decimation.
    """
    n = x.size
    if n <= max_points:
        return np.arange(n)
    keep = {0, n - 1}
    keep.update(_turning_indices(xdot).tolist())
    keep.update(_turning_indices(np.diff(xdot)).tolist())
    keep.update((int(np.argmin(x)), int(np.argmax(x)), int(np.argmin(xdot)), int(np.argmax(xdot))))
    budget = max_points - len(keep)
    if budget > 0:
        stride = math.ceil(n / budget)
        keep.update(range(0, n, stride))
    idx = np.array(sorted(keep))
    if idx.size > max_points:
        # too many extrema to keep them all; fall back to a plain stride
        stride = math.ceil(n / (max_points - 1))
        idx = np.unique(np.concatenate([np.arange(0, n, stride), [n - 1]]))
    return idx


def _dashed(model: ModelId, cs: ConservedSet) -> bool:
    return model is ModelId.GAUSSIAN_QUANTUM and cs.get("B") != 0.0


def phase_portrait(
    model: ModelId | str,
    initial_family: Sequence[GeodesicState],
    cfg: IntegratorConfig | None = None,
    horizon: float = 10.0,
    max_points: int = MAX_CURVE_POINTS,
) -> PhasePortrait:
    """Integrate every initial state and project onto (radial, radial velocity).

    Curves keep the input order.
    """
    model = ModelId.parse(model)
    name = model.radial_name
    curves = []
    for s0 in initial_family:
        t = integrate(model, s0, cfg, horizon=horizon)
        x, xd = t.radial, t.radial_velocity
        idx = decimate(x, xd, max_points)
        curves.append(PortraitCurve(x[idx], xd[idx], t.conserved_initial, t.stop_reason, _dashed(model, t.conserved_initial)))
    return PhasePortrait(model, (name, f"{name}dot"), curves)


def potential_profile(
    model: ModelId | str,
    y_range: tuple[float, float],
    n_points: int,
    cs: ConservedSet,
    normalization: Normalization | str = Normalization.RAW,
) -> PotentialProfile:
    model = ModelId.parse(model)
    normalization = Normalization(normalization.value if isinstance(normalization, Normalization) else normalization)
    lo, hi = float(y_range[0]), float(y_range[1])
    if not lo < hi or n_points < 2:
        raise ValueError("y_range must be increasing and n_points >= 2")
    if model is ModelId.QUBIT and max(abs(lo), abs(hi)) > math.pi / 2 - ASYMPTOTE_CLEARANCE:
        raise OutOfDomain(f"qubit y range must stay {ASYMPTOTE_CLEARANCE} clear of +-pi/2")
    y = np.linspace(lo, hi, int(n_points))
    u = np.asarray(effective_potential(model, y, cs, normalization))
    if not np.all(np.isfinite(u)):
        raise OutOfDomain("potential is not finite on the requested grid")
    minimum = potential_minimum(model, cs)
    if minimum is not None:
        minimum = (minimum[0], minimum[1] * energy_scale(model, normalization))
    return PotentialProfile(model, y, u, cs, normalization, minimum)


def classify_endpoint(t: Trajectory, sigma_cap_factor: float = SIGMA_CAP_FACTOR) -> EndpointClass:
    """Qualitative fate of a trajectory.

    Raises Unclassifiable when the horizon was too short to show any of the
    criteria; integrate further and retry.
    """
    if len(t) == 0:
        raise ValueError("empty trajectory")
    model = t.model
    r = t.radial
    if t.stop_reason == STOP_BOUNDARY:
        return EndpointClass.MIN_ENTROPY_BOUNDARY
    if np.max(r) - np.min(r) < EQUILIBRIUM_EXCURSION:
        return EndpointClass.EQUILIBRIUM
    if model.is_gaussian and t.conserved_initial.get("A") == 0.0 and np.max(r) >= sigma_cap_factor * r[0]:
        return EndpointClass.SIGMA_DIVERGENT
    if len(detect_turning_points(t, model.radial_index)) >= 2:
        return EndpointClass.BOUNDED_OSCILLATION
    raise Unclassifiable(
        f"{model.value}: no boundary, rest, divergence or repeated turning seen by t={t.times[-1]:.6g}; "
        "extend the horizon"
    )


def entropy_along(t: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    return t.times.copy(), entropy_of_radial(t.model, t.radial)


def uncertainty_product(t: Trajectory) -> UncertaintySeries:
    """Position and momentum spreads ``sigma`` and ``1/(2 sigma)`` of a Gaussian packet."""
    if not t.model.is_gaussian:
        raise NotApplicable(f"{t.model.value} is not a Gaussian model")
    dx = t.radial.copy()
    dp = 1.0 / (2.0 * dx)
    return UncertaintySeries(t.times.copy(), dx, dp, dx * dp)


def energy_identity_residual(t: Trajectory, normalization: Normalization | str = Normalization.RAW) -> np.ndarray:
    """``kinetic + U(y) - scale*C`` at every sample (zero along an exact geodesic)."""
    model = t.model
    cs = t.conserved_initial
    r = t.radial
    y = np.log(r) if model.is_gaussian else np.arcsin(2.0 * r - 1.0)
    ydot = y_velocity(model, t.coords, t.velocities)
    total = np.asarray(kinetic_term(model, ydot, normalization)) + np.asarray(
        effective_potential(model, y, cs, normalization)
    )
    return total - energy_scale(model, normalization) * cs.C
