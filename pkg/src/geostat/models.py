"""The four statistical manifolds and their closed-form geometry.

=====================  =====================  ===========================
model                  chart                  metric
=====================  =====================  ===========================
bernoulli-classical    (p)                    dp^2 / (p(1-p))
qubit-quantum          (p, phi)               dp^2/(4p(1-p)) + p(1-p)dphi^2
gaussian-classical     (mu, sigma)            (dmu^2 + 2 dsigma^2)/(4 sigma^2)
gaussian-quantum       (mu, sigma, alpha)     classical + sigma^2 dalpha^2
=====================  =====================  ===========================

The classical charts are prefixes of the quantum ones, so every classical
model sits inside its quantum extension as the slice where the phase
coordinate is frozen.

Conserved quantities use a fixed per-model normalization of the energy:

* bernoulli: ``C = v.g.v`` (so ``C = ydot^2`` in the y chart)
* qubit: ``A = p(1-p) phidot``, ``C = v.g.v / 2 = ydot^2/8 + 2A^2/cos^2 y``
* gaussian: ``A = mudot/(2 sigma^2)``, ``B = sqrt(2) sigma^2 alphadot``,
  ``C = v.g.v = ydot^2/2 + A^2 e^{2y} + B^2/(2 e^{2y})``
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ChartPoint, ChristoffelValue, GeodesicState, MetricValue, TangentVector
from .errors import DimensionMismatch, InadmissibleConstants, NotApplicable, OutOfDomain

DOMAIN_MARGIN = 1e-12
# Relative slack when deciding that C sits exactly on a potential minimum.
EQUILIBRIUM_RTOL = 1e-12
SQRT2 = math.sqrt(2.0)


class ModelId(str, enum.Enum):
    BERNOULLI = "bernoulli-classical"
    QUBIT = "qubit-quantum"
    GAUSSIAN_CLASSICAL = "gaussian-classical"
    GAUSSIAN_QUANTUM = "gaussian-quantum"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, name: "str | ModelId") -> "ModelId":
        if isinstance(name, ModelId):
            return name
        key = str(name).strip().lower()
        try:
            return _ALIASES[key]
        except KeyError:
            raise ValueError(f"unknown model {name!r}; expected one of {sorted(_ALIASES)}") from None

    @property
    def coordinates(self) -> tuple[str, ...]:
        return _COORDS[self]

    @property
    def dim(self) -> int:
        return len(_COORDS[self])

    @property
    def is_quantum(self) -> bool:
        return self in (ModelId.QUBIT, ModelId.GAUSSIAN_QUANTUM)

    @property
    def is_gaussian(self) -> bool:
        return self in (ModelId.GAUSSIAN_CLASSICAL, ModelId.GAUSSIAN_QUANTUM)

    @property
    def radial_index(self) -> int:
        """Index of the coordinate that carries the non-trivial motion (p or sigma)."""
        return 1 if self.is_gaussian else 0

    @property
    def radial_name(self) -> str:
        return self.coordinates[self.radial_index]

    @property
    def classical(self) -> "ModelId":
        return {ModelId.QUBIT: ModelId.BERNOULLI, ModelId.GAUSSIAN_QUANTUM: ModelId.GAUSSIAN_CLASSICAL}.get(self, self)

    @property
    def constant_names(self) -> tuple[str, ...]:
        return _CONSTANT_NAMES[self]


_COORDS = {
    ModelId.BERNOULLI: ("p",),
    ModelId.QUBIT: ("p", "phi"),
    ModelId.GAUSSIAN_CLASSICAL: ("mu", "sigma"),
    ModelId.GAUSSIAN_QUANTUM: ("mu", "sigma", "alpha"),
}
_CONSTANT_NAMES = {
    ModelId.BERNOULLI: ("C",),
    ModelId.QUBIT: ("A", "C"),
    ModelId.GAUSSIAN_CLASSICAL: ("A", "C"),
    ModelId.GAUSSIAN_QUANTUM: ("A", "B", "C"),
}
_ALIASES = {m.value: m for m in ModelId}
_ALIASES.update(
    {
        "bernoulli": ModelId.BERNOULLI,
        "qubit": ModelId.QUBIT,
        "gaussian": ModelId.GAUSSIAN_CLASSICAL,
        "gaussian-c": ModelId.GAUSSIAN_CLASSICAL,
        "gaussian-q": ModelId.GAUSSIAN_QUANTUM,
    }
)


class Normalization(str, enum.Enum):
    """Energy normalization of the effective potential.

    ``RAW`` is the reduced energy identity of each model. ``FIGURE`` scales
    the qubit identity by 8 (``ydot^2 + 16A^2/cos^2 y = 8C``), the form used
    when plotting the qubit potential; it coincides with RAW elsewhere.
    """

    RAW = "raw"
    FIGURE = "figure"


@dataclass(frozen=True)
class ConservedSet:
    """Constants of the motion; ``None`` marks a quantity the model lacks."""

    C: float
    A: float | None = None
    B: float | None = None

    def __post_init__(self):
        for name in ("A", "B", "C"):
            value = getattr(self, name)
            if value is not None:
                value = float(value)
                if not math.isfinite(value):
                    raise InadmissibleConstants(f"{name} must be finite, got {value}")
                object.__setattr__(self, name, value)
        if self.C < 0:
            raise InadmissibleConstants(f"C must be non-negative, got {self.C}")

    def get(self, name: str) -> float:
        value = getattr(self, name)
        return 0.0 if value is None else value

    def as_dict(self) -> dict[str, float | None]:
        return {"A": self.A, "B": self.B, "C": self.C}


@dataclass(frozen=True)
class OrbitBounds:
    coordinate: str
    lower: float
    upper: float
    kind: str  # bounded-oscillation | boundary-reaching | equilibrium | divergent

    KINDS = ("bounded-oscillation", "boundary-reaching", "equilibrium", "divergent")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown orbit kind {self.kind!r}")
        if self.lower > self.upper:
            raise ValueError(f"lower bound {self.lower} exceeds upper bound {self.upper}")

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= value <= self.upper + slack


def constants(model: ModelId | str, *, A: float | None = None, B: float | None = None, C: float) -> ConservedSet:
    """Build a ConservedSet, filling the quantities the model carries with 0."""
    model = ModelId.parse(model)
    names = model.constant_names
    return ConservedSet(
        C=C,
        A=(0.0 if A is None else A) if "A" in names else None,
        B=(0.0 if B is None else B) if "B" in names else None,
    )


# ---------------------------------------------------------------------------
# points and domains


def point(model: ModelId | str, *coords: float) -> ChartPoint:
    model = ModelId.parse(model)
    return ChartPoint(model.value, coords)


def _coords(model: ModelId, p) -> np.ndarray:
    if isinstance(p, ChartPoint):
        if p.chart_id != model.value:
            raise DimensionMismatch(f"point belongs to chart {p.chart_id!r}, not {model.value!r}")
        x = p.array
    else:
        x = np.atleast_1d(np.asarray(p, dtype=float))
    if x.size != model.dim:
        raise DimensionMismatch(f"{model.value} points have {model.dim} coordinates, got {x.size}")
    return x


def check_domain(model: ModelId | str, p) -> np.ndarray:
    """Coordinates of ``p`` as an array, or OutOfDomain if outside the open chart."""
    model = ModelId.parse(model)
    x = _coords(model, p)
    if not np.all(np.isfinite(x)):
        raise OutOfDomain(f"{model.value}: non-finite coordinates {tuple(x)}")
    r = x[model.radial_index]
    if model.is_gaussian:
        if not r > DOMAIN_MARGIN:
            raise OutOfDomain(f"{model.value}: sigma must be > 0, got {r}")
    elif not DOMAIN_MARGIN < r < 1.0 - DOMAIN_MARGIN:
        raise OutOfDomain(f"{model.value}: p must lie in (0, 1), got {r}")
    return x


def in_domain(model: ModelId | str, p) -> bool:
    try:
        check_domain(model, p)
    except OutOfDomain:
        return False
    return True


def boundary_distance(model: ModelId, x: Sequence[float]) -> float:
    """Distance of the radial coordinate to the nearest chart edge."""
    r = x[model.radial_index]
    if model.is_gaussian:
        return r
    return min(r, 1.0 - r)


# ---------------------------------------------------------------------------
# metric, symplectic form, connection


def metric_at(model: ModelId | str, p) -> MetricValue:
    model = ModelId.parse(model)
    x = check_domain(model, p)
    if model is ModelId.BERNOULLI:
        q = x[0]
        return MetricValue([[1.0 / (q * (1.0 - q))]])
    if model is ModelId.QUBIT:
        q = x[0]
        w = q * (1.0 - q)
        return MetricValue(np.diag([1.0 / (4.0 * w), w]))
    s2 = x[1] ** 2
    diag = [1.0 / (4.0 * s2), 1.0 / (2.0 * s2)]
    if model is ModelId.GAUSSIAN_QUANTUM:
        diag.append(s2)
    return MetricValue(np.diag(diag))


def symplectic_at(model: ModelId | str, p) -> np.ndarray:
    """Antisymmetric matrix ``omega[i, j] = omega(d_i, d_j)`` of a quantum model.

    Qubit: ``dp ^ dphi``; gaussian-quantum: ``dalpha ^ dmu`` (constant).
    """
    model = ModelId.parse(model)
    if not model.is_quantum:
        raise NotApplicable(f"{model.value} carries no phase, so its symplectic form vanishes identically")
    check_domain(model, p)
    omega = np.zeros((model.dim, model.dim))
    if model is ModelId.QUBIT:
        omega[0, 1], omega[1, 0] = 1.0, -1.0
    else:
        omega[2, 0], omega[0, 2] = 1.0, -1.0
    return omega


def christoffel_analytic(model: ModelId | str, p) -> ChristoffelValue:
    model = ModelId.parse(model)
    x = check_domain(model, p)
    d = model.dim
    gamma = np.zeros((d, d, d))
    if model in (ModelId.BERNOULLI, ModelId.QUBIT):
        q = x[0]
        w = q * (1.0 - q)
        gamma[0, 0, 0] = -(1.0 - 2.0 * q) / (2.0 * w)
        if model is ModelId.QUBIT:
            gamma[0, 1, 1] = -2.0 * w * (1.0 - 2.0 * q)
            gamma[1, 0, 1] = gamma[1, 1, 0] = (1.0 - 2.0 * q) / (2.0 * w)
    else:
        s = x[1]
        gamma[0, 0, 1] = gamma[0, 1, 0] = -1.0 / s
        gamma[1, 0, 0] = 1.0 / (2.0 * s)
        gamma[1, 1, 1] = -1.0 / s
        if model is ModelId.GAUSSIAN_QUANTUM:
            gamma[1, 2, 2] = -2.0 * s**3
            gamma[2, 1, 2] = gamma[2, 2, 1] = 1.0 / s
    return ChristoffelValue(gamma)


def acceleration(model: ModelId, x: Sequence[float], v: Sequence[float]) -> tuple[float, ...]:
    """``-Gamma^k_ij v^i v^j`` written out in plain floats.

    This is the integrator's hot path; it performs no domain checks and must
    agree with ``geodesic_rhs(christoffel_analytic(...))`` wherever both are
    defined.
    """
    if model is ModelId.BERNOULLI:
        q = x[0]
        return (v[0] * v[0] * (1.0 - 2.0 * q) / (2.0 * q * (1.0 - q)),)
    if model is ModelId.QUBIT:
        q = x[0]
        pd, fd = v[0], v[1]
        w = q * (1.0 - q)
        c = 1.0 - 2.0 * q
        return (
            pd * pd * c / (2.0 * w) + 2.0 * w * c * fd * fd,
            -c * pd * fd / w,
        )
    s = x[1]
    md, sd = v[0], v[1]
    if model is ModelId.GAUSSIAN_CLASSICAL:
        return (2.0 * md * sd / s, (sd * sd - 0.5 * md * md) / s)
    ad = v[2]
    return (
        2.0 * md * sd / s,
        (sd * sd - 0.5 * md * md) / s + 2.0 * s**3 * ad * ad,
        -2.0 * sd * ad / s,
    )


# ---------------------------------------------------------------------------
# y chart


def y_chart_id(model: ModelId | str) -> str:
    return f"{ModelId.parse(model).value}/y"


def to_y_chart(model: ModelId | str, p) -> ChartPoint:
    """Replace p by ``y = arcsin(2p - 1)`` or sigma by ``y = log sigma``."""
    model = ModelId.parse(model)
    x = check_domain(model, p).copy()
    i = model.radial_index
    x[i] = math.log(x[i]) if model.is_gaussian else math.asin(2.0 * x[i] - 1.0)
    return ChartPoint(y_chart_id(model), x)


def from_y_chart(model: ModelId | str, yp) -> ChartPoint:
    model = ModelId.parse(model)
    if isinstance(yp, ChartPoint):
        if yp.chart_id != y_chart_id(model):
            raise DimensionMismatch(f"point belongs to chart {yp.chart_id!r}, not {y_chart_id(model)!r}")
        x = yp.array
    else:
        x = np.atleast_1d(np.asarray(yp, dtype=float)).copy()
    if x.size != model.dim:
        raise DimensionMismatch(f"{model.value} points have {model.dim} coordinates, got {x.size}")
    i = model.radial_index
    y = x[i]
    if model.is_gaussian:
        x[i] = math.exp(y)
    else:
        if not abs(y) < math.pi / 2:
            raise OutOfDomain(f"{model.value}: y must lie in (-pi/2, pi/2), got {y}")
        x[i] = 0.5 * (1.0 + math.sin(y))
    return point(model, *check_domain(model, x))


def y_velocity(model: ModelId | str, x, v):
    """Radial speed in the y chart; works elementwise on sample arrays."""
    model = ModelId.parse(model)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    i = model.radial_index
    r, rd = x[..., i], v[..., i]
    if model.is_gaussian:
        return rd / r
    return rd / np.sqrt(r * (1.0 - r))


# ---------------------------------------------------------------------------
# constants of the motion


def conserved_arrays(model: ModelId | str, x, v) -> dict[str, np.ndarray]:
    """Vectorized A/B/C over sample arrays of shape (..., d)."""
    model = ModelId.parse(model)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if model is ModelId.BERNOULLI:
        q, qd = x[..., 0], v[..., 0]
        return {"C": qd * qd / (q * (1.0 - q))}
    if model is ModelId.QUBIT:
        q, qd, fd = x[..., 0], v[..., 0], v[..., 1]
        w = q * (1.0 - q)
        return {"A": w * fd, "C": qd * qd / (8.0 * w) + 0.5 * w * fd * fd}
    s, md, sd = x[..., 1], v[..., 0], v[..., 1]
    s2 = s * s
    out = {"A": md / (2.0 * s2)}
    energy = md * md / (4.0 * s2) + sd * sd / (2.0 * s2)
    if model is ModelId.GAUSSIAN_QUANTUM:
        ad = v[..., 2]
        out["B"] = SQRT2 * s2 * ad
        energy = energy + s2 * ad * ad
    out["C"] = energy
    return out


def conserved_quantities(model: ModelId | str, s: GeodesicState) -> ConservedSet:
    model = ModelId.parse(model)
    x = check_domain(model, s.point)
    v = s.velocity.array
    if v.size != model.dim:
        raise DimensionMismatch(f"velocity has {v.size} components, expected {model.dim}")
    values = {k: float(val) for k, val in conserved_arrays(model, x, v).items()}
    return ConservedSet(**values)


def energy_factor(model: ModelId | str) -> float:
    """Fixed ratio ``C / (v.g.v)`` of the model's energy normalization."""
    return 0.5 if ModelId.parse(model) is ModelId.QUBIT else 1.0


def shannon_entropy(model: ModelId | str, p) -> float:
    """Shannon entropy in nats: discrete for p-models, differential for Gaussians."""
    model = ModelId.parse(model)
    x = check_domain(model, p)
    return float(entropy_of_radial(model, x[model.radial_index]))


def entropy_of_radial(model: ModelId, r):
    r = np.asarray(r, dtype=float)
    if model.is_gaussian:
        return 0.5 * np.log(2.0 * np.pi * np.e * r * r)
    return -r * np.log(r) - (1.0 - r) * np.log1p(-r)


# ---------------------------------------------------------------------------
# reduced one-dimensional motion


def _norm(normalization) -> Normalization:
    return Normalization(normalization.value if isinstance(normalization, Normalization) else str(normalization))


def energy_scale(model: ModelId | str, normalization=Normalization.RAW) -> float:
    """Right-hand side multiplier: ``kinetic + U = energy_scale * C``."""
    model = ModelId.parse(model)
    return 8.0 if model is ModelId.QUBIT and _norm(normalization) is Normalization.FIGURE else 1.0


def kinetic_term(model: ModelId | str, ydot, normalization=Normalization.RAW):
    model = ModelId.parse(model)
    ydot = np.asarray(ydot, dtype=float)
    if model is ModelId.BERNOULLI:
        factor = 1.0
    elif model is ModelId.QUBIT:
        factor = 1.0 if _norm(normalization) is Normalization.FIGURE else 0.125
    else:
        factor = 0.5
    out = factor * ydot * ydot
    return float(out) if out.ndim == 0 else out


def effective_potential(model: ModelId | str, y, cs: ConservedSet, normalization=Normalization.RAW):
    """Potential ``U(y)`` of the reduced radial motion.

    ``y`` may be a scalar or an array. The qubit potential has vertical
    asymptotes at ``y = +-pi/2``; evaluating there raises OutOfDomain.
    """
    model = ModelId.parse(model)
    y_arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y_arr)):
        raise OutOfDomain("non-finite y")
    A, B = cs.get("A"), cs.get("B")
    if model is ModelId.BERNOULLI:
        u = np.zeros_like(y_arr)
    elif model is ModelId.QUBIT:
        if np.any(np.abs(y_arr) >= math.pi / 2):
            raise OutOfDomain("qubit potential is only defined for |y| < pi/2")
        u = 2.0 * A * A / np.cos(y_arr) ** 2
        if _norm(normalization) is Normalization.FIGURE:
            u = 8.0 * u
    else:
        e2y = np.exp(2.0 * y_arr)
        u = A * A * e2y
        if model is ModelId.GAUSSIAN_QUANTUM:
            u = u + B * B / (2.0 * e2y)
    return float(u) if u.ndim == 0 else u


def potential_minimum(model: ModelId | str, cs: ConservedSet) -> tuple[float, float] | None:
    """``(y_e, U(y_e))`` when the raw potential has an isolated minimum."""
    model = ModelId.parse(model)
    A, B = cs.get("A"), cs.get("B")
    if model is ModelId.QUBIT and A != 0.0:
        return 0.0, 2.0 * A * A
    if model is ModelId.GAUSSIAN_QUANTUM and A != 0.0 and B != 0.0:
        y_e = 0.25 * math.log(B * B / (2.0 * A * A))
        return y_e, SQRT2 * abs(A) * abs(B)
    return None


def check_admissible(model: ModelId | str, cs: ConservedSet) -> None:
    """Raise InadmissibleConstants when C lies below the potential's infimum."""
    model = ModelId.parse(model)
    A, B, C = cs.get("A"), cs.get("B"), cs.C
    floor = 0.0
    if model is ModelId.QUBIT:
        floor = 2.0 * A * A
    elif model is ModelId.GAUSSIAN_QUANTUM and A != 0.0 and B != 0.0:
        floor = SQRT2 * abs(A) * abs(B)
    if C < floor * (1.0 - EQUILIBRIUM_RTOL):
        raise InadmissibleConstants(f"{model.value}: C={C} is below the potential minimum {floor}")
    if model.is_gaussian and C == 0.0 and (A != 0.0 or B != 0.0):
        raise InadmissibleConstants(f"{model.value}: C=0 requires A=B=0")


def _on_floor(C: float, floor: float) -> bool:
    return abs(C - floor) <= EQUILIBRIUM_RTOL * max(floor, 1.0)


def orbit_bounds(model: ModelId | str, cs: ConservedSet) -> OrbitBounds:
    """Range of the radial coordinate (p or sigma) swept by orbits with constants ``cs``."""
    model = ModelId.parse(model)
    check_admissible(model, cs)
    A, B, C = cs.get("A"), cs.get("B"), cs.C
    name = model.radial_name

    if model in (ModelId.BERNOULLI, ModelId.QUBIT):
        if model is ModelId.QUBIT and A != 0.0:
            floor = 2.0 * A * A
            if _on_floor(C, floor):
                return OrbitBounds(name, 0.5, 0.5, "equilibrium")
            half = 0.5 * math.sqrt(1.0 - floor / C)
            return OrbitBounds(name, 0.5 - half, 0.5 + half, "bounded-oscillation")
        if C == 0.0:
            return OrbitBounds(name, 0.0, 1.0, "equilibrium")
        return OrbitBounds(name, 0.0, 1.0, "boundary-reaching")

    if A == 0.0:
        if C == 0.0:
            return OrbitBounds(name, 0.0, math.inf, "equilibrium")
        lower = abs(B) / math.sqrt(2.0 * C) if B != 0.0 else 0.0
        return OrbitBounds(name, lower, math.inf, "divergent")
    if B == 0.0:
        return OrbitBounds(name, 0.0, math.sqrt(C) / abs(A), "boundary-reaching")
    floor = SQRT2 * abs(A) * abs(B)
    if _on_floor(C, floor):
        s_e = math.exp(potential_minimum(model, cs)[0])
        return OrbitBounds(name, s_e, s_e, "equilibrium")
    root = math.sqrt(max(C * C - 2.0 * A * A * B * B, 0.0))
    lo2 = (C - root) / (2.0 * A * A)
    hi2 = (C + root) / (2.0 * A * A)
    return OrbitBounds(name, math.sqrt(lo2), math.sqrt(hi2), "bounded-oscillation")


def equilibria(model: ModelId | str, cs: ConservedSet) -> list[ChartPoint]:
    """Isolated stable rest points of the radial motion.

    Cyclic coordinates (phi, mu, alpha) are free along such orbits and are
    reported as 0. Continua of fixed points (C = 0) are not listed.
    """
    model = ModelId.parse(model)
    minimum = potential_minimum(model, cs)
    if minimum is None:
        return []
    y_e = minimum[0]
    coords = np.zeros(model.dim)
    coords[model.radial_index] = math.exp(y_e) if model.is_gaussian else 0.5 * (1.0 + math.sin(y_e))
    return [point(model, *coords)]


def state_from_constants(
    model: ModelId | str,
    cs: ConservedSet,
    at: float | None = None,
    direction: float = 1.0,
    coords: Sequence[float] | None = None,
) -> GeodesicState:
    """An initial state realising ``cs``.

    The radial coordinate starts at ``at`` (default p = 1/2 or sigma = 1);
    the remaining coordinates come from ``coords`` or default to 0. The sign
    of the radial velocity follows ``direction``.
    """
    model = ModelId.parse(model)
    x = np.zeros(model.dim) if coords is None else np.array(coords, dtype=float)
    i = model.radial_index
    if at is not None:
        x[i] = at
    elif coords is None:
        x[i] = 1.0 if model.is_gaussian else 0.5
    check_domain(model, x)
    A, B, C = cs.get("A"), cs.get("B"), cs.C
    r = x[i]
    sign = 1.0 if direction >= 0 else -1.0
    v = np.zeros(model.dim)

    def _radicand(value: float) -> float:
        if value < -1e-12 * max(1.0, C):
            raise InadmissibleConstants(
                f"{model.value}: constants {cs.as_dict()} are not reachable from {model.radial_name}={r}"
            )
        return max(value, 0.0)

    if model is ModelId.BERNOULLI:
        v[0] = sign * math.sqrt(_radicand(C * r * (1.0 - r)))
    elif model is ModelId.QUBIT:
        w = r * (1.0 - r)
        v[1] = A / w
        v[0] = sign * math.sqrt(8.0 * w * _radicand(C - A * A / (2.0 * w)))
    else:
        s2 = r * r
        v[0] = 2.0 * A * s2
        u = A * A * s2
        if model is ModelId.GAUSSIAN_QUANTUM:
            v[2] = B / (SQRT2 * s2)
            u += B * B / (2.0 * s2)
        v[1] = sign * r * math.sqrt(2.0 * _radicand(C - u))
    return GeodesicState(point(model, *x), TangentVector(model.value, v))
