"""Chart-level differential geometry.

Points, tangent vectors and metric coefficients in a coordinate chart of
dimension at most three, plus the two generic pieces every model needs:
finite-difference Christoffel symbols and the first-order geodesic
right-hand side ``x'' = -Gamma^k_ij x'^i x'^j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BoundaryProximity, DimensionMismatch, OutOfDomain, SingularMetric

MAX_DIM = 3
SYMMETRY_TOL = 1e-12
SINGULAR_EIGENVALUE = 1e-14
FD_STEP = 1e-5


def _as_coords(values) -> tuple[float, ...]:
    coords = tuple(float(c) for c in np.atleast_1d(np.asarray(values, dtype=float)))
    if not 1 <= len(coords) <= MAX_DIM:
        raise DimensionMismatch(f"chart dimension must be 1..{MAX_DIM}, got {len(coords)}")
    return coords


@dataclass(frozen=True)
class ChartPoint:
    chart_id: str
    coords: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", _as_coords(self.coords))

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords)


@dataclass(frozen=True)
class TangentVector:
    chart_id: str
    components: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", _as_coords(self.components))

    @property
    def dim(self) -> int:
        return len(self.components)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.components)


@dataclass(frozen=True, eq=False)
class MetricValue:
    """Symmetric matrix of metric coefficients at a point."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim == 0:
            m = m.reshape(1, 1)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or not 1 <= m.shape[0] <= MAX_DIM:
            raise DimensionMismatch(f"metric must be a square matrix of size <= {MAX_DIM}, got {m.shape}")
        if np.max(np.abs(m - m.T)) > SYMMETRY_TOL:
            raise ValueError("metric matrix is not symmetric")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def check_positive_definite(self) -> None:
        """Raise SingularMetric unless every eigenvalue is strictly positive."""
        lowest = float(np.min(np.linalg.eigvalsh(self.matrix)))
        if lowest <= SINGULAR_EIGENVALUE:
            raise SingularMetric(f"metric is not positive definite (smallest eigenvalue {lowest:.3e})")


@dataclass(frozen=True, eq=False)
class ChristoffelValue:
    """Connection coefficients ``gamma[k, i, j]`` (upper k, lower i, j).

    The two lower indices are symmetrized on construction, so the symmetry
    holds exactly whatever the caller passed in.
    """

    gamma: np.ndarray

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float)
        d = g.shape[0] if g.ndim == 3 else -1
        if g.ndim != 3 or g.shape != (d, d, d) or not 1 <= d <= MAX_DIM:
            raise DimensionMismatch(f"Christoffel array must be d x d x d, got {g.shape}")
        g = 0.5 * (g + g.transpose(0, 2, 1))
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    @property
    def dim(self) -> int:
        return self.gamma.shape[0]


@dataclass(frozen=True)
class GeodesicState:
    point: ChartPoint
    velocity: TangentVector
    time: float = field(default=0.0)

    def __post_init__(self):
        if self.point.chart_id != self.velocity.chart_id:
            raise DimensionMismatch(
                f"point chart {self.point.chart_id!r} differs from velocity chart {self.velocity.chart_id!r}"
            )
        if self.point.dim != self.velocity.dim:
            raise DimensionMismatch(f"point has dimension {self.point.dim}, velocity {self.velocity.dim}")
        object.__setattr__(self, "time", float(self.time))

    @classmethod
    def from_arrays(cls, chart_id: str, coords, velocity, time: float = 0.0) -> "GeodesicState":
        return cls(ChartPoint(chart_id, coords), TangentVector(chart_id, velocity), time)

    @property
    def chart_id(self) -> str:
        return self.point.chart_id

    @property
    def dim(self) -> int:
        return self.point.dim


def invert_metric(m: MetricValue) -> MetricValue:
    """Inverse metric ``g^{-1}``.

    Raises SingularMetric when an eigenvalue is at or below 1e-14, which in
    practice means the point sits on (or past) a chart boundary.
    """
    g = m.matrix
    eig = np.linalg.eigvalsh(g)
    if not np.all(np.isfinite(eig)) or eig.min() <= SINGULAR_EIGENVALUE:
        raise SingularMetric(f"metric eigenvalue {eig.min():.3e} too small to invert")
    inv = np.linalg.inv(g)
    return MetricValue(0.5 * (inv + inv.T))


def _metric_matrix(metric_fn: Callable, x: np.ndarray, chart_id: str) -> np.ndarray:
    value = metric_fn(ChartPoint(chart_id, x))
    if isinstance(value, MetricValue):
        return value.matrix
    return np.atleast_2d(np.asarray(value, dtype=float))


def christoffel_fd(
    metric_fn: Callable[[ChartPoint], MetricValue],
    p: ChartPoint,
    h: float = FD_STEP,
    inside: Callable[[np.ndarray], bool] | None = None,
) -> ChristoffelValue:
    """Levi-Civita symbols from central differences of the metric.

    The step along coordinate ``l`` is ``h * max(1, |x_l|)``. ``inside`` is an
    optional domain predicate; the stencil (with a 2-step margin) must stay
    inside it, otherwise BoundaryProximity is raised. A metric_fn that
    raises OutOfDomain on the stencil is reported the same way.
    """
    x = p.array
    d = x.size
    steps = h * np.maximum(1.0, np.abs(x))
    if inside is not None:
        for l in range(d):
            for sign in (-2.0, 2.0):
                probe = x.copy()
                probe[l] += sign * steps[l]
                if not inside(probe):
                    raise BoundaryProximity(
                        f"finite-difference stencil leaves the domain along coordinate {l} at {tuple(x)}"
                    )
    try:
        g = _metric_matrix(metric_fn, x, p.chart_id)
        dg = np.empty((d, d, d))  # dg[l, i, j] = d_l g_ij
        for l in range(d):
            e = np.zeros(d)
            e[l] = steps[l]
            dg[l] = (_metric_matrix(metric_fn, x + e, p.chart_id) - _metric_matrix(metric_fn, x - e, p.chart_id)) / (
                2.0 * steps[l]
            )
    except OutOfDomain as exc:
        raise BoundaryProximity(f"finite-difference stencil leaves the domain: {exc}") from exc

    ginv = invert_metric(MetricValue(0.5 * (g + g.T))).matrix
    # lowered[l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
    lowered = dg.transpose(2, 0, 1) + dg.transpose(2, 1, 0) - dg
    gamma = 0.5 * np.einsum("kl,lij->kij", ginv, lowered)
    return ChristoffelValue(gamma)


def geodesic_rhs(gamma: ChristoffelValue, s: GeodesicState) -> tuple[np.ndarray, np.ndarray]:
    """Time derivative ``(velocity, acceleration)`` of a geodesic state."""
    if gamma.dim != s.dim:
        raise DimensionMismatch(f"Christoffel dimension {gamma.dim} does not match state dimension {s.dim}")
    v = s.velocity.array
    acc = -np.einsum("kij,i,j->k", gamma.gamma, v, v)
    return v, acc
