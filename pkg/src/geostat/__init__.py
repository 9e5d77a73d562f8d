"""Geodesic laboratory for classical and quantum statistical manifolds."""

from .core import (
    ChartPoint,
    ChristoffelValue,
    GeodesicState,
    MetricValue,
    TangentVector,
    christoffel_fd,
    geodesic_rhs,
    invert_metric,
)
from .models import (
    ConservedSet,
    ModelId,
    Normalization,
    OrbitBounds,
    christoffel_analytic,
    conserved_quantities,
    constants,
    effective_potential,
    equilibria,
    from_y_chart,
    metric_at,
    orbit_bounds,
    point,
    shannon_entropy,
    state_from_constants,
    symplectic_at,
    to_y_chart,
)
from .integrator import IntegratorConfig, Trajectory, TurningEvent, detect_turning_points, drift_report, integrate

__version__ = "0.1.0"
