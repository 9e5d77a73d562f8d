"""Numerical pull-back of the hermitean tensor onto a parameter manifold.

A statistical model is given in polar form ``psi(x; theta) = sqrt(p) e^{i alpha}``.
For it we evaluate

    g_ij   = 1/4 E[d_i ln p  d_j ln p] + E[d_i alpha d_j alpha] - E[d_i alpha] E[d_j alpha]
    omega_ij = -(E[d_i ln p  d_j alpha] - E[d_j ln p  d_i alpha])

with expectations taken by exact summation (finite sample spaces) or by
Gauss-Hermite quadrature centred on a per-theta reference Gaussian. This is
deliberately independent of the closed forms in :mod:`geostat.models`, which
it is used to check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import GradientUnavailable, NonFiniteValue, QuadratureMismatch
from .models import ModelId, metric_at, symplectic_at

EXACT_SUM = "exact-sum"
GAUSS_HERMITE = "gauss-hermite"
MIN_NODES, MAX_NODES, DEFAULT_NODES = 16, 256, 64
FD_REL_STEP = 1e-6
NORMALIZATION_TOL = 1e-12
VERIFY_THRESHOLD = 1e-6


@dataclass(frozen=True)
class QuadratureRule:
    kind: str
    node_count: int | None = None
    allow_coarse: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.kind == EXACT_SUM:
            return
        if self.kind != GAUSS_HERMITE:
            raise ValueError(f"unknown quadrature kind {self.kind!r}")
        n = DEFAULT_NODES if self.node_count is None else int(self.node_count)
        lo = 1 if self.allow_coarse else MIN_NODES
        if not lo <= n <= MAX_NODES:
            raise ValueError(f"gauss-hermite node_count must lie in [{lo}, {MAX_NODES}], got {n}")
        object.__setattr__(self, "node_count", n)

    @classmethod
    def exact_sum(cls) -> "QuadratureRule":
        return cls(EXACT_SUM)

    @classmethod
    def gauss_hermite(cls, node_count: int = DEFAULT_NODES, allow_coarse: bool = False) -> "QuadratureRule":
        return cls(GAUSS_HERMITE, node_count, allow_coarse)


@lru_cache(maxsize=None)
def _hermgauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.hermite.hermgauss(n)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


@dataclass(frozen=True)
class StatisticalModelSpec:
    """A parametric family in polar form.

    ``sample_space`` is a finite sequence of points, or ``None`` for the real
    line. Callables take ``(x, theta)`` with ``x`` an array of sample points
    and return arrays over ``x`` (gradients: shape ``(len(x), param_dim)``).
    Real-line models must supply ``reference(theta) -> (centre, scale)``,
    the Gaussian the quadrature nodes are placed against.
    """

    sample_space: Sequence[float] | None
    log_density: Callable
    phase: Callable
    param_dim: int
    grad_log_density: Callable | None = None
    grad_phase: Callable | None = None
    reference: Callable | None = None
    name: str = "custom"

    @property
    def is_finite(self) -> bool:
        return self.sample_space is not None


@dataclass(frozen=True, eq=False)
class HermitianPullback:
    g: np.ndarray
    omega: np.ndarray


def _nodes(spec: StatisticalModelSpec, theta: np.ndarray, q: QuadratureRule) -> tuple[np.ndarray, np.ndarray]:
    """Sample points and probability weights such that ``E[f] = sum(w * f(x))``."""
    if spec.is_finite:
        if q.kind != EXACT_SUM:
            raise QuadratureMismatch("finite sample spaces require exact-sum quadrature")
        x = np.asarray(spec.sample_space, dtype=float)
        w = np.exp(np.asarray(spec.log_density(x, theta), dtype=float))
        total = float(np.sum(w))
        if not np.all(w > 0) or abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"{spec.name}: probabilities must be positive and sum to 1 (sum={total!r})")
        return x, w
    if q.kind != GAUSS_HERMITE:
        raise QuadratureMismatch("real-line sample spaces require gauss-hermite quadrature")
    if spec.reference is None:
        raise QuadratureMismatch(f"{spec.name}: real-line model needs a reference (centre, scale)")
    centre, scale = spec.reference(theta)
    t, wt = _hermgauss(q.node_count)
    x = centre + math.sqrt(2.0) * scale * t
    # int p f dx = int e^{-t^2} [sqrt(2) s e^{t^2} p(x(t))] f dt
    log_p = np.asarray(spec.log_density(x, theta), dtype=float)
    w = wt * math.sqrt(2.0) * scale * np.exp(t * t + log_p)
    return x, w


def _finite(value, what: str):
    if not np.all(np.isfinite(value)):
        raise NonFiniteValue(f"non-finite {what}")
    return value


def expectation(spec: StatisticalModelSpec, f: Callable, theta, q: QuadratureRule) -> float:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    x, w = _nodes(spec, theta, q)
    fx = np.asarray(f(x), dtype=float)
    if fx.shape != x.shape:
        fx = np.array([float(f(xi)) for xi in x])
    return float(_finite(np.sum(w * fx), "expectation value"))


def _fd_gradient(fn: Callable, x: np.ndarray, theta: np.ndarray, what: str) -> np.ndarray:
    grad = np.empty((x.size, theta.size))
    for i in range(theta.size):
        h = FD_REL_STEP * max(1.0, abs(theta[i]))
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        grad[:, i] = (np.asarray(fn(x, up), dtype=float) - np.asarray(fn(x, dn), dtype=float)) / (2.0 * h)
    if not np.all(np.isfinite(grad)):
        raise GradientUnavailable(f"finite differences of the {what} are not finite")
    return grad


def _gradient(callback, fn, x, theta, what):
    if callback is None:
        return _fd_gradient(fn, x, theta, what)
    grad = np.asarray(callback(x, theta), dtype=float).reshape(x.size, theta.size)
    if not np.all(np.isfinite(grad)):
        raise GradientUnavailable(f"{what} gradient callback returned non-finite values")
    return grad


def pullback_hermitian(spec: StatisticalModelSpec, theta, q: QuadratureRule) -> HermitianPullback:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.size != spec.param_dim:
        raise ValueError(f"{spec.name}: expected {spec.param_dim} parameters, got {theta.size}")
    x, w = _nodes(spec, theta, q)
    score = _gradient(spec.grad_log_density, spec.log_density, x, theta, "log-density")
    dphase = _gradient(spec.grad_phase, spec.phase, x, theta, "phase")

    fisher = np.einsum("n,ni,nj->ij", w, score, score)
    mean_phase = w @ dphase
    phase_cov = np.einsum("n,ni,nj->ij", w, dphase, dphase) - np.outer(mean_phase, mean_phase)
    g = 0.25 * fisher + phase_cov
    cross = np.einsum("n,ni,nj->ij", w, score, dphase)
    omega = -(cross - cross.T)
    _finite(g, "metric")
    _finite(omega, "symplectic form")
    return HermitianPullback(0.5 * (g + g.T), 0.5 * (omega - omega.T))


# ---------------------------------------------------------------------------
# the four built-in families, with analytic gradients

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _bernoulli_logp(x, th):
    p = th[0]
    return np.where(x == 0, math.log(p), math.log1p(-p))


def _bernoulli_dlogp(x, th):
    p = th[0]
    return np.where(x == 0, 1.0 / p, -1.0 / (1.0 - p)).reshape(-1, 1)


def _gauss_logp(x, th):
    mu, sigma = th[0], th[1]
    return -((x - mu) ** 2) / (2.0 * sigma**2) - math.log(sigma) - _LOG_SQRT_2PI


def _gauss_dlogp(x, th, dim):
    mu, sigma = th[0], th[1]
    z = x - mu
    out = np.zeros((x.size, dim))
    out[:, 0] = z / sigma**2
    out[:, 1] = z * z / sigma**3 - 1.0 / sigma
    return out


def _zero_phase(x, th):
    return np.zeros_like(x, dtype=float)


def builtin_spec(model: ModelId | str, analytic_gradients: bool = True) -> StatisticalModelSpec:
    """Polar-form family whose pull-back should reproduce ``metric_at(model)``.

    With ``analytic_gradients=False`` the engine falls back to finite
    differences in theta.
    """
    model = ModelId.parse(model)
    if model is ModelId.BERNOULLI:
        spec = StatisticalModelSpec(
            (0.0, 1.0),
            _bernoulli_logp,
            _zero_phase,
            1,
            _bernoulli_dlogp,
            lambda x, th: np.zeros((x.size, 1)),
        )
    elif model is ModelId.QUBIT:
        spec = StatisticalModelSpec(
            (0.0, 1.0),
            _bernoulli_logp,
            lambda x, th: np.where(x == 0, 0.0, th[1]),
            2,
            lambda x, th: np.column_stack([_bernoulli_dlogp(x, th)[:, 0], np.zeros(x.size)]),
            lambda x, th: np.column_stack([np.zeros(x.size), np.where(x == 0, 0.0, 1.0)]),
        )
    elif model is ModelId.GAUSSIAN_CLASSICAL:
        spec = StatisticalModelSpec(
            None,
            _gauss_logp,
            _zero_phase,
            2,
            lambda x, th: _gauss_dlogp(x, th, 2),
            lambda x, th: np.zeros((x.size, 2)),
            reference=lambda th: (th[0], th[1]),
        )
    else:
        # parameters ordered (mu, sigma, alpha); phase alpha * x
        def dphase(x, th):
            out = np.zeros((x.size, 3))
            out[:, 2] = x
            return out

        spec = StatisticalModelSpec(
            None,
            _gauss_logp,
            lambda x, th: th[2] * x,
            3,
            lambda x, th: _gauss_dlogp(x, th, 3),
            dphase,
            reference=lambda th: (th[0], th[1]),
        )
    if not analytic_gradients:
        spec = StatisticalModelSpec(
            spec.sample_space, spec.log_density, spec.phase, spec.param_dim, reference=spec.reference
        )
    return StatisticalModelSpec(
        spec.sample_space,
        spec.log_density,
        spec.phase,
        spec.param_dim,
        spec.grad_log_density,
        spec.grad_phase,
        spec.reference,
        name=model.value,
    )


# Fisher-Rao normalization of the closed form relative to the pull-back.
# The Bernoulli metric is written without the 1/4 that the pull-back carries.
CLOSED_FORM_SCALE = {
    ModelId.BERNOULLI: 4.0,
    ModelId.QUBIT: 1.0,
    ModelId.GAUSSIAN_CLASSICAL: 1.0,
    ModelId.GAUSSIAN_QUANTUM: 1.0,
}

DEFAULT_GRIDS: dict[ModelId, tuple[tuple[float, ...], ...]] = {
    ModelId.BERNOULLI: tuple((p,) for p in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)),
    ModelId.QUBIT: tuple((p, phi) for p in (0.1, 0.5, 0.9) for phi in (0.0, 2.0, 4.0)),
    ModelId.GAUSSIAN_CLASSICAL: tuple((mu, s) for s in (0.5, 1.0, 2.0) for mu in (-1.0, 0.0, 3.0)),
    ModelId.GAUSSIAN_QUANTUM: tuple(
        (mu, s, a) for s in (0.5, 1.0, 2.0) for mu, a in ((-1.0, 0.7), (0.0, -1.3), (3.0, 2.0))
    ),
}


@dataclass(frozen=True)
class VerificationRow:
    model: ModelId
    points: int
    max_g_deviation: float
    max_omega_deviation: float
    threshold: float = VERIFY_THRESHOLD

    @property
    def passed(self) -> bool:
        return self.max_g_deviation <= self.threshold and self.max_omega_deviation <= self.threshold


def default_rule(model: ModelId) -> QuadratureRule:
    return QuadratureRule.gauss_hermite() if model.is_gaussian else QuadratureRule.exact_sum()


def verify_against_closed_form(
    model: ModelId | str,
    grid: Sequence[Sequence[float]] | None = None,
    q: QuadratureRule | None = None,
    analytic_gradients: bool = True,
    threshold: float = VERIFY_THRESHOLD,
) -> VerificationRow:
    """Max deviation between the numeric pull-back and the model's closed forms."""
    model = ModelId.parse(model)
    grid = DEFAULT_GRIDS[model] if grid is None else grid
    q = default_rule(model) if q is None else q
    spec = builtin_spec(model, analytic_gradients)
    scale = CLOSED_FORM_SCALE[model]
    dg = domega = 0.0
    for theta in grid:
        h = pullback_hermitian(spec, theta, q)
        g_ref = metric_at(model, theta).matrix
        w_ref = symplectic_at(model, theta) if model.is_quantum else np.zeros_like(g_ref)
        dg = max(dg, float(np.max(np.abs(scale * h.g - g_ref))))
        domega = max(domega, float(np.max(np.abs(h.omega - w_ref))))
    return VerificationRow(model, len(grid), dg, domega, threshold)
