import math

import numpy as np
import pytest

from conftest import make_state
from geostat.analysis import (
    KIND_TO_ENDPOINT,
    EndpointClass,
    classify_endpoint,
    decimate,
    energy_identity_residual,
    entropy_along,
    phase_portrait,
    potential_profile,
    uncertainty_product,
)
from geostat.errors import NotApplicable, OutOfDomain, Unclassifiable
from geostat.integrator import IntegratorConfig, integrate
from geostat.models import ModelId, Normalization, constants, orbit_bounds, state_from_constants

B, Q, GC, GQ = ModelId.BERNOULLI, ModelId.QUBIT, ModelId.GAUSSIAN_CLASSICAL, ModelId.GAUSSIAN_QUANTUM
COARSE = IntegratorConfig(step_size=0.01)


def survey_config(cs):
    # qualitative fate only: a drift of 1e-4 is plenty, the step follows the speed scale
    return IntegratorConfig(step_size=0.01 / max(1.0, math.sqrt(cs.C)), drift_tolerance=1e-4)


def classify_until_known(model, s0, cfg, horizon=2.0, limit=640.0):
    while True:
        t = integrate(model, s0, cfg, horizon=horizon)
        try:
            return classify_endpoint(t)
        except Unclassifiable:
            if horizon >= limit:
                raise
            horizon *= 2


def random_case(model, rng):
    """Admissible constants plus an initial state that realises them."""
    if model is B:
        cs = constants(B, C=0.0 if rng.random() < 0.05 else rng.uniform(0.05, 5.0))
        return cs, state_from_constants(B, cs, at=rng.uniform(0.05, 0.95), direction=rng.choice([-1, 1]))
    if model is Q:
        A = 0.0 if rng.random() < 0.1 else rng.uniform(0.1, 1.0) * rng.choice([-1, 1])
        C = 2 * A * A * rng.uniform(1.01, 10.0) if A else rng.uniform(0.05, 3.0)
        cs = constants(Q, A=A, C=C)
        b = orbit_bounds(Q, cs)
        lo, hi = (b.lower, b.upper) if A else (0.05, 0.95)
        return cs, state_from_constants(Q, cs, at=lo + rng.uniform(0.05, 0.95) * (hi - lo), direction=rng.choice([-1, 1]))
    if model is GC:
        A = 0.0 if rng.random() < 0.3 else rng.uniform(-2.0, 2.0)
        C = rng.uniform(0.1, 4.0)
        cs = constants(GC, A=A, C=C)
        if A == 0.0:
            return cs, state_from_constants(GC, cs, at=rng.uniform(0.3, 3.0), direction=1)
        upper = orbit_bounds(GC, cs).upper
        return cs, state_from_constants(GC, cs, at=upper * rng.uniform(0.05, 0.95), direction=rng.choice([-1, 1]))
    kind = rng.choice(["bounded", "no-b", "no-a"], p=[0.5, 0.25, 0.25])
    if kind == "bounded":
        A, Bv = rng.uniform(0.2, 2.0) * rng.choice([-1, 1]), rng.uniform(0.2, 2.0) * rng.choice([-1, 1])
        cs = constants(GQ, A=A, B=Bv, C=math.sqrt(2) * abs(A * Bv) * rng.uniform(1.05, 4.0))
        b = orbit_bounds(GQ, cs)
        at = b.lower + rng.uniform(0.05, 0.95) * (b.upper - b.lower)
        return cs, state_from_constants(GQ, cs, at=at, direction=rng.choice([-1, 1]))
    if kind == "no-b":
        cs = constants(GQ, A=rng.uniform(0.2, 2.0), B=0.0, C=rng.uniform(0.1, 4.0))
        upper = orbit_bounds(GQ, cs).upper
        return cs, state_from_constants(GQ, cs, at=upper * rng.uniform(0.05, 0.95), direction=rng.choice([-1, 1]))
    cs = constants(GQ, A=0.0, B=rng.uniform(-1.0, 1.0), C=rng.uniform(0.6, 4.0))
    at = max(1.0, 1.01 * orbit_bounds(GQ, cs).lower)
    return cs, state_from_constants(GQ, cs, at=at, direction=1)


class TestDecimate:
    def test_short_untouched(self):
        x = np.linspace(0, 1, 50)
        np.testing.assert_array_equal(decimate(x, x), np.arange(50))

    def test_keeps_extrema_and_limit(self):
        t = np.linspace(0, 40 * np.pi, 100_000)
        x, xd = np.sin(t), np.cos(t)
        idx = decimate(x, xd, 2000)
        assert idx.size <= 2000
        assert idx[0] == 0 and idx[-1] == x.size - 1
        assert x[idx].max() == x.max() and x[idx].min() == x.min()
        assert xd[idx].max() == xd.max() and xd[idx].min() == xd.min()


class TestPhasePortrait:
    def test_bernoulli_family_hits_boundary(self):
        family = [make_state(B, (p,), (v,)) for p in np.linspace(0.2, 0.8, 4) for v in (-0.5, 0.5)]
        portrait = phase_portrait(B, family, COARSE)
        assert len(portrait.curves) == 8 and portrait.plane == ("p", "pdot")
        for c in portrait.curves:
            assert c.stop_reason == "boundary"
            assert min(c.x[-1], 1 - c.x[-1]) == pytest.approx(1e-6, rel=1e-3)

    def test_qubit_family_bounded(self):
        family = [state_from_constants(Q, constants(Q, A=a, C=0.5)) for a in (0.1, 0.3, 0.45)]
        portrait = phase_portrait(Q, family, horizon=20)
        for c in portrait.curves:
            b = orbit_bounds(Q, c.constants)
            assert c.x.max() <= b.upper + 1e-6 and c.x.min() >= b.lower - 1e-6
            assert min(c.x.min(), 1 - c.x.max()) > 1e-3
            assert len(c.x) <= 2000

    def test_gaussian_mixed_family(self):
        family = [
            state_from_constants(GQ, constants(GQ, A=1.0, B=0.0, C=2.0)),
            state_from_constants(GQ, constants(GQ, A=1.0, B=1.0, C=2.0)),
        ]
        collapse, bounce = phase_portrait(GQ, family, horizon=20).curves
        assert not collapse.dashed and bounce.dashed
        assert collapse.stop_reason == "boundary" and collapse.x[-1] < 1e-5
        assert bounce.x.min() == pytest.approx(0.541196, abs=1e-4)

    def test_order_preserved(self):
        family = [state_from_constants(Q, constants(Q, A=a, C=0.5)) for a in (0.45, 0.1, 0.3)]
        portrait = phase_portrait(Q, family, COARSE, horizon=2)
        assert [c.constants.A for c in portrait.curves] == pytest.approx([0.45, 0.1, 0.3])


class TestPotentialProfile:
    def test_qubit_figure(self):
        prof = potential_profile(Q, (-1.4, 1.4), 281, constants(Q, A=1.0, C=3.0), Normalization.FIGURE)
        assert prof.u_values[140] == pytest.approx(16.0)
        assert prof.minimum == (0.0, pytest.approx(16.0))

    def test_gaussian_quantum_minimum(self):
        prof = potential_profile(GQ, (-5, 3), 100, constants(GQ, A=1.0, B=1.0, C=2.0))
        y_e, u_e = prof.minimum
        assert y_e == pytest.approx(-0.173287, abs=1e-6) and u_e == pytest.approx(1.414214, abs=1e-6)
        assert prof.u_values[0] == pytest.approx(11013.2, abs=0.05)

    @pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
    def test_gaussian_quantum_minima_family(self, a):
        prof = potential_profile(GQ, (-3, 3), 10, constants(GQ, A=a, B=1.0, C=10.0))
        assert prof.minimum[0] == pytest.approx(0.25 * math.log(1 / (2 * a * a)))

    def test_qubit_asymptote_clearance(self):
        with pytest.raises(OutOfDomain):
            potential_profile(Q, (-1.5704, 0.0), 10, constants(Q, A=1.0, C=3.0))

    def test_bad_range(self):
        with pytest.raises(ValueError):
            potential_profile(GC, (1.0, -1.0), 10, constants(GC, A=1.0, C=3.0))


class TestClassify:
    def test_bernoulli_boundary(self):
        t = integrate(B, make_state(B, (0.5,), (0.5,)))
        assert classify_endpoint(t) is EndpointClass.MIN_ENTROPY_BOUNDARY

    def test_qubit_oscillation(self):
        t = integrate(Q, state_from_constants(Q, constants(Q, A=0.3, C=0.5)), COARSE, horizon=20)
        assert classify_endpoint(t) is EndpointClass.BOUNDED_OSCILLATION

    def test_gaussian_divergent(self):
        t = integrate(GC, make_state(GC, (0.0, 1.0), (0.0, 1.0)), COARSE, horizon=10)
        assert classify_endpoint(t) is EndpointClass.SIGMA_DIVERGENT

    def test_equilibrium(self):
        t = integrate(Q, make_state(Q, (0.5, 0.0), (0.0, 1.0)), COARSE, horizon=5)
        assert classify_endpoint(t) is EndpointClass.EQUILIBRIUM

    def test_unclassifiable(self):
        t = integrate(Q, state_from_constants(Q, constants(Q, A=0.3, C=0.5)), COARSE, horizon=0.05)
        with pytest.raises(Unclassifiable):
            classify_endpoint(t)

    @pytest.mark.parametrize("model", list(ModelId))
    def test_consistent_with_orbit_bounds(self, model):
        rng = np.random.default_rng(100 + list(ModelId).index(model))
        mismatches = []
        for _ in range(200):
            cs, s0 = random_case(model, rng)
            expected = KIND_TO_ENDPOINT[orbit_bounds(model, cs).kind]
            got = classify_until_known(model, s0, survey_config(cs))
            if got is not expected:
                mismatches.append((cs, got, expected))
        assert mismatches == []


class TestEntropy:
    def test_bernoulli_decreasing_to_zero(self):
        t = integrate(B, make_state(B, (0.5,), (0.5,)))
        _, h = entropy_along(t)
        last_cross = np.flatnonzero(np.diff(np.sign(t.radial - 0.5)) != 0)
        start = last_cross[-1] + 1 if last_cross.size else 0
        assert np.all(np.diff(h[start:]) < 0)
        assert h[-1] < 0.01

    def test_qubit_equilibrium_constant(self):
        t = integrate(Q, make_state(Q, (0.5, 0.0), (0.0, 1.0)), COARSE, horizon=5)
        _, h = entropy_along(t)
        assert np.max(np.abs(h - math.log(2))) < 1e-12

    def test_gaussian_quantum_bounded(self):
        cs = constants(GQ, A=1.0, B=1.0, C=2.0)
        b = orbit_bounds(GQ, cs)
        t = integrate(GQ, state_from_constants(GQ, cs), horizon=15)
        _, h = entropy_along(t)
        lo = 0.5 * math.log(2 * math.pi * math.e * b.lower**2)
        hi = 0.5 * math.log(2 * math.pi * math.e * b.upper**2)
        assert h.min() >= lo - 1e-6 and h.max() <= hi + 1e-6


class TestUncertainty:
    def test_product_is_half(self):
        t = integrate(GQ, state_from_constants(GQ, constants(GQ, A=1.0, B=1.0, C=2.0)), horizon=10)
        u = uncertainty_product(t)
        assert np.max(np.abs(u.product - 0.5)) <= 1e-12
        assert u.delta_x.min() == pytest.approx(orbit_bounds(GQ, constants(GQ, A=1, B=1, C=2)).lower, abs=1e-4)

    def test_classical_infimum_zero(self):
        t = integrate(GC, state_from_constants(GC, constants(GC, A=1.0, C=2.0)), horizon=20)
        dx = uncertainty_product(t).delta_x
        assert 0 < dx.min() < 1e-5

    def test_discrete_not_applicable(self):
        with pytest.raises(NotApplicable):
            uncertainty_product(integrate(B, make_state(B, (0.5,), (0.5,))))


class TestEnergyIdentity:
    @pytest.mark.parametrize(
        "model, s0",
        [
            (B, make_state(B, (0.3,), (0.4,))),
            (Q, state_from_constants(Q, constants(Q, A=0.3, C=0.5))),
            (GC, state_from_constants(GC, constants(GC, A=1.0, C=2.0))),
            (GQ, state_from_constants(GQ, constants(GQ, A=1.0, B=1.0, C=2.0))),
        ],
    )
    def test_residual(self, model, s0):
        t = integrate(model, s0, horizon=10)
        for norm in Normalization:
            assert np.max(np.abs(energy_identity_residual(t, norm))) <= 1e-6 * max(1.0, t.conserved_initial.C)
