"""Acceptance criteria 1-12, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they
are produced; a summary table is also printed at the end of any session
that includes this file.
"""

import math
import time

import numpy as np
import pytest

from conftest import ALL_MODELS, make_state
from geostat.analysis import uncertainty_product
from geostat.cli import main
from geostat.core import ChartPoint, christoffel_fd
from geostat.integrator import STOP_BOUNDARY, IntegratorConfig, detect_turning_points, integrate
from geostat.models import (
    ModelId,
    christoffel_analytic,
    constants,
    entropy_of_radial,
    metric_at,
    orbit_bounds,
    point,
    state_from_constants,
    y_velocity,
)
from geostat.pullback import verify_against_closed_form

B, Q, GC, GQ = ModelId.BERNOULLI, ModelId.QUBIT, ModelId.GAUSSIAN_CLASSICAL, ModelId.GAUSSIAN_QUANTUM

# frozen oracle values, written out independently of the package
QUBIT_P_BOUNDS = (0.146447, 0.853553)  # (1 -/+ 1/sqrt 2) / 2
GQ_SIGMA_BOUNDS = (0.541196, 1.306563)  # sqrt((2 -/+ sqrt 2) / 2)
MARGIN = 1e-6


class Runs:
    """Acceptance trajectories, integrated once and shared by criteria 7, 9 and 10."""

    def __init__(self):
        self.bernoulli = integrate(B, make_state(B, (0.5,), (0.5,)))
        self.qubit = integrate(Q, state_from_constants(Q, constants(Q, A=0.5, C=1.0)), horizon=50)
        self.gc_collapse = integrate(GC, state_from_constants(GC, constants(GC, A=1.0, C=2.0)), horizon=20)
        self.gq_bounce = integrate(GQ, state_from_constants(GQ, constants(GQ, A=1.0, B=1.0, C=2.0)), horizon=30)
        self.qubit_flat = integrate(Q, make_state(Q, (0.3, 1.0), (0.2, 0.0)), horizon=10)
        self.bernoulli_flat = integrate(B, make_state(B, (0.3,), (0.2,)), horizon=10)
        self.gq_flat = integrate(GQ, make_state(GQ, (0.2, 1.0, 0.4), (0.6, 0.3, 0.0)), horizon=10)
        self.gc_flat = integrate(GC, make_state(GC, (0.2, 1.0), (0.6, 0.3)), horizon=10)
        self.qubit_rest = integrate(Q, make_state(Q, (0.3, 2.0), (0.0, 0.0)), horizon=10)
        self.exponential = {}
        for model in (GC, GQ):
            for sign in (1.0, -1.0):
                v = (0.0, sign * math.sqrt(2 * 1.5)) + ((0.0,) if model is GQ else ())
                x = (0.7, 1.0) + ((0.0,) if model is GQ else ())
                self.exponential[model, sign] = integrate(model, make_state(model, x, v), horizon=5)

    def all(self):
        named = {k: v for k, v in vars(self).items() if k != "exponential"}
        named.update({f"exp-{m.value}-{'+' if s > 0 else '-'}": t for (m, s), t in self.exponential.items()})
        return named


@pytest.fixture(scope="module", autouse=True)
def clock():
    return time.perf_counter()


@pytest.fixture(scope="module")
def runs():
    return Runs()


def test_01_metric_oracle(criterion):
    start = time.perf_counter()
    rows = [verify_against_closed_form(m) for m in ALL_MODELS]
    elapsed = time.perf_counter() - start
    worst = max(max(r.max_g_deviation, r.max_omega_deviation) for r in rows)
    ok = all(r.points == 9 for r in rows) and worst <= 1e-6 and elapsed < 5.0
    criterion(1, "metric oracle equivalence", ok, f"max deviation {worst:.2e} <= 1e-6, {elapsed:.2f}s < 5s")
    assert ok


def test_02_classical_boundary_arrival(criterion, runs):
    t = runs.bernoulli
    ydot = y_velocity(B, t.coords, t.velocities)
    dt = abs(t.times[-1] - math.pi / 2)
    spread = float(np.max(np.abs(ydot - ydot[0])))
    ok = t.stop_reason == STOP_BOUNDARY and t.radial[-1] > 0.5 and dt <= 0.01 and spread <= 1e-8
    criterion(2, "classical boundary arrival", ok, f"|t_stop - pi/2| = {dt:.2e} <= 0.01, ydot spread {spread:.1e} <= 1e-8")
    assert ok


def test_03_quantum_confinement(criterion, runs):
    p = runs.qubit.radial
    err = max(abs(p.min() - QUBIT_P_BOUNDS[0]), abs(p.max() - QUBIT_P_BOUNDS[1]))
    clearance = float(np.min(np.minimum(p, 1 - p)))
    ok = runs.qubit.times[-1] == 50 and err <= 1e-4 and clearance > 1e-3
    criterion(3, "quantum confinement", ok, f"extrema error {err:.1e} <= 1e-4, boundary clearance {clearance:.3f} > 1e-3")
    assert ok


def test_04_gaussian_classical_collapse(criterion, runs):
    t = runs.gc_collapse
    turns = detect_turning_points(t, "sigma")
    turn_err = abs(turns[0].value - math.sqrt(2)) if len(turns) == 1 else math.inf
    sigma_end = float(t.radial[-1])
    mudot_end = abs(float(t.velocity("mu")[-1]))
    ok = turn_err <= 1e-4 and sigma_end < 1e-4 and t.times[-1] < 20 and mudot_end < 1e-6
    criterion(
        4, "gaussian classical collapse", ok,
        f"turning point error {turn_err:.1e} <= 1e-4, final sigma {sigma_end:.1e} < 1e-4, |mudot| {mudot_end:.1e} < 1e-6",
    )
    assert ok


def test_05_gaussian_quantum_bounce(criterion, runs):
    values = [e.value for e in detect_turning_points(runs.gq_bounce, "sigma")]
    lows = [v for v in values if v < 1]
    highs = [v for v in values if v >= 1]
    err = max(max(abs(v - GQ_SIGMA_BOUNDS[0]) for v in lows), max(abs(v - GQ_SIGMA_BOUNDS[1]) for v in highs))
    ok = len(lows) >= 5 and err <= 1e-4
    criterion(5, "gaussian quantum bounce", ok, f"{len(lows)} bounces >= 5, extrema error {err:.1e} <= 1e-4")
    assert ok


def test_06_totally_geodesic_recovery(criterion, runs):
    q, b = runs.qubit_flat, runs.bernoulli_flat
    phi_spread = float(np.ptp(q.coordinate("phi")))
    n = min(len(q), len(b))
    pq = np.column_stack([q.coords[:n, 0], q.velocities[:n, 0]])
    pb = np.column_stack([b.coords[:n, 0], b.velocities[:n, 0]])
    qubit_dev = float(np.max(np.abs(pq - pb))) if np.array_equal(q.times[:n], b.times[:n]) else math.inf
    gq, gc = runs.gq_flat, runs.gc_flat
    alpha_spread = float(np.ptp(gq.coordinate("alpha")))
    cols = [0, 1]
    gauss_dev = (
        float(max(np.max(np.abs(gq.coords[:, cols] - gc.coords)), np.max(np.abs(gq.velocities[:, cols] - gc.velocities))))
        if np.array_equal(gq.times, gc.times)
        else math.inf
    )
    ok = phi_spread <= 1e-10 and qubit_dev <= 1e-6 and alpha_spread <= 1e-10 and gauss_dev <= 1e-6
    criterion(
        6, "totally geodesic recovery", ok,
        f"phi spread {phi_spread:.1e}, qubit-bernoulli {qubit_dev:.1e}, alpha spread {alpha_spread:.1e}, "
        f"quantum-classical gaussian {gauss_dev:.1e}",
    )
    assert ok


def _halving_ratio(model):
    starts = {
        B: make_state(B, (0.3,), (0.2,)),
        Q: state_from_constants(Q, constants(Q, A=0.3, C=0.5)),
        GC: state_from_constants(GC, constants(GC, A=0.5, C=1.0)),
        GQ: state_from_constants(GQ, constants(GQ, A=1.0, B=1.0, C=2.0)),
    }
    horizon = 1.0 if model is B else 10.0
    drifts = []
    for h in (0.02, 0.01):
        # plain fixed-step RK4 so that the nominal step is the only step
        cfg = IntegratorConfig(step_size=h, drift_tolerance=1.0, substep_fraction=None)
        drifts.append(max(integrate(model, starts[model], cfg, horizon=horizon).conserved_drift.values()))
    return drifts[0] / drifts[1]


def test_07_conserved_quantity_drift(criterion, runs):
    worst = max(max(t.conserved_drift.values()) for t in runs.all().values())
    ratios = {m: _halving_ratio(m) for m in ALL_MODELS}
    ok = worst <= 1e-6 and min(ratios.values()) >= 8
    text = ", ".join(f"{m.value} {r:.1f}" for m, r in ratios.items())
    criterion(7, "conserved-quantity drift", ok, f"max drift {worst:.1e} <= 1e-6, halving ratios {text} (>= 8)")
    assert ok


def test_08_special_orbits(criterion, runs):
    rest = runs.qubit_rest
    rest_dev = float(np.max(np.abs(rest.coords - rest.coords[0])))
    worst, mu_dev = 0.0, 0.0
    rate = math.sqrt(2 * 1.5)
    for (model, sign), t in runs.exponential.items():
        expected = np.exp(sign * rate * t.times)
        worst = max(worst, float(np.max(np.abs(t.radial / expected - 1))))
        mu_dev = max(mu_dev, float(np.ptp(t.coordinate("mu"))))
    ok = rest.conserved_initial.C == 0 and rest_dev <= 1e-12 and worst <= 1e-6 and mu_dev == 0.0
    criterion(
        8, "special orbits", ok,
        f"C=0 displacement {rest_dev:.1e} <= 1e-12, exp(+/-sqrt(2C)t) rel error {worst:.1e} <= 1e-6, mu spread {mu_dev:.1e}",
    )
    assert ok


def test_09_entropy_endpoints(criterion, runs):
    classical = []
    for t in (runs.bernoulli, runs.gc_collapse):
        floor = float(entropy_of_radial(t.model, MARGIN if t.model.is_gaussian else 1 - MARGIN))
        classical.append(abs(float(t.entropy_series()[-1]) - floor))
    quantum = []
    for t in (runs.qubit, runs.gq_bounce):
        lower = orbit_bounds(t.model, t.conserved_initial).lower
        # entropy grows towards p = 1/2, so the p lower bound gives the qubit minimum
        floor = float(entropy_of_radial(t.model, lower))
        quantum.append(float(t.entropy_series().min()) - floor)
    ok = max(classical) <= 0.01 and min(quantum) >= -1e-9
    criterion(
        9, "entropy endpoints", ok,
        f"classical end gap {max(classical):.1e} <= 0.01 nats, quantum excess over floor {min(quantum):.1e} >= 0",
    )
    assert ok


def test_10_uncertainty_product(criterion, runs):
    gaussian = [t for t in runs.all().values() if t.model.is_gaussian]
    worst = max(float(np.max(np.abs(uncertainty_product(t).product - 0.5))) for t in gaussian)
    bounce = runs.gq_bounce
    lower = orbit_bounds(GQ, bounce.conserved_initial).lower
    gap = abs(float(uncertainty_product(bounce).delta_x.min()) - lower)
    ok = worst <= 1e-12 and gap <= 1e-4
    criterion(10, "uncertainty product", ok, f"|dx*dp - 1/2| {worst:.1e} <= 1e-12, min dx - sigma_lower {gap:.1e} <= 1e-4")
    assert ok


def test_11_christoffel_oracle(criterion):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for model in ALL_MODELS:
        for _ in range(50):
            coords = [
                rng.uniform(0.05, 0.95) if c == "p" else rng.uniform(0.3, 3.0) if c == "sigma" else rng.uniform(-3, 3)
                for c in model.coordinates
            ]
            p = point(model, *coords)
            fd = christoffel_fd(lambda c, m=model: metric_at(m, ChartPoint(m.value, c.coords)), p)
            worst = max(worst, float(np.max(np.abs(fd.gamma - christoffel_analytic(model, p).gamma))))
    ok = worst <= 1e-6
    criterion(11, "christoffel oracle", ok, f"max |FD - analytic| {worst:.1e} <= 1e-6 over 4x50 points")
    assert ok


DETERMINISM_COMMANDS = [
    ["geodesic", "--model", "gaussian-quantum", "--constants", "A=1,B=1,C=2", "--horizon", "5"],
    ["geodesic", "--model", "bernoulli", "--p0", "0.5", "--pdot0", "0.5"],
    ["portrait", "--model", "qubit", "--constants", "A=0.1,C=1;A=0.3,C=1;A=0.45,C=1", "--horizon", "10"],
    ["potential", "--model", "gaussian-quantum", "--constants", "A=0.5,B=1;A=1,B=1;A=2,B=1"],
]


def test_12_determinism(criterion, tmp_path, capsys, clock):
    checked, mismatched = 0, []
    for k, argv in enumerate(DETERMINISM_COMMANDS):
        for fmt in ("csv", "json", "svg"):
            outputs = []
            for rep in range(2):
                path = tmp_path / f"{k}-{rep}.{fmt}"
                code = main([*argv, "--format", fmt, "--out", str(path)])
                outputs.append(path.read_bytes() if code == 0 else None)
            checked += 1
            if outputs[0] is None or outputs[0] != outputs[1]:
                mismatched.append(f"{argv[0]}/{fmt}")
    capsys.readouterr()
    elapsed = time.perf_counter() - clock
    ok = not mismatched and elapsed < 60
    detail = f"{checked - len(mismatched)}/{checked} outputs byte-identical; acceptance runtime {elapsed:.1f}s < 60s"
    with capsys.disabled():
        criterion(12, "determinism", ok, detail)
    assert ok
