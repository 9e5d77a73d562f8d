"""``geostat`` command line.

Exit codes: 0 success, 2 input or domain error, 3 integrator failure,
4 verification failure. Errors go to stderr prefixed with their class name.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as gio
from .analysis import entropy_along, phase_portrait, potential_profile, uncertainty_product
from .errors import (
    ConfigError,
    DimensionMismatch,
    DriftExceeded,
    GeostatError,
    InadmissibleConstants,
    InvalidInitialState,
    NotApplicable,
    OutOfDomain,
)
from .integrator import IntegratorConfig, integrate
from .models import (
    ConservedSet,
    ModelId,
    Normalization,
    check_domain,
    constants,
    equilibria,
    orbit_bounds,
    point,
    state_from_constants,
)
from .core import GeodesicState, TangentVector
from .pullback import DEFAULT_NODES, QuadratureRule, VerificationRow, default_rule, verify_against_closed_form

EXIT_OK, EXIT_INPUT, EXIT_INTEGRATOR, EXIT_VERIFY = 0, 2, 3, 4
DEFAULT_HORIZON = 10.0
ALL_COORDS = ("p", "phi", "mu", "sigma", "alpha")
DEFAULT_COORDS = {"p": 0.5, "phi": 0.0, "mu": 0.0, "sigma": 1.0, "alpha": 0.0}

CONFIG_KEYS = {
    "model",
    "initial",
    "family",
    "dt",
    "max_steps",
    "horizon",
    "margin",
    "constants",
    "direction",
    "format",
    "out",
    "log_axis",
    "normalization",
    "y_range",
    "n_points",
    "models",
    "nodes",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"ConfigError: {message}", file=sys.stderr)
        sys.exit(EXIT_INPUT)


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, DriftExceeded):
        return EXIT_INTEGRATOR
    if isinstance(exc, (OutOfDomain, InadmissibleConstants, InvalidInitialState, ConfigError, DimensionMismatch, NotApplicable)):
        return EXIT_INPUT
    if isinstance(exc, GeostatError):
        return EXIT_INTEGRATOR
    return EXIT_INPUT


# ---------------------------------------------------------------------------
# option handling


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def _pick(args, cfg: dict, name: str, default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return cfg.get(name, default)


def _initial_flags(args, cfg: dict, model: ModelId) -> dict[str, str]:
    """Per-coordinate ``<name>0`` / ``<name>dot0`` values; flags override the config."""
    allowed = {f"{c}0" for c in model.coordinates} | {f"{c}dot0" for c in model.coordinates}
    merged: dict[str, str] = {}
    initial = cfg.get("initial", {})
    if not isinstance(initial, dict):
        raise ConfigError("config 'initial' must be an object")
    for key, value in initial.items():
        if key not in allowed:
            raise ConfigError(f"unknown coordinate key {key!r} for {model.value}; allowed {sorted(allowed)}")
        merged[key] = str(value)
    for c in ALL_COORDS:
        for key in (f"{c}0", f"{c}dot0"):
            value = getattr(args, key, None)
            if value is None:
                continue
            if key not in allowed:
                raise ConfigError(f"--{key} does not apply to {model.value} (coordinates {model.coordinates})")
            merged[key] = value
    return merged


def _parse_values(text: str, allow_range: bool) -> list[float]:
    text = str(text).strip()
    if ":" in text:
        if not allow_range:
            raise ConfigError(f"ranges like {text!r} are only accepted by 'portrait'")
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range must be lo:hi:n, got {text!r}")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise ConfigError("range count must be positive")
        return [float(v) for v in np.linspace(lo, hi, n)]
    try:
        return [float(text)]
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def _states_from_flags(model: ModelId, flags: dict[str, str], allow_range: bool) -> list[GeodesicState]:
    axes = []
    for c in model.coordinates:
        axes.append(_parse_values(flags.get(f"{c}0", DEFAULT_COORDS[c]), allow_range))
    for c in model.coordinates:
        axes.append(_parse_values(flags.get(f"{c}dot0", 0.0), allow_range))
    states = []
    d = model.dim
    for combo in itertools.product(*axes):
        x = check_domain(model, combo[:d])
        states.append(GeodesicState(point(model, *x), TangentVector(model.value, combo[d:])))
    return states


def parse_constants(text, model: ModelId) -> list[ConservedSet]:
    """``"A=0.5,C=1;A=1,C=3"`` (or a list of dicts) into ConservedSets."""
    if isinstance(text, list):
        items = [dict(item) for item in text]
    else:
        items = []
        for chunk in str(text).split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            entry = {}
            for pair in chunk.split(","):
                key, sep, value = pair.partition("=")
                if not sep:
                    raise ConfigError(f"constants must look like A=..,B=..,C=.., got {pair!r}")
                entry[key.strip()] = value.strip()
            items.append(entry)
    sets = []
    for entry in items:
        unknown = set(entry) - set(model.constant_names)
        if unknown:
            raise ConfigError(f"{model.value} has no constants {sorted(unknown)}; expected {model.constant_names}")
        try:
            values = {k: float(v) for k, v in entry.items()}
        except ValueError as exc:
            raise ConfigError(f"bad constant value: {exc}") from None
        sets.append(constants(model, **values) if "C" in values else _missing_c(model, values))
    if not sets:
        raise ConfigError("no constants given")
    return sets


def _missing_c(model: ModelId, values: dict) -> ConservedSet:
    # potentials only need A/B; C is irrelevant there
    return constants(model, C=0.0, **values)


def _integrator_config(args, cfg: dict) -> IntegratorConfig:
    kwargs = {}
    dt = _pick(args, cfg, "dt")
    if dt is not None:
        kwargs["step_size"] = float(dt)
    steps = _pick(args, cfg, "max_steps")
    if steps is not None:
        kwargs["max_steps"] = int(steps)
    margin = _pick(args, cfg, "margin")
    if margin is not None:
        kwargs["boundary_margin"] = float(margin)
    try:
        return IntegratorConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _model(args, cfg: dict) -> ModelId:
    name = _pick(args, cfg, "model")
    if name is None:
        raise ConfigError("--model is required")
    try:
        return ModelId.parse(name)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _initial_states(args, cfg: dict, model: ModelId, allow_range: bool) -> list[GeodesicState]:
    flags = _initial_flags(args, cfg, model)
    const_text = _pick(args, cfg, "constants")
    direction = float(_pick(args, cfg, "direction", 1.0))
    if const_text is None:
        family = cfg.get("family")
        if family is not None and getattr(args, "command", "") == "portrait" and not flags:
            states = []
            for entry in family:
                states += _states_from_flags(model, _initial_flags(argparse.Namespace(), {"initial": entry}, model), False)
            return states
        return _states_from_flags(model, flags, allow_range)
    speeds = {k for k in flags if k.endswith("dot0")}
    if speeds:
        raise ConfigError(f"velocities {sorted(speeds)} conflict with --constants")
    base = [_parse_values(flags.get(f"{c}0", DEFAULT_COORDS[c]), allow_range) for c in model.coordinates]
    states = []
    for cs in parse_constants(const_text, model):
        for coords in itertools.product(*base):
            states.append(state_from_constants(model, cs, coords=coords, direction=direction))
    if not allow_range and len(states) != 1:
        raise ConfigError("geodesic takes a single constant set")
    return states


def _horizon(args, cfg: dict) -> float | None:
    value = _pick(args, cfg, "horizon", DEFAULT_HORIZON)
    if value is None:
        return None
    value = float(value)
    if not value > 0:
        raise ConfigError("--horizon must be positive")
    return value


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _format(args, cfg: dict, allowed: tuple[str, ...], default: str) -> str:
    value = _pick(args, cfg, "format", default)
    if value not in allowed:
        raise ConfigError(f"format must be one of {allowed}, got {value!r}")
    return value


# ---------------------------------------------------------------------------
# commands


@dataclass(frozen=True)
class RunConfig:
    """Everything a single-trajectory command needs, after flags and config are merged."""

    model: ModelId
    initial: GeodesicState
    integrator: IntegratorConfig
    horizon: float | None
    format: str
    out: str | None = None


def run_config(args, formats: tuple[str, ...] = ("csv", "json", "svg")) -> RunConfig:
    cfg = _load_config(args.config)
    model = _model(args, cfg)
    fmt = _format(args, cfg, formats, formats[0])
    (s0,) = _initial_states(args, cfg, model, allow_range=False)
    return RunConfig(model, s0, _integrator_config(args, cfg), _horizon(args, cfg), fmt, _pick(args, cfg, "out"))


def cmd_geodesic(args) -> int:
    rc = run_config(args)
    traj = integrate(rc.model, rc.initial, rc.integrator, horizon=rc.horizon)
    text = {"csv": gio.trajectory_to_csv, "json": gio.trajectory_to_json, "svg": gio.trajectory_to_svg}[rc.format](traj)
    _emit(text, rc.out)
    return EXIT_OK


def cmd_portrait(args) -> int:
    cfg = _load_config(args.config)
    model = _model(args, cfg)
    fmt = _format(args, cfg, ("csv", "json", "svg"), "svg")
    family = _initial_states(args, cfg, model, allow_range=True)
    portrait = phase_portrait(model, family, _integrator_config(args, cfg), horizon=_horizon(args, cfg))
    if fmt == "csv":
        text = gio.portrait_to_csv(portrait)
    elif fmt == "json":
        text = json.dumps(gio.portrait_to_dict(portrait), indent=1) + "\n"
    else:
        text = gio.portrait_to_svg(portrait)
    _emit(text, _pick(args, cfg, "out"))
    return EXIT_OK


def _y_range(text) -> tuple[float, float]:
    if isinstance(text, (list, tuple)):
        lo, hi = text
    else:
        lo, sep, hi = str(text).partition(":")
        if not sep:
            raise ConfigError(f"--y-range must be lo:hi, got {text!r}")
    return float(lo), float(hi)


def cmd_potential(args) -> int:
    cfg = _load_config(args.config)
    model = _model(args, cfg)
    fmt = _format(args, cfg, ("csv", "json", "svg"), "csv")
    default_range = "-1.4:1.4" if model in (ModelId.BERNOULLI, ModelId.QUBIT) else "-5:3"
    y_range = _y_range(_pick(args, cfg, "y_range", default_range))
    n_points = int(_pick(args, cfg, "n_points", 281))
    norm_default = "figure" if model is ModelId.QUBIT else "raw"
    normalization = Normalization(_pick(args, cfg, "normalization", norm_default))
    const_text = _pick(args, cfg, "constants")
    if const_text is None:
        raise ConfigError("--constants is required for potential")
    profiles = [potential_profile(model, y_range, n_points, cs, normalization) for cs in parse_constants(const_text, model)]
    log_axis = bool(_pick(args, cfg, "log_axis", False))
    if fmt == "csv":
        text = gio.potentials_to_csv(profiles)
    elif fmt == "json":
        text = json.dumps(gio.potentials_to_dict(profiles), indent=1) + "\n"
    else:
        text = gio.potentials_to_svg(profiles, log_axis=log_axis)
    _emit(text, _pick(args, cfg, "out"))
    return EXIT_OK


@dataclass(frozen=True)
class VerificationReport:
    rows: tuple[VerificationRow, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def as_dict(self) -> dict:
        return {
            "rows": [
                {
                    "model": r.model.value,
                    "points": r.points,
                    "max_g_deviation": r.max_g_deviation,
                    "max_omega_deviation": r.max_omega_deviation,
                    "threshold": r.threshold,
                    "pass": r.passed,
                }
                for r in self.rows
            ],
            "pass": self.passed,
        }

    def table(self) -> str:
        lines = [f"{'model':<20} {'points':>6} {'max|dg|':>12} {'max|domega|':>12}  result"]
        for r in self.rows:
            lines.append(
                f"{r.model.value:<20} {r.points:>6} {r.max_g_deviation:>12.3e} {r.max_omega_deviation:>12.3e}  "
                f"{'PASS' if r.passed else 'FAIL'}"
            )
        return "\n".join(lines) + "\n"


def verification_report(models, nodes: int | None = None) -> VerificationReport:
    """Run the closed-form check per model; ``nodes`` overrides the Gauss-Hermite rule."""
    rows = []
    for model in models:
        rule = default_rule(model)
        if nodes is not None and model.is_gaussian:
            rule = QuadratureRule.gauss_hermite(nodes, allow_coarse=True)
        rows.append(verify_against_closed_form(model, q=rule))
    return VerificationReport(tuple(rows))


def cmd_verify(args) -> int:
    cfg = _load_config(args.config)
    names = _pick(args, cfg, "models")
    if names is None:
        models = list(ModelId)
    else:
        if isinstance(names, str):
            names = [n for n in names.split(",") if n.strip()]
        try:
            models = [ModelId.parse(n) for n in names]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    nodes = _pick(args, cfg, "nodes")
    try:
        report = verification_report(models, None if nodes is None else int(nodes))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    fmt = _format(args, cfg, ("table", "json"), "table")
    text = report.table() if fmt == "table" else json.dumps(report.as_dict(), indent=1) + "\n"
    _emit(text, _pick(args, cfg, "out"))
    return EXIT_OK if report.passed else EXIT_VERIFY


def _interval(b) -> str:
    left = "(" if b.lower == 0.0 and b.kind != "equilibrium" else "["
    right = ")" if math.isinf(b.upper) or (b.upper == 1.0 and b.coordinate == "p" and b.kind != "equilibrium") else "]"
    upper = "inf" if math.isinf(b.upper) else f"{b.upper:.6f}"
    return f"{left}{b.lower:.6f}, {upper}{right}"


def cmd_bounds(args) -> int:
    cfg = _load_config(args.config)
    model = _model(args, cfg)
    const_text = _pick(args, cfg, "constants")
    if const_text is None:
        raise ConfigError("--constants is required for bounds")
    (cs,) = parse_constants(const_text, model)
    bounds = orbit_bounds(model, cs)
    eq = equilibria(model, cs)
    fmt = _format(args, cfg, ("table", "json"), "table")
    if fmt == "json":
        payload = {
            "model": model.value,
            "constants": cs.as_dict(),
            "coordinate": bounds.coordinate,
            "lower": bounds.lower,
            "upper": None if math.isinf(bounds.upper) else bounds.upper,
            "kind": bounds.kind,
            "equilibria": [list(p.coords) for p in eq],
        }
        text = json.dumps(payload, indent=1) + "\n"
    else:
        eq_text = ", ".join(
            f"{model.radial_name}={p.coords[model.radial_index]:.6f}" for p in eq
        ) or "none"
        text = (
            f"model: {model.value}\n"
            f"constants: {gio._constants_label(cs)}\n"
            f"{bounds.coordinate} in {_interval(bounds)}\n"
            f"kind: {bounds.kind}\n"
            f"equilibria: {eq_text}\n"
        )
    _emit(text, _pick(args, cfg, "out"))
    return EXIT_OK


def cmd_entropy(args) -> int:
    rc = run_config(args, ("csv", "json"))
    model = rc.model
    traj = integrate(model, rc.initial, rc.integrator, horizon=rc.horizon)
    unc = uncertainty_product(traj) if model.is_gaussian else None
    if rc.format == "csv":
        text = gio.entropy_to_csv(traj, unc)
    else:
        times, ent = entropy_along(traj)
        payload = {"model": model.value, "t": times.tolist(), "entropy": ent.tolist()}
        if unc is not None:
            payload.update(delta_x=unc.delta_x.tolist(), delta_p=unc.delta_p.tolist(), product=unc.product.tolist())
        text = json.dumps(payload, indent=1) + "\n"
    _emit(text, rc.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def _add_run_flags(p: argparse.ArgumentParser, ranges: bool = False) -> None:
    hint = " (value or lo:hi:n)" if ranges else ""
    for c in ALL_COORDS:
        p.add_argument(f"--{c}0", dest=f"{c}0", metavar="X", help=f"initial {c}{hint}")
        p.add_argument(f"--{c}dot0", dest=f"{c}dot0", metavar="V", help=f"initial d{c}/dt{hint}")
    p.add_argument("--dt", type=float, help="step size (default 1e-3)")
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--margin", type=float, help="boundary stop margin (default 1e-6)")
    p.add_argument("--horizon", type=float, help=f"affine-time horizon (default {DEFAULT_HORIZON:g})")
    p.add_argument("--constants", help="A=..,B=..,C=.. (';' separates several sets)")
    p.add_argument("--direction", type=float, help="sign of the initial radial velocity with --constants")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="geostat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--model")
        p.add_argument("--config", help="JSON file; command-line flags take precedence")
        p.add_argument("--format")
        p.add_argument("--out", help="output path (default stdout)")
        return p

    p = common("geodesic", "integrate one geodesic")
    _add_run_flags(p)
    p.set_defaults(func=cmd_geodesic)

    p = common("portrait", "phase portrait of a family of geodesics")
    _add_run_flags(p, ranges=True)
    p.set_defaults(func=cmd_portrait)

    p = common("potential", "tabulate the effective potential")
    p.add_argument("--constants")
    p.add_argument("--y-range", dest="y_range")
    p.add_argument("--n", dest="n_points", type=int)
    p.add_argument("--normalization", choices=[n.value for n in Normalization])
    p.add_argument("--log-axis", dest="log_axis", action="store_const", const=True)
    p.set_defaults(func=cmd_potential)

    p = common("verify", "check the numeric pull-back against the closed-form metrics")
    p.add_argument("--models", help="comma-separated subset")
    p.add_argument("--nodes", type=int, help=f"Gauss-Hermite nodes (default {DEFAULT_NODES})")
    p.set_defaults(func=cmd_verify)

    p = common("bounds", "orbit bounds and equilibria for given constants")
    p.add_argument("--constants")
    p.set_defaults(func=cmd_bounds)

    p = common("entropy", "Shannon entropy (and Gaussian uncertainty product) along a geodesic")
    _add_run_flags(p)
    p.set_defaults(func=cmd_entropy)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits on --help (0) and on usage errors (2)
        return int(exc.code or 0)
    try:
        return args.func(args)
    except BrokenPipeError:
        # downstream reader closed early (e.g. ``| head``)
        sys.stderr.close()
        return EXIT_OK
    except (GeostatError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
