"""Command-line front end: config ingestion, experiment runs, result export.

Subcommands: simulate, gamma, minnorm, mintime, equivalence, sweep,
oracle-compare, gradcheck.  Each reads one JSON config, writes a summary JSON
plus CSV series into the output directory, and is deterministic: identical
configs produce byte-identical summaries apart from the wall-time field.
All numbers are emitted with 17 significant digits so results can be diffed
across machines and reimplementations.

Exit codes: 0 success, 2 invalid config (field-level diagnostics on stderr),
3 initial state inside the target ball.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from .core import (
    ControlSignal,
    SpatialGrid,
    TargetBall,
    l2_norm,
    make_nonlinearity,
    validate_initial_state,
    validate_nonlinearity,
)
from .oracle import ScalarInstance, scalar_minimal_norm, scalar_minimal_time
from .pde import (
    decay_envelope_check,
    dirichlet_eigs,
    hitting_time,
    principal_eigenvalue,
    solve_forward,
)
from .reach import ReachOptions, gradient_fd_check
from .solvers import (
    ValueCurve,
    ValuePoint,
    free_decay_time,
    minimal_norm,
    minimal_norm_curve,
    minimal_time,
    minimal_time_curve,
    verify_equivalence_bound,
    verify_equivalence_time,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INITIAL_STATE = 3

SUBCOMMANDS = ("simulate", "gamma", "minnorm", "mintime", "equivalence",
               "sweep", "oracle-compare", "gradcheck")


class ConfigError(Exception):
    """Invalid configuration; carries one message per offending field."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class RefusedRunError(Exception):
    """A structurally valid config that the experiment refuses to run."""


# ---------------------------------------------------------------------------
# Deterministic serialization: 17 significant digits everywhere.

def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _emit_json(obj, indent: int, out: list) -> None:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        keys = sorted(obj.keys())
        for i, key in enumerate(keys):
            out.append(pad + "  " + json.dumps(str(key)) + ": ")
            _emit_json(obj[key], indent + 1, out)
            out.append(",\n" if i < len(keys) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(obj):
            out.append(pad + "  ")
            _emit_json(item, indent + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "]")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj) -> str:
    out: list[str] = []
    _emit_json(obj, 0, out)
    return "".join(out) + "\n"


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if cell is None:
                cells.append("")
            elif isinstance(cell, (bool, np.bool_)):
                cells.append("true" if cell else "false")
            elif isinstance(cell, (int, np.integer)):
                cells.append(str(int(cell)))
            elif isinstance(cell, (float, np.floating)):
                cells.append(format_float(cell))
            else:
                cells.append(str(cell))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


CURVE_HEADER = ["param", "value", "bracket_lo", "bracket_hi", "oracle_value", "iterations"]


def export_curve(curve: ValueCurve, path) -> None:
    """CSV with header param,value,bracket_lo,bracket_hi,oracle_value,iterations."""
    rows = [
        [p.parameter, p.value, p.bracket_lo, p.bracket_hi, p.oracle_value, p.iterations]
        for p in curve.points
    ]
    write_csv(Path(path), CURVE_HEADER, rows)


def parse_curve(path) -> ValueCurve:
    """Inverse of :func:`export_curve` (controls and diagnostics are not stored)."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].split(",") != CURVE_HEADER:
        raise ValueError(f"{path} does not look like an exported curve")
    points = []
    for line in lines[1:]:
        cells = line.split(",")
        points.append(ValuePoint(
            parameter=float(cells[0]), value=float(cells[1]),
            bracket_lo=float(cells[2]), bracket_hi=float(cells[3]),
            oracle_value=None if cells[4] == "" else float(cells[4]),
            iterations=int(cells[5]),
        ))
    return ValueCurve(points=tuple(points))


# ---------------------------------------------------------------------------
# Config parsing and validation.

@dataclasses.dataclass
class Setup:
    """Validated configuration with the built domain objects."""

    raw: dict
    grid: SpatialGrid
    f: object
    y0: np.ndarray
    ball: TargetBall
    nt: int | None
    dt: float | None
    tol_t: float
    tol_m: float
    opts: ReachOptions
    experiment: dict

    def steps_for(self, T: float) -> int:
        if self.nt is not None:
            return self.nt
        return int(np.clip(round(T / self.dt), 200, 2000))


def _get(cfg, key, default=None):
    return cfg[key] if key in cfg else default


def build_setup(cfg: dict, config_dir: Path) -> Setup:
    errors: list[str] = []

    def fail(field, msg):
        errors.append(f"{field}: {msg}")

    grid_cfg = _get(cfg, "grid", {}) or {}
    ell = grid_cfg.get("ell", 1.0)
    n = grid_cfg.get("n", 127)
    if not isinstance(n, int) or n < 1:
        fail("grid.n", f"expected a positive integer, got {n!r}")
        n = 127
    if not isinstance(ell, (int, float)) or ell <= 0:
        fail("grid.ell", f"expected a positive number, got {ell!r}")
        ell = 1.0

    omega_cfg = _get(cfg, "omega")
    omega = None
    if omega_cfg is not None:
        if (not isinstance(omega_cfg, (list, tuple)) or len(omega_cfg) != 2
                or not all(isinstance(v, (int, float)) for v in omega_cfg)):
            fail("omega", f"expected [a, b], got {omega_cfg!r}")
        elif not (0.0 <= omega_cfg[0] < omega_cfg[1] <= ell):
            fail("omega", f"interval ({omega_cfg[0]}, {omega_cfg[1]}) must sit inside (0, {ell})")
        else:
            omega = (float(omega_cfg[0]), float(omega_cfg[1]))

    grid = None
    if not errors:
        try:
            grid = SpatialGrid.build(n=n, ell=float(ell), omega=omega)
        except ValueError as exc:
            fail("omega", str(exc))

    nl_cfg = _get(cfg, "nonlinearity", {"kind": "zero"}) or {"kind": "zero"}
    kind = nl_cfg.get("kind", "zero")
    L = nl_cfg.get("L", 1.0)
    f = None
    try:
        f = make_nonlinearity(kind, float(L))
    except (ValueError, TypeError) as exc:
        fail("nonlinearity", str(exc))

    r = _get(cfg, "r")
    ball = None
    if not isinstance(r, (int, float)) or r <= 0:
        fail("r", f"expected a positive number, got {r!r}")
    else:
        ball = TargetBall(r=float(r))

    y0 = None
    y0_cfg = _get(cfg, "y0")
    if not isinstance(y0_cfg, dict) or not ({"modes", "file"} & set(y0_cfg)):
        fail("y0", "expected an object with a 'modes' map or a 'file' path")
    elif grid is not None:
        if "modes" in y0_cfg:
            modes_map = y0_cfg["modes"]
            try:
                pairs = sorted((int(k), float(v)) for k, v in modes_map.items())
                if any(i < 1 or i > grid.n for i, _ in pairs):
                    fail("y0.modes", f"mode indices must lie in [1, {grid.n}]")
                else:
                    spec = dirichlet_eigs(grid, max(i for i, _ in pairs))
                    y0 = np.zeros(grid.n)
                    for i, c in pairs:
                        y0 += c * spec.eigenvectors[i - 1]
            except (TypeError, ValueError):
                fail("y0.modes", f"expected a map of mode index to coefficient, got {modes_map!r}")
        else:
            path = Path(y0_cfg["file"])
            if not path.is_absolute():
                path = config_dir / path
            try:
                vec = np.loadtxt(path, dtype=float).ravel()
                if vec.shape != (grid.n,):
                    fail("y0.file", f"{path} holds {vec.size} values, expected {grid.n}")
                else:
                    y0 = vec
            except OSError as exc:
                fail("y0.file", str(exc))

    nt = _get(cfg, "nt")
    dt = _get(cfg, "dt")
    if nt is not None and (not isinstance(nt, int) or nt < 1):
        fail("nt", f"expected a positive integer, got {nt!r}")
        nt = None
    if dt is not None and (not isinstance(dt, (int, float)) or dt <= 0):
        fail("dt", f"expected a positive number, got {dt!r}")
        dt = None
    if nt is None and dt is None:
        nt = 300

    sol = _get(cfg, "solver", {}) or {}
    tol_t = sol.get("tol_t", 1e-3)
    tol_m = sol.get("tol_m", 1e-3)
    opts = None
    try:
        opts = ReachOptions(
            max_iters=sol.get("max_iters", 200),
            eps_stag=sol.get("eps_stag", 1e-7),
            eps_feas_rel=sol.get("eps_feas", 1e-3),
        )
    except (ValueError, TypeError) as exc:
        fail("solver", str(exc))
    for name, val in (("solver.tol_t", tol_t), ("solver.tol_m", tol_m)):
        if not isinstance(val, (int, float)) or val <= 0:
            fail(name, f"expected a positive number, got {val!r}")

    experiment = _get(cfg, "experiment", {}) or {}
    if not isinstance(experiment, dict):
        fail("experiment", f"expected an object, got {experiment!r}")
        experiment = {}

    if errors:
        raise ConfigError(errors)
    return Setup(raw=cfg, grid=grid, f=f, y0=y0, ball=ball, nt=nt,
                 dt=None if dt is None else float(dt),
                 tol_t=float(tol_t), tol_m=float(tol_m), opts=opts,
                 experiment=experiment)


def _require_number(exp: dict, key: str, positive: bool = True) -> float:
    if key not in exp:
        raise ConfigError([f"experiment.{key}: required by this subcommand"])
    val = exp[key]
    if not isinstance(val, (int, float)) or (positive and val <= 0):
        raise ConfigError([f"experiment.{key}: expected a positive number, got {val!r}"])
    return float(val)


def _number_list(exp: dict, key: str, required: bool = True, allow_empty: bool = False):
    if key not in exp:
        if required:
            raise ConfigError([f"experiment.{key}: required by this subcommand"])
        return None
    val = exp[key]
    if (not isinstance(val, (list, tuple)) or (not val and not allow_empty)
            or not all(isinstance(v, (int, float)) for v in val)):
        what = "a list" if allow_empty else "a nonempty list"
        raise ConfigError([f"experiment.{key}: expected {what} of numbers"])
    return [float(v) for v in val]


def scalar_instance_for(setup: Setup) -> ScalarInstance | None:
    """Closed-form oracle instance, when the config is in its scope.

    Requires control on the whole interval, no reaction term, and initial
    data on the first eigenfunction alone.
    """
    if setup.f.kind != "zero":
        return None
    if not np.all(setup.grid.omega_mask == 1.0):
        return None
    modes = setup.raw.get("y0", {}).get("modes")
    if not isinstance(modes, dict) or set(modes.keys()) not in ({1}, {"1"}):
        return None
    a0 = float(next(iter(modes.values())))
    if a0 <= setup.ball.r:
        return None
    return ScalarInstance(a0=a0, r=setup.ball.r, lam=principal_eigenvalue(setup.grid))


# ---------------------------------------------------------------------------
# Subcommand handlers.  Each returns (outputs, diagnostics, series) where
# series maps a CSV filename to (header, rows).

def _point_record(point: ValuePoint) -> dict:
    return {
        "parameter": point.parameter,
        "value": point.value,
        "bracket_lo": point.bracket_lo,
        "bracket_hi": point.bracket_hi,
        "iterations": point.iterations,
        "oracle_value": point.oracle_value,
    }


def run_simulate(setup: Setup):
    T = _require_number(setup.experiment, "horizon")
    tol = float(setup.experiment.get("envelope_tol", 1e-3))
    nt = setup.steps_for(T)
    traj = solve_forward(setup.y0, ControlSignal.zeros(nt, T / nt, setup.grid),
                         setup.f, setup.grid)
    report = decay_envelope_check(traj, setup.grid, tol)
    t_hit = hitting_time(traj, setup.ball)
    lam1 = principal_eigenvalue(setup.grid)
    envelope = report.initial_norm * np.exp(-lam1 * traj.times)
    rows = [[t, nrm, env] for t, nrm, env in zip(traj.times, traj.norms, envelope)]
    outputs = {
        "horizon": T,
        "initial_norm": report.initial_norm,
        "final_norm": float(traj.norms[-1]),
        "hitting_time": t_hit,
        "envelope_max_gap": report.max_gap,
        "envelope_limit": report.limit,
        "envelope_passed": bool(report.passed),
    }
    return outputs, {"nt": nt}, {"norms.csv": (["t", "norm", "envelope"], rows)}


def run_gamma(setup: Setup):
    nt = setup.steps_for(1.0) if setup.nt is None else setup.nt
    value = free_decay_time(setup.y0, setup.ball, setup.f, setup.grid, nt=nt)
    horizon = value * 1.05 if value > 0 else 1.0
    traj = solve_forward(setup.y0, ControlSignal.zeros(nt, horizon / nt, setup.grid),
                         setup.f, setup.grid)
    rows = [[t, nrm] for t, nrm in zip(traj.times, traj.norms)]
    outputs = {"gamma": value, "radius": setup.ball.r,
               "initial_norm": l2_norm(setup.y0, setup.grid)}
    return outputs, {"nt": nt}, {"free_decay.csv": (["t", "norm"], rows)}


def run_minnorm(setup: Setup):
    T = _require_number(setup.experiment, "T")
    nt = setup.steps_for(T)
    point = minimal_norm(T, setup.y0, setup.ball, setup.f, setup.grid,
                         tol_M=setup.tol_m, opts=setup.opts, nt=nt)
    rows = []
    if point.control is not None:
        norms = point.control.step_norms()
        rows = [[k * point.control.dt, norms[k]] for k in range(point.control.nt)]
    outputs = {"T": T, "alpha": point.value, **_point_record(point)}
    return outputs, dict(point.diagnostics), {
        "control_norms.csv": (["t", "control_norm"], rows)}


def run_mintime(setup: Setup):
    M = _require_number(setup.experiment, "M", positive=False)
    if M < 0:
        raise ConfigError(["experiment.M: must be nonnegative"])
    nt = setup.steps_for(1.0) if setup.nt is None else setup.nt
    point = minimal_time(M, setup.y0, setup.ball, setup.f, setup.grid,
                         tol_T=setup.tol_t, opts=setup.opts, nt=nt)
    rows = []
    if point.control is not None:
        norms = point.control.step_norms()
        rows = [[k * point.control.dt, norms[k]] for k in range(point.control.nt)]
    outputs = {"M": M, "tau": point.value, **_point_record(point)}
    return outputs, dict(point.diagnostics), {
        "control_norms.csv": (["t", "control_norm"], rows)}


def run_equivalence(setup: Setup):
    T_grid = _number_list(setup.experiment, "T_grid", allow_empty=True)
    M_grid = _number_list(setup.experiment, "M_grid", allow_empty=True)
    nt = setup.steps_for(1.0) if setup.nt is None else setup.nt
    gamma = free_decay_time(setup.y0, setup.ball, setup.f, setup.grid, nt=nt)
    beyond = [T for T in T_grid if T > gamma]
    if beyond:
        raise RefusedRunError(
            f"T_grid entries {beyond} exceed the free-decay time {gamma:.17g}; "
            "minimal-norm horizons must stay within (0, gamma]"
        )
    rows = []
    time_reports = []
    for T in T_grid:
        rep = verify_equivalence_time(T, setup.y0, setup.ball, setup.f, setup.grid,
                                      tol_M=setup.tol_m, tol_T=setup.tol_t,
                                      opts=setup.opts, nt=nt, gamma_hint=gamma)
        time_reports.append({
            "T": rep.T, "alpha": rep.norm_value, "roundtrip": rep.time_roundtrip,
            "residual": rep.residual,
            "extension_hitting_time": rep.extension_hitting_time,
            "extension_residual": rep.extension_residual,
        })
        rows.append(["time", T, rep.norm_value, rep.time_roundtrip, rep.residual])
    bound_reports = []
    for M in M_grid:
        rep = verify_equivalence_bound(M, setup.y0, setup.ball, setup.f, setup.grid,
                                       tol_M=setup.tol_m, tol_T=setup.tol_t,
                                       opts=setup.opts, nt=nt, gamma_hint=gamma)
        bound_reports.append({
            "M": rep.M, "tau": rep.time_value, "roundtrip": rep.norm_roundtrip,
            "relative_residual": rep.relative_residual,
            "restricted_max_norm": rep.restricted_max_norm,
            "restriction_ok": bool(rep.restriction_ok),
        })
        rows.append(["bound", M, rep.time_value, rep.norm_roundtrip,
                     rep.relative_residual])
    outputs = {
        "gamma": gamma,
        "time_roundtrips": time_reports,
        "bound_roundtrips": bound_reports,
        "max_time_residual": max((r["residual"] for r in time_reports), default=0.0),
        "max_bound_residual": max((r["relative_residual"] for r in bound_reports),
                                  default=0.0),
    }
    header = ["kind", "param", "value", "roundtrip", "residual"]
    return outputs, {"nt": nt}, {"equivalence.csv": (header, rows)}


def run_sweep(setup: Setup):
    M_grid = _number_list(setup.experiment, "M_grid", required=False)
    T_grid = _number_list(setup.experiment, "T_grid", required=False)
    if M_grid is None and T_grid is None:
        raise ConfigError(["experiment: sweep needs an M_grid and/or a T_grid"])
    nt = setup.steps_for(1.0) if setup.nt is None else setup.nt
    inst = scalar_instance_for(setup)
    outputs = {}
    diagnostics = {"nt": nt}
    series = {}
    if M_grid is not None:
        curve = minimal_time_curve(M_grid, setup.y0, setup.ball, setup.f, setup.grid,
                                   tol_T=setup.tol_t, opts=setup.opts, nt=nt)
        if inst is not None:
            curve = ValueCurve(points=tuple(
                dataclasses.replace(p, oracle_value=scalar_minimal_time(inst, p.parameter))
                for p in curve.points),
                monotone=curve.monotone, diagnostics=curve.diagnostics)
        series["tau_curve.csv"] = curve
        outputs["tau"] = {
            "points": [_point_record(p) for p in curve.points],
            "strictly_decreasing": bool(curve.monotone),
            **{k: v for k, v in curve.diagnostics.items()},
        }
    if T_grid is not None:
        curve = minimal_norm_curve(T_grid, setup.y0, setup.ball, setup.f, setup.grid,
                                   tol_M=setup.tol_m, opts=setup.opts, nt=nt)
        if inst is not None:
            curve = ValueCurve(points=tuple(
                dataclasses.replace(p, oracle_value=scalar_minimal_norm(inst, p.parameter))
                for p in curve.points),
                monotone=curve.monotone, diagnostics=curve.diagnostics)
        series["alpha_curve.csv"] = curve
        outputs["alpha"] = {
            "points": [_point_record(p) for p in curve.points],
            "non_increasing": bool(curve.monotone),
            **{k: v for k, v in curve.diagnostics.items()},
        }
    return outputs, diagnostics, series


def run_oracle_compare(setup: Setup):
    inst = scalar_instance_for(setup)
    if inst is None:
        raise ConfigError([
            "experiment: oracle-compare needs the closed-form instance "
            "(omega covering the whole interval, zero nonlinearity, y0 on mode 1)"
        ])
    M_values = _number_list(setup.experiment, "M_values", required=False) or []
    T_values = _number_list(setup.experiment, "T_values", required=False) or []
    if not M_values and not T_values:
        raise ConfigError(["experiment: oracle-compare needs M_values and/or T_values"])
    nt = setup.steps_for(1.0) if setup.nt is None else setup.nt
    gamma = free_decay_time(setup.y0, setup.ball, setup.f, setup.grid, nt=nt)
    rows = []
    records = []
    for M in M_values:
        point = minimal_time(M, setup.y0, setup.ball, setup.f, setup.grid,
                             tol_T=setup.tol_t, opts=setup.opts, nt=nt,
                             gamma_hint=gamma)
        target = scalar_minimal_time(inst, M)
        gap = abs(point.value - target) / max(abs(target), 1e-300)
        records.append({"kind": "minimal_time", "parameter": M,
                        "solver": point.value, "oracle": target, "rel_gap": gap})
        rows.append(["minimal_time", M, point.value, target, gap])
    for T in T_values:
        point = minimal_norm(T, setup.y0, setup.ball, setup.f, setup.grid,
                             tol_M=setup.tol_m, opts=setup.opts, nt=nt,
                             gamma_hint=gamma)
        target = scalar_minimal_norm(inst, T)
        gap = abs(point.value - target) / max(abs(target), 1e-300)
        records.append({"kind": "minimal_norm", "parameter": T,
                        "solver": point.value, "oracle": target, "rel_gap": gap})
        rows.append(["minimal_norm", T, point.value, target, gap])
    outputs = {
        "rows": records,
        "max_rel_gap": max((r["rel_gap"] for r in records), default=0.0),
        "gamma": gamma,
    }
    header = ["kind", "param", "solver", "oracle", "rel_gap"]
    return outputs, {"nt": nt}, {"oracle_compare.csv": (header, rows)}


def run_gradcheck(setup: Setup):
    T = float(setup.experiment.get("T", 0.1))
    pairs = int(setup.experiment.get("pairs", 8))
    seed = int(setup.experiment.get("seed", 0))
    fd_step = float(setup.experiment.get("fd_step", 1e-5))
    amplitude = float(setup.experiment.get("amplitude", 1.0))
    if T <= 0 or pairs < 1 or fd_step <= 0:
        raise ConfigError(["experiment: gradcheck needs T > 0, pairs >= 1, fd_step > 0"])
    nt = setup.steps_for(T)
    dt = T / nt
    rng = np.random.default_rng(seed)
    rows = []
    for idx in range(pairs):
        v = ControlSignal(dt=dt, nt=nt,
                          values=amplitude * rng.standard_normal((nt, setup.grid.n)),
                          grid=setup.grid)
        d = ControlSignal(dt=dt, nt=nt,
                          values=rng.standard_normal((nt, setup.grid.n)),
                          grid=setup.grid)
        err = gradient_fd_check(setup.y0, T, v, d, setup.f, setup.grid, fd_step=fd_step)
        rows.append([idx, err])
    errs = [row[1] for row in rows]
    outputs = {"T": T, "pairs": pairs, "seed": seed, "fd_step": fd_step,
               "max_rel_error": max(errs), "mean_rel_error": sum(errs) / len(errs)}
    return outputs, {"nt": nt}, {"gradcheck.csv": (["pair", "rel_error"], rows)}


HANDLERS = {
    "simulate": run_simulate,
    "gamma": run_gamma,
    "minnorm": run_minnorm,
    "mintime": run_mintime,
    "equivalence": run_equivalence,
    "sweep": run_sweep,
    "oracle-compare": run_oracle_compare,
    "gradcheck": run_gradcheck,
}


# ---------------------------------------------------------------------------
# Entry point.

def apply_override(cfg: dict, spec: str) -> None:
    """Apply ``--override dotted.key=value`` (value parsed as JSON, else string)."""
    if "=" not in spec:
        raise ConfigError([f"override: expected key=value, got {spec!r}"])
    key, raw = spec.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            node[part] = {}
        node = node[part]
    node[parts[-1]] = value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatctl",
        description="Minimal-time / minimal-norm control experiments for the "
                    "1D semilinear heat equation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config entry (dotted keys)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config_path = Path(args.config)
    try:
        cfg = json.loads(config_path.read_text())
    except OSError as exc:
        print(f"config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"config: invalid JSON ({exc})", file=sys.stderr)
        return EXIT_CONFIG
    if not isinstance(cfg, dict):
        print("config: top level must be a JSON object", file=sys.stderr)
        return EXIT_CONFIG

    try:
        for spec in args.override:
            apply_override(cfg, spec)
        setup = build_setup(cfg, config_path.parent)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config: {line}", file=sys.stderr)
        return EXIT_CONFIG

    report = validate_nonlinearity(setup.f, np.linspace(-50.0, 50.0, 10_001))
    if not report.passed:
        print(f"config: nonlinearity check failed "
              f"(max |f'| = {report.max_abs_derivative:.6g} vs bound {setup.f.L:.6g}, "
              f"min f(y)*y = {report.min_sign_product:.6g})", file=sys.stderr)
        return EXIT_CONFIG
    state_check = validate_initial_state(setup.y0, setup.ball, setup.grid)
    if not state_check.ok:
        print(f"initial state: norm {state_check.norm:.17g} is inside the closed "
              f"target ball of radius {state_check.radius:.17g}", file=sys.stderr)
        return EXIT_INITIAL_STATE

    started = time.perf_counter()
    try:
        outputs, diagnostics, series = HANDLERS[args.command](setup)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config: {line}", file=sys.stderr)
        return EXIT_CONFIG
    except RefusedRunError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    wall = time.perf_counter() - started

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, payload in series.items():
        if isinstance(payload, ValueCurve):
            export_curve(payload, out_dir / name)
        else:
            header, rows = payload
            write_csv(out_dir / name, header, rows)
    summary = {
        "experiment": args.command,
        "config_hash": config_hash(cfg),
        "outputs": outputs,
        "diagnostics": diagnostics,
        "wall_time_s": wall,
    }
    (out_dir / "summary.json").write_text(canonical_json(summary))
    print(f"wrote {out_dir / 'summary.json'}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
