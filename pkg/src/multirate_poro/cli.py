"""Command line drivers: single run, convergence study and multirate timing.

    multirate-poro run   --config run.toml
    multirate-poro study --config study.toml
    multirate-poro bench --config bench.toml

``PORO_OUTPUT_DIR`` overrides the output directory of the config.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import statistics
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .cases import CASES, get_case
from .diagnostics import (
    NOT_APPLICABLE,
    EnergyOperators,
    conservation_residuals,
    convergence_rates,
    energy_report,
    error_norms,
    reference_errors,
    scalar_error,
    vector_error,
)
from .errors import ConfigError, InvalidArgumentError, IterationFailureError, SingularSystemError, StepError
from .fem import build_spaces
from .mesh import build_unit_square_mesh
from .scheme import MultirateSolver, StabilityAdvisory, TimeGrid
from .vtk import write_vtk

log = logging.getLogger("multirate_poro")

OUTPUT_ENV = "PORO_OUTPUT_DIR"
STUDY_HEADER = ["h", "err_u_L2", "rate_u_L2", "err_u_H1", "rate_u_H1", "err_p_L2H1", "rate_p", "wall_s"]
TIMING_HEADER = ["m", "wall_s", "speedup_vs_m1"]
TIMING_DETAIL_HEADER = ["m", "setup_s", "stokes_solves", "diffusion_solves"]
TRAJECTORY_HEADER = [
    "time",
    "u_L2",
    "u_H1",
    "p_L2",
    "xi_L2",
    "eta_L2",
    "energy_residual",
    "conservation_residual",
]
PARAM_KEYS = ("E", "nu", "c0", "alpha", "K", "mu_f", "rho_f", "g")
KNOWN_KEYS = {
    "case",
    "n",
    "dt",
    "m",
    "T",
    "theta",
    "emit_vtk",
    "output_dir",
    "seed",
    "pressure_update",
    "implicit_pressure_bc",
    "reference_n",
    "repeats",
    "params",
    "case_options",
}

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4


class NonFiniteOutput(RuntimeError):
    """A value about to be written is NaN or infinite."""


@dataclass
class RunConfig:
    case: str
    n: list
    dt: float
    m: list
    T: float
    theta: int = 0
    emit_vtk: bool = False
    output_dir: str = "output"
    seed: int = 0
    pressure_update: str = "fine"
    implicit_pressure_bc: bool = True
    reference_n: int = 64
    repeats: int = 3
    params: dict = field(default_factory=dict)
    case_options: dict = field(default_factory=dict)

    @property
    def mode(self) -> str:
        if len(self.m) > 1:
            return "timing"
        if len(self.n) > 1:
            return "study"
        return "run"

    def build_case(self):
        case = get_case(self.case, **self.case_options)
        if self.params:
            case = case.with_params(case.params.with_overrides(**self.params))
        return case

    def grid(self, m=None) -> TimeGrid:
        return TimeGrid(self.dt, self.m[0] if m is None else m, self.T, self.theta)


def _number(key, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {type(value).__name__}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return int(value)
    if not math.isfinite(value):
        raise ConfigError(key, "must be finite")
    return float(value)


def _int_list(key, value):
    items = value if isinstance(value, list) else [value]
    if not items:
        raise ConfigError(key, "list must not be empty")
    out = [_number(key, v, int) for v in items]
    if any(v < 1 for v in out):
        raise ConfigError(key, "must be >= 1")
    return out


def config_from_dict(raw: dict) -> RunConfig:
    """Validate a parsed TOML table and fill in defaults."""
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    for key in ("case", "n", "dt", "T"):
        if key not in raw:
            raise ConfigError(key, "missing required key")
    case = raw["case"]
    if not isinstance(case, str):
        raise ConfigError("case", "expected a string")
    if case not in CASES:
        raise ConfigError("case", f"unknown case {case!r}; choose from {sorted(CASES)}")
    n = _int_list("n", raw["n"])
    m = _int_list("m", raw.get("m", 1))
    dt = _number("dt", raw["dt"])
    if dt <= 0:
        raise ConfigError("dt", "must be positive")
    T = _number("T", raw["T"])
    if T <= 0:
        raise ConfigError("T", "must be positive")
    theta = _number("theta", raw.get("theta", 0), int)
    if theta not in (0, 1):
        raise ConfigError("theta", "must be 0 or 1")
    for key in ("emit_vtk", "implicit_pressure_bc"):
        if key in raw and not isinstance(raw[key], bool):
            raise ConfigError(key, "expected true or false")
    output_dir = raw.get("output_dir", "output")
    if not isinstance(output_dir, str):
        raise ConfigError("output_dir", "expected a string")
    pressure_update = raw.get("pressure_update", "fine")
    if pressure_update not in ("fine", "lagged"):
        raise ConfigError("pressure_update", "must be 'fine' or 'lagged'")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params", "expected a table")
    for key, value in params.items():
        if key not in PARAM_KEYS:
            raise ConfigError(f"params.{key}", "unknown parameter")
        if key == "g":
            if not (isinstance(value, list) and len(value) == 2):
                raise ConfigError("params.g", "expected a 2-vector")
            params = {**params, "g": tuple(_number("params.g", v) for v in value)}
        elif key == "K" and isinstance(value, list):
            params = {**params, "K": np.array([[_number("params.K", v) for v in row] for row in value])}
        else:
            params = {**params, key: _number(f"params.{key}", value)}
    if "c0" in params and not params["c0"] > 0:
        raise ConfigError("params.c0", "c0 must be positive: c0 = 0 makes kappa_3 vanish and the xi block singular")
    case_options = raw.get("case_options", {})
    if not isinstance(case_options, dict):
        raise ConfigError("case_options", "expected a table")
    cfg = RunConfig(
        case=case,
        n=n,
        dt=dt,
        m=m,
        T=T,
        theta=theta,
        emit_vtk=raw.get("emit_vtk", False),
        output_dir=output_dir,
        seed=_number("seed", raw.get("seed", 0), int),
        pressure_update=pressure_update,
        implicit_pressure_bc=raw.get("implicit_pressure_bc", True),
        reference_n=_int_list("reference_n", raw.get("reference_n", 64))[0],
        repeats=_int_list("repeats", raw.get("repeats", 3))[0],
        params=params,
        case_options=case_options,
    )
    for mm in m:
        try:
            cfg.grid(mm)
        except InvalidArgumentError as exc:
            raise ConfigError("T", str(exc)) from None
    try:
        cfg.build_case()
    except InvalidArgumentError as exc:
        raise ConfigError("params", str(exc)) from None
    except TypeError as exc:
        raise ConfigError("case_options", str(exc)) from None
    return cfg


def parse_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"invalid TOML in {path}: {exc}") from None
    return config_from_dict(raw)


def output_dir(cfg: RunConfig) -> Path:
    out = Path(os.environ.get(OUTPUT_ENV) or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if not math.isfinite(value):
        raise NonFiniteOutput(f"refusing to write non-finite value {value!r}")
    return f"{value:.10e}"


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _solver(cfg: RunConfig, case, spaces, m=None):
    return MultirateSolver(
        case,
        spaces,
        cfg.grid(m),
        pressure_update=cfg.pressure_update,
        implicit_pressure_bc=cfg.implicit_pressure_bc,
    )


# ---------------------------------------------------------------------------
# Drivers


def run_case(cfg: RunConfig) -> Path:
    """Single run: trajectory.csv plus optional VTK snapshots."""
    case = cfg.build_case()
    spaces = build_spaces(build_unit_square_mesh(cfg.n[0]))
    solver = _solver(cfg, case, spaces)
    traj = solver.run()
    ops = EnergyOperators.from_solver(solver)
    energy = energy_report(ops, traj) if case.bc.pure_neumann else None
    cons = conservation_residuals(traj, case, spaces, ops, solver.vector_load)
    rows = []
    for j, t in enumerate(traj.times):
        u_l2, u_h1 = vector_error(spaces, traj.u[j])
        e_res = NOT_APPLICABLE if energy is None else (0.0 if j == 0 else energy.residual[j - 1])
        c_res = NOT_APPLICABLE if cons == NOT_APPLICABLE else abs(cons.eta[j])
        rows.append(
            [
                t,
                u_l2,
                math.hypot(u_l2, u_h1),
                scalar_error(spaces, traj.p[j])[0],
                scalar_error(spaces, traj.xi[j])[0],
                scalar_error(spaces, traj.eta_fine[j * traj.grid.m])[0],
                e_res,
                c_res,
            ]
        )
    out = output_dir(cfg)
    _write_csv(out / "trajectory.csv", TRAJECTORY_HEADER, rows)
    if cfg.emit_vtk:
        nv = spaces.mesh.n_vertices
        for j in range(len(traj.times)):
            u = traj.u[j].reshape(-1, 2)[:nv]
            write_vtk(
                out / f"state_{j:05d}.vtk",
                spaces.mesh,
                point_scalars={"p": traj.p[j]},
                point_vectors={"u": u},
                title=f"{case.name} t={traj.times[j]:.10e}",
            )
    log.info("run finished: %d windows, loop %.3fs, setup %.3fs", traj.grid.n_coarse, traj.wall_loop, traj.wall_setup)
    return out


def study_rows(cfg: RunConfig):
    """Errors per mesh; exact solution when the case has one, otherwise a finer reference run."""
    if len(cfg.n) < 2:
        raise InvalidArgumentError("a convergence study needs at least two meshes")
    case = cfg.build_case()
    ref = ref_spaces = None
    if case.exact is None:
        ref_spaces = build_spaces(build_unit_square_mesh(cfg.reference_n))
        ref_grid = TimeGrid(cfg.dt, 1, cfg.T, cfg.theta)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", StabilityAdvisory)
            ref = MultirateSolver(
                case, ref_spaces, ref_grid, cfg.pressure_update, cfg.implicit_pressure_bc
            ).run()
    hs, eu, eh, ep, walls = [], [], [], [], []
    for n in cfg.n:
        spaces = build_spaces(build_unit_square_mesh(n))
        traj = _solver(cfg, case, spaces).run()
        if ref is None:
            eu.append(error_norms(traj, spaces, case.exact, "Linf_L2", "u"))
            eh.append(error_norms(traj, spaces, case.exact, "Linf_H1", "u"))
            ep.append(error_norms(traj, spaces, case.exact, "L2_H1", "p", case.params))
        else:
            if cfg.reference_n % n:
                raise InvalidArgumentError(f"reference mesh n={cfg.reference_n} is not a refinement of n={n}")
            errs = reference_errors(traj, spaces, ref, ref_spaces, case.params)
            eu.append(errs["u_Linf_L2"])
            eh.append(errs["u_Linf_H1"])
            ep.append(errs["p_L2_H1"])
        hs.append(spaces.mesh.h)
        walls.append(traj.wall_loop)
    rates = [convergence_rates(e, hs) for e in (eu, eh, ep)]
    rows = []
    for i in range(len(hs)):
        r = [NOT_APPLICABLE if i == 0 else rates[k][i - 1] for k in range(3)]
        rows.append([hs[i], eu[i], r[0], eh[i], r[1], ep[i], r[2], walls[i]])
    return rows


def convergence_study(cfg: RunConfig) -> Path:
    rows = study_rows(cfg)
    out = output_dir(cfg)
    _write_csv(out / "convergence.csv", STUDY_HEADER, rows)
    return out


def timing_rows(cfg: RunConfig):
    """One warm-up run and the median loop time of ``repeats`` runs per m."""
    if len(cfg.m) < 2:
        raise InvalidArgumentError("timing comparison needs at least two values of m")
    case = cfg.build_case()
    spaces = build_spaces(build_unit_square_mesh(cfg.n[0]))
    ms = list(cfg.m) if 1 in cfg.m else [1] + list(cfg.m)
    measured = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StabilityAdvisory)
        for m in ms:
            _solver(cfg, case, spaces, m).run()
            walls, setups = [], []
            for _ in range(cfg.repeats):
                solver = _solver(cfg, case, spaces, m)
                traj = solver.run()
                walls.append(traj.wall_loop)
                setups.append(traj.wall_setup)
            measured[m] = (statistics.median(walls), statistics.median(setups), traj.stokes_solves, traj.diffusion_solves)
    base = measured[1][0]
    rows = [[m, measured[m][0], base / measured[m][0]] for m in cfg.m]
    detail = [[m, measured[m][1], measured[m][2], measured[m][3]] for m in cfg.m]
    return rows, detail


def timing_compare(cfg: RunConfig) -> Path:
    rows, detail = timing_rows(cfg)
    out = output_dir(cfg)
    _write_csv(out / "timing.csv", TIMING_HEADER, rows)
    _write_csv(out / "timing_detail.csv", TIMING_DETAIL_HEADER, detail)
    return out


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multirate-poro", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "integrate one case and write trajectory.csv"),
        ("study", "convergence study over a list of meshes"),
        ("bench", "multirate timing comparison over a list of m"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML run configuration")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = parse_config(args.config)
        expected = {"run": "run", "study": "study", "bench": "timing"}[args.command]
        if cfg.mode != expected:
            key = "m" if args.command == "bench" or cfg.mode == "timing" else "n"
            raise ConfigError(key, f"'{args.command}' needs a {'list' if expected != 'run' else 'single value'} here")
        np.random.seed(cfg.seed)
        driver = {"run": run_case, "study": convergence_study, "bench": timing_compare}[args.command]
        out = driver(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularSystemError, IterationFailureError, StepError, NonFiniteOutput) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except InvalidArgumentError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
