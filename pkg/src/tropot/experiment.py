"""Experiment configuration parsing and the artifact-producing runner.

Configs are INI files (flat ``key = value`` entries grouped in sections); see
the README for the grammar.  A run writes the distance value, the iteration
history CSV and either the final flux field (W1) or density snapshots at six
path times (W2), as CSV plus optional PGM previews.
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .densities import squares_density
from .fieldio import write_field_csv, write_pgm
from .grid import DensityField, GridSpec
from .pdhg import InfeasibleProblemError, SolverConfig
from .w1 import W1Problem, solve_w1
from .w1 import eikonal_residual as _eikonal
from .w2 import continuity_residual as _continuity
from .w2 import solve_w2

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "bundled_config_names",
    "run_experiment",
    "SNAPSHOT_TIMES",
    "EXIT_OK",
    "EXIT_INFEASIBLE",
    "EXIT_NOT_CONVERGED",
    "EXIT_CONFIG_ERROR",
]

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_NOT_CONVERGED = 3
EXIT_CONFIG_ERROR = 4

SNAPSHOT_TIMES = (0.0, 0.21, 0.42, 0.64, 0.86, 1.0)

OUTPUT_DIR_ENV = "TROPOT_OUTPUT_DIR"


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class DensitySpec:
    squares: tuple[tuple[tuple[float, float], float], ...] = ()
    file: str | None = None
    mass: float = 1.0


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    nx: int
    ny: int
    source: DensitySpec
    target: DensitySpec
    solver: SolverConfig
    output_dir: str
    formats: tuple[str, ...] = ("csv", "pgm")
    label: str = "experiment"
    base_dir: Path = field(default_factory=Path)


def _parse_number(text: str, where: str) -> float:
    text = text.strip()
    try:
        if "/" in text:
            num, den = text.split("/")
            return float(num) / float(den)
        return float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: cannot parse number {text!r}") from exc


def _parse_squares(text: str, where: str):
    out = []
    for chunk in text.replace(";", " ").split():
        parts = chunk.split(",")
        if len(parts) != 3:
            raise ConfigError(
                f"{where}: square must be cx,cy,width, got {chunk!r}"
            )
        cx, cy, w = (_parse_number(p, where) for p in parts)
        out.append(((cx, cy), w))
    if not out:
        raise ConfigError(f"{where}: at least one square is required")
    return tuple(out)


def _parse_density(parser: configparser.ConfigParser, section: str) -> DensitySpec:
    if not parser.has_section(section):
        raise ConfigError(f"missing section [{section}]")
    sec = parser[section]
    squares: tuple = ()
    file_path = sec.get("file")
    if "squares" in sec:
        squares = _parse_squares(sec["squares"], section)
    if not squares and file_path is None:
        raise ConfigError(f"[{section}] needs either squares or file")
    if squares and file_path is not None:
        raise ConfigError(f"[{section}] cannot mix squares and file")
    mass = _parse_number(sec.get("mass", "1"), section) if "mass" in sec else 1.0
    if mass < 0.0:
        raise ConfigError(f"[{section}]: mass must be nonnegative")
    return DensitySpec(squares=squares, file=file_path, mass=mass)


def bundled_config_names() -> tuple[str, ...]:
    pkg = resources.files("tropot") / "configs"
    return tuple(sorted(p.name for p in pkg.iterdir() if p.name.endswith(".cfg")))


def _read_config_text(path_or_name: str) -> tuple[str, str, Path]:
    path = Path(path_or_name)
    if path.exists():
        return path.read_text(), path.stem, path.parent
    candidate = path_or_name if path_or_name.endswith(".cfg") else path_or_name + ".cfg"
    pkg = resources.files("tropot") / "configs" / candidate
    if pkg.is_file():
        return pkg.read_text(), Path(candidate).stem, Path.cwd()
    raise ConfigError(
        f"config {path_or_name!r} is neither a file nor a bundled name "
        f"(bundled: {', '.join(bundled_config_names())})"
    )


def load_config(path_or_name: str) -> ExperimentConfig:
    """Parse an experiment config from a path or a bundled config name."""
    text, label, base_dir = _read_config_text(path_or_name)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_file(io.StringIO(text), source=str(path_or_name))
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    if not parser.has_section("problem"):
        raise ConfigError("missing section [problem]")
    kind = parser["problem"].get("kind", "").strip().lower()
    if kind not in {"w1", "w2"}:
        raise ConfigError(f"[problem] kind must be w1 or w2, got {kind!r}")

    if not parser.has_section("grid"):
        raise ConfigError("missing section [grid]")
    try:
        nx = parser["grid"].getint("nx")
        ny = parser["grid"].getint("ny", fallback=nx)
    except ValueError as exc:
        raise ConfigError(f"[grid]: {exc}") from exc
    if nx is None:
        raise ConfigError("[grid] nx is required")
    if nx < 2 or ny < 2:
        raise ConfigError("[grid] nx and ny must be at least 2")

    source = _parse_density(parser, "density.source")
    target = _parse_density(parser, "density.target")

    solver_kwargs = {}
    if parser.has_section("solver"):
        sec = parser["solver"]
        float_keys = ("eps", "h", "tau", "feas_tol")
        for key in float_keys:
            if key in sec:
                solver_kwargs[key] = _parse_number(sec[key], "solver")
        try:
            if "max_iter" in sec:
                solver_kwargs["max_iter"] = sec.getint("max_iter")
            if "nt" in sec:
                solver_kwargs["n_t"] = sec.getint("nt")
            if "seed" in sec:
                solver_kwargs["seed"] = sec.getint("seed")
        except ValueError as exc:
            raise ConfigError(f"[solver]: {exc}") from exc
    try:
        solver = SolverConfig(**solver_kwargs)
    except ValueError as exc:
        raise ConfigError(f"[solver]: {exc}") from exc

    out_dir = f"out/{label}"
    formats: tuple[str, ...] = ("csv", "pgm")
    if parser.has_section("output"):
        out_dir = parser["output"].get("dir", out_dir)
        if "formats" in parser["output"]:
            formats = tuple(
                f.strip() for f in parser["output"]["formats"].replace(";", ",").split(",")
                if f.strip()
            )
            unknown = set(formats) - {"csv", "pgm"}
            if unknown:
                raise ConfigError(f"[output] unknown formats: {sorted(unknown)}")

    return ExperimentConfig(
        kind=kind, nx=nx, ny=ny, source=source, target=target,
        solver=solver, output_dir=out_dir, formats=formats, label=label,
        base_dir=base_dir,
    )


def _build_density(grid: GridSpec, spec: DensitySpec, base_dir: Path,
                   where: str) -> tuple[np.ndarray, float]:
    """Raw (unnormalized) values and their declared total mass."""
    if spec.file is not None:
        from .fieldio import read_field_csv

        path = Path(spec.file)
        if not path.is_absolute():
            path = base_dir / path
        try:
            values, fgrid = read_field_csv(path)
        except OSError as exc:
            raise ConfigError(f"[{where}]: cannot read {path}: {exc}") from exc
        if fgrid.shape != grid.shape:
            raise ConfigError(
                f"[{where}]: file grid {fgrid.shape} does not match {grid.shape}"
            )
        if np.any(values < 0.0):
            raise ConfigError(f"[{where}]: file density has negative entries")
        return values, float(values.sum())
    base = squares_density(grid, spec.squares).values
    return base * spec.mass, spec.mass


def build_problem(cfg: ExperimentConfig, full_scale: bool = False):
    """Densities for a config; raises InfeasibleProblemError on mass mismatch."""
    scale = 2 if full_scale else 1
    grid = GridSpec(shape=(cfg.nx * scale, cfg.ny * scale), dx=1.0 / (cfg.nx * scale))
    raw0, mass0 = _build_density(grid, cfg.source, cfg.base_dir, "density.source")
    raw1, mass1 = _build_density(grid, cfg.target, cfg.base_dir, "density.target")
    if abs(mass0 - mass1) > 1e-9:
        raise InfeasibleProblemError(
            f"source mass {mass0!r} differs from target mass {mass1!r}"
        )
    if mass0 <= 0.0:
        raise InfeasibleProblemError("densities carry no mass")
    q0 = DensityField(grid, raw0 / raw0.sum())
    q1 = DensityField(grid, raw1 / raw1.sum())
    return grid, q0, q1


def _write_field(out: Path, stem: str, values: np.ndarray, dx: float,
                 formats) -> None:
    if "csv" in formats:
        write_field_csv(out / f"{stem}.csv", values, dx)
    if "pgm" in formats:
        write_pgm(out / f"{stem}.pgm", values)


def run_experiment(cfg: ExperimentConfig, output_dir: str | None = None,
                   full_scale: bool = False, log=print) -> int:
    """Run one experiment; returns a process exit code.

    Artifacts land in ``output_dir`` (or the config's ``[output] dir``, or
    the ``TROPOT_OUTPUT_DIR`` environment override).  Infeasible problems
    produce no artifacts and exit code 2; a run that hits the iteration
    budget still writes artifacts but exits 3.
    """
    try:
        grid, q0, q1 = build_problem(cfg, full_scale=full_scale)
    except InfeasibleProblemError as exc:
        log(f"infeasible: {exc}")
        return EXIT_INFEASIBLE

    out = Path(output_dir or os.environ.get(OUTPUT_DIR_ENV) or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dx = grid.dx

    _write_field(out, "source", q0.values, dx, cfg.formats)
    _write_field(out, "target", q1.values, dx, cfg.formats)

    if cfg.kind == "w1":
        sol = solve_w1(W1Problem(q0, q1), cfg.solver)
        report = sol.report
        f0, f1 = sol.m.faces
        write_field_csv(out / "flux_axis0.csv", f0, dx)
        write_field_csv(out / "flux_axis1.csv", f1, dx)
        norms = _trop_norm_cells(sol.m.cell_vectors())
        _write_field(out, "flux_norm", norms, dx, cfg.formats)
        diag = f"eikonal_residual,{_eikonal(sol):.17g}\n"
    else:
        sol = solve_w2(q0, q1, cfg.solver)
        report = sol.report
        path = sol.path
        times = path.times
        for stamp in SNAPSHOT_TIMES:
            n = int(np.argmin(np.abs(times - stamp)))
            _write_field(out, f"snapshot_t{stamp:.2f}", path.rho[n], dx, cfg.formats)
        diag = f"continuity_residual,{_continuity(path):.17g}\n"

    (out / "distance.txt").write_text(f"{sol.distance:.17g}\n")
    report.write_history_csv(out / "history.csv")
    (out / "diagnostics.csv").write_text(diag)

    log(f"{cfg.label}: distance {sol.distance:.12g} after {report.iterations} "
        f"iterations ({'converged' if report.converged else 'NOT converged'})")
    if not report.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _trop_norm_cells(vectors: np.ndarray) -> np.ndarray:
    hi = np.maximum(vectors.max(axis=-1), 0.0)
    lo = np.minimum(vectors.min(axis=-1), 0.0)
    return hi - lo
