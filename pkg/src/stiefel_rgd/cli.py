"""Config-driven experiment runner.

``stiefel-rgd solve <config.yaml>`` executes the requested descent methods
and writes one CSV history per method plus a summary; ``stiefel-rgd oracle
<config.yaml>`` writes the dense eigensolve reference for linear problems.
The YAML grammar is documented in the README.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .descent import (
    LineSearchParams,
    RunResult,
    diagnostics_a2_a3,
    initial_frame,
    rgd_fixed_step,
    rgd_line_search,
)
from .directions import DCM, EXACT_GRAD, INEXACT_GRAD
from .errors import ConfigError, NumericalError
from .frames import DIRICHLET, GridSpec, PERIODIC
from .geometry import RETRACTION_KINDS, POLAR
from .models import (
    EnergyModel,
    linear_part_matrix,
    potential_from_file,
    potential_harmonic,
    potential_well,
    potential_zero,
    validate_coercivity,
)
from .solvers import DENSE_LIMIT, SolveConfig

METHOD_NAMES = ("rgd_fixed", "rgd_ls", "rgd_ls_inexact", "dcm")

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2

CSV_HEADER = (
    "iter,energy,residual_h_norm,grad_a_norm,step_size,"
    "backtracks,inner_iterations,wall_time_s"
)


def _section(config: dict, name: str, required: bool = True) -> dict:
    value = config.get(name)
    if value is None:
        if required:
            raise ConfigError(f"missing config section '{name}'")
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    return value


def _field(section: dict, path: str, key: str, kind, default=None, required: bool = False):
    if key not in section:
        if required:
            raise ConfigError(f"missing field '{path}.{key}'")
        return default
    value = section[key]
    try:
        if kind is float:
            return float(value)
        if kind is int:
            coerced = int(value)
            if coerced != float(value):
                raise ValueError
            return coerced
        if kind is bool:
            if not isinstance(value, bool):
                raise ValueError
            return value
        if kind is str:
            if not isinstance(value, str):
                raise ValueError
            return value
    except (TypeError, ValueError):
        raise ConfigError(f"field '{path}.{key}' has invalid value {value!r}") from None
    return value


def _build_potential(grid: GridSpec, spec, base_dir: Path) -> np.ndarray:
    if spec is None:
        return potential_zero(grid)
    if not isinstance(spec, dict):
        raise ConfigError("field 'model.potential' must be a mapping")
    kind = _field(spec, "model.potential", "kind", str, required=True)
    if kind == "zero":
        return potential_zero(grid)
    if kind == "harmonic":
        omega = _field(spec, "model.potential", "omega", float, required=True)
        center = spec.get("center")
        return potential_harmonic(grid, omega, center)
    if kind == "well":
        depth = _field(spec, "model.potential", "depth", float, required=True)
        width = _field(spec, "model.potential", "width", float, required=True)
        center = spec.get("center")
        return potential_well(grid, depth, width, center)
    if kind == "file":
        path = _field(spec, "model.potential", "path", str, required=True)
        resolved = Path(path)
        if not resolved.is_absolute():
            resolved = base_dir / resolved
        if not resolved.exists():
            raise ConfigError(f"field 'model.potential.path': no such file {resolved}")
        return potential_from_file(grid, resolved)
    raise ConfigError(f"field 'model.potential.kind' has unknown value {kind!r}")


def _build_model(config: dict, base_dir: Path) -> "tuple[EnergyModel, int]":
    section = _section(config, "model")
    model_type = _field(section, "model", "type", str, default="coupled")
    if model_type not in ("gpe", "coupled"):
        raise ConfigError(f"field 'model.type' has unknown value {model_type!r}")
    dimension = _field(section, "model", "dimension", int, default=1)
    n = _field(section, "model", "grid_points", int, required=True)
    length = _field(section, "model", "domain_length", float, default=1.0)
    boundary = _field(section, "model", "boundary", str, default=DIRICHLET)
    if boundary not in (DIRICHLET, PERIODIC):
        raise ConfigError(f"field 'model.boundary' has unknown value {boundary!r}")
    kappa = _field(section, "model", "kappa", float, default=0.0)
    sigma = _field(section, "model", "sigma", float, default=0.0)
    n_orbitals = _field(section, "model", "n_orbitals", int, default=1)
    seed = _field(section, "model", "seed", int, default=0)
    if model_type == "gpe" and n_orbitals != 1:
        raise ConfigError("field 'model.n_orbitals' must be 1 for type 'gpe'")
    try:
        grid = GridSpec(dimension, n, length, boundary)
        potential = _build_potential(grid, section.get("potential"), base_dir)
        model = EnergyModel(grid, potential, kappa, sigma, n_orbitals)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"section 'model': {exc}") from exc
    return model, seed


def _build_solver(config: dict) -> SolveConfig:
    section = _section(config, "solver", required=False)
    try:
        return SolveConfig(
            method=_field(section, "solver", "method", str, default="krylov_cg"),
            rel_tol=_field(section, "solver", "rel_tol", float, default=1e-8),
            max_iters=_field(section, "solver", "max_iters", int, default=500),
            fixed_iters=None,
            preconditioner=_field(section, "solver", "preconditioner", str, default="none"),
        )
    except ValueError as exc:
        raise ConfigError(f"section 'solver': {exc}") from exc


def _line_search_params(entry: dict, path: str) -> LineSearchParams:
    try:
        return LineSearchParams(
            alpha=_field(entry, path, "alpha", float, default=0.95),
            beta=_field(entry, path, "beta", float, default=1e-4),
            delta=_field(entry, path, "delta", float, default=0.5),
            gamma_min=_field(entry, path, "gamma_min", float, default=1e-4),
            gamma_max=_field(entry, path, "gamma_max", float, default=1.0),
            gamma0=_field(entry, path, "gamma0", float, default=1e-2),
            max_backtracks=_field(entry, path, "max_backtracks", int, default=25),
        )
    except ValueError as exc:
        raise ConfigError(f"section '{path}': {exc}") from exc


def _parse_methods(config: dict) -> list:
    entries = config.get("methods")
    if not isinstance(entries, list) or len(entries) == 0:
        raise ConfigError("section 'methods' must be a non-empty list")
    methods = []
    seen = set()
    for i, entry in enumerate(entries):
        path = f"methods[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"entry '{path}' must be a mapping")
        name = _field(entry, path, "name", str, required=True)
        if name not in METHOD_NAMES:
            raise ConfigError(f"field '{path}.name' has unknown value {name!r}")
        if name in seen:
            raise ConfigError(f"field '{path}.name': duplicate method {name!r}")
        seen.add(name)
        retraction = _field(entry, path, "retraction", str, default=POLAR)
        if retraction not in RETRACTION_KINDS:
            raise ConfigError(f"field '{path}.retraction' has unknown value {retraction!r}")
        methods.append(
            {
                "name": name,
                "tau": _field(entry, path, "tau", float, default=0.1),
                "fixed_iters": _field(entry, path, "fixed_iters", int, default=3),
                "tol": _field(entry, path, "tol", float, default=1e-6),
                "max_iter": _field(entry, path, "max_iter", int, default=2000),
                "retraction": retraction,
                "params": _line_search_params(entry, path),
            }
        )
    return methods


def load_config(config_path) -> dict:
    path = Path(config_path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            config = yaml.safe_load(handle)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config root must be a mapping")
    return config


def _run_method(model, phi0, spec, solver_config, log_frames: bool) -> RunResult:
    common = dict(
        retraction=spec["retraction"],
        tol=spec["tol"],
        max_iter=spec["max_iter"],
        solver_config=solver_config,
        log_frames=log_frames,
    )
    name = spec["name"]
    if name == "rgd_fixed":
        return rgd_fixed_step(model, phi0, spec["tau"], **common)
    kind = {"rgd_ls": EXACT_GRAD, "rgd_ls_inexact": INEXACT_GRAD, "dcm": DCM}[name]
    return rgd_line_search(
        model, phi0, params=spec["params"], direction_kind=kind,
        fixed_iters=spec["fixed_iters"], **common,
    )


def _write_history_csv(path: Path, result: RunResult) -> None:
    lines = [CSV_HEADER]
    for rec in result.history:
        lines.append(
            f"{rec.n},{rec.energy:.12e},{rec.residual_h_norm:.12e},"
            f"{rec.grad_a_norm:.12e},{rec.step_size:.12e},{rec.backtracks},"
            f"{rec.inner_iterations},{rec.wall_time_s:.12e}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_diagnostics_csv(path: Path, model, result: RunResult) -> None:
    r2, r3 = diagnostics_a2_a3(model, result)
    lines = ["iter,r2,r3"]
    for n in range(len(r2)):
        lines.append(f"{n},{r2[n]:.12e},{r3[n]:.12e}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _model_summary_line(model: EnergyModel, seed: int) -> str:
    grid = model.grid
    return (
        f"model: dimension={grid.dimension} grid_points={grid.points_per_axis} "
        f"domain_length={grid.domain_length:g} boundary={grid.boundary} "
        f"kappa={model.kappa:g} sigma={model.shift:g} "
        f"n_orbitals={model.n_orbitals} seed={seed}"
    )


def _summary_block(name: str, result: RunResult) -> str:
    eigs = " ".join(f"{lam:.12e}" for lam in result.eigenvalues)
    last = result.history[-1]
    return "\n".join(
        [
            f"method: {name}",
            f"converged: {str(result.converged).lower()}",
            f"termination: {result.termination}",
            f"iterations: {result.iterations}",
            f"final_energy: {result.final_energy:.12e}",
            f"residual_h_norm: {last.residual_h_norm:.12e}",
            f"eigenvalues: {eigs}",
            f"total_inner_iterations: {result.total_inner_iterations}",
        ]
    )


def run(
    config_path,
    out_dir: Optional[str] = None,
    seed: Optional[int] = None,
    log_frames: bool = False,
) -> int:
    """Execute every configured method; exit 0 only if all of them converged."""
    try:
        config = load_config(config_path)
        base_dir = Path(config_path).resolve().parent
        model, config_seed = _build_model(config, base_dir)
        solver_config = _build_solver(config)
        methods = _parse_methods(config)
        output = _section(config, "output", required=False)
        directory = Path(
            out_dir if out_dir is not None
            else _field(output, "output", "directory", str, default="out")
        )
        if not directory.is_absolute():
            directory = base_dir / directory
        write_csv = _field(output, "output", "csv", bool, default=True)
        write_summary = _field(output, "output", "summary", bool, default=True)
        validate_coercivity(model)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    used_seed = seed if seed is not None else config_seed
    directory.mkdir(parents=True, exist_ok=True)
    phi0 = initial_frame(model.grid, model.n_orbitals, used_seed)

    blocks = [_model_summary_line(model, used_seed)]
    all_converged = True
    failure_cause = None
    for spec in methods:
        try:
            result = _run_method(model, phi0, spec, solver_config, log_frames)
        except NumericalError as exc:
            print(f"method {spec['name']} failed: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        if write_csv:
            _write_history_csv(directory / f"{spec['name']}.csv", result)
        if log_frames:
            _write_diagnostics_csv(
                directory / f"{spec['name']}_diagnostics.csv", model, result
            )
        blocks.append(_summary_block(spec["name"], result))
        if not result.converged:
            all_converged = False
            failure_cause = result.termination
    if write_summary:
        (directory / "summary.txt").write_text(
            "\n\n".join(blocks) + "\n", encoding="utf-8"
        )
    if not all_converged:
        print(f"run did not converge: {failure_cause}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def oracle(config_path, out_dir: Optional[str] = None) -> int:
    """Dense eigensolve reference for the linear (kappa = 0) problem."""
    try:
        config = load_config(config_path)
        base_dir = Path(config_path).resolve().parent
        model, _ = _build_model(config, base_dir)
        output = _section(config, "output", required=False)
        directory = Path(
            out_dir if out_dir is not None
            else _field(output, "output", "directory", str, default="out")
        )
        if not directory.is_absolute():
            directory = base_dir / directory
        if model.kappa != 0.0:
            raise ConfigError("oracle is defined only for kappa = 0")
        if model.grid.n_dof > DENSE_LIMIT:
            raise ConfigError(
                f"oracle needs n_dof <= {DENSE_LIMIT}, got {model.grid.n_dof}"
            )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    matrix = linear_part_matrix(model).toarray()
    eigenvalues, vectors = np.linalg.eigh(matrix)
    n = model.n_orbitals
    weight = model.grid.weight
    modes = vectors[:, :n] / np.sqrt(weight * np.sum(vectors[:, :n] ** 2, axis=0))
    # Deterministic sign: largest-magnitude component positive.
    for j in range(n):
        k = int(np.argmax(np.abs(modes[:, j])))
        if modes[k, j] < 0:
            modes[:, j] = -modes[:, j]

    directory.mkdir(parents=True, exist_ok=True)
    lines = ["index,eigenvalue"]
    for j in range(n):
        lines.append(f"{j},{eigenvalues[j]:.12e}")
    (directory / "oracle_eigs.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    header = ",".join(f"mode_{j}" for j in range(n))
    rows = [header]
    for row in modes:
        rows.append(",".join(f"{val:.12e}" for val in row))
    (directory / "oracle_modes.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stiefel-rgd",
        description="Ground states of nonlinear eigenvector problems by "
        "energy-adaptive Riemannian gradient descent.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve_parser = sub.add_parser("solve", help="run the configured descent methods")
    solve_parser.add_argument("config", help="path to the YAML run configuration")
    solve_parser.add_argument("--out-dir", default=None, help="override output directory")
    solve_parser.add_argument("--seed", type=int, default=None, help="override the seed")
    solve_parser.add_argument(
        "--log-frames", action="store_true", help="store iterates and write diagnostics"
    )

    oracle_parser = sub.add_parser("oracle", help="dense eigensolve for kappa = 0")
    oracle_parser.add_argument("config", help="path to the YAML run configuration")
    oracle_parser.add_argument("--out-dir", default=None, help="override output directory")

    args = parser.parse_args(argv)
    if args.command == "solve":
        return run(args.config, args.out_dir, args.seed, args.log_frames)
    return oracle(args.config, args.out_dir)


if __name__ == "__main__":
    sys.exit(main())
