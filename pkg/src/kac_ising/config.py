"""
Numerical resolutions, tolerances and run-configuration loading
"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from .errors import ConfigError


@dataclass(frozen=True)
class SolverConfig:
    """Every grid step, tolerance and iteration cap used by the solvers"""
    # ising1d: Legendre inversion
    inversion_bisection_steps: int = 80
    inversion_newton_steps: int = 4
    inversion_tolerance: float = 1e-12

    # phase: scalar minimization and root scans
    minimization_grid_step: float = 1e-3
    root_scan_step: float = 1e-4
    tie_tolerance: float = 1e-9
    polish_xtol: float = 1e-15
    flat_slope_tolerance: float = 1e-10
    flat_gap_tolerance: float = 1e-12
    cap_margin: float = 0.01

    # polymer
    kp_root_tolerance: float = 1e-6
    max_enumeration_ring: int = 14
    max_polymer_ring: int = 12
    max_series_ring: int = 10
    max_series_degree: int = 8

    # effective
    inversion_max_iterations: int = 200
    inversion_residual: float = 1e-12
    multistart_restarts: int = 32
    perturbation_amplitude: float = 0.3
    lbfgs_gtol: float = 1e-12
    stationarity_newton_steps: int = 30
    distinct_minimum_tolerance: float = 1e-6
    max_gap_box: int = 5

    # mc
    batch_count: int = 32


DEFAULT_CONFIG = SolverConfig()


def solver_config_from_mapping(overrides: Dict[str, Any], base: Optional[SolverConfig] = None) -> SolverConfig:
    """Apply a mapping of overrides to a SolverConfig, rejecting unknown keys"""
    base = base or DEFAULT_CONFIG
    known = {f.name: f.type for f in fields(SolverConfig)}
    unknown = sorted(set(overrides) - set(known))
    if unknown:
        raise ConfigError(f"Unknown solver settings: {', '.join(unknown)}")

    coerced = {}
    for key, value in overrides.items():
        current = getattr(base, key)
        try:
            coerced[key] = type(current)(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Solver setting '{key}' expects {type(current).__name__}: {e}") from e
    return replace(base, **coerced)


def load_run_config(path: str) -> Tuple[Dict[str, Any], SolverConfig]:
    """Load a TOML run file: a flat [params] table and an optional [solver] table"""
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"Config file not found: {path}")

    try:
        with open(config_path, 'rb') as f:
            document = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Invalid TOML in {path}: {e}") from e

    params = document.get('params', {})
    if not isinstance(params, dict):
        raise ConfigError("[params] must be a table")
    for key, value in params.items():
        if isinstance(value, dict):
            raise ConfigError(f"[params] must be flat, '{key}' is a table")

    solver = solver_config_from_mapping(document.get('solver', {}))
    return dict(params), solver
