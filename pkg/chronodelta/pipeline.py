"""
Builds grids, coupling and initial data from a Config and runs
assemble_q0 -> solve -> reconstruct -> diagnostics.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import artifacts
from .charge_solver import ChargeSolution, SolverConfig, SolverMethod, assemble_q0, solve
from .config import Config, ConfigError
from .coupling import CouplingPath, CutoffProfile
from .errors import NumericalError
from .oracles import BoundState, free_gaussian
from .regularity_lab import synthesize_alpha
from .signal_core import Axis, ComplexSignal, UniformGrid, check_support
from .wavefield import Route, WaveField, reconstruct

# Sobolev class assumed for a sampled coupling whose nu is left unset
SAMPLED_DEFAULT_CLASS = 0.25


@dataclass(frozen=True, eq=False)
class RunResult:
    alpha: CouplingPath
    u0: ComplexSignal
    solution: ChargeSolution
    field: WaveField
    config_hash: str
    written: Optional[List[Path]] = None


def space_grid(config: Config) -> UniformGrid:
    space = config.space
    return UniformGrid.centered(float(space["length"]), int(space["count"]))


def time_grid(config: Config) -> UniformGrid:
    time = config.time
    grid = UniformGrid.span(float(time["start"]), float(time["end"]), int(time["count"]))
    if not grid.has_node(0.0):
        raise ConfigError(
            f"time grid from {time['start']} to {time['end']} with {time['count']} nodes "
            "does not have t = 0 as a node"
        )
    return grid


def snapshot_grid(config: Config) -> UniformGrid:
    snapshots = config.snapshots
    time = config.time
    if snapshots["start"] < time["start"] or snapshots["end"] > time["end"]:
        raise ConfigError(
            f"snapshots [{snapshots['start']}, {snapshots['end']}] fall outside "
            f"the time window [{time['start']}, {time['end']}]"
        )
    return UniformGrid.span(float(snapshots["start"]), float(snapshots["end"]), int(snapshots["count"]))


def solver_config(config: Config) -> SolverConfig:
    solver, guards = config.solver, config.guards
    return SolverConfig(
        tol=float(solver["tol"]),
        target_contraction=float(solver["target_contraction"]),
        min_window=float(solver["min_window"]),
        max_iterations=int(solver["max_iterations"]),
        initial_window=solver["initial_window"],
        max_refinements=int(solver["max_refinements"]),
        trace_padding=int(guards["trace_padding"]),
        spectral_tail_tol=float(guards["spectral_tail_tol"]),
        strict=config.strict,
    )


def build_coupling(config: Config) -> CouplingPath:
    spec = config.coupling
    profile = CutoffProfile(float(spec["plateau"]), float(spec["edge"]))
    T = float(spec["T"])
    kind = spec["kind"]
    if kind == "zero":
        return CouplingPath.constant(0.0, T, profile)
    if kind == "constant":
        return CouplingPath.constant(float(spec["value"]), T, profile)
    if kind == "oscillating":
        value, amplitude, frequency = (float(spec[k]) for k in ("value", "amplitude", "frequency"))
        return CouplingPath.from_function(
            lambda t: value + amplitude * np.cos(frequency * t),
            T,
            profile=profile,
            label=f"{value:g} + {amplitude:g} cos({frequency:g} t)",
        )
    if kind == "synthesized":
        path = synthesize_alpha(
            float(spec["nu"]),
            int(spec["seed"]),
            float(spec["support"]),
            int(spec["count"]),
            float(spec["amplitude"]),
            T,
        )
        return CouplingPath.from_samples(
            path.samples, T, path.regularity_class, path.kind, profile, path.label
        )
    samples = artifacts.read_signal_csv(Path(spec["path"]), Axis.TIME)
    nu = spec.get("nu")
    return CouplingPath.from_samples(
        samples,
        T,
        SAMPLED_DEFAULT_CLASS if nu is None else float(nu),
        profile=profile,
        label=str(spec["path"]),
    )


def build_initial_data(config: Config, grid: UniformGrid) -> ComplexSignal:
    spec = config.initial_data
    kind = spec["kind"]
    if kind == "gaussian":
        packet = free_gaussian(0.0, float(spec["width"]), grid, float(spec["center"]))
        return packet * np.exp(1j * float(spec["momentum"]) * grid.points)
    if kind == "bound_state":
        return BoundState.build(float(spec["alpha"]), grid).profile
    samples = artifacts.read_signal_csv(Path(spec["path"]), Axis.SPACE)
    if not samples.grid.matches(grid):
        raise ConfigError(f"initial data in {spec['path']} does not match the space grid {grid}")
    return samples


def run_solve(config: Config, out_dir: Optional[Path] = None) -> RunResult:
    space = space_grid(config)
    times = time_grid(config)
    snapshots = snapshot_grid(config)
    guards = config.guards
    cfg = solver_config(config)
    alpha = build_coupling(config)
    u0 = build_initial_data(config, space)
    check_support(u0, guards["support_floor"], strict=config.strict)
    logging.info(
        f"solve: {alpha.label or alpha.kind.value}, space {space.count} nodes, "
        f"charge {times.count} nodes, config {config.config_hash[:12]}"
    )

    q0 = assemble_q0(alpha, u0, times, cfg.trace_padding, cfg.spectral_tail_tol, strict=cfg.strict)
    solution = solve(alpha, u0, cfg, times, SolverMethod(config.solver["method"]), q0=q0)
    field = reconstruct(
        u0,
        solution,
        snapshots,
        Route(config.route),
        leakage_tol=guards["leakage_tol"] if alpha.is_zero() else guards["source_leakage_tol"],
        workers=config.threads,
    )

    drift = field.mass_drift()
    limit = config.acceptance["mass_drift"]
    if drift > limit:
        message = f"relative mass drift {drift:.3e} exceeds {limit:.1e}"
        if config.strict:
            raise NumericalError(message)
        logging.warning(message)

    written = None
    if out_dir is not None:
        written = artifacts.write_charge(out_dir, solution, config.config_hash)
        written += artifacts.write_field(out_dir, field, config.config_hash)
    return RunResult(alpha, u0, solution, field, config.config_hash, written)
