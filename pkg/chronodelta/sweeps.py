"""
Resolution sweeps: rerun the pipeline at each charge-grid size in
sweep.resolutions and tabulate how a quantity converges.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from . import artifacts
from .config import Config, ConfigError
from .pipeline import RunResult, run_solve
from .wavefield import reconstruct_duhamel, reconstruct_fourier


def convergence_table(
    resolutions: Sequence[int], errors: Sequence[float]
) -> List[Tuple[int, float, float]]:
    """Rows (n, e_n, log2(e_n / e_next)); the last order is nan."""
    rows = []
    for k, (n, e) in enumerate(zip(resolutions, errors)):
        order = float("nan")
        if k + 1 < len(errors) and e > 0 and errors[k + 1] > 0:
            order = float(np.log2(e / errors[k + 1]))
        rows.append((int(n), float(e), order))
    return rows


def _at_resolution(config: Config, count: int) -> Config:
    data = config.as_dict()
    data["time"]["count"] = int(count)
    return Config.from_dict(data)


def _stride(coarse: int, fine: int) -> int:
    if (fine - 1) % (coarse - 1):
        raise ConfigError(
            f"sweep resolutions {coarse} and {fine} are not nested: "
            "(fine - 1) must be a multiple of (coarse - 1)"
        )
    return (fine - 1) // (coarse - 1)


def _charge_differences(runs: List[RunResult]) -> List[float]:
    out = []
    for coarse, fine in zip(runs, runs[1:]):
        stride = _stride(coarse.solution.q.grid.count, fine.solution.q.grid.count)
        reference = fine.solution.q.values[::stride]
        scale = np.linalg.norm(reference)
        gap = np.linalg.norm(coarse.solution.q.values - reference)
        out.append(float(gap / scale) if scale > 0 else float(gap))
    return out + [float("nan")]


def _jump_residuals(runs: List[RunResult]) -> List[float]:
    return [float(np.nanmax([d.jump_residual for d in r.field.diagnostics])) for r in runs]


def _route_distances(runs: List[RunResult], config: Config) -> List[float]:
    leakage = config.guards["source_leakage_tol"]
    out = []
    for r in runs:
        times = r.field.times
        fourier = reconstruct_fourier(r.u0, r.solution, times, leakage)
        duhamel = reconstruct_duhamel(r.u0, r.solution, times, leakage)
        out.append(fourier.relative_distance(duhamel))
    return out


def run_sweep(config: Config, out_dir: Path) -> Dict[str, List[Tuple[int, float, float]]]:
    resolutions = sorted(config.sweep_resolutions)
    quantities = config.sweep_quantities
    if not resolutions:
        raise ConfigError("'sweep.resolutions' is empty")
    if not quantities:
        raise ConfigError("'sweep.quantities' is empty")
    if "charge" in quantities:
        for coarse, fine in zip(resolutions, resolutions[1:]):
            _stride(coarse, fine)

    configs = [_at_resolution(config, n) for n in resolutions]
    logging.info(f"sweep over {len(configs)} resolutions: {', '.join(map(str, resolutions))}")
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        runs = list(pool.map(run_solve, configs))

    measure = {
        "charge": lambda: _charge_differences(runs),
        "jump": lambda: _jump_residuals(runs),
        "routes": lambda: _route_distances(runs, config),
    }
    tables = {}
    sweep_dir = out_dir / "sweep"
    for quantity in quantities:
        values = measure[quantity]()
        table = convergence_table(resolutions, values)
        tables[quantity] = table
        for (n, value, order), run in zip(table, runs):
            artifacts.write_json_atomic(
                sweep_dir / f"{quantity}_{n}.json",
                artifacts.stamped(
                    {
                        "quantity": quantity,
                        "resolution": n,
                        "value": value,
                        "order": order,
                        "telemetry": run.solution.telemetry(),
                    },
                    run.config_hash,
                ),
            )
        artifacts.write_rows_csv(
            out_dir / f"sweep_{quantity}.csv",
            ["resolution", "value", "order"],
            table,
            {"quantity": quantity, "config_hash": config.config_hash},
        )
        logging.info(f"sweep {quantity}: " + ", ".join(f"{n}: {v:.3e}" for n, v, _ in table))
    return tables
