"""
Artifact files: JSON written atomically under a file lock, and CSV tables
whose first line is a '# key=value' comment carrying grid metadata and the
config hash.
"""

import csv
import json
import logging
import os
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from filelock import FileLock, Timeout

from .errors import ChronoDeltaError, DomainError
from .signal_core import Axis, ComplexSignal, UniformGrid


def jsonable(value: Any) -> Any:
    """Plain JSON types; complex as [re, im], non-finite floats as strings."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [jsonable(float(value.real)), jsonable(float(value.imag))]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if np.isnan(value):
            return "nan"
        if np.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def stamped(payload: Dict[str, Any], config_hash: str) -> Dict[str, Any]:
    return {
        **payload,
        "config_hash": config_hash,
        "generated_at": datetime.now(timezone.utc).isoformat(),
    }


def _dump(path: Path, payload: Dict[str, Any]):
    temp_path = path.with_suffix(".tmp")
    with open(temp_path, "w") as f:
        json.dump(jsonable(payload), f, indent=2, sort_keys=True)
    os.replace(temp_path, path)


def write_json_atomic(path: Path, payload: Dict[str, Any]) -> Path:
    """
    Writes JSON atomically.
    Uses a file lock to prevent concurrent writers from interleaving.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    lock_path = path.with_suffix(".json.lock")
    try:
        with FileLock(lock_path, timeout=1):
            _dump(path, payload)
    except Timeout:
        logging.warning(f"Could not lock {lock_path}; writing {path.name} without the lock")
        _dump(path, payload)
    return path


def read_json(path: Path) -> Dict[str, Any]:
    with open(path, "r") as f:
        return json.load(f)


def _header_line(meta: Dict[str, Any]) -> str:
    return "# " + " ".join(f"{k}={jsonable(v)}" for k, v in meta.items())


def write_rows_csv(
    path: Path, columns: Sequence[str], rows: Iterable[Sequence[Any]], meta: Dict[str, Any]
) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(_header_line(meta) + "\n")
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([jsonable(v) for v in row])
    return path


def _coordinate(axis: Axis) -> str:
    return "t" if axis is Axis.TIME else "x"


def write_signal_csv(path: Path, signal: ComplexSignal, config_hash: str) -> Path:
    """Rows (index, x or t, re, im)."""
    values = signal.values
    columns = ["index", _coordinate(signal.axis), "re", "im"]
    rows = zip(range(signal.grid.count), signal.points, values.real, values.imag)
    meta = {**signal.grid.to_dict(), "axis": signal.axis.value, "config_hash": config_hash}
    return write_rows_csv(path, columns, rows, meta)


def read_signal_csv(path: Path, axis: Optional[Axis] = None) -> ComplexSignal:
    """
    Reads ([index,] coordinate, re, im) rows on a uniform grid back into a
    signal. A file with a single value column is read as real samples.
    """
    path = Path(path)
    with open(path, "r", newline="") as f:
        lines = [line for line in f if not line.startswith("#") and line.strip()]
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None:
        raise DomainError(f"{path} holds no data")
    offset = 1 if header[0].strip() == "index" else 0
    if len(header) < offset + 2:
        raise DomainError(f"{path} needs a coordinate column and a value column")
    header = header[offset:]
    rows = [[float(cell) for cell in row[offset : offset + 3]] for row in reader]
    if len(rows) < 2:
        raise DomainError(f"{path} needs at least two samples")
    data = np.array(rows)
    coords = data[:, 0]
    steps = np.diff(coords)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * max(abs(steps[0]), 1.0):
        raise DomainError(f"{path} is not sampled on a uniform increasing grid")
    grid = UniformGrid(float(coords[0]), float(np.mean(steps)), len(rows))
    if axis is None:
        axis = Axis.TIME if header[0].strip() == "t" else Axis.SPACE
    values = data[:, 1] + 1j * data[:, 2] if data.shape[1] > 2 else data[:, 1]
    return ComplexSignal(grid, values, axis)


def write_charge(out_dir: Path, solution, config_hash: str) -> List[Path]:
    return [
        write_signal_csv(out_dir / "q.csv", solution.q, config_hash),
        write_json_atomic(out_dir / "telemetry.json", stamped(solution.telemetry(), config_hash)),
    ]


def write_field(out_dir: Path, field, config_hash: str) -> List[Path]:
    written = []
    width = len(str(max(len(field.snapshots) - 1, 0)))
    for k, snapshot in enumerate(field.snapshots):
        path = out_dir / "snapshots" / f"snapshot_{k:0{width}d}.csv"
        written.append(write_signal_csv(path, snapshot, config_hash))
    payload = {
        "route": field.route,
        "times": [float(t) for t in field.times.points],
        "space": field.space.to_dict(),
        "mass_drift": field.mass_drift(),
        "series": [d.to_dict() for d in field.diagnostics],
    }
    written.append(write_json_atomic(out_dir / "diagnostics.json", stamped(payload, config_hash)))
    return written


def write_error(out_dir: Path, error: Exception, config_hash: str) -> Path:
    if isinstance(error, ChronoDeltaError):
        detail = error.to_dict()
    else:
        detail = {"type": type(error).__name__, "message": str(error)}
    return write_json_atomic(out_dir / "error.json", stamped({"error": detail}, config_hash))


def write_scaling_report(out_dir: Path, name: str, report, config_hash: str) -> List[Path]:
    return [
        write_json_atomic(out_dir / f"{name}.json", stamped(report.to_dict(), config_hash)),
        write_rows_csv(
            out_dir / f"{name}.csv",
            ["parameter", "norm"],
            report.rows(),
            {"report": report.label, "config_hash": config_hash},
        ),
    ]


def write_decomposition(path: Path, decomposition, config_hash: str) -> Path:
    """One (re_q, im_q) column pair per dyadic block, q = -1 .. q_max."""
    indices = decomposition.partition.indices
    grid = decomposition.source_grid
    columns = ["index", "x"]
    stacked = [np.arange(grid.count), grid.points]
    for q in indices:
        columns += [f"re_{q}", f"im_{q}"]
        block = decomposition.block(q).values
        stacked += [block.real, block.imag]
    meta = {**grid.to_dict(), "q_max": decomposition.partition.q_max, "config_hash": config_hash}
    return write_rows_csv(path, columns, zip(*stacked), meta)
