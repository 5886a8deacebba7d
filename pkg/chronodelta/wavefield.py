"""
Reconstruction of u(t, x) from the solved charge, along two independent routes:

    fourier:  u_hat(t) = e^{-it xi^2} [u0_hat - i integral_0^t e^{is xi^2} q(s) ds]
    duhamel:  u(t) = e^{it Delta} u0 - i integral_0^t K(t - s, x) q(s) ds

plus the per-snapshot diagnostics of the resulting field.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .charge_solver import ChargeSolution
from .coupling import CouplingPath
from .errors import DomainError, GridMismatchError, ResolutionError
from .free_propagator import check_leakage, evolve
from .quadrature import (
    BACKWARD_PHASE,
    FORWARD_PHASE,
    SQRT_PI,
    filon_constant_sum,
    filon_panel_sum,
    linear_panel_weights,
    propagator_moments,
)
from .signal_core import ComplexSignal, UniformGrid, dft, idft, max_step, sobolev_norm

ORIGIN_WINDOW = 0.1
ORIGIN_NODES = 8
DERIVATIVE_CLASS = 0.75
_X_CHUNK = 128


class Route(str, Enum):
    FOURIER = "fourier"
    DUHAMEL = "duhamel"
    REFERENCE = "reference"


@dataclass(frozen=True)
class SnapshotDiagnostics:
    time: float
    mass: float
    h1: float
    jump_residual: float
    trace_at_0: complex

    def to_dict(self) -> Dict[str, float]:
        return {
            "t": self.time,
            "mass": self.mass,
            "h1": self.h1,
            "jump_residual": self.jump_residual,
            "trace_re": self.trace_at_0.real,
            "trace_im": self.trace_at_0.imag,
        }


@dataclass(frozen=True, eq=False)
class WaveField:
    times: UniformGrid
    space: UniformGrid
    snapshots: List[ComplexSignal]
    route: Route
    diagnostics: List[SnapshotDiagnostics] = field(default_factory=list)

    def __post_init__(self):
        object.__setattr__(self, "route", Route(self.route))
        if len(self.snapshots) != self.times.count:
            raise GridMismatchError(
                f"{len(self.snapshots)} snapshots for {self.times.count} snapshot times"
            )
        for snapshot in self.snapshots:
            if not snapshot.grid.matches(self.space):
                raise GridMismatchError("snapshot grid differs from the field's space grid")

    def snapshot_at(self, t: float) -> ComplexSignal:
        return self.snapshots[self.times.index_of(t)]

    def relative_distance(self, other: "WaveField") -> float:
        """Largest relative L2 distance between matching snapshots."""
        if not (self.times.matches(other.times) and self.space.matches(other.space)):
            raise GridMismatchError("fields live on different grids")
        worst = 0.0
        for a, b in zip(self.snapshots, other.snapshots):
            norm = max(a.l2_norm(), np.finfo(float).tiny)
            worst = max(worst, (a - b).l2_norm() / norm)
        return worst

    def mass_drift(self) -> float:
        masses = np.array([s.mass() for s in self.snapshots])
        if masses[0] == 0:
            return float(np.max(masses))
        return float(np.max(np.abs(masses - masses[0])) / masses[0])


@dataclass(frozen=True)
class NormSeries:
    times: np.ndarray
    mass: np.ndarray
    h1: np.ndarray
    relative_mass_drift: float
    relative_h1_spread: float
    mass_modulus: float
    h1_modulus: float


def snapshot_times(end: float, count: int, start: float = 0.0) -> UniformGrid:
    return UniformGrid.span(start, end, count)


def _charge_values(q: ChargeSolution, t: np.ndarray) -> np.ndarray:
    grid = q.time_grid
    re = np.interp(t, grid.points, q.q.values.real, left=0.0, right=0.0)
    im = np.interp(t, grid.points, q.q.values.imag, left=0.0, right=0.0)
    return re + 1j * im


def _charge_segment(q: ChargeSolution, t: float) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Nodes running from 0 to t (clipped to the charge grid) and q on them."""
    grid = q.time_grid
    end = float(np.clip(t, grid.start, grid.stop))
    if end == 0:
        return None
    points = grid.points
    gap = 1e-9 * grid.step
    if end > 0:
        inside = points[(points > gap) & (points < end - gap)]
    else:
        inside = points[(points < -gap) & (points > end + gap)][::-1]
    nodes = np.concatenate([[0.0], inside, [end]])
    return nodes, _charge_values(q, nodes)


def _folded_frequencies(spec) -> Tuple[np.ndarray, np.ndarray]:
    """xi^2 for |xi| = 0, dxi, ..., and the index map back onto the spectrum."""
    count = spec.frequency_grid.count
    folded = np.abs(np.arange(count) - count // 2)
    omega = (spec.frequency_grid.step * np.arange(folded.max() + 1)) ** 2
    return omega, folded


def _map_times(fn: Callable[[float], ComplexSignal], times: UniformGrid, workers: int):
    if workers <= 1:
        return [fn(t) for t in times.points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, times.points))


def reconstruct_fourier(
    u0: ComplexSignal,
    q: ChargeSolution,
    times: UniformGrid,
    leakage_tol: Optional[float] = 1e-3,
    workers: int = 1,
) -> WaveField:
    spec0 = dft(u0)
    omega, folded = _folded_frequencies(spec0)
    xi2 = spec0.frequencies**2

    def snapshot(t: float) -> ComplexSignal:
        source = np.zeros(spec0.frequency_grid.count, dtype=complex)
        segment = _charge_segment(q, t)
        if segment is not None:
            source = filon_panel_sum(omega, *segment)[folded]
        values = np.exp(-1j * t * xi2) * (spec0.values - 1j * source)
        out = idft(spec0.with_values(values))
        check_leakage(out, leakage_tol, f"reconstructed field at t={t:.4g}")
        return out

    snapshots = _map_times(snapshot, times, workers)
    return diagnose(WaveField(times, u0.grid, snapshots, Route.FOURIER), charge=q)


def _point_source_field(x_abs: np.ndarray, q: ChargeSolution, t: float) -> np.ndarray:
    """-i integral_0^t K(t - s, x) q(s) ds, exact in the lag singularity per panel."""
    out = np.zeros(x_abs.shape[0], dtype=complex)
    segment = _charge_segment(q, t)
    if segment is None:
        return out
    nodes, values = segment
    lag = np.abs(t - nodes)[::-1]
    charge = values[::-1]
    if t > 0:
        phase = FORWARD_PHASE
    else:
        # integral_0^t ds = -integral over the positive lag s - t
        phase = -BACKWARD_PHASE
    for lo in range(0, x_abs.shape[0], _X_CHUNK):
        a = (x_abs[lo : lo + _X_CHUNK, None] ** 2) / 4.0
        m0, m1 = propagator_moments(a, lag[None, :])
        if t < 0:
            m0, m1 = np.conj(m0), np.conj(m1)
        w_left, w_right = linear_panel_weights(m0, m1, lag[None, :])
        out[lo : lo + _X_CHUNK] = w_left @ charge[:-1] + w_right @ charge[1:]
    return -1j * phase / (2 * SQRT_PI) * out


def reconstruct_duhamel(
    u0: ComplexSignal,
    q: ChargeSolution,
    times: UniformGrid,
    leakage_tol: Optional[float] = 1e-3,
    workers: int = 1,
) -> WaveField:
    space = u0.grid
    if space.has_node(0.0):
        offsets = np.abs(np.arange(space.count) - space.index_of(0.0))
        x_abs = space.step * np.arange(offsets.max() + 1)
    else:
        offsets = np.arange(space.count)
        x_abs = np.abs(space.points)

    def snapshot(t: float) -> ComplexSignal:
        free = evolve(u0, t, leakage_tol=None)
        source = _point_source_field(x_abs, q, t)[offsets]
        out = free.with_values(free.values + source)
        check_leakage(out, leakage_tol, f"reconstructed field at t={t:.4g}")
        return out

    snapshots = _map_times(snapshot, times, workers)
    return diagnose(WaveField(times, space, snapshots, Route.DUHAMEL), charge=q)


def reconstruct(
    u0: ComplexSignal,
    q: ChargeSolution,
    times: UniformGrid,
    route: Route = Route.FOURIER,
    leakage_tol: Optional[float] = 1e-3,
    workers: int = 1,
) -> WaveField:
    route = Route(route)
    if route is Route.FOURIER:
        return reconstruct_fourier(u0, q, times, leakage_tol, workers)
    if route is Route.DUHAMEL:
        return reconstruct_duhamel(u0, q, times, leakage_tol, workers)
    raise DomainError("the reference route is built by oracles.crank_nicolson_reference")


def _origin_index(grid: UniformGrid) -> int:
    near = int(np.count_nonzero(np.abs(grid.points) <= ORIGIN_WINDOW * (1 + 1e-12)))
    if not grid.has_node(0.0) or near < ORIGIN_NODES:
        step = 2 * ORIGIN_WINDOW / (ORIGIN_NODES - 1)
        minimum = 1
        while minimum * step < grid.length:
            minimum *= 2
        raise ResolutionError(
            f"origin unresolved: {near} nodes within |x| <= {ORIGIN_WINDOW} "
            f"(need {ORIGIN_NODES} and a node at x = 0)",
            minimum_count=minimum,
        )
    return grid.index_of(0.0)


def derivative_jump(u: ComplexSignal) -> complex:
    """u'(0+) - u'(0-) from one-sided 3-point stencils that skip the origin node."""
    i0 = _origin_index(u.grid)
    v, h = u.values, u.grid.step
    right = (-5 * v[i0 + 1] + 8 * v[i0 + 2] - 3 * v[i0 + 3]) / (2 * h)
    left = (5 * v[i0 - 1] - 8 * v[i0 - 2] + 3 * v[i0 - 3]) / (2 * h)
    return complex(right - left)


def _residual(u: ComplexSignal, alpha_t: float, h1: float) -> float:
    i0 = _origin_index(u.grid)
    mismatch = abs(derivative_jump(u) - alpha_t * u.values[i0])
    return float(mismatch / h1) if h1 > 0 else float(mismatch)


def jump_residual(field: WaveField, alpha: CouplingPath) -> np.ndarray:
    _origin_index(field.space)
    couplings = alpha.truncated(field.times.points)
    return np.array(
        [
            _residual(u, a, sobolev_norm(u, 1, support_floor=None))
            for u, a in zip(field.snapshots, couplings)
        ]
    )


def _trace(u: ComplexSignal) -> complex:
    if u.grid.has_node(0.0):
        return u.at(0.0)
    re = np.interp(0.0, u.points, u.values.real)
    im = np.interp(0.0, u.points, u.values.imag)
    return complex(re + 1j * im)


def diagnose(
    field: WaveField,
    charge: Optional[ChargeSolution] = None,
    alpha: Optional[CouplingPath] = None,
) -> WaveField:
    """Attach mass, H1 norm, jump residual and origin trace to every snapshot."""
    t = field.times.points
    if alpha is not None:
        couplings = alpha.truncated(t)
    elif charge is not None and charge.alpha_T is not None:
        couplings = np.interp(t, charge.time_grid.points, charge.alpha_T, left=0.0, right=0.0)
    else:
        couplings = None
    try:
        _origin_index(field.space)
        resolved = couplings is not None
    except ResolutionError as e:
        logging.warning(f"jump residual skipped: {e}")
        resolved = False
    records = []
    for k, u in enumerate(field.snapshots):
        h1 = sobolev_norm(u, 1, support_floor=None)
        residual = _residual(u, couplings[k], h1) if resolved else float("nan")
        records.append(SnapshotDiagnostics(float(t[k]), u.mass(), h1, residual, _trace(u)))
    return replace(field, diagnostics=records)


def mass_and_h1(field: WaveField) -> NormSeries:
    mass = np.array([u.mass() for u in field.snapshots])
    h1 = np.array([sobolev_norm(u, 1, support_floor=None) for u in field.snapshots])
    m0 = mass[0] if mass[0] > 0 else 1.0
    h0 = h1[0] if h1[0] > 0 else 1.0
    return NormSeries(
        times=field.times.points,
        mass=mass,
        h1=h1,
        relative_mass_drift=float(np.max(np.abs(mass - mass[0])) / m0),
        relative_h1_spread=float((h1.max() - h1.min()) / h0),
        mass_modulus=max_step(mass),
        h1_modulus=max_step(h1),
    )


def charge_mismatch(field: WaveField, q: ChargeSolution, plateau: float) -> float:
    """sup |alpha_T(t) u(t, 0) - q(t)| / sup |q| over snapshot times in [-plateau, plateau]."""
    if q.alpha_T is None:
        raise DomainError("charge solution carries no coupling samples")
    t = field.times.points
    inside = np.abs(t) <= plateau * (1 + 1e-12)
    if not np.any(inside):
        raise DomainError(f"no snapshot time inside the plateau [-{plateau}, {plateau}]")
    couplings = np.interp(t, q.time_grid.points, q.alpha_T, left=0.0, right=0.0)
    traces = np.array([_trace(u) for u in field.snapshots])
    charge = _charge_values(q, t)
    gap = np.abs(couplings * traces - charge)[inside].max()
    scale = np.abs(charge[inside]).max()
    return float(gap / scale) if scale > 0 else float(gap)


def time_derivative(
    u0: ComplexSignal, q: ChargeSolution, t: float, domain_tol: float = 1e-2
) -> ComplexSignal:
    """
    i d/dt u(t) from

        i d/dt u_hat(t) = e^{-it xi^2} [F(H u0) + integral_0^t e^{is xi^2} q'(s) ds],

    where F(H u0) = xi^2 u0_hat + q(0). The kink of u0 at the origin is taken
    out in closed form before differentiating spectrally. Only defined for
    charges of class H^{3/4} and data satisfying the jump condition at t = 0.
    """
    if q.regularity_class < DERIVATIVE_CLASS:
        raise DomainError(
            f"time derivative needs a coupling of class H^{DERIVATIVE_CLASS}, "
            f"got H^{q.regularity_class:g}"
        )
    charge0 = q.value_at(0.0)
    jump = derivative_jump(u0)
    scale = max(sobolev_norm(u0, 1, support_floor=None), np.finfo(float).tiny)
    if abs(jump - charge0) > domain_tol * scale:
        raise DomainError(
            f"initial data is outside the operator domain: derivative jump {jump:.4g} "
            f"but q(0) = {charge0:.4g}"
        )

    kink = 0.5 * charge0 * np.exp(-np.abs(u0.points))
    smooth = dft(u0.with_values(u0.values + kink))
    h_u0 = idft(smooth.with_values(smooth.frequencies**2 * smooth.values)).values + kink
    spec = dft(u0.with_values(h_u0))
    omega, folded = _folded_frequencies(spec)
    values = spec.values
    segment = _charge_segment(q, t)
    if segment is not None:
        nodes, charge = segment
        slopes = np.diff(charge) / np.diff(nodes)
        values = values + filon_constant_sum(omega, nodes, slopes)[folded]
    return idft(spec.with_values(np.exp(-1j * t * spec.frequencies**2) * values))
