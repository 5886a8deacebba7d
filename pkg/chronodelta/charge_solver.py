"""
Assembly and solution of the charge equation

    q(t) = q0(t) + L_alpha q(t),   L_alpha q = -i alpha_T(t) L q(t) / (2 pi),

where q0(t) = alpha_T(t) [e^{it Delta} u0](0) and

    L q(t) = sqrt(pi) e^{-i pi/4} integral_0^t q(s) (t - s)^{-1/2} ds     (t > 0)
    L q(t) = sqrt(pi) e^{+i pi/4} integral_t^0 q(s) (s - t)^{-1/2} ds     (t < 0)

with lags restricted to [0, T]. Abel integrals use exact product weights
against the piecewise-linear interpolant of q.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.fft
from scipy.linalg import cho_factor, cho_solve

from .coupling import CouplingPath
from .errors import (
    DomainError,
    IterationLimitError,
    StepRejected,
    StiffnessError,
    SupportError,
)
from .free_propagator import origin_trace
from .quadrature import (
    BACKWARD_PHASE,
    FORWARD_PHASE,
    SQRT_PI,
    TRACE_FACTOR,
    abel_matrix,
)
from .signal_core import Axis, ComplexSignal, UniformGrid

_SINGULAR_COEFFICIENT = 1e-12


class SolverMethod(str, Enum):
    PICARD = "picard"
    MARCH = "march"


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    target_contraction: float = 0.5
    min_window: float = 1e-3
    max_iterations: int = 200
    initial_window: Optional[float] = None
    max_refinements: int = 2
    trace_padding: int = 8
    spectral_tail_tol: float = 1e-6
    strict: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError(f"tol must be positive, got {self.tol}")
        if not 0 < self.target_contraction < 1:
            raise DomainError(
                f"target_contraction must lie in (0, 1), got {self.target_contraction}"
            )
        if not self.min_window > 0:
            raise DomainError(f"min_window must be positive, got {self.min_window}")
        if self.max_iterations < 1:
            raise DomainError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.initial_window is not None and not self.initial_window > 0:
            raise DomainError(f"initial_window must be positive, got {self.initial_window}")
        if self.max_refinements < 0:
            raise DomainError("max_refinements must be >= 0")


@dataclass(frozen=True, eq=False)
class ChargeSolution:
    q: ComplexSignal
    q0: ComplexSignal
    method: SolverMethod
    iterations_per_window: List[int]
    window_length: float
    residual: float
    contraction_factor_estimate: float
    windows: List[Tuple[float, float]] = field(default_factory=list)
    window_ratios: List[float] = field(default_factory=list)
    halvings: int = 0
    seeded_windows: List[float] = field(default_factory=list)
    refinements: int = 0
    alpha_T: Optional[np.ndarray] = None
    regularity_class: float = np.inf

    @property
    def time_grid(self) -> UniformGrid:
        return self.q.grid

    def value_at(self, t: float) -> complex:
        """Linear interpolation of the charge; zero outside the grid."""
        grid = self.time_grid
        re = np.interp(t, grid.points, self.q.values.real, left=0.0, right=0.0)
        im = np.interp(t, grid.points, self.q.values.imag, left=0.0, right=0.0)
        return complex(re + 1j * im)

    def telemetry(self) -> Dict:
        return {
            "method": self.method.value,
            "iterations_per_window": list(map(int, self.iterations_per_window)),
            "windows": [[float(a), float(b)] for a, b in self.windows],
            "window_ratios": [float(r) for r in self.window_ratios],
            "window_length": float(self.window_length),
            "halvings": int(self.halvings),
            "seeded_windows": [float(w) for w in self.seeded_windows],
            "refinements": int(self.refinements),
            "residual": float(self.residual),
            "contraction_factor_estimate": float(self.contraction_factor_estimate),
            "time_grid": self.time_grid.to_dict(),
        }


def _origin_index(grid: UniformGrid) -> int:
    if grid.start > 1e-12 * grid.step or grid.stop < -1e-12 * grid.step:
        raise DomainError(f"time grid {grid} must contain t = 0")
    return grid.index_of(0.0)


def _lag_cap(T: float, step: float) -> int:
    return int(np.floor(T / step + 1e-9))


def assemble_q0(
    alpha: CouplingPath,
    u0: ComplexSignal,
    time_grid: UniformGrid,
    padding: int = 8,
    spectral_tail_tol: float = 1e-6,
    strict: bool = False,
) -> ComplexSignal:
    alpha_T = alpha.truncated(time_grid.points)
    if not np.any(alpha_T):
        return ComplexSignal.zeros(time_grid, Axis.TIME)
    trace = origin_trace(
        u0, time_grid, padding=padding, spectral_tail_tol=spectral_tail_tol, strict=strict
    )
    return ComplexSignal(time_grid, alpha_T * trace.values, Axis.TIME)


def _branch_matrices(grid: UniformGrid, T: float):
    """Forward and backward scaled Abel matrices, plus the origin index."""
    k0 = _origin_index(grid)
    cap = _lag_cap(T, grid.step)
    scale = np.sqrt(grid.step)
    forward = scale * abel_matrix(grid.count - 1 - k0, cap)
    backward = scale * abel_matrix(k0, cap)
    return k0, forward, backward


def apply_L(q: ComplexSignal, T: float) -> ComplexSignal:
    grid = q.grid
    t = grid.points
    beyond = np.abs(t) > T * (1 + 1e-12)
    if np.any(np.abs(q.values[beyond]) > 0):
        raise SupportError(f"charge must vanish outside [-{T}, {T}]")
    k0, forward, backward = _branch_matrices(grid, T)
    values = q.values
    out = np.zeros(grid.count, dtype=complex)
    out[k0:] += FORWARD_PHASE * (forward @ values[k0:])
    out[: k0 + 1] += (BACKWARD_PHASE * (backward @ values[k0::-1]))[::-1]
    return q.with_values(SQRT_PI * out)


def apply_L_alpha(q: ComplexSignal, alpha: CouplingPath) -> ComplexSignal:
    alpha_T = alpha.truncated(q.points)
    return q.with_values(-1j * alpha_T * TRACE_FACTOR * apply_L(q, alpha.T).values)


@dataclass
class _Branch:
    """q = q0 + diag(gain) W q on nodes ordered away from t = 0."""

    q0: np.ndarray
    gain: np.ndarray
    matrix: np.ndarray


def _branches(alpha_T: np.ndarray, q0: np.ndarray, grid: UniformGrid, T: float):
    k0, forward, backward = _branch_matrices(grid, T)
    factor = -1j * TRACE_FACTOR * SQRT_PI
    fwd = _Branch(q0[k0:], factor * FORWARD_PHASE * alpha_T[k0:], forward)
    bwd = _Branch(q0[k0::-1], factor * BACKWARD_PHASE * alpha_T[k0::-1], backward)
    return k0, fwd, bwd


def _merge(k0: int, count: int, forward: np.ndarray, backward: np.ndarray) -> np.ndarray:
    out = np.empty(count, dtype=complex)
    out[k0:] = forward
    out[: k0 + 1] = backward[::-1]
    return out


def fixed_point_residual(q: ComplexSignal, q0: ComplexSignal, alpha: CouplingPath) -> float:
    """||q - q0 - L_alpha q|| / ||q||"""
    r = q.values - q0.values - apply_L_alpha(q, alpha).values
    norm = np.linalg.norm(q.values)
    if norm == 0:
        return float(np.linalg.norm(r))
    return float(np.linalg.norm(r) / norm)


@dataclass
class _PicardLog:
    iterations: List[int] = field(default_factory=list)
    windows: List[Tuple[int, int]] = field(default_factory=list)
    ratios: List[float] = field(default_factory=list)
    halvings: int = 0
    window_nodes: int = 0


def _picard_branch(
    branch: _Branch, cfg: SolverConfig, step: float, window: float, log: _PicardLog
) -> np.ndarray:
    n = branch.q0.shape[0] - 1
    q = branch.q0.copy()
    if n == 0:
        return q
    if not np.any(branch.gain):
        log.iterations.append(1)
        log.windows.append((0, n))
        log.ratios.append(0.0)
        return q
    nodes = min(n, max(1, int(round(window / step))))
    start = 0
    while start < n:
        stop = min(start + nodes, n)
        rows = slice(start + 1, stop + 1)
        history = branch.matrix[rows, : start + 1] @ q[: start + 1]
        block = branch.matrix[rows, start + 1 : stop + 1]
        gain, data = branch.gain[rows], branch.q0[rows]
        x = data.copy()
        previous, worst, rejected = None, 0.0, False
        for iteration in range(1, cfg.max_iterations + 1):
            new = data + gain * (history + block @ x)
            update = np.linalg.norm(new - x)
            scale = max(np.linalg.norm(new), np.finfo(float).tiny)
            x = new
            converged = update <= cfg.tol * scale
            if previous is not None and previous > 0 and not converged:
                ratio = update / previous
                worst = max(worst, ratio)
                if ratio > cfg.target_contraction:
                    rejected = True
                    break
            if converged:
                break
            previous = update
        else:
            raise IterationLimitError(
                f"Picard iteration did not reach tol {cfg.tol:.1e} in "
                f"{cfg.max_iterations} iterations on [{start * step:.4g}, {stop * step:.4g}]",
                iterations=cfg.max_iterations,
            )
        if rejected:
            nodes //= 2
            log.halvings += 1
            if nodes < 1 or nodes * step < cfg.min_window:
                raise StiffnessError(
                    f"no contraction on windows down to {cfg.min_window:.1e} "
                    f"(last ratio {worst:.3f})",
                    window=nodes * step,
                    ratio=worst,
                )
            logging.debug(f"contraction ratio {worst:.3f}; halving window to {nodes * step:.4g}")
            continue
        q[rows] = x
        log.iterations.append(iteration)
        log.windows.append((start, stop))
        log.ratios.append(worst)
        start = stop
    log.window_nodes = nodes
    return q


def _march_branch(branch: _Branch) -> np.ndarray:
    n = branch.q0.shape[0] - 1
    q = branch.q0.copy()
    matrix = branch.matrix
    for k in range(1, n + 1):
        coefficient = 1.0 - branch.gain[k] * matrix[k, k]
        if abs(coefficient) < _SINGULAR_COEFFICIENT:
            raise StepRejected(f"near-singular marching coefficient at node {k}")
        q[k] = (branch.q0[k] + branch.gain[k] * (matrix[k, :k] @ q[:k])) / coefficient
    return q


def _prepare(
    alpha: CouplingPath,
    u0: Optional[ComplexSignal],
    cfg: SolverConfig,
    time_grid: UniformGrid,
    q0: Optional[ComplexSignal],
) -> ComplexSignal:
    if q0 is not None:
        if not q0.grid.matches(time_grid):
            raise DomainError("prescribed q0 does not live on the time grid")
        return q0
    if u0 is None:
        raise DomainError("either initial data or q0 must be given")
    return assemble_q0(
        alpha, u0, time_grid, cfg.trace_padding, cfg.spectral_tail_tol, strict=cfg.strict
    )


def solve_picard(
    alpha: CouplingPath,
    u0: Optional[ComplexSignal],
    cfg: SolverConfig,
    time_grid: UniformGrid,
    q0: Optional[ComplexSignal] = None,
) -> ChargeSolution:
    data = _prepare(alpha, u0, cfg, time_grid, q0)
    alpha_T = alpha.truncated(time_grid.points)
    k0, fwd, bwd = _branches(alpha_T, data.values, time_grid, alpha.T)
    step = time_grid.step
    spans = ((time_grid.count - 1 - k0) * step, k0 * step)
    if cfg.initial_window is not None:
        seeded = ()
        windows = (cfg.initial_window, cfg.initial_window)
    else:
        seeded = tuple(
            select_window(alpha, span, cfg, backward=bool(side)) if span > 0 else 0.0
            for side, span in enumerate(spans)
        )
        windows = tuple(w if w > 0 else step for w in seeded)
    log = _PicardLog()
    forward = _picard_branch(fwd, cfg, step, windows[0], log)
    backward = _picard_branch(bwd, cfg, step, windows[1], log)
    q = data.with_values(_merge(k0, time_grid.count, forward, backward))
    contraction = max(log.ratios, default=0.0)
    window_nodes = log.window_nodes or max(time_grid.count - 1, 1)
    logging.info(
        f"picard: {len(log.windows)} windows, {sum(log.iterations)} iterations, "
        f"{log.halvings} halvings, contraction {contraction:.3f}"
    )
    return ChargeSolution(
        q=q,
        q0=data,
        method=SolverMethod.PICARD,
        iterations_per_window=log.iterations,
        window_length=window_nodes * step,
        residual=fixed_point_residual(q, data, alpha),
        contraction_factor_estimate=contraction,
        windows=[
            (time_grid.points[k0] + a * step, time_grid.points[k0] + b * step)
            for a, b in log.windows
        ],
        window_ratios=log.ratios,
        halvings=log.halvings,
        seeded_windows=list(seeded),
        alpha_T=alpha_T,
        regularity_class=alpha.regularity_class,
    )


def _restrict(values: np.ndarray, levels: int) -> np.ndarray:
    return values[:: 2**levels]


def solve_march(
    alpha: CouplingPath,
    u0: Optional[ComplexSignal],
    cfg: SolverConfig,
    time_grid: UniformGrid,
    q0: Optional[ComplexSignal] = None,
) -> ChargeSolution:
    data = _prepare(alpha, u0, cfg, time_grid, q0)
    grid, fine_data = time_grid, data
    for level in range(cfg.max_refinements + 1):
        alpha_T = alpha.truncated(grid.points)
        k0, fwd, bwd = _branches(alpha_T, fine_data.values, grid, alpha.T)
        try:
            forward = _march_branch(fwd)
            backward = _march_branch(bwd)
            break
        except StepRejected as e:
            if level == cfg.max_refinements:
                raise
            logging.warning(f"{e}; refining the time grid")
            grid = grid.refined_nested()
            if q0 is not None:
                re = np.interp(grid.points, time_grid.points, data.values.real)
                im = np.interp(grid.points, time_grid.points, data.values.imag)
                fine_data = ComplexSignal(grid, re + 1j * im, Axis.TIME)
            else:
                fine_data = _prepare(alpha, u0, cfg, grid, None)
    values = _restrict(_merge(k0, grid.count, forward, backward), level)
    q = data.with_values(values)
    logging.info(f"march: {time_grid.count} nodes, {level} refinements")
    return ChargeSolution(
        q=q,
        q0=data,
        method=SolverMethod.MARCH,
        iterations_per_window=[1] * (time_grid.count - 1),
        window_length=time_grid.step,
        residual=fixed_point_residual(q, data, alpha),
        contraction_factor_estimate=float("nan"),
        refinements=level,
        alpha_T=alpha.truncated(time_grid.points),
        regularity_class=alpha.regularity_class,
    )


def solve(
    alpha: CouplingPath,
    u0: Optional[ComplexSignal],
    cfg: SolverConfig,
    time_grid: UniformGrid,
    method: SolverMethod = SolverMethod.PICARD,
    q0: Optional[ComplexSignal] = None,
) -> ChargeSolution:
    if SolverMethod(method) is SolverMethod.PICARD:
        return solve_picard(alpha, u0, cfg, time_grid, q0)
    return solve_march(alpha, u0, cfg, time_grid, q0)


def _h_quarter_factor(count: int, step: float, exponent: float = 0.25) -> np.ndarray:
    """Matrix R with ||R v|| equal to the H^exponent norm of the zero-extended samples v."""
    size = 1
    while size < 4 * count:
        size *= 2
    embed = np.zeros((size, count))
    offset = (size - count) // 2
    embed[offset : offset + count, :] = np.eye(count)
    spectrum = step * scipy.fft.fftshift(scipy.fft.fft(embed, axis=0), axes=0)
    dxi = 2 * np.pi / (size * step)
    xi = dxi * (np.arange(size) - size // 2)
    weight = np.sqrt((1 + xi**2) ** exponent * dxi / (2 * np.pi))
    return weight[:, None] * spectrum


def contraction_estimate(
    alpha: CouplingPath,
    window: float,
    start: float = 0.0,
    nodes: int = 128,
    probes: int = 4,
    iterations: int = 40,
    seed: int = 0,
) -> float:
    """
    Operator norm of q -> L_alpha q on H^{1/4} functions supported in
    [start, start + window], by power iteration from random smooth probes.
    """
    if not window > 0:
        raise DomainError(f"window must be positive, got {window}")
    step = window / nodes
    t = start + step * np.arange(nodes + 1)
    alpha_T = alpha.truncated(t)
    if not np.any(alpha_T):
        return 0.0
    gain = -1j * TRACE_FACTOR * SQRT_PI * FORWARD_PHASE * alpha_T
    operator = gain[:, None] * (np.sqrt(step) * abel_matrix(nodes, None))
    factor = _h_quarter_factor(nodes + 1, step)
    gram = factor.conj().T @ factor
    chol = cho_factor(gram)
    rng = np.random.default_rng(seed)
    modes = np.arange(1, 9)
    best = 0.0
    with np.errstate(over="raise", invalid="raise"):
        try:
            for _ in range(probes):
                coefficients = rng.standard_normal(modes.size) + 1j * rng.standard_normal(modes.size)
                v = np.sin(np.pi * np.outer(t - start, modes) / window) @ (coefficients / modes)
                estimate = 0.0
                for _ in range(iterations):
                    av = operator @ v
                    norm_v = np.sqrt(np.real(np.vdot(v, gram @ v)))
                    if norm_v == 0:
                        break
                    estimate = np.sqrt(np.real(np.vdot(av, gram @ av))) / norm_v
                    v = cho_solve(chol, operator.conj().T @ (gram @ av))
                    v = v / np.sqrt(np.real(np.vdot(v, gram @ v)))
                best = max(best, estimate)
        except FloatingPointError:
            return float("inf")
    if not np.isfinite(best):
        return float("inf")
    return float(best)


def select_window(
    alpha: CouplingPath, span: float, cfg: SolverConfig, backward: bool = False
) -> float:
    """
    Largest span / 2^k such that the contraction estimate of every window of
    that length along the branch is at most cfg.target_contraction. Forward
    windows tile [0, span], backward ones [-span, 0].
    """
    if not span > 0:
        raise DomainError(f"span must be positive, got {span}")
    window = span
    while True:
        estimate = _worst_window_estimate(alpha, span, window, cfg.target_contraction, backward)
        if estimate <= cfg.target_contraction:
            logging.debug(f"seed window {window:.4g} with contraction estimate {estimate:.3f}")
            return window
        if window / 2 < cfg.min_window:
            raise StiffnessError(
                f"contraction estimate {estimate:.3f} above {cfg.target_contraction} "
                f"on every window down to {cfg.min_window:.1e}",
                window=window,
                ratio=estimate,
            )
        window /= 2


def _worst_window_estimate(
    alpha: CouplingPath, span: float, window: float, limit: float, backward: bool
) -> float:
    """Largest estimate over the tiling, stopping at the first window above limit."""
    worst = 0.0
    count = int(np.ceil(span / window - 1e-9))
    for k in range(count):
        start = -(k + 1) * window if backward else k * window
        worst = max(worst, contraction_estimate(alpha, window, start=start))
        if worst > limit:
            break
    return worst
