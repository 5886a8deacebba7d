"""
Ground truth independent of the charge equation: closed-form solutions and a
finite-difference reference solver.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.linalg import solve_banded

from .coupling import CouplingPath
from .errors import DomainError, NumericalError, StepRejected
from .signal_core import Axis, ComplexSignal, UniformGrid, dft
from .wavefield import Route, WaveField, diagnose

DEFAULT_PHASE_LIMIT = 0.01
MASS_DRIFT_PER_STEP = 1e-10
_BANDWIDTH_MASS = 1e-4


@dataclass(frozen=True, eq=False)
class BoundState:
    """The eigenstate sqrt(kappa) e^{-kappa |x|} of -d^2/dx^2 + alpha delta, alpha < 0."""

    alpha: float
    kappa: float
    energy: float
    profile: ComplexSignal

    @classmethod
    def build(cls, alpha: float, grid: UniformGrid) -> "BoundState":
        if not alpha < 0:
            raise DomainError(f"a bound state needs alpha < 0, got {alpha}")
        kappa = -alpha / 2.0
        profile = ComplexSignal.from_function(
            grid, lambda x: np.sqrt(kappa) * np.exp(-kappa * np.abs(x))
        )
        return cls(alpha=alpha, kappa=kappa, energy=-(kappa**2), profile=profile)

    def at_time(self, t: float) -> ComplexSignal:
        return self.profile * np.exp(-1j * self.energy * t)


def bound_state_evolution(alpha: float, t: float, grid: UniformGrid) -> ComplexSignal:
    return BoundState.build(alpha, grid).at_time(t)


def free_gaussian(t: float, width: float, grid: UniformGrid, center: float = 0.0) -> ComplexSignal:
    """e^{it Delta} applied to the normalized Gaussian of the given width."""
    if not width > 0:
        raise DomainError(f"width must be positive, got {width}")
    spread = 1.0 + 2j * t / width**2
    x = grid.points - center
    values = (np.pi * width**2) ** -0.25 / np.sqrt(spread) * np.exp(-(x**2) / (2 * width**2 * spread))
    return ComplexSignal(grid, values, Axis.SPACE)


def effective_bandwidth(u: ComplexSignal, mass_fraction: float = _BANDWIDTH_MASS) -> float:
    """Smallest K with all but mass_fraction of the spectral mass inside |xi| <= K."""
    spec = dft(u)
    xi = np.abs(spec.frequencies)
    order = np.argsort(xi)
    energy = np.abs(spec.values[order]) ** 2
    total = energy.sum()
    if total == 0:
        return 0.0
    cumulative = np.cumsum(energy) / total
    k = int(np.searchsorted(cumulative, 1.0 - mass_fraction))
    return float(xi[order][min(k, xi.shape[0] - 1)])


def _resample(u0: ComplexSignal, space: UniformGrid) -> ComplexSignal:
    if u0.grid.matches(space):
        return u0
    re = np.interp(space.points, u0.points, u0.values.real, left=0.0, right=0.0)
    im = np.interp(space.points, u0.points, u0.values.imag, left=0.0, right=0.0)
    return ComplexSignal(space, re + 1j * im, Axis.SPACE)


class _MidpointStepper:
    """Implicit midpoint for i u_t = -D2 u + alpha(t) / h e_0 e_0^T u, Dirichlet ends."""

    def __init__(self, alpha: CouplingPath, space: UniformGrid):
        self.alpha = alpha
        self.h = space.step
        self.count = space.count
        self.origin = space.index_of(0.0)
        self.worst_drift = 0.0

    def _apply_h(self, u: np.ndarray, coupling: float) -> np.ndarray:
        out = 2.0 * u
        out[1:] -= u[:-1]
        out[:-1] -= u[1:]
        out /= self.h**2
        out[self.origin] += coupling / self.h * u[self.origin]
        return out

    def step(self, u: np.ndarray, t: float, dt: float) -> np.ndarray:
        coupling = float(self.alpha.truncated(t + dt / 2))
        half = 0.5j * dt
        bands = np.zeros((3, self.count), dtype=complex)
        bands[0, 1:] = -half / self.h**2
        bands[1, :] = 1.0 + half * 2.0 / self.h**2
        bands[1, self.origin] += half * coupling / self.h
        bands[2, :-1] = -half / self.h**2
        new = solve_banded((1, 1), bands, u - half * self._apply_h(u, coupling))
        before = np.sum(np.abs(u) ** 2)
        if before > 0:
            self.worst_drift = max(
                self.worst_drift, abs(np.sum(np.abs(new) ** 2) - before) / before
            )
        return new


def crank_nicolson_reference(
    alpha: CouplingPath,
    u0: ComplexSignal,
    times: UniformGrid,
    space: Optional[UniformGrid] = None,
    dt: Optional[float] = None,
    phase_limit: float = DEFAULT_PHASE_LIMIT,
    strict: bool = False,
) -> WaveField:
    space = space or u0.grid
    if not space.has_node(0.0):
        raise DomainError("the reference solver needs x = 0 as a grid node")
    start = _resample(u0, space)
    bandwidth = max(effective_bandwidth(start), 1.0)
    limit = phase_limit / bandwidth**2
    if dt is None:
        dt = limit
    elif not 0 < dt <= limit:
        raise StepRejected(
            f"time step {dt:.3e} too coarse for bandwidth {bandwidth:.3g}: "
            f"dt * K^2 must stay below {phase_limit}"
        )

    stepper = _MidpointStepper(alpha, space)
    snapshots: List[Optional[np.ndarray]] = [None] * times.count
    targets = times.points
    for direction in (1.0, -1.0):
        picked = [k for k, t in enumerate(targets) if (t >= 0 if direction > 0 else t < 0)]
        picked.sort(key=lambda k: abs(targets[k]))
        u, clock = start.values.copy(), 0.0
        for k in picked:
            span = targets[k] - clock
            steps = int(np.ceil(abs(span) / dt - 1e-9))
            if steps > 0:
                local = span / steps
                for _ in range(steps):
                    u = stepper.step(u, clock, local)
                    clock += local
            clock = targets[k]
            snapshots[k] = u.copy()

    if stepper.worst_drift > MASS_DRIFT_PER_STEP:
        message = (
            f"reference solver mass drift {stepper.worst_drift:.2e} per step "
            f"exceeds {MASS_DRIFT_PER_STEP:.0e}"
        )
        if strict:
            raise NumericalError(message)
        logging.warning(message)
    logging.info(f"reference solver: dt={dt:.3e}, bandwidth {bandwidth:.3g}")
    field = WaveField(
        times,
        space,
        [ComplexSignal(space, values, Axis.SPACE) for values in snapshots],
        Route.REFERENCE,
    )
    return diagnose(field, alpha=alpha)
