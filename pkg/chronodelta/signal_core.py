"""
Uniform grids, sampled complex signals and the Fourier transform shared by
every other module.

The transform convention is fixed here once:

    F f(xi) = integral of exp(-i xi x) f(x) dx,
    f(x)    = (1 / 2 pi) integral of exp(i xi x) F f(xi) dxi.

Discrete transforms approximate the integral by the rectangle rule on the
sampling grid, so that Parseval holds exactly in the discrete setting:
step * sum |f|^2 == (dxi / 2 pi) * sum |F f|^2.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Optional

import numpy as np
import scipy.fft

from .errors import DomainError, GridMismatchError, SizeError, SupportError

FOURIER_CONVENTION = "forward exp(-i xi x), inverse 1/(2 pi)"

_DTFT_CHUNK = 256


class Axis(str, Enum):
    TIME = "time"
    SPACE = "space"
    FREQUENCY = "frequency"


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class UniformGrid:
    """Points start + k*step for 0 <= k < count."""

    start: float
    step: float
    count: int

    def __post_init__(self):
        if not np.isfinite(self.start):
            raise DomainError(f"grid start must be finite, got {self.start}")
        if not (self.step > 0 and np.isfinite(self.step)):
            raise DomainError(f"grid step must be positive, got {self.step}")
        if int(self.count) != self.count or self.count < 2:
            raise DomainError(f"grid count must be an integer >= 2, got {self.count}")
        object.__setattr__(self, "count", int(self.count))

    @classmethod
    def centered(cls, length: float, count: int) -> "UniformGrid":
        """Periodic window [-length/2, length/2) with x = 0 at index count // 2."""
        step = length / count
        return cls(start=-(count // 2) * step, step=step, count=count)

    @classmethod
    def span(cls, start: float, stop: float, count: int) -> "UniformGrid":
        """Grid whose first and last points are start and stop."""
        if stop <= start:
            raise DomainError(f"span needs stop > start, got [{start}, {stop}]")
        return cls(start=start, step=(stop - start) / (count - 1), count=count)

    @property
    def points(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    @property
    def stop(self) -> float:
        return self.start + (self.count - 1) * self.step

    @property
    def length(self) -> float:
        """Width of the periodic window covered by the samples."""
        return self.count * self.step

    def refined(self) -> "UniformGrid":
        """Same window, half the step."""
        return UniformGrid(start=self.start, step=self.step / 2, count=2 * self.count)

    def refined_nested(self) -> "UniformGrid":
        """Same first and last point, half the step; old nodes stay nodes."""
        return UniformGrid(start=self.start, step=self.step / 2, count=2 * self.count - 1)

    def index_of(self, value: float, tol: float = 1e-9) -> int:
        """Index of the node equal to value, or DomainError if value is not a node."""
        k = int(round((value - self.start) / self.step))
        if k < 0 or k >= self.count or abs(self.start + k * self.step - value) > tol * max(1.0, self.step):
            raise DomainError(f"{value} is not a node of {self}")
        return k

    def has_node(self, value: float, tol: float = 1e-9) -> bool:
        try:
            self.index_of(value, tol)
        except DomainError:
            return False
        return True

    def frequency_grid(self) -> "UniformGrid":
        """Frequencies k * 2 pi / (count * step), k = -count/2 .. count/2 - 1."""
        dxi = 2 * np.pi / (self.count * self.step)
        return UniformGrid(start=-(self.count // 2) * dxi, step=dxi, count=self.count)

    def matches(self, other: "UniformGrid", rtol: float = 1e-12) -> bool:
        return (
            self.count == other.count
            and abs(self.step - other.step) <= rtol * self.step
            and abs(self.start - other.start) <= rtol * max(1.0, abs(self.start))
        )

    def to_dict(self) -> Dict[str, float]:
        return {"start": self.start, "step": self.step, "count": self.count}


@dataclass(frozen=True, eq=False)
class ComplexSignal:
    grid: UniformGrid
    values: np.ndarray
    axis: Axis = Axis.SPACE

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.ndim != 1 or values.shape[0] != self.grid.count:
            raise GridMismatchError(
                f"signal has {values.shape} values for a grid of {self.grid.count} points"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "axis", Axis(self.axis))

    @classmethod
    def from_function(cls, grid: UniformGrid, fn, axis: Axis = Axis.SPACE) -> "ComplexSignal":
        return cls(grid, fn(grid.points), axis)

    @classmethod
    def zeros(cls, grid: UniformGrid, axis: Axis = Axis.SPACE) -> "ComplexSignal":
        return cls(grid, np.zeros(grid.count, dtype=complex), axis)

    @property
    def points(self) -> np.ndarray:
        return self.grid.points

    def with_values(self, values) -> "ComplexSignal":
        return ComplexSignal(self.grid, values, self.axis)

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.step * np.sum(np.abs(self.values) ** 2)))

    def mass(self) -> float:
        return float(self.grid.step * np.sum(np.abs(self.values) ** 2))

    def at(self, x: float) -> complex:
        return complex(self.values[self.grid.index_of(x)])

    def embedded(self, count: int) -> "ComplexSignal":
        """Zero-extend symmetrically onto a grid of count points with the same step."""
        extra = count - self.grid.count
        if extra < 0:
            raise DomainError(f"cannot embed {self.grid.count} samples into {count}")
        left = extra // 2
        values = np.zeros(count, dtype=complex)
        values[left : left + self.grid.count] = self.values
        grid = UniformGrid(self.grid.start - left * self.grid.step, self.grid.step, count)
        return ComplexSignal(grid, values, self.axis)

    def padded_to_power_of_two(self, factor: int = 2) -> "ComplexSignal":
        target = 1
        while target < factor * self.grid.count:
            target *= 2
        return self.embedded(target)

    def __add__(self, other: "ComplexSignal") -> "ComplexSignal":
        require_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "ComplexSignal") -> "ComplexSignal":
        require_same_grid(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, other) -> "ComplexSignal":
        if isinstance(other, ComplexSignal):
            require_same_grid(self, other)
            return self.with_values(self.values * other.values)
        return self.with_values(self.values * other)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SpectralSignal:
    frequency_grid: UniformGrid
    values: np.ndarray
    source_start: float
    source_axis: Axis = Axis.SPACE
    convention_tag: str = field(default=FOURIER_CONVENTION)

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != (self.frequency_grid.count,):
            raise GridMismatchError("spectral values do not match their frequency grid")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def frequencies(self) -> np.ndarray:
        return self.frequency_grid.points

    @property
    def source_step(self) -> float:
        return 2 * np.pi / (self.frequency_grid.count * self.frequency_grid.step)

    def with_values(self, values) -> "SpectralSignal":
        return SpectralSignal(
            self.frequency_grid, values, self.source_start, self.source_axis, self.convention_tag
        )

    def l2_norm(self) -> float:
        """Norm scaled so that it equals the L2 norm of the source signal."""
        dxi = self.frequency_grid.step
        return float(np.sqrt(dxi / (2 * np.pi) * np.sum(np.abs(self.values) ** 2)))


def require_same_grid(a: ComplexSignal, b: ComplexSignal):
    if not a.grid.matches(b.grid):
        raise GridMismatchError(f"grids differ: {a.grid} vs {b.grid}")


def _require_transformable(grid: UniformGrid):
    if not is_power_of_two(grid.count):
        raise SizeError(f"transform needs a power-of-two count, got {grid.count}")


def dft(signal: ComplexSignal) -> SpectralSignal:
    _require_transformable(signal.grid)
    grid = signal.grid
    freq = grid.frequency_grid()
    xi = freq.points
    raw = scipy.fft.fftshift(scipy.fft.fft(signal.values))
    values = grid.step * np.exp(-1j * xi * grid.start) * raw
    return SpectralSignal(freq, values, grid.start, signal.axis)


def idft(spec: SpectralSignal) -> ComplexSignal:
    _require_transformable(spec.frequency_grid)
    xi = spec.frequencies
    step = spec.source_step
    shifted = scipy.fft.ifftshift(spec.values * np.exp(1j * xi * spec.source_start))
    values = scipy.fft.ifft(shifted) / step
    grid = UniformGrid(spec.source_start, step, spec.frequency_grid.count)
    return ComplexSignal(grid, values, spec.source_axis)


def dtft(signal: ComplexSignal, frequencies: Iterable[float]) -> np.ndarray:
    """F f at arbitrary frequencies by the rectangle rule on the signal's grid."""
    xi = np.atleast_1d(np.asarray(frequencies, dtype=float))
    x = signal.points
    out = np.empty(xi.shape[0], dtype=complex)
    for lo in range(0, xi.shape[0], _DTFT_CHUNK):
        block = xi[lo : lo + _DTFT_CHUNK]
        out[lo : lo + _DTFT_CHUNK] = np.exp(-1j * np.outer(block, x)) @ signal.values
    return signal.grid.step * out


def check_support(
    signal: ComplexSignal, floor: Optional[float] = 1e-8, strict: bool = False
) -> bool:
    """True when both window ends are below floor * max|values|."""
    if floor is None:
        return True
    magnitudes = np.abs(signal.values)
    peak = magnitudes.max()
    if peak == 0:
        return True
    edge = max(2, signal.grid.count // 128)
    tail = max(magnitudes[:edge].max(), magnitudes[-edge:].max())
    if tail <= floor * peak:
        return True
    message = (
        f"signal not compactly supported in its window: edge level {tail / peak:.3e} "
        f"exceeds floor {floor:.1e}"
    )
    if strict:
        raise SupportError(message)
    logging.warning(message)
    return False


def sobolev_norm(
    signal: ComplexSignal,
    s: float,
    support_floor: Optional[float] = 1e-8,
    strict: bool = False,
) -> float:
    """((1 / 2 pi) integral (1 + xi^2)^s |F f|^2 dxi)^(1/2) over the discrete band."""
    check_support(signal, support_floor, strict)
    spec = dft(signal)
    weight = (1.0 + spec.frequencies**2) ** s
    dxi = spec.frequency_grid.step
    return float(np.sqrt(dxi / (2 * np.pi) * np.sum(weight * np.abs(spec.values) ** 2)))


def sobolev_exponent_estimate(signal: ComplexSignal, shells: int = 4) -> float:
    """
    Largest s with the signal in H^s, estimated from the decay of spectral
    energy over the top dyadic frequency shells. Returns inf when the top of
    the band carries no measurable energy.
    """
    spec = dft(signal)
    xi = np.abs(spec.frequencies)
    energy = np.abs(spec.values) ** 2
    total = energy.sum()
    if total == 0:
        return np.inf
    top = int(np.floor(np.log2(xi.max()))) - 1
    if top < 1:
        return np.inf
    js = np.arange(max(0, top - shells + 1), top + 1)
    shell_energy = np.array([energy[(xi >= 2.0**j) & (xi < 2.0 ** (j + 1))].sum() for j in js])
    if shell_energy[-1] <= 1e-24 * total or np.any(shell_energy <= 0):
        return np.inf
    slope = np.polyfit(js, np.log2(shell_energy), 1)[0]
    return float(-slope / 2)


def smooth_step(y) -> np.ndarray:
    """C-infinity step: 0 for y <= 0, 1 for y >= 1."""
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)
        b = np.where(y < 1, np.exp(-1.0 / np.where(y < 1, 1.0 - y, 1.0)), 0.0)
    return a / (a + b)


def max_step(values: np.ndarray) -> float:
    """Discrete modulus of continuity: largest jump between neighbouring samples."""
    values = np.asarray(values)
    if values.shape[0] < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(values))))
