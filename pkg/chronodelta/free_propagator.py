"""
The free Schrodinger group e^{it Delta} on a periodic window, the trace of
free evolution at the origin, and the point-source kernel.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.integrate import trapezoid

from .errors import DomainError, SingularityError, TruncationError, WindowLeakageError
from .quadrature import (
    BACKWARD_PHASE,
    FORWARD_PHASE,
    SQRT_PI,
    inverse_sqrt_oscillatory_moments,
    linear_panel_weights,
)
from .signal_core import (
    Axis,
    ComplexSignal,
    SpectralSignal,
    UniformGrid,
    dft,
    dtft,
    idft,
    sobolev_exponent_estimate,
)

_GAUSS_NODES = 64
_EDGE_FRACTION = 16
_TAIL_BAND = 0.75
_NEGLIGIBLE = 1e-15


@dataclass(frozen=True, eq=False)
class OriginTrace:
    """[e^{it Delta} u0](0) on a time grid, split at |xi| = 1."""

    time_grid: UniformGrid
    split_I: np.ndarray
    split_II: np.ndarray
    sobolev_exponent: float = np.inf

    @property
    def values(self) -> np.ndarray:
        return self.split_I + self.split_II

    def as_signal(self) -> ComplexSignal:
        return ComplexSignal(self.time_grid, self.values, Axis.TIME)


def edge_mass_fraction(signal: ComplexSignal) -> float:
    """Share of the mass sitting in the outer sixteenth of the window on either side."""
    density = np.abs(signal.values) ** 2
    total = density.sum()
    if total == 0:
        return 0.0
    edge = max(1, signal.grid.count // _EDGE_FRACTION)
    return float((density[:edge].sum() + density[-edge:].sum()) / total)


def check_leakage(signal: ComplexSignal, tol: Optional[float], what: str = "evolved field"):
    if tol is None:
        return
    leaked = edge_mass_fraction(signal)
    if leaked > tol:
        raise WindowLeakageError(
            f"{what} reaches the window edge: edge mass fraction {leaked:.3e} > {tol:.1e}",
            leaked_mass=leaked,
        )


def free_multiplier(spec: SpectralSignal, t: float) -> np.ndarray:
    return np.exp(-1j * t * spec.frequencies**2)


def evolve(u0: ComplexSignal, t: float, leakage_tol: Optional[float] = 1e-6) -> ComplexSignal:
    spec = dft(u0)
    out = idft(spec.with_values(spec.values * free_multiplier(spec, t)))
    check_leakage(out, leakage_tol)
    return out


def spectral_tail_fraction(spec: SpectralSignal) -> float:
    """Share of spectral mass in the top quarter of the band."""
    energy = np.abs(spec.values) ** 2
    total = energy.sum()
    if total == 0:
        return 0.0
    nyquist = np.abs(spec.frequencies).max()
    return float(energy[np.abs(spec.frequencies) >= _TAIL_BAND * nyquist].sum() / total)


def _check_trace_data(u0: ComplexSignal, spectral_tail_tol: float, strict: bool = False) -> float:
    spec = dft(u0)
    tail = spectral_tail_fraction(spec)
    if tail > spectral_tail_tol:
        raise TruncationError(
            f"initial data is not resolved: {tail:.3e} of its spectral mass lies in "
            f"the top of the band (limit {spectral_tail_tol:.1e})",
            tail_fraction=tail,
        )
    exponent = sobolev_exponent_estimate(u0)
    if exponent <= 0.5:
        message = f"initial data looks like H^{exponent:.2f}; the origin trace needs s > 1/2"
        if strict:
            raise DomainError(message)
        logging.warning(message)
    return exponent


def _high_band_samples(u0: ComplexSignal, padding: int):
    """tau = xi^2 nodes on [1, band] and g(tau) = [F(sqrt tau) + F(-sqrt tau)] / (4 pi)."""
    fine = dft(u0.embedded(u0.grid.count * padding))
    xi = fine.frequencies
    values = fine.values
    positive = np.nonzero(xi > 1.0)[0]
    mirrored = fine.frequency_grid.count - positive
    keep = mirrored < fine.frequency_grid.count
    positive, mirrored = positive[keep], mirrored[keep]
    edge = dtft(u0, [1.0, -1.0])
    tau = np.concatenate([[1.0], xi[positive] ** 2])
    # F(-xi_k) sits at index count - k of the shifted spectrum
    g = np.concatenate([[edge[0] + edge[1]], values[positive] + values[mirrored]]) / (4 * np.pi)
    significant = np.nonzero(np.abs(g) > _NEGLIGIBLE * np.abs(g).max(initial=0.0))[0]
    if significant.size:
        last = min(significant[-1] + 2, tau.shape[0])
        tau, g = tau[:last], g[:last]
    return tau, g


def origin_trace(
    u0: ComplexSignal,
    time_grid: UniformGrid,
    padding: int = 16,
    spectral_tail_tol: float = 1e-6,
    strict: bool = False,
) -> OriginTrace:
    """
    I(t) integrates |xi| <= 1 with Gauss-Legendre nodes on the exact transform;
    II(t) integrates |xi| > 1 in tau = xi^2, where
    (1 / 2 pi) integral_{|xi|>1} e^{-it xi^2} F(xi) dxi
        = integral_1^band e^{-it tau} tau^{-1/2} g(tau) dtau,
    with tau^{-1/2} e^{-it tau} integrated exactly against linear g.
    """
    exponent = _check_trace_data(u0, spectral_tail_tol, strict)
    t = time_grid.points

    nodes, weights = np.polynomial.legendre.leggauss(_GAUSS_NODES)
    low = weights * dtft(u0, nodes) / (2 * np.pi)
    split_I = np.exp(-1j * np.outer(t, nodes**2)) @ low

    tau, g = _high_band_samples(u0, padding)
    split_II = np.empty(t.shape[0], dtype=complex)
    for k, tk in enumerate(t):
        b0, b1 = inverse_sqrt_oscillatory_moments(tk, tau)
        w_left, w_right = linear_panel_weights(b0, b1, tau)
        split_II[k] = np.dot(w_left, g[:-1]) + np.dot(w_right, g[1:])
    return OriginTrace(time_grid, split_I, split_II, exponent)


def trace_high_part_norm(u0: ComplexSignal, nu: float, padding: int = 4) -> float:
    """
    ||II||_{H^nu} = (2 pi integral_1^inf (1 + tau^2)^nu |G(tau)|^2 dtau)^{1/2}
    with II(t) = integral e^{-it tau} G(tau) dtau, evaluated in xi = sqrt(tau).
    """
    fine = dft(u0.embedded(u0.grid.count * padding))
    xi = fine.frequencies
    count = fine.frequency_grid.count
    positive = np.nonzero(xi >= 1.0)[0]
    positive = positive[count - positive < count]
    edge = dtft(u0, [1.0, -1.0])
    nodes = np.concatenate([[1.0], xi[positive]])
    folded = np.concatenate([[edge[0] + edge[1]], fine.values[positive] + fine.values[count - positive]])
    integrand = (1.0 + nodes**4) ** nu * np.abs(folded) ** 2 / nodes
    return float(np.sqrt(trapezoid(integrand, nodes) / (4 * np.pi)))


def point_source_kernel(tau: float, x: Union[float, np.ndarray]) -> Union[complex, np.ndarray]:
    """e^{i x^2 / (4 tau)} / sqrt(4 pi i tau), the fundamental solution of i u_t = -u_xx."""
    if tau == 0:
        raise SingularityError("point-source kernel is singular at zero time lag")
    phase = FORWARD_PHASE if tau > 0 else BACKWARD_PHASE
    x = np.asarray(x, dtype=float)
    value = phase * np.exp(1j * x * x / (4 * tau)) / (2 * SQRT_PI * np.sqrt(abs(tau)))
    return complex(value) if value.ndim == 0 else value
