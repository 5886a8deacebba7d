"""
Product-integration moments for the singular and oscillatory kernels of the
point-interaction problem.

Every rule here integrates a kernel exactly against the piecewise-linear
interpolant of the smooth factor. A rule is described by two antiderivatives
M0, M1 of k(y) and y*k(y); linear_panel_weights turns them into per-panel
weights for the left and right node of each panel.

The branch phases of the free propagator live here and nowhere else:
FORWARD_PHASE for the e^{it Delta} branch at positive time lag,
BACKWARD_PHASE for negative lag.
"""

from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.special import fresnel

SQRT_PI = float(np.sqrt(np.pi))
FORWARD_PHASE = complex(np.exp(-1j * np.pi / 4))
BACKWARD_PHASE = complex(np.exp(1j * np.pi / 4))
# u(t, 0) = (1 / 2 pi) integral of u_hat(t, xi) dxi
TRACE_FACTOR = 1.0 / (2.0 * np.pi)

_SERIES_TERMS = 14
_SMALL_PHASE = 0.5


def linear_panel_weights(
    m0: np.ndarray, m1: np.ndarray, y: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Weights (w_left, w_right) of the panels [y[i], y[i+1]] given the kernel
    antiderivatives m0 = M0(y), m1 = M1(y) at the nodes.
    """
    p0 = m0[..., 1:] - m0[..., :-1]
    p1 = m1[..., 1:] - m1[..., :-1]
    ya, yb = y[..., :-1], y[..., 1:]
    d = yb - ya
    w_left = (yb * p0 - p1) / d
    w_right = (p1 - ya * p0) / d
    return w_left, w_right


def _abel_panels(m_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """Unit-step Abel weights for the panel with lags [m-1, m], m = 1..m_max."""
    m = np.arange(1, m_max + 1, dtype=float)
    r0, r1 = np.sqrt(m), np.sqrt(m - 1)
    p0 = 2.0 / (r0 + r1)
    p1 = (2.0 / 3.0) * (3 * m * m - 3 * m + 1) / (m * r0 + (m - 1) * r1)
    # node at the larger lag m gets (p1 - (m-1) p0), node at lag m-1 gets (m p0 - p1)
    return p1 - (m - 1) * p0, m * p0 - p1


@lru_cache(maxsize=16)
def abel_matrix(n: int, cap: Optional[int] = None) -> np.ndarray:
    """
    Lower-triangular (n+1) x (n+1) matrix W with
    sum_j W[k, j] q_j = integral_0^{k} q(s) (k - s)^{-1/2} ds on a unit grid,
    q piecewise linear. Panels with lag beyond cap are dropped.
    Scale by sqrt(step) for a grid of spacing step.
    """
    far, near = _abel_panels(max(n, 1))
    far = np.concatenate([[0.0], far])
    near = np.concatenate([[0.0], near])
    if cap is not None:
        far[cap + 1 :] = 0.0
        near[cap + 1 :] = 0.0
    lags = np.subtract.outer(np.arange(n + 1), np.arange(n + 1))
    lower = lags >= 0
    safe = np.where(lower, lags, 0)
    matrix = np.where(lags >= 1, far[safe], 0.0)
    shifted = np.where(lower, np.minimum(safe + 1, n), 0)
    right_end = np.where(lower, near[shifted], 0.0)
    right_end[:, 0] = 0.0
    matrix = matrix + right_end
    matrix.setflags(write=False)
    return matrix


def _fresnel_integral(z: np.ndarray) -> np.ndarray:
    """integral_0^z exp(i pi w^2 / 2) dw, with the limit (1+i)/2 at infinity."""
    z = np.asarray(z, dtype=float)
    finite = np.isfinite(z)
    s, c = fresnel(np.where(finite, z, 0.0))
    return np.where(finite, c + 1j * s, 0.5 + 0.5j)


def propagator_moments(a: np.ndarray, tau: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Antiderivatives in tau of exp(i a / tau) tau^{-1/2} and exp(i a / tau) tau^{1/2},
    a = x^2 / 4 >= 0, normalised so that both vanish at tau = 0 when a = 0.
    Broadcasts a against tau.
    """
    a, tau = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(tau, dtype=float))
    sqrt_tau = np.sqrt(tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        phase = np.where(tau > 0, np.exp(1j * a / np.where(tau > 0, tau, 1.0)), 0.0)
        v = np.where(tau > 0, 1.0 / np.where(tau > 0, sqrt_tau, 1.0), np.inf)
        scale = np.sqrt(2.0 * a / np.pi)
        g = np.where(
            a > 0,
            np.sqrt(np.pi / (2.0 * np.where(a > 0, a, 1.0))) * _fresnel_integral(v * scale),
            0.0,
        )
    m0 = 2.0 * phase * sqrt_tau - 4j * a * g
    m1 = (2.0 / 3.0) * tau * sqrt_tau * phase + (2j * a / 3.0) * m0
    return m0, m1


def _series(z: np.ndarray, offset: float) -> np.ndarray:
    """sum_n z^n / (n! (n + offset))"""
    total = np.zeros_like(z, dtype=complex)
    term = np.ones_like(z, dtype=complex)
    for n in range(_SERIES_TERMS):
        total = total + term / (n + offset)
        term = term * z / (n + 1)
    return total


def filon_linear_moments(omega: np.ndarray, h: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    E0 = integral_0^h exp(i omega u) du and E1 = integral_0^h u exp(i omega u) du,
    broadcast over omega and h.
    """
    omega, h = np.broadcast_arrays(np.asarray(omega, dtype=float), np.asarray(h, dtype=float))
    theta = omega * h
    small = np.abs(theta) < _SMALL_PHASE
    z = 1j * theta
    e0_series = h * _series(z, 1.0)
    e1_series = h * h * _series(z, 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(small, 1.0, omega)
        ei = np.exp(z)
        e0_closed = (ei - 1.0) / (1j * w)
        e1_closed = h * ei / (1j * w) + (ei - 1.0) / (w * w)
    return np.where(small, e0_series, e0_closed), np.where(small, e1_series, e1_closed)


def filon_panel_sum(
    omega: np.ndarray, nodes: np.ndarray, values: np.ndarray, chunk: int = 256
) -> np.ndarray:
    """
    integral over [nodes[0], nodes[-1]] of exp(i omega s) q(s) ds for every omega,
    q the linear interpolant of values on nodes (any order, any spacing).
    """
    omega = np.asarray(omega, dtype=float)
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=complex)
    total = np.zeros(omega.shape, dtype=complex)
    for lo in range(0, nodes.shape[0] - 1, chunk):
        s = nodes[lo : lo + chunk + 1]
        q = values[lo : lo + chunk + 1]
        h = np.diff(s)
        slope = np.diff(q) / h
        e0, e1 = filon_linear_moments(omega[:, None], h[None, :])
        start = np.exp(1j * omega[:, None] * s[None, :-1])
        total += np.sum(start * (q[None, :-1] * e0 + slope[None, :] * e1), axis=1)
    return total


def inverse_sqrt_oscillatory_moments(
    omega: float, tau: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    B0(tau) = integral_0^tau exp(-i omega y) y^{-1/2} dy and
    B1(tau) = integral_0^tau exp(-i omega y) y^{1/2} dy.
    """
    tau = np.asarray(tau, dtype=float)
    sqrt_tau = np.sqrt(tau)
    z = -1j * omega * tau
    small = np.abs(omega * tau) < _SMALL_PHASE
    b0_series = sqrt_tau * _series(z, 0.5)
    b1_series = tau * sqrt_tau * _series(z, 1.5)
    if omega == 0:
        return b0_series, b1_series
    scale = np.sqrt(np.pi / (2.0 * abs(omega)))
    e = _fresnel_integral(sqrt_tau * np.sqrt(2.0 * abs(omega) / np.pi))
    b0_closed = 2.0 * scale * (np.conj(e) if omega > 0 else e)
    b1_closed = (1j * sqrt_tau * np.exp(z) - 0.5j * b0_closed) / omega
    return np.where(small, b0_series, b0_closed), np.where(small, b1_series, b1_closed)


def filon_constant_sum(
    omega: np.ndarray, nodes: np.ndarray, levels: np.ndarray, chunk: int = 256
) -> np.ndarray:
    """
    integral over [nodes[0], nodes[-1]] of exp(i omega s) c(s) ds, c equal to
    levels[i] on the panel [nodes[i], nodes[i+1]].
    """
    omega = np.asarray(omega, dtype=float)
    nodes = np.asarray(nodes, dtype=float)
    levels = np.asarray(levels, dtype=complex)
    total = np.zeros(omega.shape, dtype=complex)
    for lo in range(0, nodes.shape[0] - 1, chunk):
        s = nodes[lo : lo + chunk + 1]
        h = np.diff(s)
        e0, _ = filon_linear_moments(omega[:, None], h[None, :])
        start = np.exp(1j * omega[:, None] * s[None, :-1])
        total += np.sum(start * e0 * levels[None, lo : lo + chunk], axis=1)
    return total
