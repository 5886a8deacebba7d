"""
Littlewood-Paley decomposition on a sampled grid.

chi(xi) = 1 on |xi| <= 1 and 0 on |xi| >= 4/3, built from a C-infinity step;
phi(xi) = chi(xi / 2) - chi(xi) lives on 1 <= |xi| <= 8/3. The partition sum
chi + sum_{q <= Q} phi(2^-q .) telescopes to chi(2^-(Q+1) .), so the identity
is exact wherever that last cutoff equals one.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np

from .errors import DomainError, GridMismatchError, ResolutionError
from .signal_core import (
    ComplexSignal,
    UniformGrid,
    dft,
    idft,
    require_same_grid,
    smooth_step,
    sobolev_norm,
)

ANNULUS_OUTER = 8.0 / 3.0
_CHI_EDGE = 4.0 / 3.0
_MIN_BLOCKS = 3


def chi(xi) -> np.ndarray:
    """Low-frequency cutoff."""
    return 1.0 - smooth_step((np.abs(xi) - 1.0) / (_CHI_EDGE - 1.0))


def phi(xi) -> np.ndarray:
    """Annulus profile."""
    return chi(np.asarray(xi) / 2.0) - chi(xi)


@dataclass(frozen=True)
class DyadicPartition:
    grid: UniformGrid
    q_max: int

    chi = staticmethod(chi)
    phi = staticmethod(phi)

    @property
    def nyquist(self) -> float:
        return np.pi / self.grid.step

    @property
    def resolved_band(self) -> float:
        """Frequencies below this radius are reproduced exactly by the blocks."""
        return 2.0 ** (self.q_max + 1)

    @property
    def indices(self) -> List[int]:
        return list(range(-1, self.q_max + 1))

    def profile(self, q: int, xi) -> np.ndarray:
        """Multiplier of block q: chi for q = -1, phi(2^-q xi) otherwise."""
        if q < -1:
            raise DomainError(f"block index must be >= -1, got {q}")
        if q == -1:
            return chi(xi)
        return phi(np.asarray(xi) / 2.0**q)

    def partial_profile(self, q: int, xi) -> np.ndarray:
        """Multiplier of S_q = sum_{j <= q-1} Delta_j, i.e. chi(2^-q xi)."""
        if q <= -1:
            return np.zeros_like(np.asarray(xi, dtype=float))
        return chi(np.asarray(xi) / 2.0**q)

    def unity_residual(self, xi) -> float:
        """max |chi + sum_q phi(2^-q xi) - 1| over the given frequencies."""
        xi = np.asarray(xi, dtype=float)
        total = sum(self.profile(q, xi) for q in self.indices)
        return float(np.max(np.abs(total - 1.0)))


def build_partition(grid: UniformGrid) -> DyadicPartition:
    nyquist = np.pi / grid.step
    q_max = int(np.floor(np.log2(nyquist / ANNULUS_OUTER))) - 1
    if q_max < _MIN_BLOCKS - 1:
        needed_nyquist = ANNULUS_OUTER * 2.0 ** (_MIN_BLOCKS + 1)
        minimum = 64
        while np.pi * minimum / grid.length < needed_nyquist:
            minimum *= 2
        raise ResolutionError(
            f"grid step {grid.step:.4g} resolves only {q_max + 2} dyadic blocks; "
            f"use at least {minimum} points on a window of length {grid.length:.4g}",
            minimum_count=minimum,
        )
    return DyadicPartition(grid=grid, q_max=q_max)


@dataclass(frozen=True, eq=False)
class DyadicDecomposition:
    partition: DyadicPartition
    blocks: Tuple[ComplexSignal, ...]
    source_grid: UniformGrid
    unresolved: ComplexSignal

    def block(self, q: int) -> ComplexSignal:
        return self.blocks[q + 1]

    def partial_sum(self, q: int) -> ComplexSignal:
        """S_q f = sum of blocks with index <= q - 1."""
        values = np.zeros(self.source_grid.count, dtype=complex)
        for j in range(-1, min(q, self.partition.q_max + 1)):
            values = values + self.block(j).values
        return ComplexSignal(self.source_grid, values, self.blocks[0].axis)

    def reconstruction(self) -> ComplexSignal:
        return self.partial_sum(self.partition.q_max + 1)

    def energies(self) -> np.ndarray:
        return np.array([b.l2_norm() for b in self.blocks])


def _check_partition(f: ComplexSignal, partition: DyadicPartition):
    if not f.grid.matches(partition.grid):
        raise GridMismatchError("signal grid differs from the partition grid")


def decompose(f: ComplexSignal, partition: DyadicPartition) -> DyadicDecomposition:
    _check_partition(f, partition)
    spec = dft(f)
    xi = spec.frequencies
    blocks = tuple(
        idft(spec.with_values(spec.values * partition.profile(q, xi))) for q in partition.indices
    )
    outside = 1.0 - partition.partial_profile(partition.q_max + 1, xi)
    unresolved = idft(spec.with_values(spec.values * outside))
    return DyadicDecomposition(partition, blocks, f.grid, unresolved)


def lp_norm(values: np.ndarray, step: float, p: float) -> float:
    magnitudes = np.abs(values)
    if np.isinf(p):
        return float(magnitudes.max())
    return float((step * np.sum(magnitudes**p)) ** (1.0 / p))


def _reciprocal(p: float) -> float:
    return 0.0 if np.isinf(p) else 1.0 / p


def _parse_exponent(value: Union[float, str]) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", "oo"):
            return np.inf
        value = float(value)
    return float(value)


@dataclass(frozen=True)
class BesovIndex:
    s: float
    p: float = 2.0
    r: float = 2.0

    def __post_init__(self):
        p, r = _parse_exponent(self.p), _parse_exponent(self.r)
        for name, value in (("p", p), ("r", r)):
            if not value >= 1:
                raise DomainError(f"Besov exponent {name} must lie in [1, inf], got {value}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "r", r)


def aggregate_blocks(block_norms: np.ndarray, s: float, r: float) -> float:
    """l^r aggregate of 2^{qs} ||Delta_q f|| over q = -1, 0, 1, ..."""
    q = np.arange(-1, len(block_norms) - 1)
    weighted = 2.0 ** (q * s) * np.asarray(block_norms)
    if np.isinf(r):
        return float(weighted.max())
    return float(np.sum(weighted**r) ** (1.0 / r))


def besov_norm(f: ComplexSignal, idx: BesovIndex, partition: DyadicPartition) -> float:
    decomposition = decompose(f, partition)
    step = f.grid.step
    norms = np.array([lp_norm(b.values, step, idx.p) for b in decomposition.blocks])
    return aggregate_blocks(norms, idx.s, idx.r)


@dataclass(frozen=True, eq=False)
class BonyDecomposition:
    t_uv: ComplexSignal
    t_vu: ComplexSignal
    remainder: ComplexSignal

    def total(self) -> ComplexSignal:
        return self.t_uv + self.t_vu + self.remainder


def bony_decompose(
    u: ComplexSignal, v: ComplexSignal, partition: DyadicPartition
) -> BonyDecomposition:
    """
    T_u v = sum_q S_{q-1}u Delta_q v, T_v u symmetric, R = sum_{|q-q'|<=1} Delta_q u Delta_q' v.
    """
    require_same_grid(u, v)
    du, dv = decompose(u, partition), decompose(v, partition)
    n = len(partition.indices)
    bu = np.array([b.values for b in du.blocks])
    bv = np.array([b.values for b in dv.blocks])
    # prefix[k] = sum of the first k blocks, so S_{q-1} (blocks with index <= q-2) is prefix[q]
    prefix_u = np.vstack([np.zeros(u.grid.count), np.cumsum(bu, axis=0)])
    prefix_v = np.vstack([np.zeros(v.grid.count), np.cumsum(bv, axis=0)])
    t_uv = np.zeros(u.grid.count, dtype=complex)
    t_vu = np.zeros(u.grid.count, dtype=complex)
    remainder = np.zeros(u.grid.count, dtype=complex)
    for i in range(n):
        low = max(i - 1, 0)
        t_uv += prefix_u[low] * bv[i]
        t_vu += prefix_v[low] * bu[i]
        for j in range(max(i - 1, 0), min(i + 2, n)):
            remainder += bu[i] * bv[j]
    make = u.with_values
    return BonyDecomposition(make(t_uv), make(t_vu), make(remainder))


class ProductLaw(str, Enum):
    A = "a"
    B = "b"
    C = "c"
    D = "d"


def product_law_ratio(
    u: ComplexSignal,
    v: ComplexSignal,
    law: Union[ProductLaw, str],
    s: float,
    s_prime: Optional[float] = None,
    eps: float = 0.05,
    partition: Optional[DyadicPartition] = None,
    support_floor: Optional[float] = 1e-8,
) -> float:
    """
    ||uv||_target / (||u||_X ||v||_Y) for the four product laws:

    a) H^s x (B^{1/2}_{2,inf} cap L^inf) -> H^s, |s| < 1/2
    b) H^s x B^{s+eps}_{inf,inf} -> H^s, eps > 0 and s + eps > |s|
    c) H^s x H^{s'} -> H^{s+s'-1/2}, s, s' < 1/2, s + s' > 0
    d) H^s x H^s -> H^s, s > 1/2
    """
    require_same_grid(u, v)
    law = ProductLaw(law)
    partition = partition or build_partition(u.grid)
    product = u * v

    def h(signal: ComplexSignal, order: float) -> float:
        return sobolev_norm(signal, order, support_floor=support_floor)

    if law is ProductLaw.A:
        if abs(s) >= 0.5:
            raise DomainError(f"law a needs |s| < 1/2, got s = {s}")
        multiplier = besov_norm(v, BesovIndex(0.5, 2.0, np.inf), partition) + float(
            np.abs(v.values).max()
        )
        denominator = h(u, s) * multiplier
        numerator = h(product, s)
    elif law is ProductLaw.B:
        if eps <= 0 or s + eps <= abs(s):
            raise DomainError(f"law b needs eps > 0 and s + eps > |s|, got s = {s}, eps = {eps}")
        denominator = h(u, s) * besov_norm(v, BesovIndex(s + eps, np.inf, np.inf), partition)
        numerator = h(product, s)
    elif law is ProductLaw.C:
        s_prime = s if s_prime is None else s_prime
        if s >= 0.5 or s_prime >= 0.5 or s + s_prime <= 0:
            raise DomainError(
                f"law c needs s, s' < 1/2 and s + s' > 0, got s = {s}, s' = {s_prime}"
            )
        denominator = h(u, s) * h(v, s_prime)
        numerator = h(product, s + s_prime - 0.5)
    else:
        if s <= 0.5:
            raise DomainError(f"law d needs s > 1/2, got s = {s}")
        denominator = h(u, s) * h(v, s)
        numerator = h(product, s)
    if denominator == 0:
        return 0.0
    return numerator / denominator


def bernstein_check(
    f: ComplexSignal,
    q: int,
    k: int,
    a: float,
    b: float,
    partition: Optional[DyadicPartition] = None,
    block: bool = False,
) -> Tuple[float, float]:
    """
    Both sides of the Bernstein inequalities.

    block=False: (||D^k S_q f||_{L^b}, 2^{q(k + 1/a - 1/b)} ||S_q f||_{L^a})
    block=True:  (||D^k Delta_q f||_{L^a}, 2^{qk} ||Delta_q f||_{L^a})
    """
    a, b = _parse_exponent(a), _parse_exponent(b)
    if not 1 <= a <= b:
        raise DomainError(f"Bernstein needs 1 <= a <= b, got a = {a}, b = {b}")
    if k not in (0, 1, 2):
        raise DomainError(f"derivative order must be 0, 1 or 2, got {k}")
    partition = partition or build_partition(f.grid)
    _check_partition(f, partition)
    spec = dft(f)
    xi = spec.frequencies
    multiplier = partition.profile(q, xi) if block else partition.partial_profile(q, xi)
    piece = spec.values * multiplier
    base = idft(spec.with_values(piece)).values
    derived = idft(spec.with_values(piece * (1j * xi) ** k)).values
    step = f.grid.step
    if block:
        return lp_norm(derived, step, a), 2.0 ** (q * k) * lp_norm(base, step, a)
    scale = 2.0 ** (q * (k + _reciprocal(a) - _reciprocal(b)))
    return lp_norm(derived, step, b), scale * lp_norm(base, step, a)

