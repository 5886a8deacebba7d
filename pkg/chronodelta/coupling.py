"""Coupling paths alpha(t) and their smooth cutoff alpha_T."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import DomainError
from .signal_core import Axis, ComplexSignal, UniformGrid, smooth_step

_CLOSED_FORM_SAMPLES = 1025


@dataclass(frozen=True)
class CutoffProfile:
    """
    Smooth even cutoff: 1 on |s| <= plateau, 0 on |s| >= edge, edge < 1/2.
    """

    plateau: float = 0.3
    edge: float = 0.45

    def __post_init__(self):
        if not 0 < self.plateau < self.edge < 0.5:
            raise DomainError(
                f"cutoff needs 0 < plateau < edge < 1/2, got {self.plateau}, {self.edge}"
            )

    def __call__(self, s) -> np.ndarray:
        s = np.abs(np.asarray(s, dtype=float))
        return smooth_step((self.edge - s) / (self.edge - self.plateau))


class CouplingKind(str, Enum):
    CLOSED_FORM = "closed_form"
    SAMPLED = "sampled"
    SYNTHESIZED = "synthesized"


@dataclass(frozen=True, eq=False)
class CouplingPath:
    """
    The coupling alpha(t) and its compactly supported truncation
    alpha_T(t) = alpha(t) chi(t / T).

    Closed-form paths are evaluated exactly; sampled and synthesized paths
    are interpolated linearly and vanish outside their sampling window.
    """

    kind: CouplingKind
    samples: ComplexSignal
    regularity_class: float
    T: float
    profile: CutoffProfile = field(default_factory=CutoffProfile)
    function: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", CouplingKind(self.kind))
        if not self.T > 0:
            raise DomainError(f"truncation time T must be positive, got {self.T}")
        if np.max(np.abs(self.samples.values.imag), initial=0.0) > 0:
            raise DomainError("coupling samples must be real")
        if self.kind is CouplingKind.CLOSED_FORM and self.function is None:
            raise DomainError("closed-form coupling needs a function")

    @classmethod
    def from_function(
        cls,
        function: Callable[[np.ndarray], np.ndarray],
        T: float,
        regularity_class: float = np.inf,
        profile: Optional[CutoffProfile] = None,
        label: str = "",
    ) -> "CouplingPath":
        grid = UniformGrid.span(-T / 2, T / 2, _CLOSED_FORM_SAMPLES)
        values = np.real(np.asarray(function(grid.points), dtype=complex)) * np.ones(grid.count)
        return cls(
            kind=CouplingKind.CLOSED_FORM,
            samples=ComplexSignal(grid, values, Axis.TIME),
            regularity_class=regularity_class,
            T=T,
            profile=profile or CutoffProfile(),
            function=function,
            label=label,
        )

    @classmethod
    def constant(
        cls, value: float, T: float, profile: Optional[CutoffProfile] = None
    ) -> "CouplingPath":
        return cls.from_function(
            lambda t: np.full(np.shape(t), float(value)),
            T,
            profile=profile,
            label=f"constant {value:g}",
        )

    @classmethod
    def zero(cls, T: float = 4.0) -> "CouplingPath":
        return cls.constant(0.0, T)

    @classmethod
    def from_samples(
        cls,
        samples: ComplexSignal,
        T: float,
        regularity_class: float,
        kind: CouplingKind = CouplingKind.SAMPLED,
        profile: Optional[CutoffProfile] = None,
        label: str = "",
    ) -> "CouplingPath":
        samples = ComplexSignal(samples.grid, samples.values.real, Axis.TIME)
        return cls(kind, samples, regularity_class, T, profile or CutoffProfile(), None, label)

    def alpha(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.function is not None:
            return np.real(np.asarray(self.function(t), dtype=complex)) * np.ones(t.shape)
        grid = self.samples.grid
        return np.interp(t, grid.points, self.samples.values.real, left=0.0, right=0.0)

    def truncated(self, t) -> np.ndarray:
        """alpha_T(t) = alpha(t) chi(t / T); zero outside [-T/2, T/2]."""
        t = np.asarray(t, dtype=float)
        return self.alpha(t) * self.profile(t / self.T)

    def truncated_signal(self, grid: UniformGrid) -> ComplexSignal:
        return ComplexSignal(grid, self.truncated(grid.points), Axis.TIME)

    @property
    def plateau(self) -> float:
        """alpha_T equals alpha on [-plateau, plateau]."""
        return self.profile.plateau * self.T

    def is_zero(self) -> bool:
        if self.function is not None:
            probe = np.linspace(-self.T / 2, self.T / 2, 257)
            return bool(np.all(self.truncated(probe) == 0))
        return bool(np.all(self.samples.values == 0))

    def perturbed(self, delta: "CouplingPath", scale: float = 1.0) -> "CouplingPath":
        """Path alpha + scale * delta; sampled on the finer grid unless both are closed-form."""
        label = f"{self.label} + {scale:g} * {delta.label}"
        regularity = min(self.regularity_class, delta.regularity_class)
        if self.function is not None and delta.function is not None:
            return CouplingPath.from_function(
                lambda t: self.alpha(t) + scale * delta.alpha(t),
                self.T,
                regularity,
                self.profile,
                label,
            )
        finer = min(self.samples.grid.step, delta.samples.grid.step)
        lo = min(self.samples.grid.start, delta.samples.grid.start)
        hi = max(self.samples.grid.stop, delta.samples.grid.stop)
        count = int(round((hi - lo) / finer)) + 1
        grid = UniformGrid.span(lo, hi, max(count, 2))
        values = self.alpha(grid.points) + scale * delta.alpha(grid.points)
        return CouplingPath.from_samples(
            ComplexSignal(grid, values, Axis.TIME),
            self.T,
            regularity,
            profile=self.profile,
            label=label,
        )

    def describe(self) -> dict:
        return {
            "kind": self.kind.value,
            "label": self.label,
            "regularity_class": self.regularity_class,
            "T": self.T,
            "plateau": self.profile.plateau,
            "edge": self.profile.edge,
        }
