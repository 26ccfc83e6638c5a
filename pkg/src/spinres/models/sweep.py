from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from spinres.errors import DomainError
from spinres.models.cavity_mode import CavityMode
from spinres.models.species import SpinSpecies

type FloatArray = npt.NDArray[np.float64]
type ComplexArray = npt.NDArray[np.complex128]
type MetaValue = str | int | float
# a (m_from, m_to) pair selecting a dipole transition
type TransitionChoice = tuple[float, float]


def _frozen_axis(values: npt.ArrayLike, name: str, min_points: int = 2) -> FloatArray:
    axis = np.array(values, dtype=np.float64)
    if axis.ndim != 1 or axis.size < min_points:
        raise DomainError(
            f"{name} must be a 1-D grid with at least {min_points} points"
        )
    if not np.all(np.isfinite(axis)):
        raise DomainError(f"{name} contains non-finite values")
    if not np.all(np.diff(axis) > 0):
        raise DomainError(f"{name} must be strictly increasing")
    axis.flags.writeable = False
    return axis


@dataclass(slots=True, frozen=True, kw_only=True, eq=False)
class SweepConfig:
    B_grid: FloatArray
    f_grid: FloatArray
    cavity: CavityMode
    species: tuple[SpinSpecies, ...] = ()
    temperature: float | None = None
    # per-species multiplicative g factor, keyed by species label
    coupling_overrides: Mapping[str, float] = field(default_factory=dict)
    # per-species transition, keyed by label. Default is the -3/2 <-> -1/2
    # branch given by spin_dispersion
    transitions: Mapping[str, TransitionChoice] = field(default_factory=dict)
    noise_sigma: float = 0.01
    seed: int = 0
    meta: Mapping[str, MetaValue] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "B_grid", _frozen_axis(self.B_grid, "B_grid"))
        object.__setattr__(self, "f_grid", _frozen_axis(self.f_grid, "f_grid"))
        if not self.noise_sigma >= 0:
            raise DomainError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.temperature is not None and not self.temperature > 0:
            raise DomainError(f"temperature must be positive, got {self.temperature}")
        labels = [s.label for s in self.species]
        if len(set(labels)) != len(labels):
            raise DomainError(f"species labels must be unique, got {labels}")
        for label in (*self.coupling_overrides, *self.transitions):
            if label not in labels:
                raise DomainError(f"'{label}' does not name a species")
        for label, factor in self.coupling_overrides.items():
            if not factor >= 0:
                raise DomainError(f"coupling override of {label} must be >= 0")


@dataclass(slots=True, frozen=True, kw_only=True, eq=False)
class FieldSweep:
    """Complex S21 over (B, f); s21 has shape (len(B_axis), len(f_axis))"""

    B_axis: FloatArray  # T
    f_axis: FloatArray  # Hz
    s21: ComplexArray
    meta: Mapping[str, MetaValue] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "B_axis", _frozen_axis(self.B_axis, "B_axis", 1))
        object.__setattr__(self, "f_axis", _frozen_axis(self.f_axis, "f_axis", 1))
        s21 = np.array(self.s21, dtype=np.complex128)
        expected = (self.B_axis.size, self.f_axis.size)
        if s21.shape != expected:
            raise DomainError(f"s21 has shape {s21.shape}, expected {expected}")
        if not np.all(np.isfinite(s21)):
            raise DomainError("s21 contains non-finite entries")
        s21.flags.writeable = False
        object.__setattr__(self, "s21", s21)

    @property
    def amplitude(self) -> FloatArray:
        return np.abs(self.s21)

    @property
    def phase(self) -> FloatArray:
        return np.angle(self.s21)

    def equals(self, other: "FieldSweep") -> bool:
        """Bitwise comparison of axes, data and metadata"""
        return (
            np.array_equal(self.B_axis, other.B_axis)
            and np.array_equal(self.f_axis, other.f_axis)
            and np.array_equal(self.s21, other.s21)
            and dict(self.meta) == dict(other.meta)
        )
