from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Self

from spinres.errors import DomainError


@dataclass(slots=True, frozen=True, kw_only=True)
class PhysicalConstants:
    """CODATA-2018 values in SI units. Only ge may be changed, via with_ge()"""

    mu0: float = field(default=1.25663706212e-6, init=False)  # T m / A
    muB: float = field(default=9.2740100783e-24, init=False)  # J / T
    hbar: float = field(default=1.054571817e-34, init=False)  # J s
    h: float = field(default=6.62607015e-34, init=False)  # J s
    kB: float = field(default=1.380649e-23, init=False)  # J / K
    c: float = field(default=299792458.0, init=False)  # m / s
    e: float = field(default=1.602176634e-19, init=False)  # C
    ge: float = 2.002

    def __post_init__(self) -> None:
        if not self.ge > 0:
            raise DomainError(f"ge must be positive, got {self.ge}")

    def with_ge(self, ge: float) -> Self:
        return replace(self, ge=ge)


CONSTANTS = PhysicalConstants()


def as_half_integer(S: float) -> Fraction:
    """
    :param S: candidate spin quantum number
    :raises DomainError: if 2S is not a positive integer
    """
    two_s = 2 * S
    if not float(two_s).is_integer() or two_s < 1:
        raise DomainError(f"S must be a positive half-integer, got {S}")
    return Fraction(int(two_s), 2)


@dataclass(slots=True, frozen=True, kw_only=True)
class SpinSpecies:
    """One paramagnetic ensemble. Frequencies are ordinary frequencies in Hz"""

    label: str
    S: float = 1.5
    D: float = 0.0  # zero-field splitting of H/h = D Sz^2 + gamma_e B Sz
    gamma_e: float = 28e9  # Hz / T
    Gamma_d: float  # ensemble dephasing linewidth, full width
    g_ens: float = 0.0  # ensemble coupling to the cavity

    def __post_init__(self) -> None:
        spin = as_half_integer(self.S)
        if not self.gamma_e > 0:
            raise DomainError(f"{self.label}: gamma_e must be positive")
        if not self.Gamma_d > 0:
            raise DomainError(f"{self.label}: Gamma_d must be positive")
        if not self.g_ens >= 0:
            raise DomainError(f"{self.label}: g_ens must be non-negative")
        if spin == Fraction(1, 2) and self.D != 0:
            raise DomainError(f"{self.label}: a spin-1/2 species has no D")

    @property
    def multiplicity(self) -> int:
        return int(2 * self.S) + 1

    @property
    def m_values(self) -> tuple[float, ...]:
        """S, S-1, ..., -S"""
        return tuple(self.S - k for k in range(self.multiplicity))


@dataclass(slots=True, frozen=True)
class SpinLevels:
    energies: tuple[float, ...]  # Hz, ascending, first entry 0
    m_labels: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.energies) != len(self.m_labels) or len(self.energies) < 2:
            raise DomainError("energies and m_labels must have the same length >= 2")
        if self.energies[0] != 0.0:
            raise DomainError("the lowest level must sit at exactly 0")
        if any(b < a for a, b in zip(self.energies, self.energies[1:])):
            raise DomainError("energies must be sorted ascending")

    def energy_of(self, m: float) -> float:
        try:
            return self.energies[self.m_labels.index(m)]
        except ValueError as e:
            raise DomainError(f"no level with m = {m}") from e


@dataclass(slots=True, frozen=True)
class Transition:
    m_initial: float  # lower level
    m_final: float
    frequency: float  # Hz, > 0
    matrix_element: float  # |<i|Sx|f>|
    # another transition shares this frequency (e.g. the two 2D lines at B = 0)
    degenerate: bool = False
