from dataclasses import dataclass
from typing import NamedTuple

from spinres.errors import DomainError


@dataclass(slots=True, frozen=True, kw_only=True)
class CavityMode:
    """A bare resonator mode, all rates in Hz (FWHM convention)

    kappa_in and kappa_out default to kappa / 4 each, a symmetric under-coupled
    two-port. Only relative amplitudes matter to the fits.
    """

    omega_c: float
    kappa: float
    kappa_in: float | None = None
    kappa_out: float | None = None

    def __post_init__(self) -> None:
        if not self.omega_c > 0:
            raise DomainError(f"omega_c must be positive, got {self.omega_c}")
        if not self.kappa > 0:
            raise DomainError(f"kappa must be positive, got {self.kappa}")
        if self.port_in < 0 or self.port_out < 0:
            raise DomainError("port couplings must be non-negative")
        # small slack for values that were computed as kappa / 2 + kappa / 2
        if self.port_in + self.port_out > self.kappa * (1 + 1e-12):
            raise DomainError(
                f"kappa_in + kappa_out = {self.port_in + self.port_out} exceeds "
                + f"kappa = {self.kappa}"
            )

    @property
    def port_in(self) -> float:
        return self.kappa / 4 if self.kappa_in is None else self.kappa_in

    @property
    def port_out(self) -> float:
        return self.kappa / 4 if self.kappa_out is None else self.kappa_out

    @property
    def Q(self) -> float:
        return self.omega_c / self.kappa


class SpinMode(NamedTuple):
    """A spin transition as the cavity sees it at one field value"""

    omega_s: float
    g: float
    Gamma_d: float


@dataclass(slots=True, frozen=True, kw_only=True)
class LineshapeParams:
    """Background-corrected Lorentzian amplitude model

    |S21|(f) = A1 + A2 (f - f_ref)
               + (S_max + A3 (f - f_ref)) / sqrt(1 + 4 ((f - f0) / delta_f)^2)

    f_ref = 0 gives the textbook form; fits set it near the peak to keep the
    background coefficients well conditioned.
    """

    A1: float = 0.0
    A2: float = 0.0
    A3: float = 0.0
    S_max: float
    f0: float
    delta_f: float
    f_ref: float = 0.0

    def __post_init__(self) -> None:
        if not self.delta_f > 0:
            raise DomainError(f"delta_f must be positive, got {self.delta_f}")

    @property
    def Q(self) -> float:
        return self.f0 / self.delta_f
