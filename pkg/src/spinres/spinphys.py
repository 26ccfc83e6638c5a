"""
Spin Hamiltonians, level populations and the closed-form estimators that turn
fitted couplings into spin numbers, temperatures and pump rates.

Frequencies are ordinary frequencies (Hz). The factor 2 pi only appears inside the
formulas that need angular frequencies (vacuum field, single-spin coupling).
"""

import logging
import math

import numpy as np
import numpy.typing as npt
import scipy.optimize
import scipy.special

from spinres.errors import ConvergenceError, DomainError
from spinres.models.species import (
    CONSTANTS,
    PhysicalConstants,
    SpinLevels,
    SpinSpecies,
    Transition,
    as_half_integer,
)
from spinres.utils.validations import require_non_negative, require_positive

logger = logging.getLogger(__name__)

type FloatArray = npt.NDArray[np.float64]
type ComplexArray = npt.NDArray[np.complex128]

# bracket of the temperature root search, K
T_MIN = 1e-3
T_MAX = 300.0
# reference temperature of the coupling ratio, K
T_REFERENCE = 10e-3


def spin_matrices(S: float) -> tuple[ComplexArray, ComplexArray, ComplexArray]:
    """Sx, Sy, Sz in the |S>, |S-1>, ..., |-S> basis

    :raises DomainError: if S is not a positive half-integer
    """
    spin = float(as_half_integer(S))
    dim = int(2 * spin) + 1
    m = spin - np.arange(dim)
    # <m+1|S+|m> sits one row above the diagonal
    s_plus = np.zeros((dim, dim), dtype=np.complex128)
    for k in range(1, dim):
        s_plus[k - 1, k] = math.sqrt(spin * (spin + 1) - m[k] * (m[k] + 1))
    s_minus = s_plus.conj().T
    sx = 0.5 * (s_plus + s_minus)
    sy = -0.5j * (s_plus - s_minus)
    sz = np.diag(m).astype(np.complex128)
    return sx, sy, sz


def _hamiltonian(species: SpinSpecies, B: float) -> ComplexArray:
    _, _, sz = spin_matrices(species.S)
    return species.D * (sz @ sz) + species.gamma_e * B * sz


def zeeman_levels(species: SpinSpecies, B: float) -> SpinLevels:
    """Levels of H/h = D Sz^2 + gamma_e B Sz with the field on the quantization axis

    Energies come from diagonalizing H; each one is labelled with the m whose
    diagonal entry it matches, ties keeping the S, ..., -S order.
    """
    if not B >= 0:
        raise DomainError(f"B must be >= 0, got {B}")
    hamiltonian = _hamiltonian(species, B)
    eigenvalues = np.linalg.eigvalsh(hamiltonian)  # ascending
    diagonal = np.real(np.diag(hamiltonian))
    order = np.argsort(diagonal, kind="stable")
    m_values = species.m_values
    energies = eigenvalues - eigenvalues[0]
    energies[0] = 0.0
    return SpinLevels(
        energies=tuple(float(e) for e in energies),
        m_labels=tuple(m_values[i] for i in order),
    )


def dipole_transitions(species: SpinSpecies, B: float) -> list[Transition]:
    """All Delta m = +-1 transitions with a positive frequency, lowest first"""
    levels = zeeman_levels(species, B)
    sx, _, _ = spin_matrices(species.S)
    m_values = species.m_values
    found: list[Transition] = []
    for i, m_i in enumerate(m_values):
        for j, m_j in enumerate(m_values):
            if m_j != m_i + 1:
                continue
            e_i, e_j = levels.energy_of(m_i), levels.energy_of(m_j)
            lower, upper = (m_i, m_j) if e_i <= e_j else (m_j, m_i)
            frequency = abs(e_j - e_i)
            if frequency <= 0:
                continue
            found.append(
                Transition(
                    m_initial=lower,
                    m_final=upper,
                    frequency=frequency,
                    matrix_element=float(abs(sx[i, j])),
                )
            )
    found.sort(key=lambda t: (t.frequency, t.m_initial))
    scale = max((t.frequency for t in found), default=0.0)
    return [
        Transition(
            m_initial=t.m_initial,
            m_final=t.m_final,
            frequency=t.frequency,
            matrix_element=t.matrix_element,
            degenerate=any(
                o is not t
                and math.isclose(o.frequency, t.frequency, abs_tol=1e-9 * scale)
                for o in found
            ),
        )
        for t in found
    ]


def transition_frequency(
    species: SpinSpecies, B: float | FloatArray, m_from: float, m_to: float
) -> float | FloatArray:
    """E(m_to) - E(m_from) of the axial Hamiltonian, vectorized over B"""
    if abs(m_to - m_from) != 1:
        raise DomainError(f"only Delta m = +-1 transitions, got {m_from} -> {m_to}")
    for m in (m_from, m_to):
        if m not in species.m_values:
            raise DomainError(f"m = {m} does not exist for S = {species.S}")
    return species.D * (m_to**2 - m_from**2) + species.gamma_e * np.asarray(B) * (
        m_to - m_from
    )


def spin_dispersion(
    B: float | FloatArray, gamma_e: float, D: float
) -> float | FloatArray:
    """The -3/2 <-> -1/2 line, gamma_e B - 2D. Negative values are left to the caller"""
    return gamma_e * B - 2 * D


def energy_populations(
    energies: npt.ArrayLike, T: float, constants: PhysicalConstants = CONSTANTS
) -> FloatArray:
    """Boltzmann weights of levels given in Hz"""
    require_positive(T=T)
    e = np.asarray(energies, dtype=np.float64)
    return scipy.special.softmax(-constants.h * (e - e.min()) / (constants.kB * T))


def boltzmann_populations(
    levels: SpinLevels, T: float, constants: PhysicalConstants = CONSTANTS
) -> FloatArray:
    """Occupation probability of each level, in the order of levels.energies

    :raises DomainError: T <= 0
    """
    return energy_populations(levels.energies, T, constants)


def thermal_ladder(omega_c: float, D: float) -> SpinLevels:
    """The four-level ladder {0, wc, wc + 2D, wc + 4D} of the thermal coupling ratio"""
    require_positive(omega_c=omega_c)
    require_non_negative(D=D)
    return SpinLevels(
        energies=(0.0, omega_c, omega_c + 2 * D, omega_c + 4 * D),
        m_labels=(-1.5, -0.5, 0.5, 1.5),
    )


def _squared_ratio(T: float, omega_c: float, D: float, constants: PhysicalConstants):
    beta = constants.h / (constants.kB * T)
    x = math.exp(-beta * omega_c)
    numerator = -math.expm1(-beta * omega_c)
    denominator = 1 + x + x * math.exp(-beta * 2 * D) + x * math.exp(-beta * 4 * D)
    return numerator / denominator


def thermal_coupling_ratio(
    T: float, omega_c: float, D: float, constants: PhysicalConstants = CONSTANTS
) -> float:
    """g(T) / g(10 mK) of a spin-3/2 ensemble

    The squared ratio is (1 - x) / (1 + x + x y + x y^2) with x = exp(-h wc / kB T)
    and y = exp(-2 h D / kB T), i.e. the population difference of the two lowest
    levels of thermal_ladder(). The value at 10 mK is 1 to machine precision for
    GHz cavities and is divided out explicitly.
    """
    require_positive(T=T, omega_c=omega_c)
    require_non_negative(D=D)
    ratio2 = _squared_ratio(T, omega_c, D, constants) / _squared_ratio(
        T_REFERENCE, omega_c, D, constants
    )
    return math.sqrt(ratio2)


def two_level_coupling_ratio(
    T: float, omega: float, constants: PhysicalConstants = CONSTANTS
) -> float:
    """g(T) / g(0) of a spin-1/2 ensemble, sqrt(tanh(h w / 2 kB T))"""
    require_positive(T=T, omega=omega)
    return math.sqrt(math.tanh(constants.h * omega / (2 * constants.kB * T)))


def effective_spin_temperature(
    ratio: float, omega_c: float, D: float, constants: PhysicalConstants = CONSTANTS
) -> float:
    """Invert thermal_coupling_ratio by bisection on ln T over [T_MIN, T_MAX]

    A ratio at or above the value at T_MIN returns T_MIN (the answer is "<= T_MIN").

    :raises DomainError: ratio outside (0, 1]
    :raises ConvergenceError: ratio below the value reached at T_MAX
    """
    if not 0 < ratio <= 1:
        raise DomainError(f"ratio must lie in (0, 1], got {ratio}")

    def gap(log_t: float) -> float:
        return thermal_coupling_ratio(math.exp(log_t), omega_c, D, constants) - ratio

    lo, hi = math.log(T_MIN), math.log(T_MAX)
    if gap(lo) <= 0:
        logger.info(f"ratio {ratio} is reached at or below {T_MIN} K")
        return T_MIN
    if gap(hi) > 0:
        raise ConvergenceError(
            f"ratio {ratio} is below g({T_MAX} K)/g(10 mK) = "
            + f"{gap(hi) + ratio:.4g}; no temperature in [{T_MIN}, {T_MAX}] K"
        )
    log_t = scipy.optimize.bisect(gap, lo, hi, xtol=1e-13, maxiter=200)
    return math.exp(log_t)


def vacuum_field_amplitude(
    omega_c: float, V: float, constants: PhysicalConstants = CONSTANTS
) -> float:
    """Zero-point magnetic field of the mode, B0 = sqrt(mu0 hbar 2 pi wc / 2V) in T"""
    require_positive(omega_c=omega_c, V=V)
    return math.sqrt(constants.mu0 * constants.hbar * 2 * math.pi * omega_c / (2 * V))


def single_spin_coupling(
    omega_c: float,
    V: float,
    matrix_element: float = math.sqrt(3) / 2,
    constants: PhysicalConstants = CONSTANTS,
) -> float:
    """g0 = ge muB B0 |<i|Sx|f>| / hbar, returned as an ordinary frequency (Hz)"""
    require_non_negative(matrix_element=matrix_element)
    b0 = vacuum_field_amplitude(omega_c, V, constants)
    return constants.ge * constants.muB * b0 * matrix_element / constants.hbar / (
        2 * math.pi
    )


def ensemble_spin_count(g_ens: float, g0: float) -> float:
    """N = (g / g0)^2 from g = g0 sqrt(N)"""
    require_positive(g0=g0)
    return (g_ens / g0) ** 2


def optical_pump_rate(
    sigma_abs: float,
    P: float,
    wavelength: float,
    A: float,
    constants: PhysicalConstants = CONSTANTS,
) -> float:
    """Absorbed photons per spin per second, sigma P lambda / (h c A)"""
    require_positive(sigma_abs=sigma_abs, P=P, wavelength=wavelength, A=A)
    return sigma_abs * P * wavelength / (constants.h * constants.c * A)


def pump_relaxation_ratio(relaxation_rate: float, pump_rate: float) -> float:
    require_positive(relaxation_rate=relaxation_rate, pump_rate=pump_rate)
    return relaxation_rate / pump_rate


def activation_energy_mev(
    slope_K: float, constants: PhysicalConstants = CONSTANTS
) -> float:
    """|slope| of ln(ratio) vs 1/T times kB, in meV"""
    return abs(slope_K) * constants.kB / constants.e * 1e3
