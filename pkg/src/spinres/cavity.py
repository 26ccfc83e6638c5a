"""
Closed-form models of a cavity mode hybridized with spin ensembles.

All arguments are ordinary frequencies in Hz and every function broadcasts over
numpy arrays.
"""

from collections.abc import Sequence

import numpy as np
import numpy.typing as npt

from spinres.models.cavity_mode import CavityMode, LineshapeParams, SpinMode

type FloatArray = npt.NDArray[np.float64]
type ComplexArray = npt.NDArray[np.complex128]
type Freq = float | FloatArray


def polariton_frequencies(omega_c: Freq, omega_s: Freq, g: Freq) -> tuple[Freq, Freq]:
    """Upper and lower branch of two coupled modes

    w+- = (wc + ws) / 2 +- sqrt(g^2 + (wc - ws)^2 / 4)
    """
    mean = 0.5 * (np.asarray(omega_c) + np.asarray(omega_s))
    half_gap = np.hypot(g, 0.5 * (np.asarray(omega_c) - np.asarray(omega_s)))
    return mean + half_gap, mean - half_gap


def corrected_second_crossing(
    omega_1_minus: Freq, omega_s: Freq, g: Freq
) -> tuple[Freq, Freq]:
    """Branches of the second crossing with the cavity replaced by the lower
    polariton of the first crossing"""
    return polariton_frequencies(omega_1_minus, omega_s, g)


def corrected_first_crossing(
    omega_2_plus: Freq, omega_s: Freq, g: Freq
) -> tuple[Freq, Freq]:
    """Branches of the first crossing with the cavity replaced by the upper
    branch of the second crossing"""
    return polariton_frequencies(omega_2_plus, omega_s, g)


def _complex_eigenvalues(
    omega_c: Freq, omega_s: Freq, g: Freq, kappa: Freq, gamma_d: Freq
) -> tuple[ComplexArray, ComplexArray]:
    """Eigenvalues of [[wc - i kappa/2, g], [g, ws - i Gamma/2]], larger real part
    first"""
    wc = np.asarray(omega_c) - 0.5j * np.asarray(kappa)
    ws = np.asarray(omega_s) - 0.5j * np.asarray(gamma_d)
    mean = 0.5 * (wc + ws)
    # principal sqrt has Re >= 0, so mean + root is the upper branch
    root = np.sqrt(np.asarray(g, dtype=np.complex128) ** 2 + (0.5 * (wc - ws)) ** 2)
    return mean + root, mean - root


def branch_frequencies(
    omega_c: Freq, omega_s: Freq, g: Freq, kappa: Freq = 0.0, gamma_d: Freq = 0.0
) -> tuple[Freq, Freq]:
    """Upper and lower hybrid-mode frequencies including the mode linewidths

    Real parts of the lossy coupled-mode eigenvalues. With kappa = gamma_d = 0 this
    is exactly polariton_frequencies().
    """
    if np.all(np.asarray(kappa) == 0) and np.all(np.asarray(gamma_d) == 0):
        return polariton_frequencies(omega_c, omega_s, g)
    upper, lower = _complex_eigenvalues(omega_c, omega_s, g, kappa, gamma_d)
    return np.real(upper), np.real(lower)


def dispersive_q(
    delta: Freq, g: Freq, Gamma_d: Freq, kappa: Freq, omega_c: Freq
) -> Freq:
    """Loaded Q of the cavity-like mode at spin-cavity detuning delta

    Q = (delta^2 + (Gamma/2)^2) wc / (g^2 Gamma + kappa (delta^2 + (Gamma/2)^2))

    Any consistent frequency unit works since Q is a ratio.
    """
    d2 = np.asarray(delta) ** 2 + (0.5 * np.asarray(Gamma_d)) ** 2
    return d2 * omega_c / (np.asarray(g) ** 2 * Gamma_d + kappa * d2)


def eigenmode_q(
    delta: Freq, g: Freq, Gamma_d: Freq, kappa: Freq, omega_c: Freq
) -> Freq:
    """Q of the cavity-like eigenmode of the lossy coupled-mode matrix

    delta = wc - ws. The cavity-like eigenvalue is the one closer to the bare
    cavity; its Q is Re(l) / (-2 Im(l)). Tends to dispersive_q() for large detuning.
    """
    omega_s = np.asarray(omega_c) - np.asarray(delta)
    upper, lower = _complex_eigenvalues(omega_c, omega_s, g, kappa, Gamma_d)
    bare = np.asarray(omega_c) - 0.5j * np.asarray(kappa)
    cavity_like = np.where(np.abs(upper - bare) <= np.abs(lower - bare), upper, lower)
    loss = -2 * np.imag(cavity_like)
    # a lossless mode has infinite Q
    safe = np.where(loss > 0, loss, 1.0)
    return np.where(loss > 0, np.real(cavity_like) / safe, np.inf)


def s21_lineshape(f: Freq, p: LineshapeParams) -> Freq:
    """Background-corrected Lorentzian amplitude, see LineshapeParams"""
    x = np.asarray(f) - p.f_ref
    z = (np.asarray(f) - p.f0) / p.delta_f
    return p.A1 + p.A2 * x + (p.S_max + p.A3 * x) / np.sqrt(1 + 4 * z**2)


def transmission(
    omega: Freq,
    cavity: CavityMode,
    species: Sequence[SpinMode | tuple[float, float, float]],
) -> ComplexArray:
    """Complex S21 of a cavity coupled to independent spin ensembles

    S21 = sqrt(kin kout) / (i (wc - w) + kappa/2 + sum g^2 / (i (ws - w) + Gamma/2))

    |S21| peaks at the hybrid-mode frequencies; the bare cavity gives an
    amplitude Lorentzian of FWHM kappa with peak 2 sqrt(kin kout) / kappa.
    """
    w = np.asarray(omega, dtype=np.float64)
    denominator = 1j * (cavity.omega_c - w) + 0.5 * cavity.kappa
    for mode in species:
        omega_s, g, gamma_d = mode
        if g == 0:
            continue
        denominator = denominator + g**2 / (1j * (omega_s - w) + 0.5 * gamma_d)
    return np.sqrt(cavity.port_in * cavity.port_out) / denominator
