"""
Spin temperature from the four-level thermal ladder.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import replace

import numpy as np
import numpy.typing as npt

from spinres.errors import DomainError
from spinres.fit.least_squares import LeastSquaresOptions, least_squares
from spinres.models.fitting import FitResult
from spinres.models.species import CONSTANTS, PhysicalConstants
from spinres.spinphys import boltzmann_populations, thermal_ladder
from spinres.utils.validations import require_positive

logger = logging.getLogger(__name__)

type FloatArray = npt.NDArray[np.float64]

MHZ = 1e6


def ladder_populations(
    T: float, omega_c: float, D: float, constants: PhysicalConstants = CONSTANTS
) -> FloatArray:
    return boltzmann_populations(thermal_ladder(omega_c, D), T, constants)


def lowest_pair_difference(
    T: float, omega_c: float, D: float, constants: PhysicalConstants = CONSTANTS
) -> float:
    """Population difference of the two lowest ladder levels

    Equals thermal_coupling_ratio(T, omega_c, D) squared up to the 10 mK reference.
    """
    p = ladder_populations(T, omega_c, D, constants)
    return float(p[0] - p[1])


def resolve_population_ladder(
    populations: Sequence[float],
    omega_c: float,
    constants: PhysicalConstants = CONSTANTS,
) -> FitResult:
    """Find the (D, T) that reproduces four ladder populations

    Starts from the closed-form level ratios (p0/p1 fixes T, p1/p2 fixes D) and
    polishes with least squares on all four values, so populations rounded to a
    few digits still resolve.

    :return: FitResult with D in Hz and T in K
    :raises DomainError: not four positive populations or not ordered descending
    """
    require_positive(omega_c=omega_c)
    p = np.asarray(populations, dtype=np.float64)
    if p.shape != (4,) or np.any(p <= 0):
        raise DomainError(f"need four positive populations, got {p.tolist()}")
    if not np.all(np.diff(p) < 0):
        raise DomainError(f"populations must decrease up the ladder, got {p.tolist()}")

    k_over_h = constants.kB / constants.h
    T0 = omega_c / (k_over_h * math.log(p[0] / p[1]))
    D0 = k_over_h * T0 * math.log(p[1] / p[2]) / 2
    logger.debug(f"ladder starting point D={D0 / MHZ:.4g} MHz, T={T0:.6g} K")

    def residuals(theta: FloatArray) -> FloatArray:
        D, T = theta[0] * MHZ, theta[1]
        return ladder_populations(T, omega_c, D, constants) - p

    result = least_squares(
        residuals,
        [D0 / MHZ, T0],
        LeastSquaresOptions(names=("D", "T"), lower=(0.0, 1e-3)),
    )
    D_fit, T_fit = result.params[0] * MHZ, result.params[1]
    result = replace(
        result,
        diagnostics={
            "initial_D": D0,
            "initial_T": T0,
            "lowest_pair_difference": lowest_pair_difference(
                T_fit, omega_c, D_fit, constants
            ),
        },
    )
    return result.transformed(("D", "T"), np.diag([MHZ, 1.0]))
