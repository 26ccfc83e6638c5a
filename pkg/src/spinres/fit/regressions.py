"""
Straight-line regressions solved from the normal equations.
"""

from collections.abc import Sequence

import numpy as np
import numpy.typing as npt

from spinres.errors import DomainError, RankDeficiencyError
from spinres.models.fitting import FitResult
from spinres.models.species import CONSTANTS, PhysicalConstants

type FloatArray = npt.NDArray[np.float64]


def linear_fit(
    x: npt.ArrayLike, y: npt.ArrayLike, names: tuple[str, str] = ("slope", "intercept")
) -> FitResult:
    """y = slope x + intercept by centred normal equations

    Uncertainties are scaled by the residual variance with n - 2 degrees of
    freedom; with exactly two points the covariance is zero.

    :raises RankDeficiencyError: all x identical
    """
    xs = np.asarray(x, dtype=np.float64).reshape(-1)
    ys = np.asarray(y, dtype=np.float64).reshape(-1)
    if xs.size != ys.size:
        raise DomainError(f"{xs.size} x values for {ys.size} y values")
    if xs.size < 2:
        raise DomainError("a straight line needs at least two points")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise DomainError("regression points must be finite")

    x_mean, y_mean = xs.mean(), ys.mean()
    dx = xs - x_mean
    sxx = float(dx @ dx)
    if sxx <= 1e-24 * float(xs @ xs):
        raise RankDeficiencyError(
            f"all x values are equal ({x_mean}); {names[0]} and {names[1]} "
            + "are not separable",
            direction=f"{names[0]} {names[1]}",
        )
    slope = float(dx @ (ys - y_mean)) / sxx
    intercept = y_mean - slope * x_mean
    residuals = ys - (slope * xs + intercept)
    ssr = float(residuals @ residuals)
    dof = xs.size - 2
    variance = ssr / dof if dof > 0 else 0.0
    covariance = variance * np.array(
        [
            [1 / sxx, -x_mean / sxx],
            [-x_mean / sxx, 1 / xs.size + x_mean**2 / sxx],
        ]
    )
    return FitResult(
        names=names,
        params=np.array([slope, intercept]),
        covariance=covariance,
        residual_norm=float(np.sqrt(ssr)),
        n_iterations=0,
        converged=True,
        n_points=int(xs.size),
        message="closed-form normal equations",
    )


def fit_spin_dispersion(points: Sequence[tuple[float, float]]) -> FitResult:
    """(gamma_e, D) of omega_s = gamma_e B - 2D from (B [T], omega_s [Hz]) points"""
    data = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    line = linear_fit(data[:, 0], data[:, 1], names=("gamma_e", "minus_2D"))
    return line.transformed(("gamma_e", "D"), [[1.0, 0.0], [0.0, -0.5]])


def arrhenius_fit(
    points: Sequence[tuple[float, float]], constants: PhysicalConstants = CONSTANTS
) -> FitResult:
    """ln(ratio) against 1/T; the activation energy is |slope| kB in meV

    :param points: (T [K], intensity ratio) pairs
    :raises DomainError: a non-positive temperature or ratio
    """
    data = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    T, ratio = data[:, 0], data[:, 1]
    if np.any(T <= 0):
        raise DomainError(f"temperatures must be positive, got {T[T <= 0].tolist()}")
    if np.any(ratio <= 0):
        raise DomainError(
            f"intensity ratios must be positive, got {ratio[ratio <= 0].tolist()}"
        )
    line = linear_fit(1 / T, np.log(ratio), names=("slope_K", "intercept"))
    mev_per_kelvin = constants.kB / constants.e * 1e3
    sign = -1.0 if line.params[0] < 0 else 1.0
    return line.transformed(
        ("slope_K", "intercept", "activation_energy_meV"),
        [[1.0, 0.0], [0.0, 1.0], [sign * mev_per_kelvin, 0.0]],
    )
