"""
Masked fits of the cavity Q around an avoided crossing.

Away from the crossing the cavity-like mode picks up the spin loss; the dip of
Q(B) gives the spin linewidth. Only points with |omega - gamma_e B| >= mask are
used, the mask being fixed once from the starting crossing frequency.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
import numpy.typing as npt

from spinres.cavity import dispersive_q, eigenmode_q
from spinres.errors import DomainError
from spinres.fit.least_squares import LeastSquaresOptions, least_squares
from spinres.models.fitting import CrossingWindow, FitResult, PeakTrace
from spinres.utils.constants import DEFAULT_GAMMA_E
from spinres.utils.validations import require_positive

logger = logging.getLogger(__name__)

type FloatArray = npt.NDArray[np.float64]
type QModel = Literal["eigenmode", "dispersive"]

MHZ = 1e6
# positivity bound on the linewidths, MHz
_LINEWIDTH_FLOOR = 1e-6


@dataclass(slots=True, kw_only=True)
class QDipProblem:
    """Q(B) data of one crossing, frequencies in MHz, omega relative to f_ref

    Parameters are (Gamma_d, omega) or (Gamma_d, omega, kappa).
    """

    B: FloatArray
    Q: FloatArray
    g: float
    kappa: float
    omega_c: float  # Hz
    f_ref: float  # Hz
    gamma_e: float = DEFAULT_GAMMA_E
    model: QModel = "eigenmode"
    free_kappa: bool = False

    @property
    def names(self) -> tuple[str, ...]:
        return ("Gamma_d", "omega", "kappa") if self.free_kappa else ("Gamma_d", "omega")

    def detuning(self, omega: float, B: FloatArray) -> FloatArray:
        """omega - gamma_e B in MHz"""
        return omega + (self.f_ref - self.gamma_e * B) / MHZ

    def model_q(self, theta: FloatArray, B: FloatArray) -> FloatArray:
        gamma_d, omega = theta[0], theta[1]
        kappa = theta[2] if self.free_kappa else self.kappa
        q = dispersive_q if self.model == "dispersive" else eigenmode_q
        return np.asarray(
            q(self.detuning(omega, B), self.g, gamma_d, kappa, self.omega_c / MHZ)
        )

    def residuals(self, theta: FloatArray) -> FloatArray:
        return self.model_q(theta, self.B) / self.Q - 1


def _initial_linewidth(problem: QDipProblem) -> float:
    """Invert the far-detuned form Q ~ wc / (kappa + g^2 Gamma / delta^2) pointwise"""
    delta = problem.detuning(0.0, problem.B)
    excess = problem.omega_c / MHZ / problem.Q - problem.kappa
    useful = excess > 0.1 * problem.kappa
    if not np.any(useful):
        return 1.0
    estimates = excess[useful] * delta[useful] ** 2 / problem.g**2
    return float(np.median(estimates))


def fit_q_dips(
    trace: PeakTrace,
    window: CrossingWindow,
    *,
    g: float,
    kappa: float,
    omega_c: float,
    omega_init: float,
    mask_MHz: float = 10.0,
    free_kappa: bool = False,
    model: QModel = "eigenmode",
    gamma_e: float = DEFAULT_GAMMA_E,
    Gamma_init: float | None = None,
) -> FitResult:
    """Fit Gamma_d and the crossing frequency omega to the Q trace of one window

    :param g: ensemble coupling from the crossing fit, Hz
    :param kappa: bare cavity linewidth, Hz; the starting value when free_kappa
    :param omega_init: starting omega, e.g. omega_c + 2D of the crossing fit
    :param mask_MHz: points closer than this to the crossing are never evaluated
    :raises DomainError: no points survive the mask
    """
    require_positive(g=g, kappa=kappa, omega_c=omega_c, omega_init=omega_init)
    if mask_MHz < 0:
        raise DomainError(f"mask_MHz must be >= 0, got {mask_MHz}")
    records = trace.select(rank=0, B_lo=window.B_lo, B_hi=window.B_hi)
    B = np.array([r.B for r in records])
    Q = np.array([r.Q for r in records])
    keep = np.abs(omega_init - gamma_e * B) / MHZ >= mask_MHz
    n_params = 3 if free_kappa else 2
    if keep.sum() <= n_params:
        raise DomainError(
            f"{int(keep.sum())} Q points of window [{window.B_lo}, {window.B_hi}] T "
            + f"lie outside the {mask_MHz} MHz mask, need more than {n_params}"
        )

    problem = QDipProblem(
        B=B[keep],
        Q=Q[keep],
        g=g / MHZ,
        kappa=kappa / MHZ,
        omega_c=omega_c,
        f_ref=omega_init,
        gamma_e=gamma_e,
        model=model,
        free_kappa=free_kappa,
    )
    gamma0 = Gamma_init / MHZ if Gamma_init is not None else _initial_linewidth(problem)
    init = [gamma0, 0.0] + ([problem.kappa] if free_kappa else [])
    lower = [_LINEWIDTH_FLOOR, -math.inf] + ([_LINEWIDTH_FLOOR] if free_kappa else [])
    result = least_squares(
        problem.residuals,
        init,
        LeastSquaresOptions(names=problem.names, lower=lower),
    )
    if result.at_bounds:
        logger.warning(
            f"Q fit of window [{window.B_lo}, {window.B_hi}] T stopped at the bound "
            + f"of {', '.join(result.at_bounds)}"
        )

    scale = np.diag([MHZ] * n_params)
    offset = [0.0, omega_init] + ([0.0] if free_kappa else [])
    result = replace(
        result,
        diagnostics={
            "model": model,
            "mask_MHz": mask_MHz,
            "n_masked_out": int((~keep).sum()),
            "bounded": bool(result.at_bounds),
        },
    )
    return result.transformed(problem.names, scale, offset)
