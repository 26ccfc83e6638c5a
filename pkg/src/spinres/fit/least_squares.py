"""
Damped Gauss-Newton (Levenberg-Marquardt) least squares.

Damping follows Marquardt's diagonal scaling with Fletcher's cut-off: after a run
of accepted steps the damping drops to zero and the method takes plain
Gauss-Newton steps, so linear problems finish in one step. A rejected step
raises the damping tenfold.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from spinres.errors import DomainError, RankDeficiencyError
from spinres.models.fitting import FitResult

logger = logging.getLogger(__name__)

type FloatArray = npt.NDArray[np.float64]
type ResidualFn = Callable[[FloatArray], FloatArray]
type JacobianFn = Callable[[FloatArray], FloatArray]

_EPS = float(np.finfo(np.float64).eps)


@dataclass(slots=True, frozen=True, kw_only=True)
class LeastSquaresOptions:
    max_iterations: int = 200
    # relative parameter step, ||d|| <= xtol (||theta|| + xtol)
    xtol: float = 1e-10
    # relative cost decrease of an accepted step
    ftol: float = 1e-12
    # max |cos| between the residual and any Jacobian column
    gtol: float = 1e-12
    initial_damping: float = 0.0
    # damping that replaces 0 after a rejected Gauss-Newton step
    restart_damping: float = 1e-3
    # below this the damping snaps to 0
    damping_cutoff: float = 1e-7
    max_damping: float = 1e16
    # smallest accepted singular-value ratio of the column-scaled Jacobian
    rank_rtol: float = 1e-12
    names: Sequence[str] | None = None
    lower: Sequence[float] | None = None
    upper: Sequence[float] | None = None


def numeric_jacobian(residuals: ResidualFn, theta: FloatArray, r0: FloatArray):
    """Forward differences with step sqrt(eps) * max(|theta_j|, 1)"""
    jac = np.empty((r0.size, theta.size))
    for j in range(theta.size):
        step = np.sqrt(_EPS) * max(abs(theta[j]), 1.0)
        shifted = theta.copy()
        shifted[j] += step
        # use the step actually representable in floating point
        step = shifted[j] - theta[j]
        jac[:, j] = (residuals(shifted) - r0) / step
    return jac


def _direction(vector: FloatArray, names: Sequence[str]) -> str:
    order = np.argsort(-np.abs(vector))
    terms = [
        f"{vector[i]:+.2g}*{names[i]}" for i in order if abs(vector[i]) > 0.05
    ]
    return " ".join(terms)


def _covariance(
    jac: FloatArray, names: Sequence[str], scale: float, rank_rtol: float
) -> FloatArray:
    """(J^T J)^-1 * scale from an SVD of the column-normalized Jacobian"""
    norms = np.linalg.norm(jac, axis=0)
    for name, norm in zip(names, norms, strict=True):
        if norm == 0 or not np.isfinite(norm):
            raise RankDeficiencyError(
                f"the residuals do not depend on '{name}'", direction=name
            )
    _, s, vt = np.linalg.svd(jac / norms, full_matrices=False)
    if s[-1] <= rank_rtol * s[0]:
        direction = _direction(vt[-1], names)
        raise RankDeficiencyError(
            f"parameters are not identifiable along {direction} "
            + f"(singular value ratio {s[-1] / s[0]:.3g})",
            direction=direction,
        )
    inv = (vt.T / s**2) @ vt
    return inv / np.outer(norms, norms) * scale


def least_squares(
    residuals: ResidualFn,
    init: Sequence[float] | FloatArray,
    options: LeastSquaresOptions | None = None,
    jacobian: JacobianFn | None = None,
) -> FitResult:
    """Minimize 0.5 * |residuals(theta)|^2 from init

    :param residuals: theta -> residual vector, must be finite at init
    :param jacobian: optional analytic Jacobian, forward differences otherwise
    :raises DomainError: non-finite residuals at init
    :raises RankDeficiencyError: singular J^T J at the solution
    :return: FitResult; non-convergence is flagged in it, not raised
    """
    opts = options or LeastSquaresOptions()
    theta = np.array(init, dtype=np.float64).reshape(-1)
    p = theta.size
    names = (
        tuple(opts.names) if opts.names is not None else tuple(f"p{i}" for i in range(p))
    )
    if len(names) != p:
        raise DomainError(f"{len(names)} names for {p} parameters")
    lower = np.full(p, -np.inf) if opts.lower is None else np.asarray(opts.lower, float)
    upper = np.full(p, np.inf) if opts.upper is None else np.asarray(opts.upper, float)
    theta = np.clip(theta, lower, upper)

    def jac_at(x: FloatArray, r: FloatArray) -> FloatArray:
        return jacobian(x) if jacobian is not None else numeric_jacobian(residuals, x, r)

    r = np.asarray(residuals(theta), dtype=np.float64)
    if not np.all(np.isfinite(r)):
        raise DomainError("residuals are not finite at the initial point")
    n = r.size
    cost = 0.5 * float(r @ r)
    history = [cost]
    damping = opts.initial_damping
    converged = False
    message = f"stopped after {opts.max_iterations} iterations"
    # accepted steps
    iterations = 0
    jac = jac_at(theta, r)

    for _ in range(opts.max_iterations):
        gradient = jac.T @ r
        col_norms = np.linalg.norm(jac, axis=0)
        r_norm = np.sqrt(2 * cost)
        if r_norm == 0 or np.all(
            np.abs(gradient)
            <= opts.gtol * np.where(col_norms > 0, col_norms, 1) * r_norm
        ):
            converged, message = True, "residual orthogonal to the Jacobian"
            break
        normal = jac.T @ jac
        diag = np.diag(normal).copy()
        diag[diag == 0] = 1.0

        accepted = False
        while True:
            try:
                step = np.linalg.solve(normal + damping * np.diag(diag), -gradient)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(normal + damping * np.diag(diag), -gradient)[0]
            candidate = np.clip(theta + step, lower, upper)
            step = candidate - theta
            if np.linalg.norm(step) <= opts.xtol * (np.linalg.norm(theta) + opts.xtol):
                converged, message = True, "relative parameter step below xtol"
                break
            r_new = np.asarray(residuals(candidate), dtype=np.float64)
            finite = bool(np.all(np.isfinite(r_new)))
            cost_new = 0.5 * float(r_new @ r_new) if finite else np.inf
            if cost_new < cost:
                accepted = True
                break
            damping = opts.restart_damping if damping == 0 else damping * 10
            if damping > opts.max_damping:
                message = "no step reduces the cost"
                break

        if not accepted:
            break
        decrease = cost - cost_new
        previous = cost
        theta, r, cost = candidate, r_new, cost_new
        history.append(cost)
        iterations += 1
        damping = damping / 10
        if damping < opts.damping_cutoff:
            damping = 0.0
        jac = jac_at(theta, r)
        if decrease <= opts.ftol * previous:
            converged, message = True, "relative cost decrease below ftol"
            break

    if not converged:
        logger.debug(f"least squares did not converge: {message}")

    dof = n - p
    variance = 2 * cost / dof if dof > 0 else 0.0
    covariance = _covariance(jac, names, variance, opts.rank_rtol)
    at_bounds = tuple(
        name
        for name, value, lo, hi in zip(names, theta, lower, upper, strict=True)
        if value <= lo or value >= hi
    )
    return FitResult(
        names=names,
        params=theta,
        covariance=covariance,
        residual_norm=float(np.sqrt(2 * cost)),
        n_iterations=iterations,
        converged=converged,
        n_points=n,
        message=message,
        cost_history=tuple(history),
        at_bounds=at_bounds,
    )
