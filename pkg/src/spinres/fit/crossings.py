"""
Avoided-crossing fits of peak traces.

Branch points are fitted with the coupled-mode branches, the spin line following
ws(B) = gamma_e B - 2D. With several crossings in one sweep, each window's cavity
frequency is replaced by the neighbouring hybrid branch (left neighbour: lower
polariton, right neighbour: upper branch) and all windows are refitted until the
parameters settle.

Internally frequencies are in MHz relative to a reference frequency, which keeps
the normal matrix well scaled; results are reported in Hz.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
import numpy.typing as npt

from spinres.cavity import branch_frequencies
from spinres.errors import ConvergenceError, DomainError
from spinres.fit.least_squares import LeastSquaresOptions, least_squares
from spinres.models.fitting import CrossingWindow, FitResult, PeakTrace
from spinres.utils.constants import DEFAULT_GAMMA_E

logger = logging.getLogger(__name__)

type FloatArray = npt.NDArray[np.float64]
type BoolArray = npt.NDArray[np.bool_]
type Branch = Literal["upper", "lower"]

MHZ = 1e6
GHZ = 1e9

# points closer than this fraction of the half gap to the branch midpoint are mid-gap
MIDGAP_FRACTION = 0.5
MAX_LABEL_PASSES = 5
# branch points further than this many robust sigmas and half a linewidth from the
# fitted branches are failed peak fits
OUTLIER_SIGMAS = 5.0
# scale factor from the median absolute deviation to a Gaussian sigma
MAD_TO_SIGMA = 1.4826
MAX_RESIDUAL_CORRELATION = 0.9


@dataclass(slots=True, frozen=True, kw_only=True)
class Linewidths:
    """Loss rates of a crossing, Hz. Zero for the lossless branches"""

    kappa: float = 0.0
    Gamma_d: float = 0.0


@dataclass(slots=True, frozen=True, kw_only=True)
class CrossingOptions:
    gamma_e: float = DEFAULT_GAMMA_E
    free_gamma_e: bool = False
    # peak rank used as branch points, None for all ranks
    rank: int | None = 0
    max_rounds: int = 50
    # coupled scheme stops when |dp| <= round_tol * max(|p|, 1 kHz)
    round_tol: float = 1e-4


@dataclass(slots=True, frozen=True, kw_only=True)
class _Neighbour:
    """A fitted crossing as seen from another window, internal units"""

    g: float
    D: float
    gamma: float  # GHz/T
    branch: Branch
    kappa: float = 0.0
    Gamma_d: float = 0.0


@dataclass(slots=True, kw_only=True)
class _Problem:
    B: FloatArray
    f: FloatArray  # MHz relative to f_ref
    f_ref: float
    names: tuple[str, ...]
    options: CrossingOptions
    # median peak linewidth of the window, MHz
    resolution: float = 0.0
    linewidths: Linewidths = field(default_factory=Linewidths)
    neighbours: tuple[_Neighbour, ...] = ()
    # no splitting wider than the resolution, so only the cavity-like branch is seen
    single_branch: bool = False

    def unpack(self, theta: FloatArray) -> tuple[float, float, float, float]:
        g, D, wc = theta[:3]
        gamma = theta[3] if self.options.free_gamma_e else self.options.gamma_e / GHZ
        return g, D, wc, gamma

    def spin_line(self, D: float, gamma: float) -> FloatArray:
        return (gamma * GHZ * self.B - self.f_ref) / MHZ - 2 * D

    def cavity(self, wc: float) -> FloatArray:
        """Cavity frequency dressed by the neighbouring crossings"""
        dressed = np.full_like(self.B, wc)
        for nb in self.neighbours:
            ws = (nb.gamma * GHZ * self.B - self.f_ref) / MHZ - 2 * nb.D
            upper, lower = branch_frequencies(wc, ws, nb.g, nb.kappa, nb.Gamma_d)
            dressed += (upper if nb.branch == "upper" else lower) - wc
        return dressed

    def branches(self, theta: FloatArray) -> tuple[FloatArray, FloatArray]:
        g, D, wc, gamma = self.unpack(theta)
        lw = self.linewidths
        upper, lower = branch_frequencies(
            self.cavity(wc),
            self.spin_line(D, gamma),
            g,
            lw.kappa / MHZ,
            lw.Gamma_d / MHZ,
        )
        return np.asarray(upper), np.asarray(lower)

    def labels(self, theta: FloatArray) -> tuple[BoolArray, BoolArray]:
        """(is_upper, usable) for every point under the parameters theta"""
        g, D, wc, gamma = self.unpack(theta)
        wc_eff = self.cavity(wc)
        ws = self.spin_line(D, gamma)
        if self.single_branch:
            # cavity-like: upper while the spin line is below the cavity
            return ws < wc_eff, np.ones_like(self.B, dtype=np.bool_)
        middle = 0.5 * (wc_eff + ws)
        half_gap = np.hypot(g, 0.5 * (wc_eff - ws))
        usable = np.abs(self.f - middle) >= MIDGAP_FRACTION * half_gap
        return self.f > middle, usable

    def residuals(self, theta: FloatArray, is_upper: BoolArray) -> FloatArray:
        upper, lower = self.branches(theta)
        return np.where(is_upper, upper, lower) - self.f


def _to_hz(result: FitResult, problem: _Problem, **updates: object) -> FitResult:
    g_sign = 1.0 if result.params[0] >= 0 else -1.0
    free_gamma = problem.options.free_gamma_e
    scale = [g_sign * MHZ, MHZ, MHZ] + ([GHZ] if free_gamma else [])
    offset = [0.0, 0.0, problem.f_ref] + ([0.0] if free_gamma else [])
    names = ("g", "D", "omega_c") + (("gamma_e",) if free_gamma else ())
    return result.transformed(names, np.diag(scale), offset, **updates)


def _from_hz(result: FitResult, problem: _Problem) -> FloatArray:
    theta = [
        result.value("g") / MHZ,
        result.value("D") / MHZ,
        (result.value("omega_c") - problem.f_ref) / MHZ,
    ]
    if problem.options.free_gamma_e:
        theta.append(result.value("gamma_e") / GHZ)
    return np.array(theta)


def _initial_guess(problem: _Problem, window: CrossingWindow) -> FloatArray:
    """g from half the branch gap at the largest drop, D from where it happens"""
    B, f = problem.B, problem.f
    drops = -np.diff(f)
    jump = int(np.argmax(drops)) if drops.size else 0
    B_cross = 0.5 * (B[jump] + B[min(jump + 1, B.size - 1)])

    wc = (
        (window.omega_c_init - problem.f_ref) / MHZ
        if window.omega_c_init is not None
        else float(np.median(f))
    )
    if window.g_init is not None:
        g = window.g_init / MHZ
    else:
        g = max(0.5 * float(drops[jump]), 0.0) if drops.size else 0.0
    gamma = problem.options.gamma_e / GHZ
    D = (
        window.D_init / MHZ
        if window.D_init is not None
        else 0.5 * ((gamma * GHZ * B_cross - problem.f_ref) / MHZ - wc)
    )
    theta = [g, D, wc] + ([gamma] if problem.options.free_gamma_e else [])
    return np.array(theta, dtype=np.float64)


def gap_resolved(f: FloatArray, resolution: float) -> bool:
    """Whether a trace drops by more than the resolution between neighbouring points"""
    drops = -np.diff(f)
    return bool(drops.size) and float(drops.max()) > resolution


def _build_problem(
    trace: PeakTrace,
    window: CrossingWindow,
    options: CrossingOptions,
    f_ref: float,
    linewidths: Linewidths | None = None,
) -> _Problem:
    records = trace.select(rank=options.rank, B_lo=window.B_lo, B_hi=window.B_hi)
    n_params = 4 if options.free_gamma_e else 3
    if len(records) <= n_params:
        raise DomainError(
            f"window [{window.B_lo}, {window.B_hi}] T holds {len(records)} peak "
            + f"points, need more than {n_params}"
        )
    names = ("g", "D", "omega_c") + (("gamma_e",) if options.free_gamma_e else ())
    f = np.array([(r.f0 - f_ref) / MHZ for r in records])
    resolution = float(np.median([r.delta_f for r in records])) / MHZ
    single_branch = not gap_resolved(f, resolution)
    if single_branch:
        logger.warning(
            f"window [{window.B_lo}, {window.B_hi}] T shows no splitting wider than "
            + f"the {resolution:.3g} MHz linewidth; g is not resolved"
        )
    return _Problem(
        B=np.array([r.B for r in records]),
        f=f,
        f_ref=f_ref,
        names=names,
        options=options,
        resolution=resolution,
        linewidths=linewidths or Linewidths(),
        single_branch=single_branch,
    )


def _outliers(
    problem: _Problem, theta: FloatArray, is_upper: BoolArray, usable: BoolArray
) -> BoolArray:
    r = problem.residuals(theta, is_upper)
    if not usable.any():
        return np.zeros_like(usable)
    used = r[usable]
    scale = MAD_TO_SIGMA * float(np.median(np.abs(used - np.median(used))))
    limit = max(OUTLIER_SIGMAS * scale, 0.5 * problem.resolution)
    return usable & (np.abs(r) > limit)


def residual_correlation(residuals: FloatArray) -> float:
    """Lag-one autocorrelation of residuals in field order, clipped to [0, 0.9]"""
    power = float(residuals @ residuals)
    if residuals.size < 3 or power == 0:
        return 0.0
    rho = float(residuals[:-1] @ residuals[1:]) / power
    return min(max(rho, 0.0), MAX_RESIDUAL_CORRELATION)


def _widened(covariance: FloatArray, index: int, floor: float) -> FloatArray:
    """Covariance with sigma[index] raised to floor, correlations kept"""
    sigma = math.sqrt(max(float(covariance[index, index]), 0.0))
    if sigma >= floor or sigma == 0:
        return covariance
    scale = np.ones(covariance.shape[0])
    scale[index] = floor / sigma
    return covariance * np.outer(scale, scale)


def _fit_problem(
    problem: _Problem, window: CrossingWindow, theta: FloatArray
) -> FitResult:
    """Label points, fit, relabel and drop outliers until the point set settles

    The covariance is inflated by (1 + rho) / (1 - rho) for residuals correlated
    along the field (rho = lag-one autocorrelation); without a resolved splitting
    sigma_g is at least max(|g|, half the linewidth).
    """
    labels: tuple[BoolArray, BoolArray] | None = None
    result: FitResult | None = None
    n_rejected = 0
    for passes in range(1, MAX_LABEL_PASSES + 1):
        is_upper, usable = problem.labels(theta)
        usable &= np.where(is_upper, window.include_upper, window.include_lower)
        if labels is None:
            if not np.any(is_upper & usable) or not np.any(~is_upper & usable):
                logger.warning(
                    f"window [{window.B_lo}, {window.B_hi}] T has points on one "
                    + "branch only; g and omega_c are nearly degenerate"
                )
        else:
            # judged against the previous pass
            outliers = _outliers(problem, theta, is_upper, usable)
            n_rejected = int(outliers.sum())
            usable &= ~outliers
            if np.array_equal(labels[0], is_upper) and np.array_equal(
                labels[1], usable
            ):
                break
        labels = (is_upper, usable)
        if usable.sum() <= theta.size:
            raise ConvergenceError(
                f"only {int(usable.sum())} branch points of window "
                + f"[{window.B_lo}, {window.B_hi}] T are off the gap"
            )

        def residuals(t: FloatArray, up=is_upper, use=usable) -> FloatArray:
            return problem.residuals(t, up)[use]

        result = least_squares(
            residuals, theta, LeastSquaresOptions(names=problem.names)
        )
        theta = np.array(result.params)
    assert result is not None and labels is not None

    is_upper, usable = labels
    rho = residual_correlation(problem.residuals(theta, is_upper)[usable])
    covariance = result.covariance * (1 + rho) / (1 - rho)
    if problem.single_branch:
        covariance = _widened(
            covariance, 0, max(abs(float(theta[0])), 0.5 * problem.resolution)
        )
    n_upper = int((is_upper & usable).sum())
    n_lower = int((~is_upper & usable).sum())
    return replace(
        result,
        covariance=covariance,
        diagnostics={
            "label_passes": passes,
            "n_upper": n_upper,
            "n_lower": n_lower,
            "n_midgap": int((~usable).sum()) - n_rejected,
            "n_rejected": n_rejected,
            "residual_correlation": rho,
            "gap_resolved": not problem.single_branch,
        },
    )


def trace_reference(trace: PeakTrace, rank: int | None = 0) -> float:
    f0 = trace.column("f0", rank=rank)
    if f0.size == 0:
        raise DomainError("the peak trace has no usable records")
    return float(np.median(f0))


def fit_single_crossing(
    trace: PeakTrace,
    window: CrossingWindow,
    options: CrossingOptions | None = None,
    linewidths: Linewidths | None = None,
) -> FitResult:
    """Fit (g, D, omega_c) of one isolated avoided crossing

    :raises DomainError: too few points in the window
    :raises RankDeficiencyError: the data cannot separate the parameters
    """
    opts = options or CrossingOptions()
    reference = trace_reference(trace, opts.rank)
    problem = _build_problem(trace, window, opts, reference, linewidths)
    result = _fit_problem(problem, window, _initial_guess(problem, window))
    return _to_hz(result, problem)


def _neighbours(
    k: int, thetas: list[FloatArray], problems: list[_Problem]
) -> tuple[_Neighbour, ...]:
    found: list[_Neighbour] = []
    for j, branch in ((k - 1, "lower"), (k + 1, "upper")):
        if not 0 <= j < len(thetas):
            continue
        g, D, _, gamma = problems[j].unpack(thetas[j])
        lw = problems[j].linewidths
        found.append(
            _Neighbour(
                g=g,
                D=D,
                gamma=gamma,
                branch=branch,  # pyright: ignore[reportArgumentType]
                kappa=lw.kappa / MHZ,
                Gamma_d=lw.Gamma_d / MHZ,
            )
        )
    return tuple(found)


def _settled(old: list[FloatArray], new: list[FloatArray], tol: float) -> bool:
    # 1 kHz floor in MHz units
    return all(
        np.all(np.abs(b - a) <= tol * np.maximum(np.abs(a), 1e-3))
        for a, b in zip(old, new, strict=True)
    )


def fit_coupled_crossings(
    trace: PeakTrace,
    windows: Sequence[CrossingWindow],
    options: CrossingOptions | None = None,
    linewidths: Sequence[Linewidths] | None = None,
    initial: Sequence[FitResult] | None = None,
) -> list[FitResult]:
    """Iteratively corrected fits of neighbouring crossings

    Round 0 fits every window on its own. Each later round refits every window with
    its cavity replaced by the branches of its neighbours from the previous round,
    until no parameter moves by more than round_tol (relative) or max_rounds.

    :param windows: any order; results come back sorted by B_lo
    :param linewidths: per window (sorted by B_lo) loss rates for lossy branches
    :param initial: per window starting values, e.g. a previous lossless fit
    """
    opts = options or CrossingOptions()
    if len(windows) < 2:
        raise DomainError("coupled crossings need at least two windows")
    order = sorted(range(len(windows)), key=lambda i: windows[i].B_lo)
    ordered = [windows[i] for i in order]
    for left, right in zip(ordered, ordered[1:]):
        if right.B_lo < left.B_hi:
            raise DomainError(
                f"windows [{left.B_lo}, {left.B_hi}] and "
                + f"[{right.B_lo}, {right.B_hi}] overlap"
            )
    if linewidths is not None and len(linewidths) != len(windows):
        raise DomainError(f"{len(linewidths)} linewidths for {len(windows)} windows")

    f_ref = trace_reference(trace, opts.rank)
    problems = [
        _build_problem(trace, w, opts, f_ref, linewidths[k] if linewidths else None)
        for k, w in enumerate(ordered)
    ]
    if initial is not None:
        thetas = [_from_hz(r, p) for r, p in zip(initial, problems, strict=True)]
    else:
        thetas = [
            np.array(_fit_problem(p, w, _initial_guess(p, w)).params)
            for p, w in zip(problems, ordered)
        ]

    history: list[list[FloatArray]] = [thetas]
    results: list[FitResult] = []
    settled = False
    rounds = 0
    while rounds < opts.max_rounds:
        rounds += 1
        results = []
        for k, (problem, window) in enumerate(zip(problems, ordered)):
            problem.neighbours = _neighbours(k, history[-1], problems)
            results.append(_fit_problem(problem, window, history[-1][k]))
        new = [np.array(r.params) for r in results]
        settled = _settled(history[-1], new, opts.round_tol)
        history.append(new)
        if settled:
            break
    if not settled:
        logger.warning(
            f"coupled crossing fit did not settle after {rounds} rounds; "
            + "reporting the last two iterates"
        )

    out: list[FitResult] = []
    for k, (result, problem) in enumerate(zip(results, problems)):
        diagnostics: dict[str, object] = {
            **result.diagnostics,
            "rounds": rounds,
            "rounds_settled": settled,
            "neighbour_correction": "left lower polariton, right upper branch",
            "lossy_branches": problem.linewidths != Linewidths(),
        }
        if not settled:
            diagnostics["last_two_iterates"] = [
                list(_to_hz_values(history[-2][k], problem)),
                list(_to_hz_values(history[-1][k], problem)),
            ]
        out.append(
            _to_hz(
                result,
                problem,
                converged=result.converged and settled,
                diagnostics=diagnostics,
            )
        )
    return out


def _to_hz_values(theta: FloatArray, problem: _Problem) -> list[float]:
    values = [abs(theta[0]) * MHZ, theta[1] * MHZ, problem.f_ref + theta[2] * MHZ]
    if problem.options.free_gamma_e:
        values.append(theta[3] * GHZ)
    return [float(v) for v in values]


def detect_crossings(
    trace: PeakTrace, jump_factor: float = 1.0, merge_T: float = 0.5e-3
) -> list[float]:
    """Field values where the tallest peak jumps down to the lower branch

    A jump is a drop of f0 between consecutive slices larger than jump_factor times
    the median linewidth; jumps closer than merge_T are one crossing.
    """
    records = trace.select(rank=0)
    if len(records) < 2:
        return []
    B = np.array([r.B for r in records])
    f0 = np.array([r.f0 for r in records])
    threshold = jump_factor * float(np.median([r.delta_f for r in records]))
    drops = np.flatnonzero(f0[:-1] - f0[1:] > threshold)
    groups: list[list[float]] = []
    for i in drops:
        B_mid = 0.5 * (B[i] + B[i + 1])
        if groups and B_mid - groups[-1][-1] <= merge_T:
            groups[-1].append(B_mid)
        else:
            groups.append([B_mid])
    crossings = [float(np.mean(g)) for g in groups]
    logger.debug(f"crossings detected at {crossings} T")
    return crossings


def crossing_windows(
    trace: PeakTrace, crossings: Sequence[float], half_width_T: float = 2e-3
) -> list[CrossingWindow]:
    """One window per crossing, split halfway between neighbouring crossings"""
    if not crossings:
        return []
    all_B = np.array([r.B for r in trace.records])
    B_min, B_max = float(all_B.min()), float(all_B.max())
    centres = sorted(crossings)
    windows: list[CrossingWindow] = []
    for k, centre in enumerate(centres):
        lo = max(B_min, centre - half_width_T)
        hi = min(B_max, centre + half_width_T)
        if k > 0:
            lo = max(lo, 0.5 * (centres[k - 1] + centre))
        if k + 1 < len(centres):
            # a hair below the midpoint so neighbouring windows never share a slice
            hi = min(hi, math.nextafter(0.5 * (centre + centres[k + 1]), -math.inf))
        windows.append(CrossingWindow(B_lo=lo, B_hi=hi, label=f"crossing {k + 1}"))
    return windows
