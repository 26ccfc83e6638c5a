"""
The full analysis of one field sweep: peak extraction, crossing fits (coupled when
there are several), masked Q fits and, optionally, alternating refinement of the
crossing branches with the fitted linewidths.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from spinres.errors import ConvergenceError, DomainError
from spinres.fit.crossings import (
    CrossingOptions,
    Linewidths,
    crossing_windows,
    detect_crossings,
    fit_coupled_crossings,
    fit_single_crossing,
)
from spinres.fit.peaks import PeakOptions, extract_peaks
from spinres.fit.qdips import fit_q_dips
from spinres.models.fitting import CrossingWindow, FitResult, PeakTrace
from spinres.models.scenario import ScenarioConfig
from spinres.models.sweep import FieldSweep
from spinres.spinphys import ensemble_spin_count, single_spin_coupling

logger = logging.getLogger(__name__)

# a Q fit feeds its linewidth back into the branches only when this precise
MAX_RELATIVE_LINEWIDTH_ERROR = 0.3
REFINE_TOL = 1e-3


@dataclass(slots=True, frozen=True, kw_only=True)
class WindowPlan:
    window: CrossingWindow
    q_mask_MHz: float = 10.0
    free_kappa: bool = False
    fit_q: bool = True


@dataclass(slots=True, frozen=True, kw_only=True)
class CrossingAnalysis:
    plan: WindowPlan
    crossing: FitResult  # g, D, omega_c [, gamma_e]
    q_dip: FitResult | None = None  # Gamma_d, omega [, kappa]
    q_error: str = ""
    spin_count: float | None = None

    @property
    def converged(self) -> bool:
        if not self.crossing.converged:
            return False
        if not self.plan.fit_q:
            return True
        return self.q_dip is not None and self.q_dip.converged


@dataclass(slots=True, frozen=True, kw_only=True)
class AnalysisResult:
    trace: PeakTrace
    crossings: tuple[CrossingAnalysis, ...]
    kappa: float
    refine_rounds: int = 0
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def converged(self) -> bool:
        return bool(self.crossings) and all(c.converged for c in self.crossings)


def plan_windows(trace: PeakTrace, scenario: ScenarioConfig) -> list[WindowPlan]:
    """Windows from the scenario, or detected from the trace, sorted by B"""
    analysis = scenario.analysis
    if analysis.windows is not None:
        plans = [
            WindowPlan(
                window=w.to_window(),
                q_mask_MHz=w.q_mask_MHz,
                free_kappa=w.free_kappa,
                fit_q=w.fit_q,
            )
            for w in analysis.windows
        ]
        return sorted(plans, key=lambda p: p.window.B_lo)

    detection = analysis.detection
    crossings = detect_crossings(
        trace, jump_factor=detection.jump_factor, merge_T=detection.merge_mT * 1e-3
    )
    windows = crossing_windows(
        trace, crossings, half_width_T=detection.half_width_mT * 1e-3
    )
    masks = detection.q_mask_MHz
    free = detection.free_kappa
    return [
        WindowPlan(
            window=w,
            q_mask_MHz=masks[min(k, len(masks) - 1)] if masks else 10.0,
            free_kappa=free[min(k, len(free) - 1)] if free else False,
        )
        for k, w in enumerate(windows)
    ]


def _fit_crossings(
    trace: PeakTrace,
    plans: Sequence[WindowPlan],
    options: CrossingOptions,
    linewidths: Sequence[Linewidths] | None = None,
    initial: Sequence[FitResult] | None = None,
) -> list[FitResult]:
    windows = [p.window for p in plans]
    if len(windows) == 1:
        return [
            fit_single_crossing(
                trace, windows[0], options, linewidths[0] if linewidths else None
            )
        ]
    return fit_coupled_crossings(trace, windows, options, linewidths, initial)


def _fit_q(
    trace: PeakTrace,
    plan: WindowPlan,
    crossing: FitResult,
    kappa: float,
    scenario: ScenarioConfig,
) -> tuple[FitResult | None, str]:
    if not plan.fit_q:
        return None, ""
    gamma_e = (
        crossing.value("gamma_e")
        if "gamma_e" in crossing.names
        else scenario.analysis.gamma_e
    )
    omega_c = crossing.value("omega_c")
    try:
        result = fit_q_dips(
            trace,
            plan.window,
            g=crossing.value("g"),
            kappa=kappa,
            omega_c=omega_c,
            omega_init=omega_c + 2 * crossing.value("D"),
            mask_MHz=plan.q_mask_MHz,
            free_kappa=plan.free_kappa,
            model=scenario.analysis.q_model,
            gamma_e=gamma_e,
        )
    except (ConvergenceError, DomainError) as e:
        logger.warning(f"Q fit of {plan.window.label or plan.window.B_lo} failed: {e}")
        return None, str(e)
    return result, ""


def _linewidths(
    q_fits: Sequence[FitResult | None], kappa: float
) -> list[Linewidths] | None:
    found: list[Linewidths] = []
    for q in q_fits:
        if (
            q is None
            or not q.converged
            or q.at_bounds
            or not q.error("Gamma_d") < MAX_RELATIVE_LINEWIDTH_ERROR * q.value("Gamma_d")
        ):
            found.append(Linewidths())
            continue
        k = q.value("kappa") if "kappa" in q.names else kappa
        found.append(Linewidths(kappa=k, Gamma_d=q.value("Gamma_d")))
    return found if any(lw != Linewidths() for lw in found) else None


def _moved(old: Sequence[FitResult], new: Sequence[FitResult]) -> float:
    return max(
        abs(b.value("g") - a.value("g")) / max(abs(a.value("g")), 1e3)
        for a, b in zip(old, new, strict=True)
    )


def refine_crossings(
    trace: PeakTrace,
    plans: Sequence[WindowPlan],
    crossings: list[FitResult],
    q_fits: list[tuple[FitResult | None, str]],
    kappa: float,
    scenario: ScenarioConfig,
    options: CrossingOptions,
) -> tuple[list[FitResult], list[tuple[FitResult | None, str]], int]:
    """Alternate crossing fits on the lossy branches with Q-dip fits until g settles

    :return: (crossings, q_fits, rounds); the inputs come back unchanged with
        rounds = 0 when no Q fit has a usable linewidth
    """
    lossless = crossings
    used: tuple[list[Linewidths], list[FitResult | None]] | None = None
    rounds = 0
    while rounds < scenario.analysis.max_refine_rounds:
        sources = [q for q, _ in q_fits]
        linewidths = _linewidths(sources, kappa)
        if linewidths is None:
            break
        rounds += 1
        try:
            refined = _fit_crossings(trace, plans, options, linewidths, crossings)
        except ConvergenceError as e:
            logger.warning(f"linewidth refinement stopped: {e}")
            break
        moved = _moved(crossings, refined)
        crossings = refined
        used = (linewidths, sources)
        q_fits = [_fit_q(trace, p, c, kappa, scenario) for p, c in zip(plans, crossings)]
        logger.debug(f"linewidth refinement round {rounds}: g moved {moved:.3g}")
        if moved < REFINE_TOL:
            break
    if used is not None:
        crossings = [
            _with_linewidth_error(before, after, lw, q)
            for before, after, lw, q in zip(lossless, crossings, *used, strict=True)
        ]
    return crossings, q_fits, rounds


def _with_linewidth_error(
    lossless: FitResult, lossy: FitResult, linewidths: Linewidths, q: FitResult | None
) -> FitResult:
    """Adds the Gamma_d uncertainty to a fit on the lossy branches

    The sensitivity to Gamma_d is the shift from the lossless fit divided by Gamma_d.
    """
    if q is None or linewidths.Gamma_d <= 0:
        return lossy
    relative = q.error("Gamma_d") / linewidths.Gamma_d
    shift = (lossy.params - lossless.params) * relative
    return replace(
        lossy,
        covariance=lossy.covariance + np.outer(shift, shift),
        diagnostics={**lossy.diagnostics, "linewidth_error_included": True},
    )


def analyze_sweep(sweep: FieldSweep, scenario: ScenarioConfig) -> AnalysisResult:
    """Run every fit a scenario asks for on a sweep

    A sweep without crossings gives a result with no crossings and a note; fit
    failures are recorded in the result rather than raised.
    """
    analysis = scenario.analysis
    trace = extract_peaks(
        sweep,
        PeakOptions(
            secondary=analysis.secondary_peaks,
            prominence_threshold=analysis.prominence_threshold,
            window_fwhm=analysis.window_fwhm,
            workers=analysis.workers,
        ),
    )
    kappa = analysis.kappa if analysis.kappa is not None else scenario.cavity.kappa
    plans = plan_windows(trace, scenario)
    if not plans:
        logger.info("no crossings found in the peak trace")
        return AnalysisResult(
            trace=trace, crossings=(), kappa=kappa, notes=("no crossings found",)
        )

    options = CrossingOptions(
        gamma_e=analysis.gamma_e,
        free_gamma_e=analysis.free_gamma_e,
        max_rounds=analysis.max_coupled_rounds,
    )
    notes: list[str] = []
    if len(plans) > 1:
        notes.append(
            "coupled crossings: each window corrected against the lower polariton of "
            + "its left neighbour and the upper branch of its right neighbour"
        )
    try:
        crossings = _fit_crossings(trace, plans, options)
    except ConvergenceError as e:
        logger.error(f"crossing fit failed: {e}")
        return AnalysisResult(
            trace=trace, crossings=(), kappa=kappa, notes=(f"crossing fit failed: {e}",)
        )
    q_fits = [_fit_q(trace, p, c, kappa, scenario) for p, c in zip(plans, crossings)]

    rounds = 0
    if analysis.refine_linewidths:
        crossings, q_fits, rounds = refine_crossings(
            trace, plans, crossings, q_fits, kappa, scenario, options
        )
        if rounds:
            notes.append(
                f"crossing branches include fitted linewidths ({rounds} rounds)"
            )

    g0 = (
        single_spin_coupling(scenario.cavity.omega_c, analysis.mode_volume)
        if analysis.mode_volume is not None
        else None
    )
    results = tuple(
        CrossingAnalysis(
            plan=plan,
            crossing=crossing,
            q_dip=q,
            q_error=error,
            spin_count=ensemble_spin_count(crossing.value("g"), g0) if g0 else None,
        )
        for plan, crossing, (q, error) in zip(plans, crossings, q_fits, strict=True)
    )
    for k, c in enumerate(results, start=1):
        logger.info(
            f"crossing {k}: g = {c.crossing.value('g') / 1e6:.4f} MHz, "
            + f"D = {c.crossing.value('D') / 1e6:.4f} MHz"
            + (
                f", Gamma_d = {c.q_dip.value('Gamma_d') / 1e6:.4f} MHz"
                if c.q_dip is not None
                else ""
            )
        )
    return AnalysisResult(
        trace=trace,
        crossings=results,
        kappa=kappa,
        refine_rounds=rounds,
        notes=tuple(notes),
    )
