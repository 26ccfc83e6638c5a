"""
Per-slice resonance extraction: a background-corrected Lorentzian fit to |S21|(f)
around each significant peak of every field slice.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import scipy.signal

from spinres.errors import ConvergenceError, DomainError
from spinres.fit.least_squares import LeastSquaresOptions, least_squares
from spinres.models.fitting import PeakRecord, PeakTrace
from spinres.models.sweep import FieldSweep

logger = logging.getLogger(__name__)

type FloatArray = npt.NDArray[np.float64]

# scale factor from the median absolute deviation to a Gaussian sigma
_MAD_TO_SIGMA = 1.4826
# peak_widths rel_height at which an amplitude Lorentzian is delta_f wide
_HALF_WIDTH_LEVEL = 1 - 1 / math.sqrt(2)
_LINESHAPE_NAMES = ("A1", "A2", "A3", "S_max", "f0", "delta_f")


@dataclass(slots=True, frozen=True, kw_only=True)
class PeakOptions:
    secondary: bool = False
    # a peak must stand this many noise sigmas above its surroundings
    prominence_threshold: float = 10.0
    # fit half-window in units of the estimated FWHM
    window_fwhm: float = 3.0
    min_points: int = 8
    workers: int = 1


def robust_noise(amplitude: FloatArray) -> float:
    """White-noise sigma from the MAD of second differences (var(d2) = 6 sigma^2)"""
    d2 = np.diff(amplitude, 2)
    if d2.size == 0:
        return 0.0
    mad = float(np.median(np.abs(d2 - np.median(d2))))
    return _MAD_TO_SIGMA * mad / math.sqrt(6)


def local_noise(
    amplitude: FloatArray, peaks: npt.NDArray[np.intp], half_spans: FloatArray
) -> FloatArray:
    """robust_noise() of the samples within half_spans of each peak

    Multiplicative noise grows with the signal, so a global estimate taken mostly
    from the wings understates the noise on top of a resonance.
    """
    noise = np.empty(peaks.size)
    for i, (peak, span) in enumerate(zip(peaks, half_spans)):
        n = math.ceil(span)
        noise[i] = robust_noise(amplitude[max(0, peak - n) : peak + n + 1])
    return noise


def _lineshape(u: FloatArray, theta: FloatArray) -> FloatArray:
    a1, a2, a3, s_max, u0, w = theta
    z = (u - u0) / w
    return a1 + a2 * u + (s_max + a3 * u) / np.sqrt(1 + 4 * z**2)


def _lineshape_jacobian(u: FloatArray, theta: FloatArray) -> FloatArray:
    _, _, a3, s_max, u0, w = theta
    z = (u - u0) / w
    q = 1 + 4 * z**2
    lorentz = 1 / np.sqrt(q)
    amp = s_max + a3 * u
    slope = 4 * z * q**-1.5 / w
    return np.column_stack(
        (np.ones_like(u), u, u * lorentz, lorentz, amp * slope, amp * slope * z)
    )


def _flagged(B: float, note: str, rank: int = 0) -> PeakRecord:
    logger.debug(f"B = {B} T: {note}")
    return PeakRecord(B=B, rank=rank, flagged=True, note=note)


def _fit_peak(
    B: float,
    f: FloatArray,
    amplitude: FloatArray,
    lo: int,
    hi: int,
    peak: int,
    width_hz: float,
    baseline: float,
    rank: int,
) -> PeakRecord:
    f_ref = float(f[peak])
    scale = max(width_hz, float(np.min(np.diff(f))))
    u = (f[lo:hi] - f_ref) / scale
    y = amplitude[lo:hi]
    init = np.array([baseline, 0.0, 0.0, amplitude[peak] - baseline, 0.0, 1.0])
    try:
        result = least_squares(
            lambda theta: _lineshape(u, theta) - y,
            init,
            LeastSquaresOptions(
                names=_LINESHAPE_NAMES,
                lower=(-np.inf, -np.inf, -np.inf, 0.0, u[0], 1e-6),
                upper=(np.inf, np.inf, np.inf, np.inf, u[-1], np.inf),
            ),
            jacobian=lambda theta: _lineshape_jacobian(u, theta),
        )
    except (ConvergenceError, DomainError) as e:
        return _flagged(B, f"lineshape fit failed: {e}", rank)

    # back to Hz, f0 = f_ref + scale * u0
    hz = result.transformed(
        _LINESHAPE_NAMES,
        np.diag([1.0, 1 / scale, 1 / scale, 1.0, scale, scale]),
        offset=[0, 0, 0, 0, f_ref, 0],
    )
    if not result.converged:
        return _flagged(B, f"lineshape fit did not converge: {result.message}", rank)
    if result.at_bounds:
        return _flagged(B, f"lineshape fit hit bounds on {result.at_bounds}", rank)
    f0, delta_f = hz.value("f0"), hz.value("delta_f")
    return PeakRecord(
        B=B,
        f0=f0,
        delta_f=delta_f,
        Q=f0 / delta_f,
        S_max=hz.value("S_max"),
        A1=hz.value("A1"),
        A2=hz.value("A2"),
        A3=hz.value("A3"),
        f_ref=f_ref,
        sigma_f0=hz.error("f0"),
        sigma_delta_f=hz.error("delta_f"),
        rank=rank,
    )


def extract_slice(
    B: float, f: FloatArray, amplitude: FloatArray, options: PeakOptions
) -> list[PeakRecord]:
    """Fit the tallest peak of one slice, and the second tallest if asked to"""
    if f.size < options.min_points:
        return [_flagged(B, f"only {f.size} frequency points")]
    sigma = robust_noise(amplitude)
    threshold = options.prominence_threshold * sigma
    peaks, props = scipy.signal.find_peaks(amplitude, prominence=threshold)
    prominences = props["prominences"]
    if peaks.size:
        widths = scipy.signal.peak_widths(
            amplitude,
            peaks,
            rel_height=0.5,
            prominence_data=(prominences, props["left_bases"], props["right_bases"]),
        )[0]
        local = local_noise(amplitude, peaks, np.maximum(widths, options.min_points))
        # ripples on top of a resonance fail against the noise found there
        keep = prominences > options.prominence_threshold * np.maximum(sigma, local)
        peaks, prominences = peaks[keep], prominences[keep]
    if peaks.size == 0:
        return [_flagged(B, f"no peak above {options.prominence_threshold} sigma")]

    by_height = np.argsort(-amplitude[peaks], kind="stable")
    chosen = by_height[: 2 if options.secondary else 1]
    _, _, left_ips, right_ips = scipy.signal.peak_widths(
        amplitude, peaks[chosen], rel_height=_HALF_WIDTH_LEVEL
    )
    index = np.arange(f.size, dtype=np.float64)
    sorted_peaks = np.sort(peaks)
    records: list[PeakRecord] = []
    for rank, (k, l_ip, r_ip) in enumerate(zip(chosen, left_ips, right_ips)):
        peak = int(peaks[k])
        width_hz = float(np.interp(r_ip, index, f) - np.interp(l_ip, index, f))
        half = options.window_fwhm * width_hz
        lo = int(np.searchsorted(f, f[peak] - half, side="left"))
        hi = int(np.searchsorted(f, f[peak] + half, side="right"))
        # stop halfway to any significant peak outside this one's half width
        left_neighbours = sorted_peaks[sorted_peaks < l_ip]
        right_neighbours = sorted_peaks[sorted_peaks > r_ip]
        if left_neighbours.size:
            lo = max(lo, (int(left_neighbours[-1]) + peak) // 2 + 1)
        if right_neighbours.size:
            hi = min(hi, (int(right_neighbours[0]) + peak) // 2)
        if hi - lo < options.min_points:
            records.append(_flagged(B, f"only {hi - lo} points around the peak", rank))
            continue
        baseline = float(amplitude[peak] - prominences[k])
        records.append(
            _fit_peak(B, f, amplitude, lo, hi, peak, width_hz, baseline, rank)
        )
    return records


def extract_peaks(sweep: FieldSweep, options: PeakOptions | None = None) -> PeakTrace:
    """Lineshape fits of every field slice, ordered by (B, rank)"""
    opts = options or PeakOptions()
    amplitude = sweep.amplitude
    with ThreadPoolExecutor(max_workers=max(1, opts.workers)) as pool:
        per_slice = list(
            pool.map(
                lambda i: extract_slice(
                    float(sweep.B_axis[i]), sweep.f_axis, amplitude[i], opts
                ),
                range(sweep.B_axis.size),
            )
        )
    trace = PeakTrace(r for records in per_slice for r in records)
    if trace.n_flagged:
        logger.info(f"{trace.n_flagged} of {len(trace)} peak records were flagged")
    return trace
