import contextlib
import logging

import numpy as np
import pytest

from spinres.cavity import branch_frequencies
from spinres.errors import DomainError, RankDeficiencyError
from spinres.fit.crossings import (
    CrossingOptions,
    Linewidths,
    crossing_windows,
    detect_crossings,
    fit_coupled_crossings,
    fit_single_crossing,
    gap_resolved,
    residual_correlation,
    trace_reference,
)
from spinres.models.fitting import CrossingWindow, PeakRecord, PeakTrace
from tests.helpers import GAMMA_E, KAPPA, OMEGA_C, branch_trace

B_SINGLE = np.linspace(0.4480, 0.4515, 71)
B_SWEEP = np.linspace(0.4480, 0.4545, 131)
FIRST = CrossingWindow(B_lo=0.4480, B_hi=0.45125, label="V1")
SECOND = CrossingWindow(B_lo=0.45127, B_hi=0.4545, label="V2")


def as_trace(B: np.ndarray, f0: np.ndarray) -> PeakTrace:
    return PeakTrace(
        PeakRecord(
            B=float(b), f0=float(f), delta_f=KAPPA, Q=float(f) / KAPPA, f_ref=float(f)
        )
        for b, f in zip(B, f0)
    )


def three_mode_trace(
    B: np.ndarray, couplings: tuple[float, float], Ds: tuple[float, float], noise_hz=0.0
) -> PeakTrace:
    """Cavity-like eigenvalue of a cavity coupled to two spin lines"""
    rng = np.random.default_rng(3)
    f0 = []
    for b in B:
        h = np.diag([OMEGA_C, *(GAMMA_E * b - 2 * D for D in Ds)])
        h[0, 1:] = h[1:, 0] = couplings
        values, vectors = np.linalg.eigh(h)
        f0.append(values[np.argmax(np.abs(vectors[0]) ** 2)])
    return as_trace(B, np.array(f0) + noise_hz * rng.standard_normal(B.size))


def test_trace_reference_is_the_median_peak():
    trace = branch_trace(B_SINGLE, 2.5e6, 2.01e6)
    assert trace_reference(trace) == pytest.approx(np.median(trace.column("f0")))
    with pytest.raises(DomainError):
        trace_reference(PeakTrace([PeakRecord(B=0.1, flagged=True)]))


def test_single_crossing_recovers_the_truth_within_three_sigma():
    trace = branch_trace(B_SINGLE, 2.5e6, 2.01e6, noise_hz=20e3, seed=4)
    fit = fit_single_crossing(trace, CrossingWindow(B_lo=0.4480, B_hi=0.4515))
    assert fit.converged
    assert fit.names == ("g", "D", "omega_c")
    for name, truth in (("g", 2.5e6), ("D", 2.01e6), ("omega_c", OMEGA_C)):
        assert abs(fit.value(name) - truth) <= 3 * fit.error(name), name
    assert fit.diagnostics["n_upper"] > 0
    assert fit.diagnostics["n_lower"] > 0


def test_noiseless_single_crossing_is_exact():
    trace = branch_trace(B_SINGLE, 1.34e6, 2.01e6, both=True)
    # both ranks interleave in B, so the jump heuristic needs explicit starting values
    window = CrossingWindow(
        B_lo=0.4480, B_hi=0.4515, g_init=1.2e6, D_init=2.5e6, omega_c_init=OMEGA_C
    )
    fit = fit_single_crossing(trace, window, CrossingOptions(rank=None))
    assert fit.value("g") == pytest.approx(1.34e6, rel=1e-6)
    assert fit.value("D") == pytest.approx(2.01e6, rel=1e-6)
    assert fit.value("omega_c") == pytest.approx(OMEGA_C, rel=1e-12)


def test_gamma_e_can_be_fitted_with_both_branches():
    trace = branch_trace(B_SINGLE, 2.5e6, 2.01e6, both=True)
    window = CrossingWindow(
        B_lo=0.4480, B_hi=0.4515, g_init=2.4e6, D_init=2.5e6, omega_c_init=OMEGA_C
    )
    options = CrossingOptions(rank=None, free_gamma_e=True)
    fit = fit_single_crossing(trace, window, options)
    assert fit.names == ("g", "D", "omega_c", "gamma_e")
    assert fit.value("gamma_e") == pytest.approx(GAMMA_E, rel=1e-6)
    assert fit.value("g") == pytest.approx(2.5e6, rel=1e-5)


@pytest.mark.parametrize("seed", range(8))
def test_uncoupled_fixture_gives_g_consistent_with_zero(
    seed: int, caplog: pytest.LogCaptureFixture
):
    trace = branch_trace(B_SINGLE, 0.0, 2.01e6, noise_hz=20e3, seed=seed)
    with caplog.at_level(logging.WARNING):
        fit = fit_single_crossing(trace, CrossingWindow(B_lo=0.4480, B_hi=0.4515))
    assert fit.diagnostics["gap_resolved"] is False
    assert "g is not resolved" in caplog.text
    assert abs(fit.value("g")) <= 2 * fit.error("g")
    assert fit.value("omega_c") == pytest.approx(OMEGA_C, abs=20e3)


def test_failed_peak_fits_are_rejected():
    clean = branch_trace(B_SINGLE, 2.5e6, 2.01e6, noise_hz=20e3, seed=4)
    records = list(clean.records)
    for i in (5, 30, 60):
        r = records[i]
        f0 = r.f0 + 3e6
        records[i] = PeakRecord(
            B=r.B, f0=f0, delta_f=r.delta_f, Q=f0 / r.delta_f, f_ref=f0, rank=r.rank
        )
    window = CrossingWindow(B_lo=0.4480, B_hi=0.4515)
    fit = fit_single_crossing(PeakTrace(records), window)
    assert fit.diagnostics["n_rejected"] == 3
    reference = fit_single_crossing(clean, window)
    assert fit.value("g") == pytest.approx(reference.value("g"), rel=0.01)
    assert fit.value("D") == pytest.approx(reference.value("D"), abs=30e3)
    assert abs(fit.value("g") - 2.5e6) <= 3 * fit.error("g")


def test_residual_correlation():
    rng = np.random.default_rng(1)
    assert residual_correlation(rng.standard_normal(4000)) == pytest.approx(0, abs=0.05)
    smooth = np.sin(np.linspace(0, np.pi, 100))
    assert residual_correlation(smooth) == 0.9
    assert residual_correlation(np.array([1.0, -1.0, 1.0, -1.0])) == 0.0
    assert residual_correlation(np.zeros(10)) == 0.0


def test_gap_resolved():
    assert gap_resolved(np.array([1.0, 1.1, -1.5, -1.4]), 0.22)
    assert not gap_resolved(np.array([0.0, 0.05, -0.05, 0.0]), 0.22)
    assert not gap_resolved(np.array([0.0]), 0.22)


def test_single_branch_window_warns(caplog: pytest.LogCaptureFixture):
    trace = branch_trace(B_SINGLE, 2.5e6, 2.01e6, noise_hz=5e3)
    window = CrossingWindow(B_lo=0.4480, B_hi=0.4515, include_lower=False)
    with caplog.at_level(logging.WARNING), contextlib.suppress(RankDeficiencyError):
        fit_single_crossing(trace, window)
    assert "one branch only" in caplog.text


def test_window_with_too_few_points_is_rejected():
    trace = branch_trace(B_SINGLE, 2.5e6, 2.01e6)
    with pytest.raises(DomainError):
        fit_single_crossing(trace, CrossingWindow(B_lo=0.4480, B_hi=0.44810))


def test_lossy_branches_remove_the_linewidth_bias():
    gamma_d = 4.27e6
    spin = GAMMA_E * B_SINGLE - 2 * 2.01e6
    upper, lower = branch_frequencies(OMEGA_C, spin, 2.5e6, KAPPA, gamma_d)
    trace = as_trace(B_SINGLE, np.where(spin < OMEGA_C, upper, lower))
    window = CrossingWindow(B_lo=0.4480, B_hi=0.4515)

    lossy = fit_single_crossing(
        trace, window, linewidths=Linewidths(kappa=KAPPA, Gamma_d=gamma_d)
    )
    assert lossy.value("g") == pytest.approx(2.5e6, rel=1e-5)
    lossless = fit_single_crossing(trace, window)
    assert abs(lossless.value("g") / 2.5e6 - 1) > 0.01


def test_coupled_fit_recovers_two_crossings():
    trace = three_mode_trace(B_SWEEP, (2.5e6, 1.34e6), (2.01e6, 39.76e6))
    first, second = fit_coupled_crossings(trace, [FIRST, SECOND])
    assert first.converged and second.converged
    assert first.diagnostics["rounds_settled"] is True
    assert first.value("g") == pytest.approx(2.5e6, rel=0.01)
    assert first.value("D") == pytest.approx(2.01e6, abs=0.1e6)
    assert second.value("g") == pytest.approx(1.34e6, rel=0.01)
    assert second.value("D") == pytest.approx(39.76e6, abs=0.1e6)
    for fit in (first, second):
        assert fit.value("omega_c") == pytest.approx(OMEGA_C, abs=50e3)


def test_coupled_fit_does_not_depend_on_window_order():
    trace = three_mode_trace(B_SWEEP, (2.5e6, 1.34e6), (2.01e6, 39.76e6), noise_hz=10e3)
    forward = fit_coupled_crossings(trace, [FIRST, SECOND])
    backward = fit_coupled_crossings(trace, [SECOND, FIRST])
    for a, b in zip(forward, backward, strict=True):
        np.testing.assert_array_equal(a.params, b.params)


def test_distant_crossings_match_independent_fits():
    g = 0.2e6
    D1, D2 = 2.01e6, 42.01e6  # 80 MHz apart on the spin line
    B = np.linspace(0.4480, 0.4545, 261)
    trace = three_mode_trace(B, (g, g), (D1, D2), noise_hz=10e3)
    coupled = fit_coupled_crossings(trace, [FIRST, SECOND])
    for window, fit in zip((FIRST, SECOND), coupled):
        alone = fit_single_crossing(trace, window)
        for name in ("g", "D"):
            assert abs(fit.value(name) - alone.value(name)) <= fit.error(name), name


def test_unsettled_coupled_fit_reports_the_last_two_iterates():
    trace = three_mode_trace(B_SWEEP, (2.5e6, 1.34e6), (2.01e6, 39.76e6), noise_hz=10e3)
    results = fit_coupled_crossings(
        trace, [FIRST, SECOND], CrossingOptions(max_rounds=1)
    )
    for fit in results:
        assert not fit.converged
        assert fit.diagnostics["rounds"] == 1
        previous, last = fit.diagnostics["last_two_iterates"]
        assert len(previous) == len(last) == 3


def test_coupled_fit_input_errors():
    trace = three_mode_trace(B_SWEEP, (2.5e6, 1.34e6), (2.01e6, 39.76e6))
    with pytest.raises(DomainError):
        fit_coupled_crossings(trace, [FIRST])
    with pytest.raises(DomainError):
        fit_coupled_crossings(trace, [FIRST, CrossingWindow(B_lo=0.4510, B_hi=0.4545)])
    with pytest.raises(DomainError):
        fit_coupled_crossings(trace, [FIRST, SECOND], linewidths=[Linewidths()])


def test_detect_crossings_and_windows():
    trace = three_mode_trace(B_SWEEP, (2.5e6, 1.34e6), (2.01e6, 39.76e6))
    crossings = detect_crossings(trace)
    assert len(crossings) == 2
    assert crossings[0] == pytest.approx((OMEGA_C + 2 * 2.01e6) / GAMMA_E, abs=0.3e-3)
    assert crossings[1] == pytest.approx((OMEGA_C + 2 * 39.76e6) / GAMMA_E, abs=0.3e-3)

    first, second = crossing_windows(trace, crossings, half_width_T=2e-3)
    assert first.B_lo >= 0.4480
    assert first.B_hi < second.B_lo
    assert second.B_hi <= 0.4545
    assert first.contains(crossings[0]) and second.contains(crossings[1])
    assert (first.label, second.label) == ("crossing 1", "crossing 2")


def test_flat_trace_has_no_crossings():
    trace = branch_trace(np.linspace(0.0, 0.01, 11), 0.0, 400e6)
    assert detect_crossings(trace) == []
    assert crossing_windows(trace, []) == []
