import math

import numpy as np
import pytest

from spinres.errors import DomainError
from spinres.models.fitting import CrossingWindow, FitResult, PeakRecord, PeakTrace


def make_fit(**overrides) -> FitResult:
    settings = dict(
        names=("g", "D"),
        params=np.array([2.5, 2.0]),
        covariance=np.array([[0.04, 0.01], [0.01, 0.09]]),
        residual_norm=1.5,
        n_iterations=4,
        converged=True,
        n_points=30,
    )
    settings.update(overrides)
    return FitResult(**settings)


def test_fit_result_accessors():
    fit = make_fit()
    assert fit.value("g") == 2.5
    assert fit.error("D") == pytest.approx(0.3)
    assert fit.as_dict() == {
        "g": (2.5, pytest.approx(0.2)),
        "D": (2.0, pytest.approx(0.3)),
    }
    with pytest.raises(KeyError):
        fit.value("kappa")


def test_fit_result_is_read_only():
    fit = make_fit()
    with pytest.raises(ValueError):
        fit.params[0] = 1.0


def test_fit_result_rejects_mismatched_shapes():
    with pytest.raises(DomainError):
        make_fit(params=np.array([1.0, 2.0, 3.0]))
    with pytest.raises(DomainError):
        make_fit(covariance=np.eye(3))


def test_fit_result_symmetrizes_the_covariance():
    fit = make_fit(covariance=np.array([[1.0, 0.2], [0.4, 1.0]]))
    assert fit.covariance[0, 1] == fit.covariance[1, 0] == pytest.approx(0.3)


def test_negative_variances_give_zero_sigma():
    fit = make_fit(covariance=np.array([[-1e-30, 0.0], [0.0, 1.0]]))
    assert fit.error("g") == 0.0


def test_transformed_propagates_the_covariance():
    fit = make_fit()
    m = np.array([[1e6, 0.0], [0.0, -0.5e6]])
    hz = fit.transformed(("g_hz", "half_D_hz"), m, offset=[0.0, 10.0], message="scaled")
    assert hz.names == ("g_hz", "half_D_hz")
    np.testing.assert_allclose(hz.params, [2.5e6, -1e6 + 10.0])
    np.testing.assert_allclose(hz.covariance, m @ fit.covariance @ m.T)
    assert hz.message == "scaled"
    assert hz.n_points == 30


def record(B: float, f0: float = 1e9, rank: int = 0, **overrides) -> PeakRecord:
    settings = dict(B=B, f0=f0, delta_f=1e5, Q=f0 / 1e5, rank=rank)
    settings.update(overrides)
    return PeakRecord(**settings)


def test_peak_record_requires_consistent_q():
    with pytest.raises(DomainError):
        record(0.1, Q=5.0)
    with pytest.raises(DomainError):
        PeakRecord(B=0.1, f0=1e9, delta_f=0.0, Q=math.inf)


def test_flagged_records_skip_validation():
    flagged = PeakRecord(B=0.1, flagged=True, note="no peak")
    assert math.isnan(flagged.f0)


def test_peak_trace_orders_and_selects():
    trace = PeakTrace(
        [
            record(0.3, rank=1),
            record(0.2),
            PeakRecord(B=0.25, flagged=True),
            record(0.3),
            record(0.1),
        ]
    )
    assert [(r.B, r.rank) for r in trace.records] == [
        (0.1, 0),
        (0.2, 0),
        (0.25, 0),
        (0.3, 0),
        (0.3, 1),
    ]
    assert len(trace) == 5
    assert trace.n_flagged == 1
    assert [r.B for r in trace.select()] == [0.1, 0.2, 0.3]
    assert [r.B for r in trace.select(rank=None, B_lo=0.2)] == [0.2, 0.3, 0.3]
    assert len(trace.select(include_flagged=True, B_lo=0.2, B_hi=0.25)) == 2
    np.testing.assert_array_equal(trace.column("B", rank=1), [0.3])


def test_crossing_window_validation():
    window = CrossingWindow(B_lo=0.448, B_hi=0.451)
    assert window.contains(0.448)
    assert window.contains(0.451)
    assert not window.contains(0.4511)
    with pytest.raises(DomainError):
        CrossingWindow(B_lo=0.45, B_hi=0.45)
    with pytest.raises(DomainError):
        CrossingWindow(B_lo=0.44, B_hi=0.45, include_upper=False, include_lower=False)
