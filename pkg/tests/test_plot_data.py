import json
from pathlib import Path

import numpy as np
import pytest

from spinres.cavity import polariton_frequencies
from spinres.dataio.plot_data import (
    branch_curves,
    collect_series,
    q_curves,
    write_plot_data,
)
from spinres.fit.pipeline import AnalysisResult, CrossingAnalysis, WindowPlan
from spinres.models.fitting import CrossingWindow, FitResult, PeakTrace
from spinres.models.sweep import FieldSweep

OMEGA_C = 12.59345e9


def fit(names: tuple[str, ...], values: list[float]) -> FitResult:
    return FitResult(
        names=names,
        params=np.array(values),
        covariance=np.zeros((len(values), len(values))),
        residual_norm=0.0,
        n_iterations=1,
        converged=True,
    )


def single_crossing_result() -> AnalysisResult:
    analysis = CrossingAnalysis(
        plan=WindowPlan(window=CrossingWindow(B_lo=0.448, B_hi=0.451, label="V1")),
        crossing=fit(("g", "D", "omega_c"), [2.5e6, 2.01e6, OMEGA_C]),
        q_dip=fit(("Gamma_d", "omega"), [4.27e6, OMEGA_C + 4.02e6]),
    )
    return AnalysisResult(trace=PeakTrace(()), crossings=(analysis,), kappa=0.22e6)


def test_isolated_crossing_branches_are_the_polaritons():
    result = single_crossing_result()
    B = np.linspace(0.448, 0.451, 50)
    upper, lower = branch_curves(result, 0, B, 28e9)
    expected = polariton_frequencies(OMEGA_C, 28e9 * B - 4.02e6, 2.5e6)
    np.testing.assert_allclose(upper, expected[0])
    np.testing.assert_allclose(lower, expected[1])


def test_q_curves_agree_far_from_the_crossing():
    c = single_crossing_result().crossings[0]
    B = np.array([0.4460, 0.4525])
    dispersive, eigenmode = q_curves(c, B, 0.22e6, 28e9)
    np.testing.assert_allclose(dispersive, eigenmode, rtol=0.02)


def test_series_of_a_single_crossing():
    files = [s.file for s in collect_series(single_crossing_result())]
    assert files == [
        "branch_points.csv",
        "q_points.csv",
        "V1_branches.csv",
        "V1_q_model.csv",
    ]


def test_write_plot_data(tmp_path: Path, two_crossings_analysis: AnalysisResult):
    written = write_plot_data(two_crossings_analysis, tmp_path / "plot")
    names = sorted(p.name for p in written)
    assert names == sorted(
        [
            "branch_points.csv",
            "q_points.csv",
            "V1_branches.csv",
            "V1_q_model.csv",
            "V2_branches.csv",
            "V2_q_model.csv",
            "manifest.json",
        ]
    )
    manifest = json.loads((tmp_path / "plot" / "manifest.json").read_text())
    assert [s["file"] for s in manifest["series"]] == [
        n for n in (p.name for p in written) if n != "manifest.json"
    ]
    header = (tmp_path / "plot" / "V1_q_model.csv").read_text().splitlines()[0]
    assert header == "B_T,Q_dispersive,Q_eigenmode"


def test_svg_output_is_reproducible(
    tmp_path: Path,
    two_crossings_analysis: AnalysisResult,
    two_crossings_sweep: FieldSweep,
):
    pytest.importorskip("matplotlib")
    result, sweep = two_crossings_analysis, two_crossings_sweep
    first = write_plot_data(result, tmp_path / "a", sweep=sweep, svg=True)
    second = write_plot_data(result, tmp_path / "b", sweep=sweep, svg=True)
    svgs = [p for p in first if p.suffix == ".svg"]
    assert sorted(p.name for p in svgs) == ["branches.svg", "q.svg"]
    for a, b in zip(svgs, (p for p in second if p.suffix == ".svg")):
        assert a.read_bytes() == b.read_bytes()
