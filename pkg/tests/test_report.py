import json
import math
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from spinres.dataio.report_writer import (
    dump_report,
    read_report,
    report_from_analysis,
    round_float,
    to_json_value,
    write_report,
)
from spinres.fit.pipeline import AnalysisResult, CrossingAnalysis, WindowPlan
from spinres.models.fitting import CrossingWindow, FitResult, PeakTrace
from spinres.models.scenario import ScenarioConfig


def test_round_float():
    assert round_float(1.23456789012345) == 1.23456789
    assert round_float(12.59345e9) == 12.59345e9
    assert round_float(math.inf) is None
    assert round_float(math.nan) is None


def test_to_json_value():
    value = {
        "a": (np.float64(1 / 3), np.int64(2)),
        "b": [True, None, "x"],
        3: np.array([0.5]),
    }
    assert to_json_value(value) == {
        "a": [0.333333333, 2],
        "b": [True, None, "x"],
        "3": [0.5],
    }
    assert to_json_value(Path("x")) == "x"


def test_two_crossings_report(
    two_crossings_analysis: AnalysisResult, two_crossings_scenario: ScenarioConfig
):
    report = report_from_analysis(
        two_crossings_analysis, two_crossings_scenario, source="two_crossings.sweep"
    )
    assert report.converged
    assert report.schema_name == "spinres-report/1"
    assert report.provenance.scenario == "two_crossings"
    assert report.provenance.seed == 0
    assert report.provenance.config_hash == two_crossings_scenario.config_hash
    assert report.provenance.source == "two_crossings.sweep"
    assert {"g1", "D1", "omega_c1", "Gamma_d1", "N1", "g2", "kappa2", "N2"} <= set(
        report.summary
    )
    assert "omega1" not in report.summary
    assert report.summary["g1"].unit == "Hz"
    assert report.summary["g1"].value == pytest.approx(2.5e6, rel=0.05)
    assert [(f.name, f.kind) for f in report.fits] == [
        ("V1", "crossing"),
        ("V1", "q_dip"),
        ("V2", "crossing"),
        ("V2", "q_dip"),
    ]


def test_structured_report_is_deterministic(
    tmp_path: Path,
    two_crossings_analysis: AnalysisResult,
    two_crossings_scenario: ScenarioConfig,
):
    report = report_from_analysis(two_crossings_analysis, two_crossings_scenario)
    text = dump_report(report)
    again = report_from_analysis(two_crossings_analysis, two_crossings_scenario)
    assert text == dump_report(again)
    document = json.loads(text)
    assert document["schema"] == "spinres-report/1"
    assert list(document) == sorted(document)

    path = tmp_path / "report.json"
    write_report(report, path)
    assert path.read_text() == text
    assert read_report(path) == report


def test_tabular_report(two_crossings_analysis: AnalysisResult):
    text = dump_report(report_from_analysis(two_crossings_analysis), "tabular")
    lines = text.splitlines()
    assert lines[0] == "fit,kind,parameter,value,sigma,unit,converged"
    summary = [line.split(",")[2] for line in lines[1:] if line.startswith("summary,")]
    assert summary == sorted(summary)
    assert any(line.startswith("V2,q_dip,kappa,") for line in lines)


def test_reading_a_non_report_fails(tmp_path: Path):
    path = tmp_path / "other.json"
    path.write_text('{"hello": 1}')
    with pytest.raises(ValidationError):
        read_report(path)


def test_failed_q_fit_becomes_a_note():
    crossing = FitResult(
        names=("g", "D", "omega_c"),
        params=np.array([1e6, 2e6, 12.6e9]),
        covariance=np.zeros((3, 3)),
        residual_norm=0.0,
        n_iterations=3,
        converged=True,
    )
    result = AnalysisResult(
        trace=PeakTrace(()),
        crossings=(
            CrossingAnalysis(
                plan=WindowPlan(window=CrossingWindow(B_lo=0.44, B_hi=0.45)),
                crossing=crossing,
                q_error="2 Q points lie outside the 10.0 MHz mask",
            ),
        ),
        kappa=0.22e6,
    )
    report = report_from_analysis(result)
    assert not report.converged
    assert report.notes == [
        "crossing 1: Q fit not available (2 Q points lie outside the 10.0 MHz mask)"
    ]
    assert report.provenance.scenario is None
    assert report.fits[0].name == "crossing 1"
