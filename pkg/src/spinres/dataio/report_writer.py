"""
Analysis reports: structured (JSON) or tabular (CSV), written deterministically
with sorted keys and floats rounded to REPORT_DIGITS significant digits.
"""

import csv
import io
import json
import math
from collections.abc import Mapping
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import JsonValue

from spinres.fit.pipeline import AnalysisResult
from spinres.models.fitting import FitResult
from spinres.models.report import FitEntry, ParameterEntry, Provenance, Report
from spinres.models.scenario import ScenarioConfig
from spinres.utils import atomic_write_text, get_spinres_version
from spinres.utils.constants import REPORT_DIGITS

type ReportFormat = Literal["structured", "tabular"]

UNITS = {
    "g": "Hz",
    "D": "Hz",
    "omega_c": "Hz",
    "omega": "Hz",
    "gamma_e": "Hz/T",
    "Gamma_d": "Hz",
    "kappa": "Hz",
    "N": "",
}


def round_float(x: float) -> float | None:
    if not math.isfinite(x):
        return None
    return float(f"{x:.{REPORT_DIGITS}g}")


def to_json_value(value: object) -> JsonValue:
    """Plain JSON types with rounded floats, for diagnostics and reports"""
    if isinstance(value, bool | str) or value is None:
        return value
    if isinstance(value, int | np.integer):
        return int(value)
    if isinstance(value, float | np.floating):
        return round_float(float(value))
    if isinstance(value, Mapping):
        return {str(k): to_json_value(v) for k, v in value.items()}  # pyright: ignore[reportUnknownVariableType]
    if isinstance(value, list | tuple | np.ndarray):
        return [to_json_value(v) for v in value]  # pyright: ignore[reportUnknownVariableType]
    return str(value)


def parameter(value: float, sigma: float | None, unit: str = "") -> ParameterEntry:
    return ParameterEntry(
        value=round_float(value),
        sigma=None if sigma is None else round_float(sigma),
        unit=unit,
    )


def fit_entry(name: str, kind: str, fit: FitResult) -> FitEntry:
    return FitEntry(
        name=name,
        kind=kind,
        parameters={
            n: parameter(v, s, UNITS.get(n, ""))
            for n, (v, s) in fit.as_dict().items()
        },
        converged=fit.converged,
        n_iterations=fit.n_iterations,
        n_points=fit.n_points,
        residual_norm=round_float(fit.residual_norm),
        message=fit.message,
        at_bounds=list(fit.at_bounds),
        diagnostics={
            str(k): to_json_value(v) for k, v in fit.diagnostics.items()
        },
    )


def report_from_analysis(
    result: AnalysisResult,
    scenario: ScenarioConfig | None = None,
    source: str | None = None,
) -> Report:
    fits: list[FitEntry] = []
    summary: dict[str, ParameterEntry] = {}
    for k, c in enumerate(result.crossings, start=1):
        label = c.plan.window.label or f"crossing {k}"
        fits.append(fit_entry(label, "crossing", c.crossing))
        for name, (value, sigma) in c.crossing.as_dict().items():
            summary[f"{name}{k}"] = parameter(value, sigma, UNITS.get(name, ""))
        if c.q_dip is not None:
            fits.append(fit_entry(label, "q_dip", c.q_dip))
            for name, (value, sigma) in c.q_dip.as_dict().items():
                if name != "omega":
                    summary[f"{name}{k}"] = parameter(value, sigma, UNITS.get(name, ""))
        if c.spin_count is not None:
            summary[f"N{k}"] = parameter(c.spin_count, None)
    notes = list(result.notes)
    notes += [
        f"crossing {k}: Q fit not available ({c.q_error})"
        for k, c in enumerate(result.crossings, start=1)
        if c.q_error
    ]
    return Report(
        provenance=Provenance(
            code_version=get_spinres_version(),
            config_hash=scenario.config_hash if scenario else None,
            scenario=scenario.name if scenario else None,
            seed=scenario.seed if scenario else None,
            source=source,
        ),
        converged=result.converged,
        summary=summary,
        fits=fits,
        notes=notes,
    )


def dump_report(report: Report, format: ReportFormat = "structured") -> str:
    if format == "structured":
        document = to_json_value(report.model_dump(mode="json", by_alias=True))
        return json.dumps(document, sort_keys=True, indent=2) + "\n"

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("fit", "kind", "parameter", "value", "sigma", "unit", "converged"))

    def cell(x: float | None) -> str:
        return "" if x is None else repr(x)

    for name in sorted(report.summary):
        entry = report.summary[name]
        writer.writerow(
            ("summary", "", name, cell(entry.value), cell(entry.sigma), entry.unit, "")
        )
    for fit in report.fits:
        for name, entry in fit.parameters.items():
            writer.writerow(
                (
                    fit.name,
                    fit.kind,
                    name,
                    cell(entry.value),
                    cell(entry.sigma),
                    entry.unit,
                    int(fit.converged),
                )
            )
    return buffer.getvalue()


def write_report(
    report: Report, path: Path, format: ReportFormat = "structured"
) -> None:
    atomic_write_text(Path(path), dump_report(report, format))


def read_report(path: Path) -> Report:
    """
    :raises FileNotFoundError: no such file
    :raises pydantic.ValidationError: not a structured report
    """
    return Report.model_validate_json(Path(path).read_text(encoding="utf-8"))
