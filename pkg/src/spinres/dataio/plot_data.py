"""
Figure data of an analysis: one CSV per curve plus manifest.json describing them,
and optionally SVG renderings when matplotlib is installed.
"""

import csv
import io
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt

from spinres.cavity import (
    corrected_first_crossing,
    corrected_second_crossing,
    dispersive_q,
    eigenmode_q,
    polariton_frequencies,
)
from spinres.fit.pipeline import AnalysisResult, CrossingAnalysis
from spinres.models.sweep import FieldSweep
from spinres.utils import atomic_write_text, slugify

logger = logging.getLogger(__name__)

type FloatArray = npt.NDArray[np.float64]

CURVE_POINTS = 400


@dataclass(slots=True, frozen=True, kw_only=True)
class Series:
    file: str
    figure: str  # branches | q
    legend: str
    columns: tuple[str, ...]
    data: FloatArray  # one column per entry of columns

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.data:
            writer.writerow([repr(float(x)) for x in row])
        return buffer.getvalue()


def _spin_line(c: CrossingAnalysis, gamma_e: float, B: FloatArray) -> FloatArray:
    return gamma_e * B - 2 * c.crossing.value("D")


def _gamma(c: CrossingAnalysis, default: float) -> float:
    return c.crossing.value("gamma_e") if "gamma_e" in c.crossing.names else default


def branch_curves(
    result: AnalysisResult, k: int, B: FloatArray, gamma_e: float
) -> tuple[FloatArray, FloatArray]:
    """Fitted branches of crossing k with the cavity replaced by the neighbouring
    hybrid modes, as in the coupled fit"""
    c = result.crossings[k]
    omega_c = c.crossing.value("omega_c")
    cavity: FloatArray = np.full_like(B, omega_c)
    if k > 0:
        left = result.crossings[k - 1]
        _, lower = polariton_frequencies(
            omega_c, _spin_line(left, _gamma(left, gamma_e), B), left.crossing.value("g")
        )
        cavity = cavity + (np.asarray(lower) - omega_c)
    if k + 1 < len(result.crossings):
        right = result.crossings[k + 1]
        upper, _ = polariton_frequencies(
            omega_c,
            _spin_line(right, _gamma(right, gamma_e), B),
            right.crossing.value("g"),
        )
        cavity = cavity + (np.asarray(upper) - omega_c)

    spin = _spin_line(c, _gamma(c, gamma_e), B)
    g = c.crossing.value("g")
    if k > 0 and k + 1 == len(result.crossings):
        upper, lower = corrected_second_crossing(cavity, spin, g)
    elif k == 0 and len(result.crossings) > 1:
        upper, lower = corrected_first_crossing(cavity, spin, g)
    else:
        upper, lower = polariton_frequencies(cavity, spin, g)
    return np.asarray(upper), np.asarray(lower)


def q_curves(c: CrossingAnalysis, B: FloatArray, kappa: float, gamma_e: float):
    """(dispersive, eigenmode) Q(B) of the fitted dip"""
    assert c.q_dip is not None
    q = c.q_dip
    k = q.value("kappa") if "kappa" in q.names else kappa
    delta = q.value("omega") - _gamma(c, gamma_e) * B
    args = (c.crossing.value("g"), q.value("Gamma_d"), k, c.crossing.value("omega_c"))
    return np.asarray(dispersive_q(delta, *args)), np.asarray(eigenmode_q(delta, *args))


def collect_series(result: AnalysisResult, gamma_e: float = 28e9) -> list[Series]:
    trace = result.trace
    series = [
        Series(
            file="branch_points.csv",
            figure="branches",
            legend="peak frequencies",
            columns=("B_T", "f0_Hz", "rank"),
            data=np.column_stack(
                [
                    trace.column("B", rank=None),
                    trace.column("f0", rank=None),
                    trace.column("rank", rank=None),
                ]
            ).reshape(-1, 3),
        ),
        Series(
            file="q_points.csv",
            figure="q",
            legend="extracted Q",
            columns=("B_T", "Q"),
            data=np.column_stack([trace.column("B"), trace.column("Q")]).reshape(-1, 2),
        ),
    ]
    for k, c in enumerate(result.crossings):
        window = c.plan.window
        name = slugify(window.label or f"crossing_{k + 1}")
        B = np.linspace(window.B_lo, window.B_hi, CURVE_POINTS)
        upper, lower = branch_curves(result, k, B, gamma_e)
        series.append(
            Series(
                file=f"{name}_branches.csv",
                figure="branches",
                legend=f"{window.label or f'crossing {k + 1}'} fitted branches",
                columns=("B_T", "upper_Hz", "lower_Hz"),
                data=np.column_stack([B, upper, lower]),
            )
        )
        if c.q_dip is not None:
            dispersive, eigenmode = q_curves(c, B, result.kappa, gamma_e)
            series.append(
                Series(
                    file=f"{name}_q_model.csv",
                    figure="q",
                    legend=f"{window.label or f'crossing {k + 1}'} Q model",
                    columns=("B_T", "Q_dispersive", "Q_eigenmode"),
                    data=np.column_stack([B, dispersive, eigenmode]),
                )
            )
    return series


def _render_svg(
    series: list[Series], sweep: FieldSweep | None, out_dir: Path
) -> list[Path]:
    try:
        import matplotlib

        matplotlib.use("svg")
        import matplotlib.pyplot as plt
    except ImportError:
        logger.warning(
            "matplotlib is not installed, skipping SVG output (needs spinres[plot])"
        )
        return []
    # fixed hash salt keeps the SVG ids identical between runs
    matplotlib.rcParams["svg.hashsalt"] = "spinres"
    matplotlib.rcParams["svg.fonttype"] = "none"

    written: list[Path] = []
    for figure, ylabel in (("branches", "f (GHz)"), ("q", "Q")):
        fig, ax = plt.subplots(figsize=(6, 4))
        if figure == "branches" and sweep is not None:
            ax.pcolormesh(
                sweep.B_axis,
                sweep.f_axis / 1e9,
                sweep.amplitude.T,
                shading="auto",
                cmap="viridis",
            )
        for s in (s for s in series if s.figure == figure):
            x = s.data[:, 0]
            scale = 1e9 if figure == "branches" else 1.0
            if s.file.endswith("_points.csv"):
                ax.plot(x, s.data[:, 1] / scale, ".", ms=2, label=s.legend)
            else:
                for j in range(1, s.data.shape[1]):
                    label = f"{s.legend} {s.columns[j]}"
                    ax.plot(x, s.data[:, j] / scale, "-", lw=1, label=label)
        ax.set_xlabel("B (T)")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=6)
        path = out_dir / f"{figure}.svg"
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written


def write_plot_data(
    result: AnalysisResult,
    out_dir: Path,
    sweep: FieldSweep | None = None,
    svg: bool = False,
    gamma_e: float = 28e9,
) -> list[Path]:
    """Write every series and manifest.json under out_dir; returns the written paths"""
    out_dir.mkdir(parents=True, exist_ok=True)
    series = collect_series(result, gamma_e)
    written: list[Path] = []
    for s in series:
        path = out_dir / s.file
        atomic_write_text(path, s.to_csv())
        written.append(path)
    manifest = {
        "series": [
            {
                "file": s.file,
                "figure": s.figure,
                "legend": s.legend,
                "columns": list(s.columns),
            }
            for s in series
        ]
    }
    manifest_path = out_dir / "manifest.json"
    atomic_write_text(
        manifest_path, json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    )
    written.append(manifest_path)
    if svg:
        written += _render_svg(series, sweep, out_dir)
    return written
