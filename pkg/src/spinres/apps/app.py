import enum
import logging
from pathlib import Path
from typing import Annotated

import click
import typer
import yaml
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from spinres.dataio.plot_data import write_plot_data
from spinres.dataio.report_writer import (
    read_report,
    report_from_analysis,
    write_report,
)
from spinres.dataio.scenario_loader import load_scenario
from spinres.dataio.sweep_file import load_sweep, save_sweep
from spinres.dataio.trace_file import save_trace
from spinres.errors import ConvergenceError, DomainError, SweepFormatError
from spinres.fit.peaks import PeakOptions, extract_peaks
from spinres.fit.pipeline import analyze_sweep
from spinres.models.report import ParameterEntry
from spinres.models.scenario import ScenarioConfig
from spinres.models.sweep import FieldSweep
from spinres.scripts import estimate
from spinres.simulate import simulate_sweep
from spinres.utils import get_spinres_version, is_prod, slugify
from spinres.utils.constants import DEFAULT_OUTPUT_DIR, ExitCode

console = Console(stderr=True)

logging.basicConfig(
    level=logging.INFO if is_prod() else logging.DEBUG,
    format="%(message)s",
    handlers=[RichHandler(console=console, show_path=not is_prod())],
)
logger = logging.getLogger(__name__)


cli_app = typer.Typer(
    help="Simulate and fit cavity transmission of spin ensembles under a swept field",
    no_args_is_help=True,
    context_settings={"help_option_names": ["-h", "--help"]},
    pretty_exceptions_enable=not is_prod(),
    pretty_exceptions_show_locals=not is_prod(),
)
cli_app.add_typer(estimate.app, name="estimate")


class ReportFormatChoice(enum.StrEnum):
    STRUCTURED = "structured"
    TABULAR = "tabular"


INPUT_ERRORS = (
    FileNotFoundError,
    IsADirectoryError,
    SweepFormatError,
    ValidationError,
    DomainError,
    yaml.YAMLError,
)
# newer typer releases raise from their own bundled copy of click
_TYPER_CLICK_EXCEPTION = next(
    cls for cls in typer.BadParameter.__mro__ if cls.__name__ == "ClickException"
)
USAGE_ERRORS = (click.ClickException, _TYPER_CLICK_EXCEPTION)
ABORTS = (click.exceptions.Abort, typer.Abort)


def version_callback(value: bool):
    if value:
        typer.echo(f"v{get_spinres_version()}")
        raise typer.Exit()


def workers_check(value: int) -> int:
    if value < 1:
        raise typer.BadParameter(f"need at least one worker, got {value}")
    return value


@cli_app.callback()
def common(
    _ctx: typer.Context,
    _version: Annotated[
        bool | None,
        typer.Option("--version", callback=version_callback, is_eager=True),
    ] = None,
):
    pass


def _summarize_sweep(sweep: FieldSweep, path: Path) -> None:
    console.print(
        f"[green]Wrote[/] {path}: [bold]{sweep.B_axis.size}[/] field points "
        + f"({sweep.B_axis[0]:.6g} to {sweep.B_axis[-1]:.6g} T) x "
        + f"[bold]{sweep.f_axis.size}[/] frequencies "
        + f"({sweep.f_axis[0] / 1e9:.6f} to {sweep.f_axis[-1] / 1e9:.6f} GHz)"
    )


@cli_app.command("simulate", help="Simulate the field sweep a scenario describes")
def simulate(
    scenario: Annotated[
        str, typer.Argument(help="Scenario YAML file or bundled scenario name")
    ],
    out: Annotated[
        Path | None,
        typer.Option(
            "-o",
            "--out",
            help="Sweep file to write [default: $SPINRES_OUTPUT_DIR/<name>.sweep]",
            dir_okay=False,
        ),
    ] = None,
    workers: Annotated[
        int, typer.Option("-w", "--workers", help="Threads", callback=workers_check)
    ] = 1,
):
    config = load_scenario(scenario)
    sweep = simulate_sweep(config.to_sweep_config(), workers=workers)
    path = out or DEFAULT_OUTPUT_DIR / f"{slugify(config.name)}.sweep"
    save_sweep(sweep, path)
    _summarize_sweep(sweep, path)


@cli_app.command("peaks", help="Extract the resonance of every field slice of a sweep")
def peaks(
    sweep_path: Annotated[
        Path, typer.Argument(help="Sweep file", dir_okay=False)
    ],
    out: Annotated[
        Path | None,
        typer.Option("-o", "--out", help="Peak trace CSV [default: next to the sweep]"),
    ] = None,
    secondary: Annotated[
        bool, typer.Option("--secondary", help="Also report the second tallest peak")
    ] = False,
    threshold: Annotated[
        float,
        typer.Option(
            "--threshold", help="Minimum prominence in units of the noise sigma"
        ),
    ] = 10.0,
    workers: Annotated[
        int, typer.Option("-w", "--workers", help="Threads", callback=workers_check)
    ] = 1,
):
    sweep = load_sweep(sweep_path)
    trace = extract_peaks(
        sweep,
        PeakOptions(
            secondary=secondary, prominence_threshold=threshold, workers=workers
        ),
    )
    path = out or sweep_path.with_suffix(".peaks.csv")
    save_trace(trace, path)
    console.print(
        f"[green]Wrote[/] {path}: {len(trace)} records, "
        + f"[yellow]{trace.n_flagged}[/] flagged"
    )


def _scenario_for(sweep: FieldSweep, config: str | None) -> ScenarioConfig:
    if config is not None:
        return load_scenario(config)
    name = sweep.meta.get("scenario")
    if not isinstance(name, str):
        raise typer.BadParameter(
            "the sweep names no scenario, pass one with --config", param_hint="--config"
        )
    logger.info(f"using the scenario '{name}' recorded in the sweep")
    return load_scenario(name)


@cli_app.command(
    "analyze", help="Fit crossings and Q dips of a sweep and write a report"
)
def analyze(
    sweep_path: Annotated[
        Path, typer.Argument(help="Sweep file", dir_okay=False)
    ],
    config: Annotated[
        str | None,
        typer.Option(
            "-c",
            "--config",
            help="Scenario file or bundled name "
            + "[default: the one recorded in the sweep]",
        ),
    ] = None,
    out_dir: Annotated[
        Path | None,
        typer.Option(
            "-o",
            "--out-dir",
            help="Output directory [default: $SPINRES_OUTPUT_DIR/<sweep name>]",
            file_okay=False,
        ),
    ] = None,
    report_format: Annotated[
        ReportFormatChoice,
        typer.Option("--format", help="Report format"),
    ] = ReportFormatChoice.STRUCTURED,
    svg: Annotated[
        bool, typer.Option("--svg", help="Also render SVG figures (needs matplotlib)")
    ] = False,
):
    sweep = load_sweep(sweep_path)
    scenario = _scenario_for(sweep, config)
    out = out_dir or DEFAULT_OUTPUT_DIR / slugify(sweep_path.stem)
    result = analyze_sweep(sweep, scenario)

    out.mkdir(parents=True, exist_ok=True)
    save_trace(result.trace, out / "peaks.csv")
    report = report_from_analysis(result, scenario, source=sweep_path.name)
    structured = report_format is ReportFormatChoice.STRUCTURED
    report_path = out / ("report.json" if structured else "report.csv")
    write_report(report, report_path, report_format.value)
    write_plot_data(
        result, out / "plot", sweep=sweep, svg=svg, gamma_e=scenario.analysis.gamma_e
    )
    console.print(f"[green]Wrote[/] {report_path}")
    _print_summary(report.summary)

    if not result.crossings:
        console.print(f"[red]{'; '.join(report.notes) or 'no crossings found'}")
        raise typer.Exit(ExitCode.NOT_CONVERGED)
    if not result.converged:
        console.print("[red]at least one required fit did not converge")
        raise typer.Exit(ExitCode.NOT_CONVERGED)


def _print_summary(summary: dict[str, ParameterEntry]) -> None:
    if not summary:
        return
    table = Table("parameter", "value", "1 sigma", "unit")
    for name in sorted(summary):
        entry = summary[name]
        table.add_row(
            name,
            "-" if entry.value is None else f"{entry.value:.6g}",
            "-" if entry.sigma is None else f"{entry.sigma:.2g}",
            entry.unit,
        )
    console.print(table)


@cli_app.command("report", help="Show a saved report or convert it to CSV")
def report(
    report_path: Annotated[
        Path, typer.Argument(help="Structured report", dir_okay=False)
    ],
    tabular: Annotated[
        Path | None,
        typer.Option("--tabular", help="Write the report as CSV to this path"),
    ] = None,
    print_json: Annotated[
        bool, typer.Option("--json", help="Print the report in JSON format")
    ] = False,
):
    document = read_report(report_path)
    if tabular is not None:
        write_report(document, tabular, "tabular")
        console.print(f"[green]Wrote[/] {tabular}")
        return
    if print_json:
        print(document.model_dump_json(by_alias=True))
        return
    p = document.provenance
    console.print(
        f"[bold]{p.scenario or report_path.name}[/] spinres {p.code_version}, "
        + f"seed {p.seed}, config {(p.config_hash or '-')[:12]}"
    )
    _print_summary(document.summary)
    for fit in document.fits:
        state = "[green]converged" if fit.converged else "[red]not converged"
        console.print(
            f"{fit.name} ({fit.kind}): {state}[/], {fit.n_iterations} iterations, "
            + f"{fit.n_points} points"
        )
    for note in document.notes:
        console.print(f"[dim]{note}")


def main() -> int:
    """Console entry point; maps failures to exit codes"""
    try:
        code = cli_app(standalone_mode=False, prog_name="spinres")
    except ABORTS:
        return ExitCode.USAGE
    except USAGE_ERRORS as e:
        e.show()
        return ExitCode.USAGE
    except INPUT_ERRORS as e:
        logger.error(f"{type(e).__name__}: {e}")
        return ExitCode.INPUT
    except ConvergenceError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return ExitCode.NOT_CONVERGED
    except Exception:
        logger.exception("internal error")
        return ExitCode.INTERNAL
    return code if isinstance(code, int) else ExitCode.OK


if __name__ == "__main__":
    raise SystemExit(main())
