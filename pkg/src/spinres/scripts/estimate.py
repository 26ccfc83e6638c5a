"""
Closed-form estimators: spin numbers, optical pump rate, spin temperature,
single-spin coupling and activation energy.
"""

import json
import math
from typing import Annotated

import typer
from rich import print as rich_print

from spinres.fit.thermometry import lowest_pair_difference, resolve_population_ladder
from spinres.spinphys import (
    activation_energy_mev,
    effective_spin_temperature,
    ensemble_spin_count,
    optical_pump_rate,
    pump_relaxation_ratio,
    single_spin_coupling,
    thermal_coupling_ratio,
    vacuum_field_amplitude,
)
from spinres.utils import is_prod

app = typer.Typer(
    context_settings={"help_option_names": ["-h", "--help"]},
    pretty_exceptions_enable=not is_prod(),
    pretty_exceptions_show_locals=not is_prod(),
    no_args_is_help=True,
    help="""
    Closed-form estimates from fitted couplings. Frequencies are ordinary
    frequencies in Hz unless --mhz is given.
    """,
)

type Quantity = tuple[float, str]

# full zero-field splitting of the V2 ladder, see DESIGN.md
DEFAULT_LADDER_D = 70e6

MhzFlag = Annotated[
    bool, typer.Option("--mhz", help="Read frequency flags in MHz instead of Hz")
]
JsonFlag = Annotated[bool, typer.Option("--json", help="Print in JSON format")]


def positive(value: float | None) -> float | None:
    if value is not None and not (math.isfinite(value) and value > 0):
        raise typer.BadParameter(f"{value} is not a positive number")
    return value


def _emit(
    title: str,
    formula: str,
    inputs: dict[str, Quantity],
    results: dict[str, Quantity],
    print_json: bool,
) -> None:
    if print_json:
        document = {
            "estimate": title,
            "formula": formula,
            "inputs": {k: v for k, (v, _) in inputs.items()},
            "results": {k: v for k, (v, _) in results.items()},
        }
        print(json.dumps(document, sort_keys=True))
        return
    rich_print(f"[bold]{title}[/]  [dim]{formula}[/]")
    for key, (value, unit) in inputs.items():
        rich_print(f"  [yellow]{key}[/]: {value:.6g} {unit}")
    for key, (value, unit) in results.items():
        rich_print(f"  [green]{key}[/]: [bold white]{value:.6g}[/] {unit}")


@app.command("spins", help="Number of spins behind an ensemble coupling, N = (g / g0)^2")
def spins(
    g: Annotated[
        float, typer.Option("--g", help="Ensemble coupling", callback=positive)
    ],
    omega_c: Annotated[
        float, typer.Option("--omega-c", help="Cavity frequency", callback=positive)
    ],
    volume: Annotated[
        float, typer.Option("--volume", help="Mode volume in m^3", callback=positive)
    ],
    element: Annotated[
        float, typer.Option("--element", help="Transition matrix element |<i|Sx|f>|")
    ] = math.sqrt(3) / 2,
    mhz: MhzFlag = False,
    print_json: JsonFlag = False,
):
    scale = 1e6 if mhz else 1.0
    g0 = single_spin_coupling(omega_c * scale, volume, element)
    _emit(
        "spin count",
        "N = (g / g0)^2, g0 = ge muB B0 |<i|Sx|f>| / h",
        {
            "g": (g * scale, "Hz"),
            "omega_c": (omega_c * scale, "Hz"),
            "V": (volume, "m^3"),
        },
        {
            "B0": (vacuum_field_amplitude(omega_c * scale, volume), "T"),
            "g0": (g0, "Hz"),
            "N": (ensemble_spin_count(g * scale, g0), ""),
        },
        print_json,
    )


@app.command("coupling", help="Vacuum field and single-spin coupling of a mode")
def coupling(
    omega_c: Annotated[
        float, typer.Option("--omega-c", help="Cavity frequency", callback=positive)
    ],
    volume: Annotated[
        float, typer.Option("--volume", help="Mode volume in m^3", callback=positive)
    ],
    element: Annotated[
        float, typer.Option("--element", help="Transition matrix element |<i|Sx|f>|")
    ] = math.sqrt(3) / 2,
    mhz: MhzFlag = False,
    print_json: JsonFlag = False,
):
    omega = omega_c * (1e6 if mhz else 1.0)
    _emit(
        "single-spin coupling",
        "B0 = sqrt(mu0 hbar w / 2V), g0 = ge muB B0 |<i|Sx|f>| / h",
        {"omega_c": (omega, "Hz"), "V": (volume, "m^3"), "element": (element, "")},
        {
            "B0": (vacuum_field_amplitude(omega, volume), "T"),
            "g0": (single_spin_coupling(omega, volume, element), "Hz"),
        },
        print_json,
    )


@app.command("pump", help="Optical pump rate per spin and its ratio to spin relaxation")
def pump(
    sigma: Annotated[
        float,
        typer.Option(
            "--sigma", help="Absorption cross-section in m^2", callback=positive
        ),
    ],
    power: Annotated[
        float, typer.Option("--power", help="Optical power in W", callback=positive)
    ],
    wavelength: Annotated[
        float, typer.Option("--wavelength", help="Wavelength in m", callback=positive)
    ],
    area: Annotated[
        float, typer.Option("--area", help="Illuminated area in m^2", callback=positive)
    ],
    relaxation: Annotated[
        float,
        typer.Option(
            "--relaxation", help="Spin relaxation rate in Hz", callback=positive
        ),
    ] = 0.11,
    print_json: JsonFlag = False,
):
    rate = optical_pump_rate(sigma, power, wavelength, area)
    _emit(
        "optical pump rate",
        "Lambda = sigma P lambda / (h c A)",
        {
            "sigma": (sigma, "m^2"),
            "P": (power, "W"),
            "lambda": (wavelength, "m"),
            "A": (area, "m^2"),
            "relaxation": (relaxation, "Hz"),
        },
        {
            "Lambda": (rate, "Hz"),
            "relaxation/Lambda": (pump_relaxation_ratio(relaxation, rate), ""),
        },
        print_json,
    )


@app.command(
    "temperature", help="Spin temperature from a dark/illuminated coupling ratio"
)
def temperature(
    ratio: Annotated[float, typer.Option("--ratio", help="g(T) / g(10 mK)")],
    omega_c: Annotated[
        float, typer.Option("--omega-c", help="Cavity frequency", callback=positive)
    ],
    d: Annotated[
        float | None,
        typer.Option(
            "--D",
            "--d",
            help="Ladder spacing D of the four-level model "
            + f"[default: {DEFAULT_LADDER_D:g} Hz]",
        ),
    ] = None,
    mhz: MhzFlag = False,
    print_json: JsonFlag = False,
):
    scale = 1e6 if mhz else 1.0
    omega = omega_c * scale
    d = DEFAULT_LADDER_D if d is None else d * scale
    T = effective_spin_temperature(ratio, omega, d)
    _emit(
        "spin temperature",
        "ratio^2 = (1 - x) / (1 + x + x y + x y^2), x = exp(-h wc / kB T), "
        + "y = exp(-2 h D / kB T)",
        {"ratio": (ratio, ""), "omega_c": (omega, "Hz"), "D": (d, "Hz")},
        {
            "T": (T, "K"),
            "ratio(T)": (thermal_coupling_ratio(T, omega, d), ""),
            "Delta N (lowest pair)": (lowest_pair_difference(T, omega, d), ""),
        },
        print_json,
    )


@app.command("ladder", help="The (D, T) that reproduces four ladder populations")
def ladder(
    populations: Annotated[
        tuple[float, float, float, float],
        typer.Option("--populations", help="Four populations, lowest level first"),
    ],
    omega_c: Annotated[
        float, typer.Option("--omega-c", help="Cavity frequency", callback=positive)
    ],
    mhz: MhzFlag = False,
    print_json: JsonFlag = False,
):
    omega = omega_c * (1e6 if mhz else 1.0)
    fit = resolve_population_ladder(populations, omega)
    _emit(
        "population ladder",
        "p_i ~ exp(-h E_i / kB T), E = {0, wc, wc + 2D, wc + 4D}",
        {f"p{i}": (p, "") for i, p in enumerate(populations)}
        | {"omega_c": (omega, "Hz")},
        {
            "D": (fit.value("D"), "Hz"),
            "T": (fit.value("T"), "K"),
            "residual": (fit.residual_norm, ""),
        },
        print_json,
    )


@app.command("activation", help="Activation energy from an Arrhenius slope")
def activation(
    slope: Annotated[
        float, typer.Option("--slope", help="Slope of ln(ratio) against 1/T, in K")
    ],
    print_json: JsonFlag = False,
):
    _emit(
        "activation energy",
        "E = |slope| kB",
        {"slope": (slope, "K")},
        {"E": (activation_energy_mev(slope), "meV")},
        print_json,
    )
