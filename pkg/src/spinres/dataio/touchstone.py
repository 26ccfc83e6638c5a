"""
Touchstone v1 two-port import, one file per field value.

Only the S21 entry is kept. The option line '# <unit> S <RI|MA|DB> R <ohms>'
defaults to '# GHZ S MA R 50'; the reference resistance does not change
S-parameters and is ignored.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
import numpy.typing as npt

from spinres.errors import DomainError, SweepFormatError
from spinres.models.sweep import ComplexArray, FieldSweep
from spinres.utils.validations import is_strictly_increasing

logger = logging.getLogger(__name__)

type FloatArray = npt.NDArray[np.float64]
type DataForm = Literal["RI", "MA", "DB"]

_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
_FORMS: tuple[DataForm, ...] = ("RI", "MA", "DB")
# frequency plus four complex entries N11 N21 N12 N22
_TWO_PORT_TOKENS = 9


@dataclass(slots=True, frozen=True, kw_only=True)
class OptionLine:
    unit: float = 1e9
    form: DataForm = "MA"
    resistance: float = 50.0


def parse_option_line(path: Path, lineno: int, text: str) -> OptionLine:
    tokens = text.lstrip("#").upper().split()
    unit, form, resistance = 1e9, "MA", 50.0
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if token in _UNITS:
            unit = _UNITS[token]
        elif token in _FORMS:
            form = token
        elif token == "S":
            pass
        elif token in ("Y", "Z", "H", "G"):
            raise SweepFormatError(
                path, lineno, f"only S-parameters are supported, found '{token}'"
            )
        elif token == "R":
            i += 1
            try:
                resistance = float(tokens[i])
            except (IndexError, ValueError) as e:
                raise SweepFormatError(path, lineno, "'R' needs a resistance") from e
        else:
            raise SweepFormatError(path, lineno, f"unsupported option '{token}'")
        i += 1
    return OptionLine(unit=unit, form=form, resistance=resistance)  # pyright: ignore[reportArgumentType]


def _to_complex(a: FloatArray, b: FloatArray, form: DataForm) -> ComplexArray:
    if form == "RI":
        return a + 1j * b
    magnitude = a if form == "MA" else 10 ** (a / 20)
    return magnitude * np.exp(1j * np.deg2rad(b))


def read_touchstone_s21(path: Path) -> tuple[FloatArray, ComplexArray]:
    """(frequencies in Hz, S21) of one two-port file

    :raises SweepFormatError: malformed option line, token count or frequencies
    """
    path = Path(path)
    option: OptionLine | None = None
    tokens: list[float] = []
    last_line = 0
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            # later option lines are ignored, as the format prescribes
            if option is None:
                option = parse_option_line(path, lineno, line)
            continue
        if line.startswith("["):
            raise SweepFormatError(
                path, lineno, "Touchstone v2 keywords are not supported"
            )
        for token in line.split():
            try:
                tokens.append(float(token))
            except ValueError as e:
                raise SweepFormatError(path, lineno, f"not a number: {token!r}") from e
        last_line = lineno
    option = option or OptionLine()

    if not tokens or len(tokens) % _TWO_PORT_TOKENS:
        raise SweepFormatError(
            path,
            last_line or None,
            f"{len(tokens)} numbers do not form two-port records of "
            + f"{_TWO_PORT_TOKENS}",
        )
    table = np.array(tokens).reshape(-1, _TWO_PORT_TOKENS)
    freqs = table[:, 0] * option.unit
    if not is_strictly_increasing(freqs):
        raise SweepFormatError(path, None, "frequencies must be strictly increasing")
    return freqs, _to_complex(table[:, 3], table[:, 4], option.form)


def import_touchstone(paths: Sequence[Path], B_values: Sequence[float]) -> FieldSweep:
    """Stack one S21 trace per field value into a sweep

    :raises DomainError: paths and B_values differ in length or B is not increasing
    :raises SweepFormatError: a file is malformed or its frequency grid differs from
        the first file's
    """
    if len(paths) != len(B_values) or not paths:
        raise DomainError(f"{len(paths)} files for {len(B_values)} field values")
    if not is_strictly_increasing(B_values):
        raise DomainError("field values must be strictly increasing")
    grid: FloatArray | None = None
    rows: list[ComplexArray] = []
    for path in paths:
        freqs, s21 = read_touchstone_s21(Path(path))
        if grid is None:
            grid = freqs
        elif not np.array_equal(grid, freqs):
            raise SweepFormatError(
                path, None, f"frequency grid differs from {Path(paths[0]).name}"
            )
        rows.append(s21)
    assert grid is not None
    logger.debug(f"imported {len(paths)} Touchstone files with {grid.size} points")
    return FieldSweep(
        B_axis=np.asarray(B_values, dtype=np.float64),
        f_axis=grid,
        s21=np.vstack(rows),
        meta={"source": "touchstone", "n_files": len(paths)},
    )
