"""
Sweep files, a self-describing text format:

    # spinres-sweep v1
    # n_B = 131
    # n_f = 2001
    # columns = re_im
    # meta.noise_sigma = 0.01
    0.448,12578450000.0,0.0123,-0.0045
    ...

Header lines start with '#', keys are written sorted. Data rows are B [T], f [Hz]
and two S21 columns, B-major. 'columns = db_deg' files hold 20 log10|S21| and
the phase in degrees instead of Re/Im and are converted on load; files are always
written as re_im. Floats are written with repr() so a save/load round trip is exact.
"""

import logging
import math
from collections.abc import Mapping
from pathlib import Path
from typing import Literal

import numpy as np

from spinres.errors import DomainError, SweepFormatError
from spinres.models.sweep import FieldSweep, MetaValue
from spinres.utils import atomic_write_text
from spinres.utils.constants import SWEEP_MAGIC, SWEEP_SCHEMA_VERSION

logger = logging.getLogger(__name__)

type Columns = Literal["re_im", "db_deg"]
_COLUMNS: tuple[Columns, ...] = ("re_im", "db_deg")
_META_PREFIX = "meta."


def parse_meta_value(text: str) -> MetaValue:
    """int, then float, then the string itself"""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def format_meta_value(key: str, value: MetaValue) -> str:
    if isinstance(value, bool):
        raise DomainError(f"metadata '{key}' must be str, int or float, not bool")
    if isinstance(value, float):
        return repr(value)
    text = str(value)
    if "\n" in text or text != text.strip():
        raise DomainError(f"metadata '{key}' must be a single line without edge spaces")
    return text


def _header(path: Path, lines: list[str]) -> tuple[dict[str, str], int]:
    """Key-value pairs of the header and the index of the first data line"""
    if not lines or lines[0].strip() != f"{SWEEP_MAGIC} v{SWEEP_SCHEMA_VERSION}":
        found = lines[0].strip() if lines else "an empty file"
        raise SweepFormatError(
            path, 1, f"expected '{SWEEP_MAGIC} v{SWEEP_SCHEMA_VERSION}', found {found!r}"
        )
    header: dict[str, str] = {}
    index = 1
    while index < len(lines) and lines[index].startswith("#"):
        body = lines[index][1:].strip()
        if body:
            key, sep, value = body.partition("=")
            if not sep:
                raise SweepFormatError(
                    path, index + 1, f"header line without '=': {body!r}"
                )
            key = key.strip()
            if key in header:
                raise SweepFormatError(path, index + 1, f"duplicate header key '{key}'")
            header[key] = value.strip()
        index += 1
    return header, index


def _positive_int(path: Path, header: Mapping[str, str], key: str) -> int:
    if key not in header:
        raise SweepFormatError(path, None, f"header is missing '{key}'")
    try:
        value = int(header[key])
    except ValueError as e:
        raise SweepFormatError(path, None, f"'{key}' must be an integer") from e
    if value < 1:
        raise SweepFormatError(path, None, f"'{key}' must be >= 1, got {value}")
    return value


def load_sweep(path: Path) -> FieldSweep:
    """
    :raises FileNotFoundError: path does not exist
    :raises SweepFormatError: malformed header, row count, axes or values, with
        the offending line
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    header, first = _header(path, lines)
    n_B = _positive_int(path, header, "n_B")
    n_f = _positive_int(path, header, "n_f")
    columns = header.get("columns", "re_im")
    if columns not in _COLUMNS:
        raise SweepFormatError(path, None, f"unsupported columns '{columns}'")
    unknown = [k for k in header if k not in ("n_B", "n_f", "columns")]
    unknown = [k for k in unknown if not k.startswith(_META_PREFIX)]
    if unknown:
        raise SweepFormatError(path, None, f"unknown header keys {unknown}")
    meta = {
        k.removeprefix(_META_PREFIX): parse_meta_value(v)
        for k, v in header.items()
        if k.startswith(_META_PREFIX)
    }

    rows = [
        (i + 1, line)
        for i, line in enumerate(lines[first:], start=first)
        if line.strip()
    ]
    expected = n_B * n_f
    if len(rows) != expected:
        raise SweepFormatError(
            path,
            len(lines),
            f"expected n_B x n_f = {expected} data rows, found {len(rows)}",
        )
    data = np.empty((expected, 4))
    for k, (lineno, line) in enumerate(rows):
        fields = line.split(",")
        if len(fields) != 4:
            raise SweepFormatError(
                path, lineno, f"expected 4 fields, found {len(fields)}"
            )
        try:
            values = [float(x) for x in fields]
        except ValueError as e:
            raise SweepFormatError(path, lineno, f"not a number: {e}") from e
        if not all(math.isfinite(v) for v in values):
            raise SweepFormatError(path, lineno, "non-finite value")
        data[k] = values

    B_axis = data[::n_f, 0]
    f_axis = data[:n_f, 1]
    B_expected = np.repeat(B_axis, n_f)
    f_expected = np.tile(f_axis, n_B)
    mismatch = np.flatnonzero((data[:, 0] != B_expected) | (data[:, 1] != f_expected))
    if mismatch.size:
        raise SweepFormatError(
            path, rows[mismatch[0]][0], "B and f do not follow the (n_B, n_f) grid"
        )

    if columns == "re_im":
        s21 = data[:, 2] + 1j * data[:, 3]
    else:
        s21 = 10 ** (data[:, 2] / 20) * np.exp(1j * np.deg2rad(data[:, 3]))
    try:
        sweep = FieldSweep(
            B_axis=B_axis, f_axis=f_axis, s21=s21.reshape(n_B, n_f), meta=meta
        )
    except DomainError as e:
        raise SweepFormatError(path, None, str(e)) from e
    logger.debug(f"loaded {n_B} x {n_f} sweep from {path}")
    return sweep


def dump_sweep(sweep: FieldSweep) -> str:
    out = [
        f"{SWEEP_MAGIC} v{SWEEP_SCHEMA_VERSION}",
        f"# n_B = {sweep.B_axis.size}",
        f"# n_f = {sweep.f_axis.size}",
        "# columns = re_im",
    ]
    for key in sorted(sweep.meta):
        if "=" in key or not key.strip():
            raise DomainError(f"metadata key {key!r} cannot be written")
        out.append(f"# {_META_PREFIX}{key} = {format_meta_value(key, sweep.meta[key])}")
    f_reprs = [repr(float(f)) for f in sweep.f_axis]
    for i, B in enumerate(sweep.B_axis):
        b = repr(float(B))
        for f, z in zip(f_reprs, sweep.s21[i]):
            out.append(f"{b},{f},{float(z.real)!r},{float(z.imag)!r}")
    return "\n".join(out) + "\n"


def save_sweep(sweep: FieldSweep, path: Path) -> None:
    """Atomic write: the file at path is either the old or the complete new sweep"""
    atomic_write_text(Path(path), dump_sweep(sweep))
