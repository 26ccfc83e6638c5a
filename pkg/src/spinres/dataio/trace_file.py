"""
Peak traces as CSV with a version line:

    # spinres-peaks v1
    B,rank,flagged,f0,delta_f,Q,S_max,A1,A2,A3,f_ref,sigma_f0,sigma_delta_f,note
"""

import csv
import io
import math
from pathlib import Path

from spinres.errors import DomainError, SweepFormatError
from spinres.models.fitting import PeakRecord, PeakTrace
from spinres.utils import atomic_write_text
from spinres.utils.constants import TRACE_MAGIC, TRACE_SCHEMA_VERSION

FLOAT_FIELDS = (
    "f0",
    "delta_f",
    "Q",
    "S_max",
    "A1",
    "A2",
    "A3",
    "f_ref",
    "sigma_f0",
    "sigma_delta_f",
)
COLUMNS = ("B", "rank", "flagged", *FLOAT_FIELDS, "note")


def dump_trace(trace: PeakTrace) -> str:
    buffer = io.StringIO()
    buffer.write(f"{TRACE_MAGIC} v{TRACE_SCHEMA_VERSION}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in trace.records:
        writer.writerow(
            [repr(r.B), r.rank, int(r.flagged)]
            + [repr(float(getattr(r, name))) for name in FLOAT_FIELDS]
            + [r.note]
        )
    return buffer.getvalue()


def save_trace(trace: PeakTrace, path: Path) -> None:
    atomic_write_text(Path(path), dump_trace(trace))


def load_trace(path: Path) -> PeakTrace:
    """
    :raises SweepFormatError: wrong version line, columns or values
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    magic = f"{TRACE_MAGIC} v{TRACE_SCHEMA_VERSION}"
    if not lines or lines[0].strip() != magic:
        raise SweepFormatError(path, 1, f"expected '{magic}'")
    reader = csv.reader(lines[1:])
    header = next(reader, None)
    if header is None or tuple(header) != COLUMNS:
        raise SweepFormatError(path, 2, f"expected the columns {','.join(COLUMNS)}")

    records: list[PeakRecord] = []
    for lineno, row in enumerate(reader, start=3):
        if not row:
            continue
        if len(row) != len(COLUMNS):
            raise SweepFormatError(
                path, lineno, f"expected {len(COLUMNS)} fields, found {len(row)}"
            )
        try:
            values = dict(zip(COLUMNS, row, strict=True))
            B = float(values["B"])
            if not math.isfinite(B):
                raise ValueError("B must be finite")
            records.append(
                PeakRecord(
                    B=B,
                    rank=int(values["rank"]),
                    flagged=values["flagged"] == "1",
                    note=values["note"],
                    **{name: float(values[name]) for name in FLOAT_FIELDS},
                )
            )
        except (ValueError, DomainError) as e:
            raise SweepFormatError(path, lineno, str(e)) from e
    return PeakTrace(records)
