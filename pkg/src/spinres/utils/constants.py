import enum
import os
from importlib.resources import files
from pathlib import Path

DEFAULT_OUTPUT_DIR = Path(os.getenv("SPINRES_OUTPUT_DIR", "spinres-out"))
BUNDLED_SCENARIO_DIR = Path(str(files("spinres") / "scenarios"))

SWEEP_MAGIC = "# spinres-sweep"
SWEEP_SCHEMA_VERSION = 1
TRACE_MAGIC = "# spinres-peaks"
TRACE_SCHEMA_VERSION = 1
REPORT_SCHEMA = "spinres-report/1"

# gyromagnetic ratio used by every crossing fit unless freed, Hz/T
DEFAULT_GAMMA_E = 28e9
# significant digits of every float written to a report
REPORT_DIGITS = 9


class ExitCode(enum.IntEnum):
    OK = 0
    USAGE = 1
    INPUT = 2
    NOT_CONVERGED = 3
    INTERNAL = 4
