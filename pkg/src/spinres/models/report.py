from pydantic import BaseModel, ConfigDict, Field, JsonValue

from spinres.utils.constants import REPORT_SCHEMA


class _ReportModel(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ParameterEntry(_ReportModel):
    """A fitted value with its 1 sigma; None where the value is not finite"""

    value: float | None
    sigma: float | None = None
    unit: str = ""


class FitEntry(_ReportModel):
    name: str
    kind: str  # crossing, q_dip, ...
    parameters: dict[str, ParameterEntry]
    converged: bool
    n_iterations: int
    n_points: int
    residual_norm: float | None
    message: str = ""
    at_bounds: list[str] = []
    diagnostics: dict[str, JsonValue] = {}


class Provenance(_ReportModel):
    code_version: str
    config_hash: str | None = None
    scenario: str | None = None
    seed: int | None = None
    source: str | None = None
    constants: str = "CODATA 2018, ge = 2.002"


class Report(_ReportModel):
    schema_name: str = Field(default=REPORT_SCHEMA, alias="schema")
    provenance: Provenance
    converged: bool = True
    # flat g1, D1, Gamma_d1, ... view of the fits
    summary: dict[str, ParameterEntry] = {}
    fits: list[FitEntry] = []
    notes: list[str] = []
