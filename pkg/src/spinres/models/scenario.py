"""
Scenario documents: a validated description of one simulated or measured sweep and
of how it is analysed. Loaded from YAML by spinres.dataio.scenario_loader.
"""

from typing import Literal, Self

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    PositiveFloat,
    PositiveInt,
    model_validator,
)

from spinres.models.cavity_mode import CavityMode
from spinres.models.fitting import CrossingWindow
from spinres.models.species import SpinSpecies
from spinres.models.sweep import SweepConfig
from spinres.utils import sha256_text
from spinres.utils.constants import DEFAULT_GAMMA_E

type QModel = Literal["eigenmode", "dispersive"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CavitySection(_Section):
    omega_c: PositiveFloat  # Hz
    kappa: PositiveFloat  # Hz, full width
    kappa_in: PositiveFloat | None = None
    kappa_out: PositiveFloat | None = None

    def to_mode(self) -> CavityMode:
        return CavityMode(
            omega_c=self.omega_c,
            kappa=self.kappa,
            kappa_in=self.kappa_in,
            kappa_out=self.kappa_out,
        )


class GridSection(_Section):
    """Field axis B_start..B_stop, frequency axis centred on f_center or omega_c"""

    B_start: NonNegativeFloat
    B_stop: NonNegativeFloat
    n_B: int = Field(default=131, ge=2)
    f_span: PositiveFloat = 30e6
    n_f: int = Field(default=2001, ge=2)
    f_center: PositiveFloat | None = None

    @model_validator(mode="after")
    def check_order(self) -> Self:
        if not self.B_stop > self.B_start:
            raise ValueError(
                f"B_stop ({self.B_stop}) must exceed B_start ({self.B_start})"
            )
        return self

    def axes(self, omega_c: float) -> tuple[np.ndarray, np.ndarray]:
        center = self.f_center if self.f_center is not None else omega_c
        return (
            np.linspace(self.B_start, self.B_stop, self.n_B),
            np.linspace(center - self.f_span / 2, center + self.f_span / 2, self.n_f),
        )


class SpeciesSection(_Section):
    label: str = Field(min_length=1)
    S: PositiveFloat = 1.5
    D: float = 0.0
    gamma_e: PositiveFloat = DEFAULT_GAMMA_E
    Gamma_d: PositiveFloat
    g_ens: NonNegativeFloat = 0.0
    # (m_from, m_to); unset selects the gamma_e B - 2D line
    transition: tuple[float, float] | None = None

    def to_species(self) -> SpinSpecies:
        return SpinSpecies(
            label=self.label,
            S=self.S,
            D=self.D,
            gamma_e=self.gamma_e,
            Gamma_d=self.Gamma_d,
            g_ens=self.g_ens,
        )


class WindowSection(_Section):
    B_lo: float
    B_hi: float
    label: str = ""
    g_init: PositiveFloat | None = None
    D_init: float | None = None
    omega_c_init: PositiveFloat | None = None
    include_upper: bool = True
    include_lower: bool = True
    q_mask_MHz: NonNegativeFloat = 10.0
    free_kappa: bool = False
    fit_q: bool = True

    @model_validator(mode="after")
    def check_range(self) -> Self:
        if not self.B_hi > self.B_lo:
            raise ValueError(f"B_hi ({self.B_hi}) must exceed B_lo ({self.B_lo})")
        return self

    def to_window(self) -> CrossingWindow:
        return CrossingWindow(
            B_lo=self.B_lo,
            B_hi=self.B_hi,
            label=self.label,
            g_init=self.g_init,
            D_init=self.D_init,
            omega_c_init=self.omega_c_init,
            include_upper=self.include_upper,
            include_lower=self.include_lower,
        )


class DetectionSection(_Section):
    """Automatic crossing windows, used when analysis.windows is not given"""

    jump_factor: PositiveFloat = 1.0
    merge_mT: PositiveFloat = 0.5
    half_width_mT: PositiveFloat = 2.0
    # per detected window in B order; missing entries take the last value
    q_mask_MHz: list[NonNegativeFloat] = [10.0]
    free_kappa: list[bool] = [False]


class AnalysisSection(_Section):
    windows: list[WindowSection] | None = None
    detection: DetectionSection = DetectionSection()
    q_model: QModel = "eigenmode"
    refine_linewidths: bool = True
    gamma_e: PositiveFloat = DEFAULT_GAMMA_E
    free_gamma_e: bool = False
    # bare cavity linewidth for the Q fits, Hz; cavity.kappa when unset
    kappa: PositiveFloat | None = None
    secondary_peaks: bool = False
    prominence_threshold: PositiveFloat = 10.0
    window_fwhm: PositiveFloat = 3.0
    workers: PositiveInt = 1
    max_coupled_rounds: PositiveInt = 50
    max_refine_rounds: PositiveInt = 20
    # mode volume, m^3; enables spin counts N = (g / g0)^2 in the report
    mode_volume: PositiveFloat | None = None


class ScenarioConfig(_Section):
    name: str = Field(min_length=1)
    description: str = ""
    seed: int = Field(default=0, ge=0)
    noise_sigma: NonNegativeFloat = 0.01
    cavity: CavitySection
    grid: GridSection
    species: list[SpeciesSection] = []
    temperature_k: PositiveFloat | None = None
    coupling_overrides: dict[str, NonNegativeFloat] = {}
    meta: dict[str, str | int | float] = {}
    analysis: AnalysisSection = AnalysisSection()

    @model_validator(mode="after")
    def check_labels(self) -> Self:
        labels = [s.label for s in self.species]
        if len(set(labels)) != len(labels):
            raise ValueError(f"species labels must be unique, got {labels}")
        for label in self.coupling_overrides:
            if label not in labels:
                raise ValueError(f"coupling_overrides names unknown species '{label}'")
        return self

    @property
    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form"""
        return sha256_text(self.model_dump_json())

    def to_sweep_config(self) -> SweepConfig:
        B_grid, f_grid = self.grid.axes(self.cavity.omega_c)
        return SweepConfig(
            B_grid=B_grid,
            f_grid=f_grid,
            cavity=self.cavity.to_mode(),
            species=tuple(s.to_species() for s in self.species),
            temperature=self.temperature_k,
            coupling_overrides=dict(self.coupling_overrides),
            transitions={
                s.label: s.transition for s in self.species if s.transition is not None
            },
            noise_sigma=self.noise_sigma,
            seed=self.seed,
            meta={"scenario": self.name, **self.meta},
        )
