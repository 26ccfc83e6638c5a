"""
Synthetic field sweeps: cavity transmission over a (B, f) grid with seeded noise.

Noise streams come from numpy's SeedSequence(seed).spawn(n_B), one PCG64
generator per field slice, so the output does not depend on how many workers
evaluate the slices or in which order.
"""

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from spinres.cavity import transmission
from spinres.models.cavity_mode import SpinMode
from spinres.models.species import SpinSpecies
from spinres.models.sweep import ComplexArray, FieldSweep, SweepConfig
from spinres.spinphys import (
    spin_dispersion,
    thermal_coupling_ratio,
    transition_frequency,
    two_level_coupling_ratio,
)

logger = logging.getLogger(__name__)


def _thermal_factor(config: SweepConfig, species: SpinSpecies) -> float:
    if config.temperature is None:
        return 1.0
    if species.S == 0.5:
        return two_level_coupling_ratio(config.temperature, config.cavity.omega_c)
    # the ladder step between the coupled pair and the next pair up is the full
    # zero-field splitting 2|D|
    return thermal_coupling_ratio(
        config.temperature, config.cavity.omega_c, 2 * abs(species.D)
    )


def effective_couplings(config: SweepConfig) -> list[float]:
    """g of every species after the temperature and override factors, in Hz"""
    couplings: list[float] = []
    for species in config.species:
        g = species.g_ens * _thermal_factor(config, species)
        g *= config.coupling_overrides.get(species.label, 1.0)
        couplings.append(g)
    return couplings


def spin_frequency(config: SweepConfig, species: SpinSpecies, B: float) -> float:
    """Transition frequency of a species at field B, as the config selects it"""
    if species.label in config.transitions:
        m_from, m_to = config.transitions[species.label]
        return float(transition_frequency(species, B, m_from, m_to))
    return float(spin_dispersion(B, species.gamma_e, species.D))


def _slice(
    config: SweepConfig, couplings: list[float], B: float, seed: np.random.SeedSequence
) -> ComplexArray:
    modes = [
        SpinMode(omega_s, g, species.Gamma_d)
        for species, g in zip(config.species, couplings, strict=True)
        # negative transition frequencies do not exist at this field
        if (omega_s := spin_frequency(config, species, B)) > 0
    ]
    s21 = transmission(config.f_grid, config.cavity, modes)
    if config.noise_sigma > 0:
        rng = np.random.Generator(np.random.PCG64(seed))
        n = config.f_grid.size
        # complex Gaussian with E|eps|^2 = sigma^2
        eps = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        s21 = s21 * (1 + config.noise_sigma / np.sqrt(2) * eps)
    return s21


def simulate_sweep(config: SweepConfig, workers: int = 1) -> FieldSweep:
    couplings = effective_couplings(config)
    seeds = np.random.SeedSequence(config.seed).spawn(config.B_grid.size)
    logger.debug(
        f"Simulating {config.B_grid.size} x {config.f_grid.size} points, "
        + f"effective couplings {couplings} Hz"
    )
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(
            pool.map(
                lambda args: _slice(config, couplings, *args),
                zip((float(b) for b in config.B_grid), seeds),
            )
        )

    meta = {
        **config.meta,
        "seed": config.seed,
        "noise_sigma": config.noise_sigma,
    }
    if config.temperature is not None:
        meta["temperature_k"] = config.temperature
    return FieldSweep(
        B_axis=config.B_grid, f_axis=config.f_grid, s21=np.vstack(rows), meta=meta
    )
