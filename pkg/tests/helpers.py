import numpy as np

from spinres.cavity import polariton_frequencies
from spinres.models.fitting import PeakRecord, PeakTrace

OMEGA_C = 12.59345e9
KAPPA = 0.22e6
GAMMA_E = 28e9


def branch_trace(
    B: np.ndarray,
    g: float,
    D: float,
    omega_c: float = OMEGA_C,
    noise_hz: float = 0.0,
    seed: int = 0,
    both: bool = False,
) -> PeakTrace:
    """Peak trace that follows the lossless branches of one crossing

    Rank 0 is the cavity-like branch (upper below the crossing, lower above), rank
    1 the spin-like one when both is set.
    """
    rng = np.random.default_rng(seed)
    spin = GAMMA_E * B - 2 * D
    upper, lower = polariton_frequencies(omega_c, spin, g)
    cavity_like = np.where(spin < omega_c, upper, lower)
    spin_like = np.where(spin < omega_c, lower, upper)
    records: list[PeakRecord] = []
    for rank, branch in enumerate((cavity_like, spin_like) if both else (cavity_like,)):
        noisy = np.asarray(branch) + noise_hz * rng.standard_normal(B.size)
        for b, f0 in zip(B, noisy):
            records.append(
                PeakRecord(
                    B=float(b),
                    f0=float(f0),
                    delta_f=KAPPA,
                    Q=float(f0) / KAPPA,
                    S_max=0.5,
                    A1=0.0,
                    A2=0.0,
                    A3=0.0,
                    f_ref=float(f0),
                    sigma_f0=max(noise_hz, 1.0),
                    sigma_delta_f=1.0,
                    rank=rank,
                )
            )
    return PeakTrace(records)
