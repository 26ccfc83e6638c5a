import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Self

import numpy as np
import numpy.typing as npt

from spinres.errors import DomainError

type FloatArray = npt.NDArray[np.float64]


@dataclass(slots=True, frozen=True, kw_only=True, eq=False)
class FitResult:
    """Outcome of one least-squares fit

    sigma is always derived from the covariance so the two never disagree.
    """

    names: tuple[str, ...]
    params: FloatArray
    covariance: FloatArray
    residual_norm: float
    n_iterations: int
    converged: bool
    n_points: int = 0
    message: str = ""
    # cost 0.5 * |r|^2 after every accepted step, starting with the initial cost
    cost_history: tuple[float, ...] = ()
    # parameters that finished on a bound
    at_bounds: tuple[str, ...] = ()
    diagnostics: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        params = np.array(self.params, dtype=np.float64).reshape(-1)
        cov = np.array(self.covariance, dtype=np.float64)
        p = len(self.names)
        if params.size != p or cov.shape != (p, p):
            raise DomainError(
                f"{p} names, {params.size} params and a {cov.shape} covariance "
                + "do not agree"
            )
        # symmetrize away round-off
        cov = 0.5 * (cov + cov.T)
        params.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "covariance", cov)

    @property
    def sigma(self) -> FloatArray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError as e:
            raise KeyError(f"'{name}' is not one of {self.names}") from e

    def value(self, name: str) -> float:
        return float(self.params[self.index(name)])

    def error(self, name: str) -> float:
        return float(self.sigma[self.index(name)])

    def as_dict(self) -> dict[str, tuple[float, float]]:
        """name -> (value, 1 sigma)"""
        return {
            n: (float(v), float(s))
            for n, v, s in zip(self.names, self.params, self.sigma, strict=True)
        }

    def transformed(
        self,
        names: Sequence[str],
        matrix: npt.ArrayLike,
        offset: npt.ArrayLike | None = None,
        **updates: object,
    ) -> Self:
        """Map the parameters through y = M @ theta + offset

        Used for unit conversions and derived quantities. The covariance follows
        as M C M^T.
        """
        m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        new_params = m @ self.params
        if offset is not None:
            new_params = new_params + np.asarray(offset, dtype=np.float64)
        fields: dict[str, object] = {
            "names": tuple(names),
            "params": new_params,
            "covariance": m @ self.covariance @ m.T,
            "residual_norm": self.residual_norm,
            "n_iterations": self.n_iterations,
            "converged": self.converged,
            "n_points": self.n_points,
            "message": self.message,
            "cost_history": self.cost_history,
            "at_bounds": self.at_bounds,
            "diagnostics": self.diagnostics,
        }
        fields.update(updates)
        return type(self)(**fields)  # pyright: ignore[reportArgumentType]


@dataclass(slots=True, frozen=True, kw_only=True)
class PeakRecord:
    """Lineshape fit of one field slice. Flagged records carry NaN values"""

    B: float
    f0: float = math.nan
    delta_f: float = math.nan
    Q: float = math.nan
    S_max: float = math.nan
    A1: float = math.nan
    A2: float = math.nan
    A3: float = math.nan
    f_ref: float = 0.0
    sigma_f0: float = math.nan
    sigma_delta_f: float = math.nan
    # 0 for the tallest peak of the slice, 1 for the secondary one
    rank: int = 0
    flagged: bool = False
    note: str = ""

    def __post_init__(self) -> None:
        if self.flagged:
            return
        if not (self.delta_f > 0 and math.isfinite(self.f0)):
            raise DomainError(f"unflagged record at B={self.B} needs f0 and delta_f > 0")
        if not math.isclose(self.Q, self.f0 / self.delta_f, rel_tol=1e-9):
            raise DomainError(
                f"Q = {self.Q} disagrees with f0 / delta_f = {self.f0 / self.delta_f}"
            )


@dataclass(slots=True, frozen=True, eq=False)
class PeakTrace:
    records: tuple[PeakRecord, ...]

    def __init__(self, records: Iterable[PeakRecord]) -> None:
        object.__setattr__(
            self, "records", tuple(sorted(records, key=lambda r: (r.B, r.rank)))
        )

    def __len__(self) -> int:
        return len(self.records)

    def select(
        self,
        *,
        rank: int | None = 0,
        B_lo: float = -math.inf,
        B_hi: float = math.inf,
        include_flagged: bool = False,
    ) -> list[PeakRecord]:
        return [
            r
            for r in self.records
            if (rank is None or r.rank == rank)
            and B_lo <= r.B <= B_hi
            and (include_flagged or not r.flagged)
        ]

    def column(self, name: str, **select: object) -> FloatArray:
        """A field of every selected record as an array, e.g. trace.column("f0")"""
        rows = self.select(**select)  # pyright: ignore[reportArgumentType]
        return np.array([getattr(r, name) for r in rows], dtype=np.float64)

    @property
    def n_flagged(self) -> int:
        return sum(r.flagged for r in self.records)


@dataclass(slots=True, frozen=True, kw_only=True)
class CrossingWindow:
    """Field range and starting point of one avoided-crossing fit"""

    B_lo: float
    B_hi: float
    label: str = ""
    g_init: float | None = None  # Hz
    D_init: float | None = None  # Hz
    omega_c_init: float | None = None  # Hz
    include_upper: bool = True
    include_lower: bool = True

    def __post_init__(self) -> None:
        if not self.B_lo < self.B_hi:
            raise DomainError(f"window needs B_lo < B_hi, got {self.B_lo}, {self.B_hi}")
        if not (self.include_upper or self.include_lower):
            raise DomainError("a window must include at least one branch")

    def contains(self, B: float) -> bool:
        return self.B_lo <= B <= self.B_hi
