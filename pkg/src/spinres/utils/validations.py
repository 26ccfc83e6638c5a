import math
from collections.abc import Iterable

from spinres.errors import DomainError


def require_positive(**values: float) -> None:
    """Raise DomainError naming the first value that is not a finite number > 0"""
    for name, value in values.items():
        if not (math.isfinite(value) and value > 0):
            raise DomainError(f"{name} must be positive, got {value}")


def require_non_negative(**values: float) -> None:
    for name, value in values.items():
        if not (math.isfinite(value) and value >= 0):
            raise DomainError(f"{name} must be non-negative, got {value}")


def is_strictly_increasing(values: Iterable[float]) -> bool:
    it = iter(values)
    try:
        prev = next(it)
    except StopIteration:
        return True
    for v in it:
        if not v > prev:
            return False
        prev = v
    return True
