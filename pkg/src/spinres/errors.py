from pathlib import Path


class SpinresError(Exception):
    pass


class DomainError(SpinresError, ValueError):
    """An input is outside the domain an operation is defined on"""


class ConvergenceError(SpinresError, RuntimeError):
    pass


class RankDeficiencyError(ConvergenceError):
    """The normal matrix of a fit is singular

    :param direction: human readable combination of parameters that the data
        cannot pin down, e.g. "0.71*g - 0.71*omega_c"
    """

    def __init__(self, message: str, direction: str = "") -> None:
        super().__init__(message)
        self.direction = direction


class SweepFormatError(SpinresError, ValueError):
    def __init__(self, path: Path | str, line: int | None, message: str) -> None:
        self.path = Path(path)
        self.line = line
        self.message = message
        location = f"{self.path}:{line}" if line is not None else str(self.path)
        super().__init__(f"{location}: {message}")
