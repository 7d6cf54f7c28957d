class LabError(Exception):
    """Base class for every failure raised by the lab."""

    exit_code = 1


class ConfigError(LabError):
    """Exception raised when an experiment config fails to parse or validate."""

    exit_code = 1

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        location = f" (line {line}" if line is not None else ""
        if location and column is not None:
            location += f", column {column}"
        if location:
            location += ")"
        super().__init__(f"Invalid config{location}: {message}")


class ConfigFileError(LabError):
    """Exception raised when a config file cannot be read."""

    exit_code = 2

    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"Cannot read config {path}: {reason}")


class PreconditionError(LabError, ValueError):
    exit_code = 4


class DomainError(PreconditionError):
    """Argument outside the domain of a profile."""


class RangeError(PreconditionError):
    """Point outside the range of the characteristic map."""


class NumericalError(LabError):
    exit_code = 3


class QuadratureError(NumericalError):
    """Exception raised when a singular quadrature fails to converge."""

    def __init__(self, t: float, resolution: int, detail: str = ""):
        self.t = t
        self.resolution = resolution
        suffix = f": {detail}" if detail else ""
        super().__init__(
            f"Quadrature did not converge at t={t!r} with {resolution} nodes{suffix}"
        )


class NonUniqueMaximizerError(NumericalError):
    """Exception raised when the focusing rate has competing maxima."""

    def __init__(self, candidates: list[tuple[float, float]]):
        self.candidates = candidates
        listing = ", ".join(f"y={y:.12g} (h={h:.12g})" for y, h in candidates)
        super().__init__(f"Focusing rate maximizer is not unique: {listing}")


class CFLViolationError(NumericalError):
    """Exception raised when the transport speed breaks the CFL bound."""

    def __init__(self, step: int, speed: float, ratio: float):
        self.step = step
        self.speed = speed
        self.ratio = ratio
        super().__init__(
            f"CFL violated at step {step}: speed={speed:.6g}, ratio={ratio:.6g}"
        )


class ConstructionError(NumericalError):
    """Exception raised when glued supports overlap."""
