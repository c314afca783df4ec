"""Exception hierarchy shared by every module."""


class TwcError(Exception):
    """Base class for all library errors."""


class DimensionError(TwcError, ValueError):
    """Vectors or matrices with incompatible shapes."""


class ParameterError(TwcError, ValueError):
    """A parameter is outside its admissible range."""


class DegenerateError(TwcError, ValueError):
    """A geometric object collapses (zero direction, empty code, ...)."""


class DomainError(TwcError, ValueError):
    """A formula is evaluated outside the region where it is defined."""


class StructureError(TwcError, ValueError):
    """Two objects lack the required structural relation (e.g. nesting)."""


class CodeIndexError(TwcError, IndexError):
    """Message index outside the codebook."""


class ConfigError(TwcError, ValueError):
    """Malformed experiment configuration."""


class CapacityError(TwcError, RuntimeError):
    """An enumeration would exceed its budget.

    ``estimate`` holds the predicted work (point count or net size);
    ``found_points`` is True when that many points were actually found.
    """

    def __init__(self, message: str, estimate: float | None = None, found_points: bool = False):
        super().__init__(message)
        self.estimate = estimate
        self.found_points = found_points
