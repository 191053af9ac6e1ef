"""Exception hierarchy shared by all modules."""


class DbmError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(DbmError, ValueError):
    """Shapes, widths or state spaces do not match."""


class DomainError(DbmError, ValueError):
    """An argument lies outside its admissible range."""


class PositivityError(DbmError, ValueError):
    """A distribution that must be strictly positive has a zero entry."""


class DegenerateProductError(DbmError, ValueError):
    """A renormalized product has zero total mass."""


class ConditioningError(DbmError, ValueError):
    """Conditioning on an event of zero probability."""


class SizeError(DbmError, ValueError):
    """Exhaustive enumeration would exceed the configured limit."""


class ParseError(DbmError, ValueError):
    """A serialized document violates its schema.

    ``path`` names the offending field, e.g. ``"weights[1]"``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class PlanError(DbmError, ValueError):
    """A support plan or sharing step violates its structural constraints."""


class ConvergenceError(DbmError, RuntimeError):
    """Compilation ran out of sharpness budget before reaching the tolerance.

    The best model found so far is attached so callers can still report it.
    """

    def __init__(self, message: str, best_kl: float, params=None, certificate=None):
        self.best_kl = best_kl
        self.params = params
        self.certificate = certificate
        super().__init__(message)


class LayerIndexError(DomainError, IndexError):
    """A layer index is outside the admissible range."""
