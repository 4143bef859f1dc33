"""Exception hierarchy shared by every module of the package."""


class HQError(ValueError):
    """Base class for all errors raised by ppthq."""


class DimensionLimitError(HQError):
    """A matrix dimension would exceed the configured maximum."""

    def __init__(self, dim, limit):
        super().__init__(f"dimension {dim} exceeds the limit of {limit}")
        self.dim = dim
        self.limit = limit


class CapacityError(DimensionLimitError):
    """A scenario's tuple or state space is larger than the supported caps."""


class BipartitionError(HQError):
    """Matrix or vector size does not match the declared bipartition."""


class SymmetryError(HQError):
    """Input expected to be Hermitian is not, within tolerance."""


class NumericError(HQError):
    """A numerical routine failed to reach its accuracy contract."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DomainError(HQError):
    """Argument outside the domain an operation is defined on."""


class ConstructionError(HQError):
    """A constructed object failed one of its invariant checks."""

    def __init__(self, check, residual):
        super().__init__(f"invariant '{check}' violated (residual {residual:.3e})")
        self.check = check
        self.residual = residual
