"""Exception hierarchy shared by the library and the CLI exit-code map."""


class DeltaVarError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class DomainError(DeltaVarError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""

    exit_code = 2


class PreconditionError(DeltaVarError, ValueError):
    """Caller-side precondition violated (ordering, ranges, plan shape)."""

    exit_code = 2


class CapacityError(DeltaVarError, MemoryError):
    """Requested table or term budget exceeds the configured limit."""

    exit_code = 3


class NumericValidityError(DeltaVarError, ArithmeticError):
    """A documented precision bound would be exceeded."""

    exit_code = 4


class UnsupportedOrderError(DomainError):
    pass


class CacheIntegrityError(DeltaVarError):
    exit_code = 5
