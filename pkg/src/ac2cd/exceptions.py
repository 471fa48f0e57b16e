"""Exception types raised by the package."""


class ContractError(ValueError):
    """An operation was called outside its precondition."""


class UndefinedQuantityError(ValueError):
    """A quantity is not defined for the given point or instance."""


class LineSearchError(RuntimeError):
    """Armijo backtracking exceeded its cap (inconsistent oracle or direction)."""


class OracleError(RuntimeError):
    """A reference solver could not produce a certificate."""
