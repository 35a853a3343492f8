"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes violate an operation's contract."""


class ContractError(RuntimeError):
    """An operation was invoked outside its contract (non-scalar loss,
    spent tape, out-of-range step size, mismatched memory entry)."""


class ConfigError(ValueError):
    """A configuration value is invalid or inconsistent."""


class InputError(ValueError):
    """A runtime input (token id, mask pair, report list) is invalid."""


class GenerationError(RuntimeError):
    """A scene specification cannot be realized (no unique referent,
    no valid placement)."""


class NumericalError(RuntimeError):
    """Training produced a non-finite loss."""
