"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument violates a documented precondition."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to reach its requested tolerance.

    ``achieved_tol`` holds the best tolerance reached before the budget ran out.
    """

    def __init__(self, message: str, achieved_tol: float):
        super().__init__(f"{message} (achieved tolerance {achieved_tol:.3e})")
        self.achieved_tol = achieved_tol


class ContractError(RuntimeError):
    """An object was used in a state its contract forbids."""


class ConfigError(ParameterError):
    """A configuration file is malformed; carries the offending field and line."""

    def __init__(self, message: str, field: str = "", line: int | None = None):
        where = field
        if line is not None:
            where = f"line {line}: {field}" if field else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.field = field
        self.line = line
