"""Exception hierarchy shared across the package."""


class QapError(Exception):
    """Base class for all qapsat errors."""


class ContractError(QapError, ValueError):
    """An argument violates an operation's precondition."""


class LowerBoundViolation(QapError):
    """A claimed minimum lies below the known global lower bound."""


class OverflowRisk(ContractError):
    """Objective values could exceed the signed 64-bit range."""


class ParseError(QapError, ValueError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ValidationError(QapError, ValueError):
    """Sidecar metadata disagrees with the matrices it describes."""


class GenerationError(QapError):
    pass


class EnumerationLimitError(ContractError):
    """Instance too large for exhaustive enumeration."""


class FitError(QapError):
    """A regression could not be computed for the given data."""
