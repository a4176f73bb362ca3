"""Exception types shared across the package."""


class GateError(ValueError):
    """A gate does not fit the register it is applied to."""


class NormalizationError(ValueError):
    """A state that must be normalized is not."""


class CircuitParseError(ValueError):
    """Malformed circuit or function-table text."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class BudgetExceeded(RuntimeError):
    """An exact enumeration would exceed its configured size budget."""


class BlockStructureError(ValueError):
    """A unitary crosses blocks, or a block chain is not a refinement chain."""
