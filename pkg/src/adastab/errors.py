"""Exception types shared across the package."""


class AdastabError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(AdastabError, ValueError):
    pass


class NonFiniteError(AdastabError, ArithmeticError):
    """A state or gain became NaN/Inf during integration."""


class ConvergenceFailure(AdastabError):
    pass


class InsufficientData(AdastabError, ValueError):
    pass


class GenerationExhausted(AdastabError):
    """No connected random graph found within the attempt budget."""


class ScenarioParseError(AdastabError, ValueError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class ScenarioValidationError(AdastabError, ValueError):
    pass
