class ValidationError(ValueError):
    """Bad input: out-of-range parameters, malformed distributions, shape mismatches."""


class ParseError(ValidationError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnsupportedPredicateError(ValueError):
    """The requested algorithm is not defined for this predicate family."""


class InvalidWitnessError(ValueError):
    pass


class OracleRefusal(ValueError):
    """Exhaustive search would be too large."""
