"""Exception hierarchy shared by every layer of the verifier."""


class VerifierError(Exception):
    """Base class for all errors raised by qchverify."""


class DomainError(VerifierError, ValueError):
    """A value left the domain of a function or chart."""


class SingularEvaluationError(VerifierError, ZeroDivisionError):
    """Division by a jet whose value part vanishes (a coordinate singularity)."""


class ChartSyntaxError(VerifierError):
    """Malformed chart text. Carries 1-based line and column."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class UnknownIdentifierError(ChartSyntaxError):
    pass


class ContractError(VerifierError, ValueError):
    """A precondition of an operation was violated by its caller."""


class UnknownChartError(VerifierError, KeyError):
    pass
