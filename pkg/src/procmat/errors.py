"""Exception hierarchy.

Two families matter to the command line: :class:`InputError` subclasses map to
exit code 2, every other :class:`ProcmatError` to exit code 3.
"""


class ProcmatError(Exception):
    """Base class for all library errors."""


class InputError(ProcmatError):
    """Malformed or inconsistent user input."""


class NumericalError(ProcmatError):
    """A numerical invariant does not hold."""


class DuplicateWire(InputError):
    pass


class UnknownWire(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class WireMismatch(InputError):
    pass


class ShapeMismatch(InputError):
    pass


class InvalidInterval(InputError):
    pass


class BadDistribution(InputError):
    pass


class InvalidInstrument(InputError):
    pass


class InvalidDecomposition(InputError):
    pass


class IncompleteBasis(InputError):
    pass


class SchemaError(InputError):
    """Scenario document does not match the schema.

    ``path`` is a JSON pointer to the offending element.
    """

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path or '/'}: {message}")
        self.path = path


class ValidationError(InputError):
    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path or '/'}: {message}" if path else message)
        self.path = path


class NotHermitian(NumericalError):
    pass


class NotUnitary(NumericalError):
    pass


class NotDensityOperator(NumericalError):
    pass


class NotTracePreserving(NumericalError):
    pass


class NegativeProbability(NumericalError):
    pass


class NotPositive(NumericalError):
    pass


class NotCommuting(NumericalError):
    pass


class ConditionFails(NumericalError):
    pass


class ZeroTrace(NumericalError):
    pass
