"""Exception types shared across the package."""


class PtpdmError(Exception):
    """Base class for domain errors raised by this package."""


class ParseError(PtpdmError, ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"syntax error at offset {offset}: {message}")
        self.offset = offset


class UnboundParameterError(PtpdmError, ValueError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unbound parameter {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class PoleError(PtpdmError, ArithmeticError):
    """Evaluation hit a sec/tan pole or a zero divisor."""

    def __init__(self, where: str, detail: str = ""):
        msg = f"pole in {where}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.where = where


class ParityError(PtpdmError, ValueError):
    pass


class OperatorDegreeError(PtpdmError, ValueError):
    pass


class ConsistencyError(PtpdmError, RuntimeError):
    """Two independent construction paths disagree."""


class MassError(PtpdmError, ValueError):
    """The position-dependent mass factor is non-positive where it is needed."""


class DegeneracyError(PtpdmError, ValueError):
    pass


class SingularRegionError(PtpdmError, RuntimeError):
    """A classical trajectory left the regular, positive-mass region."""
