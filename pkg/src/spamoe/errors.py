"""Exception hierarchy shared by every spamoe module."""


class SpamoeError(Exception):
    """Base class; the CLI maps it to exit code 1."""


class InvalidInput(SpamoeError, ValueError):
    pass


class InvalidConfig(SpamoeError, ValueError):
    pass


class OracleTooLarge(InvalidInput):
    pass


class PremiseViolation(SpamoeError):
    """A constructed operator does not satisfy the premises it was built for."""


class InvalidState(SpamoeError, RuntimeError):
    pass


class NumericalError(SpamoeError, FloatingPointError):
    pass
