"""Exception hierarchy shared by every rpm3 module."""


class RPM3Error(Exception):
    """Base class for all rpm3 errors."""


class ConfigurationError(RPM3Error):
    """Invalid field, scenario, or parameter combination."""


class FieldMismatchError(ConfigurationError):
    """Operands live in fields with different moduli."""


class InvalidEvaluationSetError(RPM3Error, ValueError):
    """Evaluation points are not pairwise distinct, or collide with reserved points."""


class ShapeError(RPM3Error, ValueError):
    pass


class IncompleteDecodeError(RPM3Error):
    """A block of C is missing, or a result was requested before decoding finished."""


class NeedMoreSymbols(RPM3Error):
    """The accumulated product symbols do not have full rank yet."""


class CorruptionError(RPM3Error):
    """A product symbol contradicts values the decoder already resolved.

    This can only happen if the simulation itself is broken.
    """


class NotReady(RPM3Error):
    """Not enough evaluations to interpolate a polynomial."""


class InfeasibleClusterError(ConfigurationError):
    pass


class PrivacyViolation(RPM3Error):
    pass
