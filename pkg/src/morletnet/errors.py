"""Exception types shared across the package."""


class MorletNetError(Exception):
    pass


class DomainError(MorletNetError, ValueError):
    """An argument lies outside the domain of an operation."""


class ContractError(MorletNetError, ValueError):
    """Shapes or indices that do not agree with each other."""


class InvariantError(MorletNetError, ValueError):
    """A parameter escaped its admissible region."""


class DegenerateStatisticsError(MorletNetError, ValueError):
    pass


class FormatError(MorletNetError, ValueError):
    """A file could not be parsed; the message names the offending field."""


class NonFiniteError(MorletNetError, FloatingPointError):
    pass
