"""Exception types raised by funcar."""


class FuncarError(Exception):
    """Base class for all funcar errors."""


class BasisMismatchError(FuncarError, ValueError):
    """Two objects living on different bases were combined."""


class ConfigError(FuncarError, ValueError):
    """An experiment configuration or input file is invalid."""


class NumericalError(FuncarError, ArithmeticError):
    """A linear-algebra step failed or lost too much accuracy."""


class ReplicationError(FuncarError):
    """An error raised inside one (n, replication) cell of an experiment.

    The original exception is available as ``cause`` (and ``__cause__``).
    """

    def __init__(self, n, replication, cause):
        self.n = n
        self.replication = replication
        self.cause = cause
        super().__init__(f"n={n}, replication={replication}: {type(cause).__name__}: {cause}")

    def __reduce__(self):
        return (type(self), (self.n, self.replication, self.cause))
