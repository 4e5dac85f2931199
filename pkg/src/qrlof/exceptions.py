class QrlofError(Exception):
    """Base class for errors raised by qrlof."""


class DomainError(QrlofError, ValueError):
    pass


class SingularDesignError(QrlofError, ValueError):
    pass


class UnderdeterminedError(QrlofError, ValueError):
    pass


class InputError(QrlofError, ValueError):
    pass


class SolverError(QrlofError, RuntimeError):
    pass
