"""Exception hierarchy.

``InputError`` subclasses map to CLI exit code 2, ``DomainError`` to 3 and
``NumericalError`` to 4.
"""


class QuakeHMMError(Exception):
    pass


class InputError(QuakeHMMError, ValueError):
    pass


class DomainError(QuakeHMMError, ValueError):
    pass


class NumericalError(QuakeHMMError, ArithmeticError):
    pass


class CatalogError(InputError):
    """Malformed catalog file or record."""


class ConfigurationError(InputError):
    pass


class InsufficientDataError(DomainError):
    pass


class InsufficientHistoryError(InsufficientDataError):
    pass


class DegenerateGeometryError(DomainError):
    pass


class DegenerateSplitError(DomainError):
    pass


class InstanceTooLargeError(DomainError):
    pass


class ImpossibleObservationError(NumericalError):
    def __init__(self, t: int):
        super().__init__(f"observation {t} has zero probability under every state path")
        self.t = t


class DegenerateStateError(NumericalError):
    def __init__(self, state: int, mass: float):
        super().__init__(f"state {state} has vanishing posterior mass ({mass:.3g})")
        self.state = state
        self.mass = mass


class FitFailureError(NumericalError):
    pass
