"""Exception types raised by the engine."""


class DegenerateBasisError(ValueError):
    """Orbitals are linearly dependent (a Gram-Schmidt pivot vanished)."""


class InvalidStateError(RuntimeError):
    """An operation was called in a configuration where it is not defined."""


class InconsistentStateError(RuntimeError):
    """A computed quantity violates a physical constraint (e.g. complex energy)."""


class PropagationError(RuntimeError):
    """Time integration failed; ``last_good_time`` records how far it got."""

    def __init__(self, message: str, last_good_time: float = float("nan")):
        super().__init__(message)
        self.last_good_time = last_good_time
