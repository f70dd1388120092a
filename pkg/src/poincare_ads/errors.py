"""Exception hierarchy.

Two families matter to the command-line driver: configuration problems
(exit code 2) and numerical failures (exit code 3).
"""


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class NumericalError(RuntimeError):
    """A computation could not produce a trustworthy result."""


class QuadricError(NumericalError, ValueError):
    """Point off the quadric, or matrix off SL2, beyond tolerance."""


class FreenessUnverified(NumericalError):
    pass


class MemoryBudgetExceeded(NumericalError):
    def __init__(self, requested: int, admissible: int, budget: int):
        self.requested = requested
        self.admissible = admissible
        self.budget = budget
        super().__init__(
            f"enumeration to depth {requested} exceeds the memory budget of "
            f"{budget} bytes; largest admissible depth is {admissible}"
        )


class EmptyTable(NumericalError, ValueError):
    pass


class InsufficientDepth(NumericalError, ValueError):
    pass


class PoleProximity(NumericalError, ValueError):
    pass


class CalibrationAmbiguous(NumericalError):
    pass


class DivergentAtDepth(NumericalError):
    pass


class TailTooLarge(NumericalError):
    pass


class NearFixer(NumericalError):
    """An enumerated element moves x0 inside the compact orbit but not to +-x0."""
