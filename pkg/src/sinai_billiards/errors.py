"""Exception hierarchy shared by all modules."""


class BilliardError(Exception):
    """Base class for every error raised by this package."""


class OverlappingScatterers(BilliardError, ValueError):
    pass


class DegenerateLattice(BilliardError, ValueError):
    pass


class UnsupportedFamily(BilliardError, ValueError):
    pass


class IndexOutOfRange(BilliardError, IndexError):
    pass


class InvalidInput(BilliardError, ValueError):
    pass


class GrazingInput(BilliardError):
    """The phase point is within the grazing cutoff of |phi| = pi/2."""


class NoCollisionWithinBound(BilliardError):
    """No scatterer is hit before the flight bound (open corridor or bound too small)."""


class SingularOrbit(BilliardError):
    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"orbit became singular at step {step}")


class NonConvergence(BilliardError):
    pass


class BudgetExceeded(BilliardError):
    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)


class UnsupportedPotential(BilliardError):
    pass


class InsufficientData(BilliardError, ValueError):
    pass


class EmptyCensus(BilliardError, ValueError):
    pass


class ConfigError(BilliardError):
    pass
