"""Exception types raised across polebench."""


class PolebenchError(Exception):
    """Base class for all library errors."""


class EmptyAfterSimplification(PolebenchError, ValueError):
    """Every term cancelled; the zero system has no parameter-set form."""


class UnstablePole(PolebenchError, ValueError):
    pass


class ZeroLeadingSample(PolebenchError, ValueError):
    pass


class DuplicatePoles(PolebenchError, ValueError):
    pass


class RankDeficient(PolebenchError, ValueError):
    """Hankel block numerically singular: the true order is below the requested one."""


class UnstableCandidate(PolebenchError, ValueError):
    pass


class DomainError(PolebenchError, ValueError):
    pass


class NonFiniteValue(PolebenchError, ArithmeticError):
    pass


class IdentityPermutation(PolebenchError, ValueError):
    pass


class NotPSD(PolebenchError, ValueError):
    pass


class ZeroResponse(PolebenchError, ValueError):
    """Reference frequency response vanishes somewhere on the quadrature grid."""


class NonFiniteState(PolebenchError, ArithmeticError):
    pass


class Diverged(PolebenchError, ArithmeticError):
    """Training loss became non-finite.

    The partial trace, the last finite model and the lowest-loss checkpoint
    are attached so callers can still inspect or use what came before the
    blow-up.
    """

    def __init__(self, message, trace=None, model=None, best_model=None):
        super().__init__(message)
        self.trace = trace
        self.model = model
        self.best_model = best_model


class DegenerateDraw(PolebenchError, ValueError):
    pass


class PoleOutsideUnitCircle(PolebenchError, ValueError):
    pass


class UnpairedComplexPole(PolebenchError, ValueError):
    pass


class ConfigError(PolebenchError, ValueError):
    pass


class InsufficientPilots(UserWarning):
    """Fewer pilot symbols than hidden units; the readout solve is underdetermined."""
