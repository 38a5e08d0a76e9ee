class KeplerAveragingError(ValueError):
    """
    base class of every error raised by kepler_averaging
    """


class ConfigError(KeplerAveragingError):
    pass


class PairingAmbiguousError(KeplerAveragingError):
    pass


class NoConvergenceError(KeplerAveragingError):
    pass


class CircularLocusError(KeplerAveragingError):
    pass


class OutOfDomainError(KeplerAveragingError):
    pass


class NotEllipticError(KeplerAveragingError):
    pass


class PathThroughOriginError(KeplerAveragingError):
    pass


class NotClosedError(KeplerAveragingError):
    pass


class WrongKindError(KeplerAveragingError):
    pass


class OutOfTorusError(KeplerAveragingError):
    pass


class CollisionGuardError(KeplerAveragingError):
    pass


class StepFailureError(KeplerAveragingError):
    pass


class SingularJacobianError(KeplerAveragingError):
    pass


class EmptyBranchError(KeplerAveragingError):
    pass


class InsufficientPointsError(KeplerAveragingError):
    pass


class OffManifoldError(KeplerAveragingError):
    pass


class DegenerateEquatorError(KeplerAveragingError):
    pass
