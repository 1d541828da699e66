"""Exception hierarchy shared by every canard_lab module."""


class CanardLabError(Exception):
    """Base class for all library errors."""


# configuration / validation
class ConfigError(CanardLabError):
    """A system description is malformed or violates a structural assumption."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ContinuityViolation(ConfigError):
    pass


class SlopeSignViolation(ConfigError):
    pass


class NoFold(ConfigError):
    pass


class UsageError(CanardLabError):
    pass


# numerical failures
class NumericalFailure(CanardLabError):
    """Raised when an integration or search cannot produce its result."""


class Diverged(NumericalFailure):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class StepUnderflow(NumericalFailure):
    pass


class NoReturn(NumericalFailure):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class NoOrbit(NumericalFailure):
    pass


class NoJump(NumericalFailure):
    pass


class NotBracketed(NumericalFailure):
    pass


class Ambiguous(NumericalFailure):
    def __init__(self, message, measures=None):
        super().__init__(message)
        self.measures = measures


class NoWitness(NumericalFailure):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


# analysis preconditions
class NotFocusFocus(CanardLabError):
    pass


class HypothesisNotSatisfied(CanardLabError):
    pass


class HypothesisViolated(CanardLabError):
    pass


class NotSuperExplosion(CanardLabError):
    pass


class PreconditionViolated(CanardLabError):
    pass


class ConstructionFailed(CanardLabError):
    pass
