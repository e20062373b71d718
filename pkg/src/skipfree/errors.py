"""Exception hierarchy.

Every error carries a stable ``code`` (its class name) and belongs to one of
three families; the CLI maps each family to its own exit status.
"""


class SkipFreeError(Exception):
    exit_status = 1

    @property
    def code(self):
        return type(self).__name__


class ModelError(SkipFreeError):
    """Invalid model, configuration or query."""

    exit_status = 2


class NumericalError(SkipFreeError):
    """A computation failed numerically (underflow, non-convergence, ...)."""

    exit_status = 3


class HypothesisError(SkipFreeError):
    """A required regime hypothesis could not be established numerically."""

    exit_status = 4


# model / query validation
class NonPositiveDownRate(ModelError):
    pass


class NegativeRate(ModelError):
    pass


class DownJumpTooFar(ModelError):
    pass


class AllZeroKilling(ModelError):
    pass


class InfiniteRowRate(ModelError):
    pass


class TailUnavailable(ModelError):
    pass


class LevelExceeded(ModelError):
    pass


class InvalidQuery(ModelError):
    pass


class ConfigError(ModelError):
    pass


# numerical failures
class NumericalUnderflow(NumericalError):
    pass


class NumericalOverflow(NumericalError):
    pass


class EigSolverFailure(NumericalError):
    pass


class IterationDivergence(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class NegativeMass(NumericalError):
    pass


class NotNormalizable(NumericalError):
    pass


class NoSurvivors(NumericalError):
    pass


class TooManyCensored(NumericalError):
    pass


# hypotheses
class SmallKillingNotEstablished(HypothesisError):
    pass


class HypothesisNotEstablished(HypothesisError):
    pass
