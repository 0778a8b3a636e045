"""Exception hierarchy shared by all berglab modules."""


class BerglabError(Exception):
    """Base class for every error raised by berglab."""


class DimensionError(BerglabError, ValueError):
    """A point or matrix does not match the dimension of its domain."""


class ConfigError(BerglabError, ValueError):
    """Invalid user-supplied configuration (bad n, m, delta, ...)."""


class EmptyDomainError(BerglabError):
    """Sampling never hit the domain within the configured budget."""


class PoleError(BerglabError, ZeroDivisionError):
    """A rational map was evaluated on its singular set."""


class RoundTripError(BerglabError):
    """A map and its claimed inverse disagree beyond tolerance."""


class StepTooLargeError(BerglabError):
    """A finite-difference stencil leaves the domain."""


class DegeneratePolyhedronError(BerglabError, ValueError):
    """Face data is not ℂ-independent or not strongly plurisubharmonic."""


class NumericDegeneracy(BerglabError):
    """Base for failures caused by an under-resolved numerical model."""


class DegenerateGramError(NumericDegeneracy):
    pass


class DegenerateMetricError(NumericDegeneracy):
    pass


class ZeroKernelError(NumericDegeneracy):
    pass


class RankDeficiencyError(NumericDegeneracy):
    pass


class InternalError(BerglabError):
    """A postcondition that should hold by construction was violated."""


class ExtrapolationWarning(UserWarning):
    """A kernel model was evaluated outside the domain it was built on."""
