"""Exception hierarchy.

Errors split into two families so the command line can map them onto exit
codes: :class:`ValidationError` (bad input, exit 1) and
:class:`ComputationError` (a well-formed input the algorithm could not
handle, exit 2).
"""


class TopoclustError(Exception):
    """Base class for all package errors."""


class ValidationError(TopoclustError, ValueError):
    """Input violates an operation's preconditions."""


class ComputationError(TopoclustError, RuntimeError):
    """A computation failed on otherwise valid input."""


class EmptyGraph(ValidationError):
    pass


class NotSymmetric(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class Disconnected(ValidationError):
    pass


class NegativeScalar(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class NonPositiveEntry(ValidationError):
    pass


class NotOrdered(ValidationError):
    pass


class BadCInf(ValidationError):
    pass


class EmptyCollection(ValidationError):
    pass


class TooFewGraphs(ValidationError):
    pass


class TooFewVectors(ValidationError):
    pass


class TooFewPoints(ValidationError):
    pass


class LabelOutOfRange(ValidationError):
    pass


class RankDeficient(ValidationError):
    pass


class ZeroBandwidth(ValidationError):
    pass


class NonFiniteData(ValidationError):
    pass


class SingleTimePoint(ValidationError):
    pass


class NotSPD(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class ProjectionError(ComputationError):
    """Projected values do not keep the template's spanning tree maximal."""


class EmptyClusterCollapse(ComputationError):
    pass


class DegenerateBetween(ComputationError):
    pass


class DegenerateVariance(ComputationError):
    pass


class NoRoot(ComputationError):
    pass
