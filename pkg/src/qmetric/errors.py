"""Exception hierarchy shared by every qmetric module."""


class QMetricError(Exception):
    """Base class for all errors raised by qmetric."""


class InvalidDimension(QMetricError, ValueError):
    """Vector or matrix shapes do not agree."""


class NonFiniteValue(QMetricError, ValueError):
    """A NaN or Inf entered an operation."""


class InvalidCertificate(QMetricError, ValueError):
    """Certificate parameters outside their admissible ranges."""


class MetricStructureError(QMetricError):
    """The metric lacks the symmetry/definiteness a rule requires."""


class MetricMismatch(QMetricError, ValueError):
    """A certificate refers to a different metric than the one supplied."""


class RuleNotApplicable(QMetricError):
    """A calculus rule's precondition on its parameters fails."""


class DivergenceDetected(QMetricError):
    """An iteration produced a non-finite iterate."""

    def __init__(self, k, message=None):
        self.k = k
        super().__init__(message or f"non-finite iterate at k={k}")


class NotAFixedPoint(QMetricError):
    """The reference point supplied to a bound evaluator is not fixed."""


class NoUniqueFixedPoint(QMetricError):
    """The fixed-point set is empty or not a singleton."""


class FixedPointNotFound(QMetricError):
    """The fixed-point search did not converge to the required accuracy."""


class SingularResolvent(QMetricError):
    """The resolvent system matrix is numerically singular."""


class UnsupportedPairing(QMetricError):
    """No resolvent solver exists for this (operator, metric) pair."""


class ConfigParseError(QMetricError):
    """An experiment configuration could not be parsed or validated."""
