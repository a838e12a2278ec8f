"""Exception hierarchy.

Each class carries an ``exit_code`` used by the command-line runner:
2 for configuration problems, 3 for numerical-reliability problems and
4 for violated mathematical hypotheses.
"""


class QuadObsError(Exception):
    exit_code = 1


class ConfigInvalid(QuadObsError):
    exit_code = 2


class SchemaMismatch(QuadObsError):
    exit_code = 2


class NumericalReliabilityError(QuadObsError):
    exit_code = 3


class HypothesisError(QuadObsError):
    exit_code = 4


# symbols
class NonQuadraticTerm(ConfigInvalid):
    pass


class RealPartNotNonpositive(HypothesisError):
    pass


class NotPSD(HypothesisError):
    pass


class NotAxisAligned(HypothesisError):
    pass


class DegenerateTolerance(NumericalReliabilityError):
    pass


# spectral machinery
class EmptySubspace(HypothesisError):
    pass


class QuadratureUnreliable(NumericalReliabilityError):
    pass


class LeakageExceeded(NumericalReliabilityError):
    pass


class NonContraction(NumericalReliabilityError):
    pass


# geometry
class BudgetTooSmall(NumericalReliabilityError):
    pass


class RadiusDegenerate(NumericalReliabilityError):
    pass


class UnsupportedShape(ConfigInvalid):
    pass


# bounds and control
class ParameterOutOfRange(HypothesisError):
    pass


class HypothesisViolated(HypothesisError):
    pass


class SingularGramian(NumericalReliabilityError):
    pass
