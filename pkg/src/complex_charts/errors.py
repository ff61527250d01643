"""Exceptions raised by complex-charts.

Every class carries the exit code the command line front end reports for it.
"""


class ComplexChartsError(ValueError):
    """Base class for domain errors; reported as a validation failure."""

    exit_code = 3


class IntegrabilityObstruction(ComplexChartsError):
    """Nijenhuis tensor (or a dbar closedness residual) exceeds tolerance."""

    exit_code = 2


class InvalidStructure(ComplexChartsError):
    """Structure or metric field has the wrong form for validation."""

    exit_code = 3


class SquareResidualExceeded(ComplexChartsError):
    """I^2 + 1 is not small."""

    exit_code = 3


class AntisymmetryResidualExceeded(ComplexChartsError):
    """I_MN = g_NP I_M^P is not antisymmetric."""

    exit_code = 3


class MetricNotSPD(ComplexChartsError):
    """Metric is not symmetric positive definite."""

    exit_code = 3


class DegenerateInput(ComplexChartsError):
    """Frame construction met a (nearly) singular configuration."""

    exit_code = 3


class NonzeroMeanRHS(ComplexChartsError):
    """A dbar right-hand side has a zero Fourier mode on the torus."""

    exit_code = 3


class AnticommutatorViolated(ComplexChartsError):
    """Deformation does not anticommute with the flat structure."""

    exit_code = 3


class StepTooLarge(ComplexChartsError):
    """Deformation is too large for one linearized step."""

    exit_code = 3

    def __init__(self, message: str, suggested_steps: int = None):
        super().__init__(message)
        self.suggested_steps = suggested_steps


class PathValidationFailed(ComplexChartsError):
    """An intermediate structure on the continuation path is invalid."""

    exit_code = 3


class SingularJacobian(ComplexChartsError):
    """Coordinate map Jacobian is (nearly) singular."""

    exit_code = 3


class SpecParseError(ComplexChartsError):
    """Field specification could not be read."""

    exit_code = 4


class UnknownGenerator(ComplexChartsError):
    """Operator applied to an expression with generators it does not know."""

    exit_code = 5


class NotChiral(ComplexChartsError):
    """Superfield is not left chiral."""

    exit_code = 5


class SquareRelationMissing(ComplexChartsError):
    """Operation needs the I^2 = -1 relation imposed."""

    exit_code = 5


class InconsistentRelations(ComplexChartsError):
    """Imposed jet relations admit no solution."""

    exit_code = 5
