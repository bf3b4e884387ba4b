"""Exception hierarchy shared by all engines.

Numerical guard trips (step-size, grid and normalization guards) are kept
distinct from input/validation failures so the command line tool can map
them to different exit codes.
"""


class CwlmError(Exception):
    """Base class for all package errors."""


class ValidationFailed(CwlmError):
    """A measurement setup violates one or more validity checks."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ParseError(CwlmError):
    """A setup file could not be parsed."""


class IncompatibleGrids(CwlmError):
    """Two distribution tables share no usable common support."""


class NonHermitianInput(CwlmError):
    """A matrix required to be Hermitian is not, beyond tolerance."""


class NegativeEigenvalue(CwlmError):
    """A matrix required to be positive semidefinite has a negative eigenvalue."""


class SingularDetectorNoise(CwlmError):
    """The detector noise matrix is not invertible."""


class SingularNoise(SingularDetectorNoise):
    """The detector noise matrix is not positive definite."""


class NonCommutingOperators(CwlmError):
    """The closed-form solution requires mutually commuting measured operators."""


class HamiltonianMixesEigenbasis(CwlmError):
    """The closed-form solution requires the Hamiltonian to commute with the measured operators."""


class LimitNotApplicable(CwlmError):
    """A closed-form update was requested outside its limit of validity."""


class NumericalGuardError(CwlmError):
    """Base class for runtime numerical guards (exit code 3 in the CLI)."""


class StepTooLarge(NumericalGuardError):
    """A single integrator step changed the state by more than the stability guard allows."""


class CFLViolation(NumericalGuardError):
    """Grid spacing and time step violate a stability or resolution bound."""


class GridTooNarrow(NumericalGuardError):
    """The integrand has not decayed at the edge of the quadrature grid."""


class TruncationTooSmall(NumericalGuardError):
    """The Fock-space truncation is too small to satisfy the auxiliary-system relations."""


class NormalizationLoss(NumericalGuardError):
    """Outcome probabilities fail to sum to one beyond tolerance."""


class PositivityLoss(NumericalGuardError):
    """A conditioned density matrix developed a negative eigenvalue beyond tolerance."""
