"""Exception hierarchy.

Errors fall in three groups that the CLI maps to exit codes: mesh/geometry
degeneracies and solver failures (numerical, exit 3), constraint and estimate
violations (verification, exit 1).
"""


class HelfrichError(Exception):
    """Base class for all package errors."""


class NumericalError(HelfrichError):
    """A degeneracy or numerical failure in the input or a solver."""


class VerificationError(HelfrichError):
    """A violated constraint or checked estimate."""


class MeshError(NumericalError):
    pass


class DegenerateTriangle(MeshError):
    pass


class ComplexViolation(MeshError):
    pass


class CoverageGap(MeshError):
    pass


class FoldBack(NumericalError):
    pass


class DegenerateDual(NumericalError):
    pass


class DegenerateProjection(NumericalError):
    pass


class OrientationViolation(NumericalError):
    pass


class QuadratureUnavailable(NumericalError):
    pass


class SolverStall(NumericalError):
    pass


class OutOfDomain(NumericalError):
    pass


class MeshFormatError(HelfrichError):
    pass


class ConstraintViolation(VerificationError):
    def __init__(self, message, edge_key=None):
        super().__init__(message)
        self.edge_key = edge_key


class LemmaViolation(VerificationError):
    pass
