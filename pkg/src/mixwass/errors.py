"""Exception taxonomy.

Two families: validation errors (bad inputs or parameters, CLI exit code 2)
and numerical errors (well-formed inputs on which the computation cannot
proceed, CLI exit code 3).
"""


class MixwassError(Exception):
    """Base class for all package errors."""


class ValidationError(MixwassError):
    """Invalid input data or parameters."""


class NumericalError(MixwassError):
    """Numerical failure on otherwise valid inputs."""


class InvalidMatrix(ValidationError):
    """Matrix with non-finite entries, wrong shape, or gross asymmetry."""


class DimError(ValidationError):
    """Dimension mismatch between operands."""


class InvalidCost(ValidationError):
    """Cost table violating symmetry, zero diagonal, or non-negativity."""


class InvalidParam(ValidationError):
    """Parameter outside its documented range."""


class InvalidSimplex(ValidationError):
    """Vector or matrix column too far from the probability simplex."""


class ParseError(ValidationError):
    """Malformed input file; carries a line number when available."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class Unbounded(NumericalError):
    """Linear program with unbounded objective."""


class LPFailure(NumericalError):
    """Linear program solver did not return an optimal solution."""


class InfeasibleRow(ValidationError):
    """A word with positive count has zero probability under every topic."""


class DegenerateSupport(NumericalError):
    """Empirical support too degenerate for the requested estimator."""


class SingularInformation(NumericalError):
    """Plug-in information matrix is singular at rank tolerance."""


class SingularDesign(NumericalError):
    """Weighted least-squares design matrix is singular."""
