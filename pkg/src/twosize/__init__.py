"""Two-size Wright-Fisher model: finite simulator, renewal oracle, limiting diffusion and analytics."""
from .errors import (BoundarySign, BoundaryViolation, ConfigError, DivisionAtBoundary, InvalidStep, NonAbsorbing,
                     NonIntegrable, OutOfRange, QuadratureFailure, StateSpaceTooLarge, TwoSizeError,
                     UnsupportedOrder)
from .model import (CustomTable, Diploid, FittestTypeWins, GenicSelection, IncrementLaw, Neutral,
                    ParentIndependentMutation, RhoSpec, SizeParams, mu, rho_finite, rho_limit, var_xi)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "SizeParams", "IncrementLaw", "RhoSpec", "Neutral", "GenicSelection", "FittestTypeWins", "Diploid",
    "ParentIndependentMutation", "CustomTable", "mu", "var_xi", "rho_finite", "rho_limit",
    "TwoSizeError", "OutOfRange", "BoundaryViolation", "BoundarySign", "StateSpaceTooLarge", "DivisionAtBoundary",
    "InvalidStep", "NonAbsorbing", "UnsupportedOrder", "QuadratureFailure", "NonIntegrable", "ConfigError",
]
