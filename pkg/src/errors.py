"""
Exception types raised across the toolkit.

Each error derives from `RateToolkitError` and from the closest built-in, so
callers may catch either the toolkit-wide base or e.g. ``ValueError``.
"""

import numpy as np


class RateToolkitError(Exception):
    """Base class of every error raised by this project."""


class ConfigurationError(RateToolkitError, ValueError):
    """Invalid configuration, scenario or dimension mismatch."""


class ContractViolation(RateToolkitError, ValueError):
    """An operation was called outside its documented preconditions."""


class DecompositionError(RateToolkitError, np.linalg.LinAlgError):
    """The GSVD could not be computed (rank-deficient stacked channel)."""


class OracleError(RateToolkitError, np.linalg.LinAlgError):
    """A brute-force oracle hit a singular inverse."""


class SingularityError(RateToolkitError, np.linalg.LinAlgError):
    """A resolvent inside the fixed-point solver is numerically singular."""

    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


class ConvergenceError(RateToolkitError, RuntimeError):
    """The fixed-point iteration did not reach its tolerance."""

    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


class QuadratureError(RateToolkitError, RuntimeError):
    """Adaptive quadrature failed; `intervals` lists the last subintervals."""

    def __init__(self, message, intervals=()):
        super().__init__(message)
        self.intervals = list(intervals)


class BranchError(RateToolkitError, ArithmeticError):
    """Imaginary parts of a log-determinant potential do not cancel."""


class DegenerateScenarioError(RateToolkitError, ValueError):
    """The scenario has no meaningful value for the requested quantity."""


class PoleError(RateToolkitError, ZeroDivisionError):
    """A Cauchy transform was requested at its pole."""


class MonteCarloError(RateToolkitError, RuntimeError):
    """Too many Monte-Carlo trials failed."""

    def __init__(self, message, failures=()):
        super().__init__(message)
        self.failures = list(failures)
