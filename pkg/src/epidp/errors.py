"""Exception types shared across the package.

The split mirrors the failure contracts of the public operations: bad
constructor/argument values raise ``ParameterError``, out-of-range state or
empty inputs raise ``DomainError``, non-finite intermediate results raise
``EvaluationError``, and so on. All inherit from ``EpidpError`` so callers can
catch the package's failures in one clause.
"""


class EpidpError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(EpidpError, ValueError):
    """A numeric parameter violates its constraint (e.g. scale <= 0)."""


class DomainError(EpidpError, ValueError):
    """An argument lies outside the operation's domain (state off-grid, empty input)."""


class ShapeMismatchError(EpidpError, ValueError):
    """Two grid-based objects that must share a grid do not."""


class EvaluationError(EpidpError, ArithmeticError):
    """A user-supplied function returned a non-finite value; message names the point."""


class ModelError(EpidpError, ValueError):
    """A stage model is inconsistent (empty feasible interval, bad coefficients)."""


class SpecError(EpidpError, ValueError):
    """A model specification fails its structural checks (non-convex storage cost, ...)."""


class SingularRegressorError(EpidpError, ValueError):
    """Least-squares regressor sequence is constant; the fit is not identified."""


class NonIntegrableReferenceError(EpidpError, ValueError):
    """A deterministic reference solution was requested for a non-integrable distribution."""


class EnvelopeError(EpidpError, ArithmeticError):
    """A bound-envelope series failed to converge numerically."""


class ConfigError(EpidpError, ValueError):
    """An experiment configuration file is invalid; message carries line/key info."""
