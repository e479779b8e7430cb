"""Exception hierarchy.

Three broad classes matter to callers: configuration problems
(ConfigError), numeric failures (NumericError and subclasses), and I/O
problems (left to the builtin OSError).  The CLI maps these to exit
codes 1, 2 and 3.
"""


class NslabError(Exception):
    """Base class for all library errors."""


class ConfigError(NslabError):
    """Invalid or inconsistent run configuration."""


class ExpressionError(ConfigError):
    """Expression parse error; carries a 1-based (line, column) position."""

    def __init__(self, message, line=1, column=0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class NumericError(NslabError):
    """Base class for runtime numeric failures."""


class DomainError(NumericError):
    """Point outside the chart's declared domain box."""


class DegenerateMetricError(NumericError):
    """Metric matrix singular or not positive definite."""


class ShapeError(NumericError):
    """Dimension mismatch between chart and supplied components."""


class EvaluationError(NumericError):
    """A user expression hit a math-domain failure (log(0), 1/0, ...)."""


class AnisotropyError(NumericError):
    """Symbol's Lagrange function is not fiberwise spherically symmetric."""


class LegendreInversionError(NumericError):
    """Momentum Hessian singular: Legendre map not invertible here."""


class NewtonConvergenceError(NumericError):
    """Damped Newton failed to converge; carries the final residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class VelocityRangeError(NumericError):
    """Velocity root left the declared range while inverting u -> v."""


class DegenerateSlopeError(NumericError):
    """W' = 0 where a force or inversion needs it nonzero."""


class TransversalityError(NumericError):
    """|Omega| fell below the floor; carries the offending state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class IntegrationError(NumericError):
    """Stepper failure; carries the time stamp and last good state."""

    def __init__(self, message, time=None, last_state=None):
        super().__init__(message)
        self.time = time
        self.last_state = last_state


class SingularParametrizationError(NumericError):
    """Front tangent frame has rank below the hypersurface dimension."""


class OrientationError(NumericError):
    """Front normals cannot be oriented consistently from the seed."""


class NoAdmissibleNuError(NumericError):
    """No momentum scale with H(x, nu*n) = 0 on the requested branch."""


class IrregularDataError(NumericError):
    """Front data violate a regularity condition (nu or transversality)."""


class FrontShiftError(NumericError):
    """One or more per-sample integrations failed during a front shift.

    ``failures`` is a list of (sample_index, exception) pairs and
    ``partial`` a dict sample_index -> Trajectory for the samples that
    completed.
    """

    def __init__(self, message, failures=(), partial=None):
        super().__init__(message)
        self.failures = list(failures)
        self.partial = partial if partial is not None else {}
