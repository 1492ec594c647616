"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A model parameter is non-finite or outside its admissible range."""


class NotErgodicError(ValueError):
    """The perturbation process has no stationary law for these parameters."""


class InconsistentParameterError(ValueError):
    """Parameters lead to an undefined quantity (e.g. a complex threshold)."""


class IntegratorError(RuntimeError):
    """A path integrator produced a state outside its invariant domain."""


class QuadratureError(RuntimeError):
    """A quadrature failed to reach the requested agreement."""


class ConvergenceWarning(RuntimeWarning):
    """Correction-term numerics moved more than the plateau tolerance."""
