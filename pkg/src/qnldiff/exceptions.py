"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, numerical instability with 3, and failed property checks with 1.
"""


class ConfigurationError(ValueError):
    """Invalid grid/kernel/study configuration (e.g. horizons that do not
    divide, a horizon that is not an integer multiple of the mesh size)."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class KernelEvaluationError(ValueError):
    """Pointwise kernel evaluation at a singular point (s = 0)."""


class InstabilityError(RuntimeError):
    """Explicit time stepping produced non-finite values or violates the
    CFL bounds for the assembled operator."""
