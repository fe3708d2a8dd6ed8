"""complin: classify and solve two-dimensional second-order ODE systems
through their complex scalar reductions.

The package analyzes systems f1'' = omega1, f2'' = omega2: it checks the
Cauchy-Riemann coupling of the right-hand sides, extracts cubic-semilinear
coefficients and evaluates the linearizability constraints, computes Lie
point symmetries, and solves linearizable systems by transforming the
associated complex scalar ODE, verifying everything against direct
numerical integration.
"""

__version__ = "0.1.0"


class ComplinError(Exception):
    """Base class for all errors raised by this package."""
