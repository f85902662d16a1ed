"""Convex-combination IMEX Runge-Kutta schemes with certified TVD bounds.

Submodules
----------
tableaux   Butcher tableau pairs and order conditions.
certify    Convex-stage certificates and CFL bounds.
stepper    Convex and plain IMEX steppers.
mood       A posteriori order-decrement cascade.
advection  Scalar two-speed advection test problem.
euler2d    Isentropic Euler equations on Cartesian grids.
metrics    Error norms and convergence tables.
optimize   Multistart tableau search.
cli        Command line front end.
"""
from .certify import (Certificate, ConvexScheme, lambda_max_search, lemma1_bounds,
                      theorem1_certificate, theorem2_certificate)
from .tableaux import ImexTableau, build_tvd3_family, builtin, order_check

__version__ = "0.1.0"

__all__ = ["Certificate", "ConvexScheme", "ImexTableau", "build_tvd3_family", "builtin",
           "lambda_max_search", "lemma1_bounds", "order_check", "theorem1_certificate",
           "theorem2_certificate", "__version__"]
