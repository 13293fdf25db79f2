"""Genotype-density simulation for two quantitative alleles.

Modules:
    selector      polynomial selection expressions, derivatives, evaluation
    grid          grids, trapezoidal quadrature, marginals, field CSV
    engine        the nonlocal PDE, RK4 stepping, positivity floor
    asymptotics   Hopf-Cole potential, nu ratio, additivity defect, BV rate
    canonical     history-dependent ODE for the dominant alleles
    harness       configuration, presets, runs, sweeps, CLI
"""

from .errors import (ConfigError, DomainError, EvalError, ExprSyntaxError,
                     SingularityError, StabilityError, StateError)
from .grid import Field2D, GridSpec, marginals, quad2
from .selector import SelectionFn, bind, differentiate, evaluate, parse_selection, to_source

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DomainError", "EvalError", "ExprSyntaxError",
    "SingularityError", "StabilityError", "StateError",
    "Field2D", "GridSpec", "marginals", "quad2",
    "SelectionFn", "bind", "differentiate", "evaluate", "parse_selection", "to_source",
]
