"""Numerical verification of controllability for degenerate/singular wave equations.

The equation is ``u_tt - (x^alpha u_x)_x - mu x^(alpha-2) u = 0`` on ``(0, 1)``
with ``alpha in [0, 2) \\ {1}`` and ``mu <= (1 - alpha)^2 / 4``, observed or
controlled through the boundary derivative at ``x = 1``.
"""

from .control import (
    ControlSignal,
    FinalData,
    Gramian,
    HUMResult,
    backward_trace,
    duality_check,
    forward_controlled,
    gramian_apply,
    hum_solve,
    observability_constant_sweep,
)
from .config import ExperimentConfig, parse_config
from .dynamics import (
    TraceSeries,
    Trajectory,
    WaveState,
    energy,
    lemega_identity_residual,
    multiplier_identity_residual,
    simulate,
    step,
)
from .errors import *  # noqa: F401,F403
from .families import TestFunctionFamily
from .grid import GridFunction, GridSpec, build_grid, weighted_integral
from .hardy import Parameters, hardy_functional, mu_critical
from .operator import DiscreteOperator, apply, assemble, eigen

__version__ = "0.1.0"
