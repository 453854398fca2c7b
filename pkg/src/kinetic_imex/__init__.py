"""IMEX multistep solvers for stiff kinetic equations (BGK and penalized Boltzmann)."""

from .bgk import CollisionFrequencyPolicy, implicit_relaxation_solve, q_bgk
from .integrator import ProblemSpec, StepHistory, bootstrap, imex_step, run
from .kinetic import MomentSet, SpatialGrid, VelocityGrid, entropy, maxwellian, moments
from .schemes import ImexMultistepScheme, builtin_schemes, get_scheme, order_residuals
from .transport import TransportConfig, advection_derivative

__all__ = [
    "CollisionFrequencyPolicy", "ImexMultistepScheme", "MomentSet", "ProblemSpec", "SpatialGrid",
    "StepHistory", "TransportConfig", "VelocityGrid", "advection_derivative", "bootstrap",
    "builtin_schemes", "entropy", "get_scheme", "imex_step", "implicit_relaxation_solve",
    "maxwellian", "moments", "order_residuals", "q_bgk", "run",
]
