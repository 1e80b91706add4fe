"""Fibre-wise solver and diagnostics for the diagonal-kernel coagulation equation.

Modules: ``geometry`` (parameters, phases, changes of variables), ``profile``
(stationary profile), ``fibre`` (fibre ODE chains with jumps), ``diagnostics``
(Lyapunov functional and distances), ``oracle`` (upwind grid solver),
``initdata``, ``experiments``, ``plots`` and ``cli``.
"""

from .geometry import ModelParams
from .profile import StationaryProfile, build_profile, shoot_profile, sigma_root
from .fibre import FibreBundle, FibreState, evolve, evolve_bundle, init_fibre
from .diagnostics import lyapunov, theorem1_distance

__version__ = "0.1.0"

__all__ = [
    "ModelParams", "StationaryProfile", "build_profile", "shoot_profile", "sigma_root",
    "FibreBundle", "FibreState", "evolve", "evolve_bundle", "init_fibre", "lyapunov", "theorem1_distance",
]
