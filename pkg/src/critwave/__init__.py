"""Radial solver and diagnostics for the 2D wave equation with exponential nonlinearity.

u_tt - Lap u + N(u) = 0 with N(u) = u (e^{u^2} - 1 - u^2) and its variants,
in radial symmetry on a staggered grid, together with the Kelvin-inverted
frame and scattering profiles.
"""

from ._backend import BACKEND, available as available_backends
from .conformal import (ConformalBalance, ConformalField, ConeLedger, HyperboloidSpec,
                        SliceCollector, cone_balance, cone_integrals, evolve_conformal,
                        kelvin_map, remainder_sign_probe, transform_record)
from .diagnostics import (AnnulusMonitor, EnergyBreakdown, NLedger, StrichartzMonitor,
                          energy, pair_norm)
from .evolve import (InitialDataSpec, IntegratorConfig, SolverAbort, evolve_record,
                     evolve_state, hankel_propagate, initial_state, step)
from .grid import RadialField, RadialGrid, SpacetimeRecord, WaveState, make_grid
from .nonlinearity import (SaturationError, SeriesPolicy, Variant, check_pointwise_bound,
                           eval_f, eval_N, eval_P, eval_potential_density)
from .scatter import DecayCurve, ScatteringProfile, decay_curve, extract_profile

__all__ = [
    "BACKEND", "available_backends",
    "ConformalBalance", "ConformalField", "ConeLedger", "HyperboloidSpec", "SliceCollector",
    "cone_balance", "cone_integrals", "evolve_conformal", "kelvin_map",
    "remainder_sign_probe", "transform_record",
    "AnnulusMonitor", "EnergyBreakdown", "NLedger", "StrichartzMonitor", "energy", "pair_norm",
    "InitialDataSpec", "IntegratorConfig", "SolverAbort", "evolve_record", "evolve_state",
    "hankel_propagate", "initial_state", "step",
    "RadialField", "RadialGrid", "SpacetimeRecord", "WaveState", "make_grid",
    "SaturationError", "SeriesPolicy", "Variant", "check_pointwise_bound", "eval_f", "eval_N",
    "eval_P", "eval_potential_density",
    "DecayCurve", "ScatteringProfile", "decay_curve", "extract_profile",
]

__version__ = "0.1.0"
