"""Slow-fast Lienard systems with a nonsmooth critical manifold.

Simulation with splitting-line events, corner and fold bifurcation analysis,
periodic-orbit search and sweeps, invariant-region certificates, and the
Stommel box model.
"""

from .bifurcation import (
    corner_classify,
    eigenpair,
    equilibrium,
    fold_hopf,
    lambda_quantity,
    nonexistence_threshold,
)
from .certificates import build_W, check_inward, confinement_check, subcritical_witness, superexplosion_witness
from .errors import *  # noqa: F401,F403
from .integrator import EventSpec, Trajectory, first_return, integrate, section
from .orbits import (
    classify_orbit,
    find_grazing,
    find_periodic_orbit,
    locate_explosion,
    return_map,
    shadow_compare,
    sweep,
)
from .polynomials import PolyBranch
from .stommel import StommelParams, classify_regime, to_general_form
from .system import SystemSpec, geometry, load_spec, preset, save_spec, validate

__version__ = "0.1.0"
