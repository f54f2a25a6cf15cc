"""Weak values of quantum operators inferred from strong measurement statistics.

Submodules
----------
state       grids, wavefunctions, potentials and spectral derivatives
evolution   split-operator propagation with conservation monitors
weak        weak values from density/flux/commutator expectations
tof         time-of-flight protocol for the momentum weak value
bohmian     polar fields, quantum potential and Bohmian trajectories
spin        path-spin interferometer model
cli         batch command line (``strongweak run|verify|scan``)
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .state import (CoherentStateSpec, Grid1D, PhysicalParams, Potential,  # noqa: F401
                    Wavefunction, prepare_coherent_state)
from .evolution import EvolutionRecord, PropagatorConfig, propagate  # noqa: F401
from .weak import (FiniteState, PositionPoint, WeakValue, build_triple,  # noqa: F401
                   weak_value_exact, weak_value_from_strong)
