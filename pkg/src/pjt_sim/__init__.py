"""Semiclassical dynamics through a three-fold pseudo Jahn-Teller crossing.

Subpackages cover the algebra of the 3x3 linear-coupling potential
(pjt_model), classical transport on its adiabatic surfaces with crossing
detection (classical_dynamics), the stationary scattering problem of the
reduced normal form and its closed-form limit (scattering), a weighted
particle surface-hopping propagator (surface_hopping), a Fourier split-step
reference solver (grid_solver), and a small experiment front end
(config, cli).
"""

from .errors import (
    PjtSimError,
    SingularPoint,
    DegenerateReference,
    ZeroMomentum,
    OutOfRange,
    SingularityReached,
    ToleranceNotMet,
    BoxTooSmall,
    SchemaError,
)
from .pjt_model import (
    Mode,
    MODE_ORDER,
    potential_matrix,
    eigenvalues,
    projector,
    eigenvector,
    transition_coefficient,
    branching_matrix,
    gauge_matrices,
)
from .classical_dynamics import (
    PhaseState,
    CrossingEvent,
    IntegratorSettings,
    energy,
    wedge_invariant,
    integrate,
    detect_crossing,
)
from .scattering import (
    ScatteringSettings,
    gamma_phase,
    phase_phi,
    analytic_s_matrix,
    integrate_system,
    numerical_s_matrix,
    wedge_solution,
    mode_component_map,
    branching_consistency,
    amplitude_a,
    amplitude_b,
)
from .surface_hopping import (
    Particle,
    HoppingConfig,
    Ensemble,
    PopulationSeries,
    sample_initial_ensemble,
    hop_split,
)
from .surface_hopping import run as run_hopping

__version__ = "0.1.0"
