"""Topological phonon bands of trapped ions on a honeycomb microtrap array.

Simulation and analysis of the quadratic phonon model with broken
time-reversal symmetry: long-range dipolar hopping from the Coulomb
expansion, band structures and Chern numbers, edge modes and their disorder
robustness, driven phonon densities, and band-flatness maps.

Lengths are in units of the lattice constant d; energies in units of the
renormalized trap frequency omega_tilde_x.
"""
from .backend import BACKEND_NAME, COMPILED
from .errors import ConfigError, GapClosedError, NumericalError, RefineGridError
from .lattice import (
    NN_DISTANCE,
    CouplingMatrix,
    Geometry,
    Lattice,
    Orientation,
    Site,
    boundary_shell,
    build_lattice,
    coulomb_coupling,
)
from .hamiltonian import (
    DerivedParams,
    DisorderSpec,
    HamiltonianMatrix,
    InteractionResult,
    ModelParams,
    PhysicalParams,
    allowed_kx,
    apply_disorder,
    assemble_real_space,
    bloch_hamiltonian,
    cylinder_hamiltonian,
    interaction_strength,
    map_physical_params,
    write_triplets,
)
from .spectra import (
    GROUPING_TOL,
    Bands,
    FlatnessMap,
    FlatnessResult,
    GapWindow,
    Spectrum,
    band_gaps,
    band_structure,
    eigensolve,
    flatness,
    flatness_map,
    group_bands,
)
from .topology import ChernResult, band_chern_numbers, chern_fhs, chern_tknn
from .edges import (
    BranchCrossing,
    EdgeMode,
    EdgeModeSet,
    LocalizationProfile,
    RobustnessReport,
    bulk_gap_windows,
    counter_propagating_pairs,
    disorder_robustness,
    edge_velocity,
    find_edge_modes,
    localization_profile,
)
from .dynamics import (
    DensityField,
    DriveSpec,
    drive_response,
    drive_response_ode,
    normalized_density,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
