"""Exact finite reduction of 1D semilinear problems and isospectral chains.

The package reduces semilinear elliptic and wave equations to finite
spectral systems via a tail contraction fixed point, reconstructs the
unique persymmetric spring-mass chain sharing the retained spectrum, and
compares the two along frequencies, trajectories, and energies.
"""

__version__ = "0.1.0"

from . import nonlinearity
from .chain_dynamics import (
    ChainState,
    ModalMap,
    TrajectoryRecord,
    build_modal_map,
    modal_compare,
    simulate_chain,
    total_energy,
)
from .config import RunConfig, load_config, parse_config
from .errors import (
    CapacityError,
    ConfigError,
    DegenerateSpectrumError,
    DomainError,
    FiniteProxyError,
    NonContractionError,
    NonresonanceError,
    ReconstructionError,
    ResolutionError,
    SolverError,
)
from .inverse_spectral import (
    JacobiMatrix,
    Spectrum,
    SpringMassChain,
    WeightVector,
    chain_from_spectrum,
    chain_to_jacobi,
    eigen_tridiagonal,
    equal_mass_chain_spectrum,
    jacobi_to_chain,
    lanczos_reconstruct,
    persymmetric_weights,
    string_spectrum,
)
from .pipeline import RunReport, run_pipeline
from .reduction import (
    ReductionProblem,
    ReductionResult,
    apply_nemitski,
    bifurcation_residual,
    functional_I_and_N,
    functional_J,
    reconstruct_full_solution,
    reduced_rhs_phi,
    solve_static_reduced,
    solve_wave_reduced,
    static_problem,
    tail_fixed_point,
    wave_problem,
)
from .report import emit_report
from .spectral import (
    Geometry,
    ModeSet,
    OperatorSymbol,
    SineBasis,
    SpaceTimeField,
    WaveBasis,
    apply_inverse_operator,
    dalembert_symbol,
    select_cutoff,
    split_field,
    string_eigenpair,
    synthesize,
)
