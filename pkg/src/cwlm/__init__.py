"""Continuous weak linear measurement of a finite quantum system by N detectors.

Three mutually verifying engines compute the distribution of time-integrated
detector outputs: counting-field evolution of a pseudo-density matrix,
a drift-diffusion solver over output space, and stochastic trajectory
ensembles.  Phenomenological noise/susceptibility data are validated against
the positivity conditions they must satisfy.
"""

from .errors import (
    CFLViolation,
    CwlmError,
    GridTooNarrow,
    HamiltonianMixesEigenbasis,
    IncompatibleGrids,
    LimitNotApplicable,
    NegativeEigenvalue,
    NonCommutingOperators,
    NonHermitianInput,
    NormalizationLoss,
    NumericalGuardError,
    ParseError,
    PositivityLoss,
    SingularDetectorNoise,
    SingularNoise,
    StepTooLarge,
    TruncationTooSmall,
    ValidationFailed,
)
from .numerics import (
    RngStream,
    UniformGrid,
    fourier_quadrature,
    fourier_quadrature_table,
    hermitian_eigendecomposition,
    rk4_step,
)
from .model import (
    MeasurementSetup,
    NoiseData,
    ValidationReport,
    build_big_C,
    lindblad_set,
    minimum_decoherence_margin,
    validate_setup,
)
from .fcs import (
    MeasurementGenerator,
    PseudoDensityField,
    cumulants,
    default_chi_grid,
    evolve_pseudo_density,
    evolve_pseudo_density_field,
    fcs_rhs,
    generating_function,
    output_distribution_fcs,
    stable_dt,
)
from .diffusion import (
    CommutingSolution,
    OutputField,
    commuting_data,
    commuting_marginal,
    commuting_solution,
    dd_rhs,
    evolve_field,
    free_propagator,
    marginal,
)
from .separation import (
    SeparatedSetup,
    build_detector_operators,
    equivalent_generator_check,
    separate,
)
from .stochastic import (
    AuxiliarySystem,
    EnsembleResult,
    TrajectoryState,
    closed_form_updates,
    conditional_map,
    make_oscillator_aux,
    make_qubit_aux,
    run_ensemble,
    sample_outcome,
    trajectory_step,
    verify_relations,
)
from .tables import DistributionTable, ks_statistic, l1_distance
from .cli import compare, fixture_path, load_setup

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
