"""Spectral-Galerkin stochastic PDE integration on per-level time grids.

The package integrates parabolic stochastic evolution equations whose drift
operator and noise covariance share one eigenbasis, using the drift-implicit
Euler-Maruyama scheme: each retained noise direction keeps its own uniform
time grid and the solver steps through the merged, generally non-uniform,
union of all of them.  Alongside the schemes it ships the verification
machinery for the discrete maximal-regularity estimate the construction
satisfies: propagator weight sums with their 2/lambda bound, exact
second-moment oracles for state-independent noise, and Monte Carlo
estimation with standard-error gates.
"""

from .analysis import (
    InitWeightReport,
    MomentTable,
    RegularityReport,
    continuous_second_moments,
    exact_convolution_moments,
    exact_regularity_report,
    exact_second_moments,
    init_weight_check,
    maxreg_lhs,
    maxreg_rhs,
    mc_regularity_experiment,
)
from .config import RunConfig, canonical_dict, config_digest, parse_config, parse_config_file
from .diffusion import (
    AdditiveDiagonal,
    CallbackOperator,
    DiffusionBoundsReport,
    DiffusionOperator,
    LinearDiagonal,
    check_diffusion_bounds,
    hs_norm,
)
from .errors import (
    AllPathsFailed,
    DimensionMismatch,
    EmptyLevels,
    GridMismatch,
    IndexOutOfRange,
    NegativeCovariance,
    NegativeExponent,
    NonFiniteState,
    NonMonotoneSpectrum,
    NonUniformInput,
    ParseError,
    ReversedWindow,
    SpectralSDEError,
    StateDependentDiffusion,
    TruncationTooLarge,
    ValidationError,
    ZeroSteps,
)
from .grids import (
    LevelGrids,
    MergedGrid,
    QuasiUniformGrids,
    build_level_grids,
    explicit_level_grids,
    levels_in_window,
    merge_grids,
    quasi_uniformity,
)
from .noise import (
    LevelIncrements,
    NoiseStream,
    aggregate_level_increments,
    path_increments,
    restrict_merged_increments,
    sample_merged_increments,
    wiener_regularity_coefficient,
)
from .resolvent import (
    ResolventTable,
    build_resolvent_table,
    resolvent_factor,
    resolvent_factors,
    resolvent_interpolant,
    weight_sum,
    weight_sum_modes,
)
from .solver import (
    SolverInput,
    Trajectory,
    discrete_stochastic_convolution,
    run_convolution,
    run_recursive,
    run_uniform,
)
from .spectrum import (
    Eigensystem,
    PowerLawSpec,
    fractional_norm,
    fractional_weights,
    make_eigensystem,
    project,
)

__version__ = "0.1.0"
