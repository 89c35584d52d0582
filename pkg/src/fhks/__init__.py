"""Fractional-diffusion chemotaxis conservation law on rectangles with Neumann boundaries."""

from .chemo import ChemoSolution, fractional_mean, mass_relation_residual, solve_chemo, solve_daper, velocity_bound_check
from .config import ConfigError, RunManifest, make_initial_data, parse_config, render_config
from .diagnostics import (
    DefectSeries,
    DiagnosticsRecord,
    Entropy,
    KineticField,
    basic_diagnostics,
    conservation_residual,
    defect_sweep,
    entropy_balance_residual,
    entropy_pair,
    kinetic_f,
    kruzhkov_residual,
    layer_cake_residual,
    linear_entropy,
    quadratic_entropy,
    rho_identity_residual,
)
from .domain import (
    DomainError,
    DomainSpec,
    EigenBasis,
    FaceField,
    GridField,
    SpectralField,
    build_basis,
    gradient,
    inner_product,
    to_grid,
    to_spectral,
)
from .evolution import (
    NonContractionError,
    NumericalFailure,
    SimConfig,
    SimState,
    Trajectory,
    daper_run,
    duhamel_picard,
    numerical_flux,
    run,
    step,
)
from .io import read_snapshot, write_series, write_snapshot
from .operators import (
    FracParams,
    MeanNotZeroError,
    SpectralMultiplier,
    apply,
    dense_oracle_power,
    make_multiplier,
    semigroup_fractional_oracle,
)
from .orchestrate import check_suite, run_manifest, sweep

__version__ = "0.1.0"
