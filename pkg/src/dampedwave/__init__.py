"""Damped 1D wave equation toolkit built on its characteristic transport system.

Simulates the coupled pair rho = u_x + u_t, xi = u_x - u_t with exact
unit-CFL shifts and an exactly integrated relaxation source, under
Dirichlet, Neumann, or dynamic wall couplings; measures L^p energies,
mass, dissipation, and exponential decay rates; and verifies the
supporting inequalities numerically.
"""

from ._kernels import BACKEND
from .core import (
    ActiveRegion,
    BlowUpError,
    BoundaryKind,
    BoundarySpec,
    ConfigError,
    DampingField,
    FieldEvaluationError,
    Grid,
    GridState,
    SimConfig,
    Splitting,
    constant_field,
    dirichlet,
    indicator_field,
    make_boundary_dynamic,
    neumann,
    sample_field,
    sample_perturbation,
    smoothed_pulse_field,
    tabulated_field,
    validate_field,
    with_standard_perturbation,
    zero_field,
)
from .diagnostics import (
    DecayFitError,
    DecayReport,
    DiagnosticsSeries,
    c0_constant,
    default_fit_window,
    dissipation_increment,
    energy_identity_residual,
    fit_decay,
    lp_norm,
    mass_integral,
    pair_lp_norm,
    shifted_lp_norm,
)
from .solver import (
    RunResult,
    Trajectory,
    apply_boundary,
    run,
    source_substep,
    step,
    transport_substep,
    transport_substep_reversed,
)
from .bridge import (
    QuadratureError,
    WaveState,
    adaptive_midpoint,
    dalembert_reference,
    even_extension,
    odd_extension,
    riemann_from_wave,
    strain_from_displacement,
    trace_derivatives_dalembert,
    wall_anchor_series,
    wave_from_riemann,
)
from .lemmas import (
    GridTooCoarseError,
    InequalityViolationError,
    SampledPath,
    best_gap_constant,
    characteristic_difference_check,
    lem_ineq_bound,
    mean_oscillation_bound,
    monotonicity_gap,
    oscillation_constant,
    rng_for_trial,
    sample_path,
    strip_oscillation_integral,
    trajectory_mp,
    witness_point_search,
)

__version__ = "0.1.0"
