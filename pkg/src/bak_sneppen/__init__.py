"""Simulation and verification toolkit for the discrete Bak-Sneppen model."""

__version__ = "0.1.0"

from .model_core import (
    PotentialParams,
    RefinedParams,
    RingConfig,
    StepOutcome,
    ZeroSpan,
    apply_move,
    detect_flip,
    make_rng,
    minimal_arcs,
    potential,
    refined_potential,
    step,
    zero_span,
)
from .drift_analysis import (
    DriftReport,
    EndCase,
    boundary_drift,
    drift_closed_form,
    drift_enumerate,
    monotonicity_check,
    optimize_refined,
    solve_threshold,
    worst_drift,
)
from .exact_solver import (
    augmented_stationary,
    build_kernel,
    exhaustive_lemma_check,
    mu_exact,
    stationary,
)
from .mc_engine import (
    SimulationPlan,
    TrajectoryStats,
    conditional_drift_probe,
    estimate_nu,
    scan_critical,
    simulate,
)
from .bound_lab import (
    MomentBoundConstants,
    RenewalTrace,
    SyntheticWalk,
    cesaro_bound_check,
    check_geometric_domination,
    moment_bound_constants,
    renewal_times,
    trace_renewals,
    verify_fmm_on_walk,
)
