"""Multilevel surrogate-minimization solvers for 2D ptychographic phase retrieval."""

from .errors import ConfigError, DimensionError, DomainError, NumericalGuardError
from .fields import RegionIndex, embed_add_region, extract_region, prolong, restrict
from .levels import LevelStack, build_level_stack, downsample_object, downsample_rew
from .metrics import MetricRow, check_stop, compute_metrics
from .simulate import (
    Dataset,
    ScanPlan,
    add_poisson_noise,
    load_grayscale_object,
    make_dataset,
    make_synthetic_object,
    make_zone_plate_probe,
    scan_positions,
    simulate_intensities,
)
from .solvers import (
    RunLog,
    SolverConfig,
    exact_surrogate_step,
    initial_object,
    lbfgs_run,
    magpie_run,
    magps_update,
    rpie_region_update,
    rpie_run,
    run_solver,
)
from .surrogate import (
    PhaseCache,
    dft2,
    global_objective,
    idft2,
    region_gradient,
    region_objective,
    revised_exit_wave,
    surrogate_gradient,
    surrogate_objective,
)

__version__ = "0.1.0"
