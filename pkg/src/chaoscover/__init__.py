"""Waiting times for the chaos game to become delta-dense in a self-similar set."""

from .chain import (
    BoundsReport,
    Chain,
    HittingProfile,
    build_chain,
    exact_cover_time,
    hitting_times,
    is_irreducible,
    matthews_lower,
    matthews_upper,
    mc_cover_time,
    theta_bound,
    verify_stationary,
)
from .chaos import (
    CoverTracker,
    Trajectory,
    default_net,
    estimate_mean_waiting,
    paired_sandwich,
    run_step,
    symbolic_waiting_time_sample,
    waiting_time_sample,
)
from .config import load_config, parse_config
from .errors import (
    BudgetExceededError,
    CensoredSampleError,
    ChaosCoverError,
    InvalidInputError,
    NumericError,
)
from .experiments import (
    FitResult,
    SweepRow,
    TheoryPrediction,
    bounds_report,
    fit_exponent,
    render_image,
    run_sweep,
    theory_prediction,
)
from .ifs import (
    IfsSystem,
    Similitude,
    apply_word,
    diameter_estimate,
    exponent_t,
    scalar_report,
    sierpinski,
    similarity_dimension,
)
from .partition import (
    Partition,
    ReferenceNet,
    Word,
    build_net,
    build_partition,
    length_bounds,
    successor,
    verify_markov_property,
)

__version__ = "0.1.0"
