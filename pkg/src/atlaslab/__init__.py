"""atlaslab: a simulation lab for rank-based (Atlas) market models.

Simulates Atlas and first-order rank-based diffusions, estimates the full
family of discrete stochastic integrals (Ito, forward, backward,
Stratonovich, covariation, local time), and verifies the Stratonovich
representation of rank processes together with the structural/trading
decomposition of functionally generated portfolios via coupled-grid
convergence studies.
"""

from .config import EXPERIMENTS, RunConfig, load_config, parse_config
from .errors import AtlasLabError, EvaluationError, NumericalError, ValidationError
from .integrals import (
    IntegralResult,
    backward_integral,
    covariation,
    forward_integral,
    ito_integral,
    local_time_residual,
    sgn_series,
    stratonovich_integral,
)
from .models import (
    AtlasParams,
    BrownianParams,
    RankBasedParams,
    simulate_atlas,
    simulate_brownian,
    simulate_rank_based,
)
from .paths import (
    PathEnsemble,
    RngSpec,
    TimeGrid,
    brownian_ensemble,
    build_grid,
    coarsen_increments,
    gaussian_increments,
)
from .portfolios import (
    DecompositionReport,
    GeneratingFunction,
    WeightSeries,
    decompose,
    generated_weights,
    market_weights,
    relative_wealth,
    structural_process,
)
from .ranks import (
    CoincidenceStats,
    RankFrame,
    coincidence_stats,
    occupation_indicator,
    rank_permutation,
    ranked_ensemble,
)
from .runner import emit_csv, emit_summary, run
from .verify import (
    CLAIMS,
    ConvergenceReport,
    ResidualSeries,
    convergence_study,
    decomposition_residuals,
    rank_reconstruction,
    verify_abs_representation,
    verify_decomposition,
    verify_minmax,
    verify_pair_difference,
    verify_rank_representation,
)

__version__ = "0.1.0"
