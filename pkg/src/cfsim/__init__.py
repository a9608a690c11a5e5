"""Cell-free massive MIMO downlink precoding simulator with delayed CSI sharing.

Builds per-drop large-scale state, samples temporally correlated channel
pairs, applies optimal two-stage team precoding and four baselines under
their per-AP information constraints, and scores them by team MSE and
hardening-bound ergodic rates.
"""

from .channel import (
    AgingModel,
    ChannelPair,
    EnsembleTooLarge,
    FiniteEnsemble,
    NegativeAutocorrelation,
    clarke_autocorrelation,
    finite_toy_ensemble,
    sample_conditional,
    sample_pair,
)
from .evaluation import (
    EmptySampleSet,
    InsufficientSamples,
    MomentAccumulator,
    RateMoments,
    RateRecord,
    aggregate_cdf,
    estimate_rate_moments,
    mse_objective,
    sinr_and_rate,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    SeedPath,
    config_from_dict,
    derive_stream,
    load_config,
    run_experiment,
    write_cdf_csvs,
    write_rates_csv,
)
from .precoding import (
    SCHEMES,
    PrecoderSet,
    SingularStage,
    TeamStages,
    build_precoder,
    centralized_precoder,
    estimate_pi,
    local_mmse_stage,
    local_tmmse_precoder,
    naive_precoder,
    solve_team_stages,
    structure_aware_precoder,
    team_mmse_precoder,
)
from .scenario import (
    CholeskyFailure,
    NetworkConfig,
    NonSquareApCount,
    Scenario,
    build_scenario,
    channel_gain_db,
    fractional_power_allocation,
    noise_power_dbm,
    place_aps,
    shadow_covariance,
)

__version__ = "0.1.0"
