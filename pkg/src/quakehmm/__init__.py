"""Hidden Markov models with exponential interevent-time emissions for
earthquake forecasting."""

__version__ = "0.1.0"

from .catalog import (
    Catalog,
    Event,
    ObservationSequence,
    RegionPartition,
    assign_regions,
    compute_principal_axes,
    load_catalog,
    to_observations,
)
from .estimation import FitConfig, FitResult, baum_welch_step, fit, sort_states
from .evaluation import (
    DailyForecast,
    EvalConfig,
    GroupSummary,
    export_series,
    run_rolling_forecasts,
    summarize,
)
from .forecasting import (
    ForecastQuery,
    StateWeights,
    expected_wait_curve,
    forecast_density,
    forecast_probability,
    post_event_weights,
    scheduled_weights,
    waiting_time_moments,
)
from .hmm import HmmParams, Posteriors, Trellis, emission_density, forward_backward, posteriors
from .simulation import (
    SimConfig,
    enumerate_likelihood,
    enumerate_next_state_posterior,
    simulate,
)
