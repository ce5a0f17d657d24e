"""Forecasts of the next interevent time.

Given the interevent history, the next observation is a mixture of the
state-specific exponentials with weights ``c_s = P(X_{t+1}=s | y_1..y_t)``.
When ``w`` days have already passed without an event the weights are tilted
by the survival factors, ``d_s(w) ~ c_s exp(-w / lambda_s)``, and the
remaining wait is again an exponential mixture.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .catalog import ObservationSequence
from .errors import ConfigurationError, DomainError
from .hmm import HmmParams, forward_filter

WEIGHT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class StateWeights:
    weights: np.ndarray
    elapsed: float = 0.0
    history_len: int = 0

    def __post_init__(self):
        wts = np.array(self.weights, dtype=float).reshape(-1)
        if np.any(wts < 0) or abs(wts.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"state weights must be a probability vector, got {wts}")
        if not self.elapsed >= 0:
            raise ValueError(f"elapsed time must be >= 0, got {self.elapsed}")
        wts.setflags(write=False)
        object.__setattr__(self, "weights", wts)


@dataclass(frozen=True)
class ForecastQuery:
    horizon_days: float
    region: int | None = None

    def __post_init__(self):
        if not self.horizon_days > 0:
            raise ValueError(f"forecast horizon must be > 0, got {self.horizon_days}")


class WaitingTimeMoments(NamedTuple):
    mean: float
    variance: float
    paper_variance: float

    @property
    def variance_gap(self) -> float:
        """``variance - paper_variance``; zero only for a degenerate mixture."""
        return self.variance - self.paper_variance


def next_state_weights(params: HmmParams, filtered: np.ndarray) -> np.ndarray:
    """One-step prediction ``sum_r filtered[..., r] * a_rs``, renormalised."""
    c = np.asarray(filtered) @ params.trans
    return c / c.sum(axis=-1, keepdims=True)


def post_event_weights(params: HmmParams, obs: ObservationSequence) -> StateWeights:
    """Weights immediately after the last event of ``obs``.

    An empty history gives the initial distribution.
    """
    if len(obs) == 0:
        return StateWeights(params.pi, 0.0, 0)
    alpha, _ = forward_filter(params, obs)
    return StateWeights(next_state_weights(params, alpha[-1]), 0.0, len(obs))


def tilt_weights(weights: np.ndarray, means: np.ndarray, elapsed) -> np.ndarray:
    """Survival-tilted weights for one or many elapsed times.

    ``weights`` is ``(..., S)`` and ``elapsed`` broadcasts against its leading
    shape.  Works in log space so very long quiet periods never give 0/0.
    """
    weights = np.asarray(weights, dtype=float)
    elapsed = np.asarray(elapsed, dtype=float)[..., None]
    with np.errstate(divide="ignore"):
        logw = np.log(weights) - elapsed / means
    logw -= logw.max(axis=-1, keepdims=True)
    d = np.exp(logw)
    return d / d.sum(axis=-1, keepdims=True)


def scheduled_weights(base: StateWeights, params: HmmParams, elapsed: float) -> StateWeights:
    if not elapsed >= 0 or not math.isfinite(elapsed):
        raise DomainError(f"elapsed time must be finite and >= 0, got {elapsed}")
    if elapsed == 0:
        return StateWeights(base.weights, 0.0, base.history_len)
    d = tilt_weights(base.weights, params.means, elapsed)
    return StateWeights(d, float(elapsed), base.history_len)


def _region_factor(params: HmmParams, region: int | None):
    if region is None:
        return 1.0
    if not params.has_regions:
        raise ConfigurationError("region-resolved forecast requested from a time-only model")
    if not 1 <= region <= params.n_regions:
        raise ConfigurationError(f"region {region} outside 1..{params.n_regions}")
    return params.region_dist[:, region - 1]


def interval_probabilities(weights: np.ndarray, params: HmmParams, horizon: float,
                           region: int | None = None) -> np.ndarray:
    """Vectorised event-within-``horizon`` probability for rows of weights."""
    per_state = -np.expm1(-horizon / params.means) * _region_factor(params, region)
    return np.asarray(weights) @ per_state


def forecast_probability(weights: StateWeights, params: HmmParams,
                         query: ForecastQuery | float) -> float:
    """Probability of the next event within the query horizon (and region).

    Without a region on a location model this is the all-region probability.
    """
    if not isinstance(query, ForecastQuery):
        query = ForecastQuery(float(query))
    return float(interval_probabilities(weights.weights, params, query.horizon_days, query.region))


def forecast_density(weights: StateWeights, params: HmmParams, y: float,
                     region: int | None = None) -> float:
    if y < 0:
        raise DomainError(f"waiting time must be >= 0, got {y}")
    lam = params.means
    per_state = np.exp(-y / lam) / lam * _region_factor(params, region)
    return float(weights.weights @ per_state)


def waiting_time_moments(weights: StateWeights, params: HmmParams) -> WaitingTimeMoments:
    """Mean and variance of the remaining wait.

    ``variance`` is the exponential-mixture variance
    ``2 sum d lambda^2 - (sum d lambda)^2``; ``paper_variance`` is the
    second-moment-only expression ``sum d lambda^2``, which agrees with it
    only when all weight sits on one state.
    """
    d, lam = weights.weights, params.means
    mean = float(d @ lam)
    second = float(d @ lam**2)
    return WaitingTimeMoments(mean, 2.0 * second - mean**2, second)


def expected_wait_curve(base: StateWeights, params: HmmParams,
                        w_grid: Sequence[float]) -> list[tuple[float, float]]:
    w = np.asarray(w_grid, dtype=float)
    if np.any(w < 0) or np.any(np.diff(w) < 0):
        raise DomainError("w_grid must be non-negative and ascending")
    d = tilt_weights(base.weights, params.means, w)
    means = d @ params.means
    return [(float(a), float(m)) for a, m in zip(w, means)]


def expected_wait_slope(base: StateWeights, params: HmmParams, elapsed: float) -> float:
    """Derivative of the expected remaining wait with respect to elapsed time.

    Equals ``sum_{r<s} d_r d_s (lambda_s - lambda_r)^2 / (lambda_r lambda_s)``,
    which is positive whenever two states with distinct means carry weight.
    """
    d = scheduled_weights(base, params, elapsed).weights
    lam = params.means
    diff2 = (lam[:, None] - lam[None, :]) ** 2 / (lam[:, None] * lam[None, :])
    return float(0.5 * d @ diff2 @ d)
