"""Baum-Welch estimation with a multi-start grid over the exponential means.

Every grid start gets ``coarse_iters`` EM updates; the start reaching the
highest likelihood is then iterated until the largest absolute change in any
mean or transition probability drops below ``param_tol``.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .catalog import ObservationSequence
from .errors import (
    DegenerateStateError,
    FitFailureError,
    ImpossibleObservationError,
    InsufficientDataError,
)
from .hmm import HmmParams, expected_transitions, forward_backward, log_likelihood

log = logging.getLogger(__name__)

DEAD_STATE_MASS = 1e-300

TWO_STATE_SHORT = (1.0, 4.0, 7.0, 10.0)
TWO_STATE_LONG = (10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0)
FOUR_STATE_LONG = (10.0, 30.0, 50.0, 70.0)


@dataclass
class FitConfig:
    init_grid: list[list[float]] | None = None
    init_trans: list[list[float]] | None = None
    init_pi: list[float] | None = None
    init_region_dist: list[list[float]] | None = None
    coarse_iters: int = 100
    param_tol: float = 1e-6
    max_iters: int = 10000
    min_lambda: float = 1e-4

    def __post_init__(self):
        if not self.param_tol > 0:
            raise ValueError("param_tol must be positive")
        if self.coarse_iters < 1:
            raise ValueError("coarse_iters must be >= 1")
        if not self.min_lambda > 0:
            raise ValueError("min_lambda must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


@dataclass
class FitResult:
    params: HmmParams
    log_likelihood: float
    iterations: int
    converged: bool
    trace: list[float] = field(default_factory=list)
    start: list[float] | None = None
    start_scores: list[float | None] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "start": self.start,
            "start_scores": self.start_scores,
            "trace": self.trace,
        }


def _em_update(params: HmmParams, obs: ObservationSequence, min_lambda: float = 0.0):
    """One Baum-Welch update; returns the new parameters and the
    log-likelihood of the *old* ones."""
    if len(obs) < 2:
        raise InsufficientDataError("Baum-Welch needs at least 2 observations")
    tr = forward_backward(params, obs)
    gamma = tr.scaled_forward * tr.scaled_backward
    gamma /= gamma.sum(axis=1, keepdims=True)
    mass = gamma.sum(axis=0)
    for s in range(params.n_states):
        if mass[s] < DEAD_STATE_MASS:
            raise DegenerateStateError(s, float(mass[s]))

    xi = expected_transitions(params, obs, tr)
    out_mass = xi.sum(axis=1, keepdims=True)
    trans = np.where(out_mass > 0, xi / np.where(out_mass > 0, out_mass, 1.0), params.trans)

    pi = gamma[0] / gamma[0].sum()
    means = gamma.T @ obs.interevent_times / mass
    means = np.maximum(means, min_lambda)

    q = None
    if params.has_regions:
        R = params.n_regions
        onehot = np.zeros((len(obs), R))
        onehot[np.arange(len(obs)), obs.regions - 1] = 1.0
        q = (gamma.T @ onehot) / mass[:, None]
        q /= q.sum(axis=1, keepdims=True)
    return HmmParams(pi, trans, means, q), tr.log_likelihood


def baum_welch_step(params: HmmParams, obs: ObservationSequence, min_lambda: float = 0.0) -> HmmParams:
    return _em_update(params, obs, min_lambda)[0]


def _max_change(a: HmmParams, b: HmmParams) -> float:
    return float(max(np.abs(a.means - b.means).max(), np.abs(a.trans - b.trans).max()))


def default_grid(n_states: int, obs: ObservationSequence | None = None,
                 config: FitConfig | None = None) -> list[list[float]]:
    """Starting means for a fit.

    Two states use the 4 x 7 grid of (short, long) means.  Four states use
    (short, long, short, long) from {1,4,7,10} x {10,30,50,70} plus the best
    coarse two-state start duplicated across the two halves, which needs
    ``obs``.  Other sizes start from evenly spaced sample quantiles.
    """
    if n_states == 2:
        return [[i, j] for i, j in itertools.product(TWO_STATE_SHORT, TWO_STATE_LONG)]
    if n_states == 4:
        grid = [[i, j, i, j] for i, j in itertools.product(TWO_STATE_SHORT, FOUR_STATE_LONG)]
        if obs is not None and len(obs) >= 2:
            base = config or FitConfig()
            coarse = FitConfig(coarse_iters=base.coarse_iters, param_tol=base.param_tol,
                               min_lambda=base.min_lambda)
            try:
                pair = _best_coarse(obs.without_regions(), 2, coarse)[1].means
                grid.append([pair[0], pair[1], pair[0], pair[1]])
            except FitFailureError:
                pass
        return grid
    if obs is None or len(obs) == 0:
        return [list(np.geomspace(1.0, 70.0, n_states))] if n_states > 1 else [[10.0]]
    y = obs.interevent_times
    qs = np.quantile(y, (np.arange(n_states) + 0.5) / n_states)
    qs = np.maximum(qs, 1e-3) * (1.0 + 1e-3 * np.arange(n_states))
    return [sorted(qs.tolist())]


def _home_regions(n_states: int, n_regions: int) -> np.ndarray:
    return (np.arange(n_states) * n_regions) // n_states


def initial_params(means: Sequence[float], config: FitConfig, n_regions: int | None = None) -> HmmParams:
    n = len(means)
    pi = np.full(n, 1.0 / n) if config.init_pi is None else config.init_pi
    trans = np.full((n, n), 1.0 / n) if config.init_trans is None else config.init_trans
    q = None
    if n_regions is not None:
        if config.init_region_dist is not None:
            q = np.array(config.init_region_dist, dtype=float)
        elif n_regions == 1:
            q = np.ones((n, 1))
        else:
            # bias each state toward a home region so that states sharing a
            # mean are not exchangeable under EM
            q = np.full((n, n_regions), 0.2 / (n_regions - 1))
            q[np.arange(n), _home_regions(n, n_regions)] = 0.8
    return HmmParams.renormalized(pi, trans, np.asarray(means, dtype=float), q)


def _run(params: HmmParams, obs, n_iters: int, config: FitConfig, trace: list[float]):
    """Iterate EM up to ``n_iters`` times; returns (params, converged)."""
    for _ in range(n_iters):
        new, ll = _em_update(params, obs, config.min_lambda)
        trace.append(ll)
        change = _max_change(params, new)
        params = new
        if change < config.param_tol:
            return params, True
    return params, False


def _best_coarse(obs: ObservationSequence, n_states: int, config: FitConfig,
                 grid: list[list[float]] | None = None):
    if grid is None:
        grid = default_grid(n_states, obs, config)
    n_regions = None
    if obs.regions is not None:
        n_regions = int(obs.regions.max())
        if config.init_region_dist is not None:
            n_regions = len(config.init_region_dist[0])
    best = None
    scores: list[float | None] = []
    for k, start in enumerate(grid):
        if len(start) != n_states:
            raise ValueError(f"grid point {k} has {len(start)} means, expected {n_states}")
        trace: list[float] = []
        try:
            params = initial_params(start, config, n_regions)
            params, converged = _run(params, obs, config.coarse_iters, config, trace)
            ll = log_likelihood(params, obs)
        except (DegenerateStateError, ImpossibleObservationError) as exc:
            log.debug("grid start %d %s discarded: %s", k, start, exc)
            scores.append(None)
            continue
        scores.append(ll)
        if best is None or ll > best[0]:
            best = (ll, params, converged, trace, list(map(float, start)))
    if best is None:
        raise FitFailureError(f"all {len(grid)} grid starts degenerated")
    return best[0], best[1], best[2], best[3], best[4], scores


def fit(obs: ObservationSequence, n_states: int, config: FitConfig | None = None) -> FitResult:
    """Fit an ``n_states`` HMM to ``obs``; the result's states are canonically sorted.

    A location model is fitted whenever ``obs`` carries region labels.
    Continuing the best coarse run is equivalent to restarting from its grid
    point, since EM is deterministic.
    """
    config = config or FitConfig()
    if len(obs) < max(n_states, 2):
        raise InsufficientDataError(
            f"{len(obs)} observations is too few for a {n_states}-state fit")
    grid = config.init_grid
    if grid is None:
        grid = default_grid(n_states, obs, config)
    _, params, converged, trace, start, scores = _best_coarse(obs, n_states, config, grid)
    iterations = len(trace)
    if not converged and iterations < config.max_iters:
        try:
            params, converged = _run(params, obs, config.max_iters - iterations, config, trace)
        except DegenerateStateError as exc:
            raise FitFailureError(f"best start degenerated during refinement: {exc}") from exc
        iterations = len(trace)
    final_ll = log_likelihood(params, obs)
    trace.append(final_ll)
    return FitResult(sort_states(params), final_ll, iterations, converged, trace, start, scores)


def sort_states(params: HmmParams) -> HmmParams:
    """Canonical state order: ascending mean, grouped by dominant region for
    location models.  Ties keep the original order."""
    idx = np.arange(params.n_states)
    if params.has_regions:
        dominant = np.argmax(params.region_dist, axis=1)
        order = np.lexsort((idx, params.means, dominant))
    else:
        order = np.lexsort((idx, params.means))
    if np.array_equal(order, idx):
        return params
    return params.permuted(order)
