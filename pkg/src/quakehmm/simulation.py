"""Synthetic catalogs from a known HMM, and brute-force path-enumeration
oracles for likelihoods and state posteriors.

Randomness comes from numpy's PCG64.  The seed feeds a ``SeedSequence``
that is split into three child streams, in order: hidden states,
interevent-time uniforms, region draws.  Interevent times use the inverse
CDF ``-lambda * log(1 - U)``.
"""
from __future__ import annotations

import datetime as dt
import itertools
from dataclasses import dataclass

import numpy as np

from .catalog import Catalog, Event, ObservationSequence
from .errors import InstanceTooLargeError
from .hmm import HmmParams

MAX_PATHS = 10**7


@dataclass(frozen=True)
class SimConfig:
    params: HmmParams
    n_events: int
    seed: int = 0
    start_time: float = 0.0
    epoch: dt.date = dt.date(1932, 1, 1)

    def __post_init__(self):
        if self.n_events < 1:
            raise ValueError("n_events must be >= 1")


def _streams(seed: int):
    children = np.random.SeedSequence(seed).spawn(3)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def simulate_path(params: HmmParams, n: int, seed: int):
    """Draw (states, interevent times, regions or None) of length ``n``."""
    state_rng, time_rng, region_rng = _streams(seed)
    su = state_rng.random(n)
    cum_pi = np.cumsum(params.pi)
    cum_trans = np.cumsum(params.trans, axis=1)
    S = params.n_states
    states = np.empty(n, dtype=np.int64)
    states[0] = min(np.searchsorted(cum_pi, su[0], side="right"), S - 1)
    for t in range(1, n):
        row = cum_trans[states[t - 1]]
        states[t] = min(np.searchsorted(row, su[t], side="right"), S - 1)
    u = time_rng.random(n)
    y = -params.means[states] * np.log1p(-u)
    regions = None
    if params.has_regions:
        cum_q = np.cumsum(params.region_dist, axis=1)
        ru = region_rng.random(n)
        R = params.n_regions
        regions = np.array(
            [min(np.searchsorted(cum_q[s], r, side="right"), R - 1) + 1 for s, r in zip(states, ru)],
            dtype=np.int64)
    return states, y, regions


def simulate(config: SimConfig) -> tuple[Catalog, list[int]]:
    """Simulated catalog and its hidden state path.

    Event ``k`` occurs ``y_k`` days after event ``k-1``, with event 0 at
    ``start_time + y_1``; the catalog therefore yields ``n_events - 1``
    interevent times, which are ``y_2 .. y_n``.  Locations are placeholders
    (0, 0); region labels are attached for location models.
    """
    states, y, regions = simulate_path(config.params, config.n_events, config.seed)
    times = config.start_time + np.cumsum(y)
    labels = [None] * config.n_events if regions is None else regions.tolist()
    events = tuple(Event(float(t), 4.0, 0.0, 0.0, r) for t, r in zip(times, labels))
    return Catalog(events, config.epoch), states.tolist()


def _paths(S: int, L: int) -> np.ndarray:
    if S**L > MAX_PATHS:
        raise InstanceTooLargeError(f"{S}^{L} state paths exceeds {MAX_PATHS}")
    return np.array(list(itertools.product(range(S), repeat=L)), dtype=np.int64).reshape(-1, L)


def _emission_table(params: HmmParams, obs: ObservationSequence) -> np.ndarray:
    # computed directly from the density formula, independent of hmm.log_emissions
    y = obs.interevent_times
    L, S = len(y), params.n_states
    table = np.empty((L, S))
    for t in range(L):
        for s in range(S):
            lam = params.means[s]
            p = np.exp(-y[t] / lam) / lam
            if params.has_regions and obs.regions is not None:
                p *= params.region_dist[s, obs.regions[t] - 1]
            table[t, s] = p
    return table


def _path_weights(params: HmmParams, obs: ObservationSequence, paths: np.ndarray) -> np.ndarray:
    """Joint probability P(path, observations) for each path (first L columns)."""
    L = len(obs)
    table = _emission_table(params, obs)
    w = params.pi[paths[:, 0]].copy()
    for t in range(paths.shape[1]):
        if t > 0:
            w *= params.trans[paths[:, t - 1], paths[:, t]]
        if t < L:
            w *= table[t, paths[:, t]]
    return w


def enumerate_likelihood(params: HmmParams, obs: ObservationSequence) -> float:
    """log P(observations) by summing over every state path."""
    paths = _paths(params.n_states, len(obs))
    with np.errstate(divide="ignore"):
        return float(np.log(_path_weights(params, obs, paths).sum()))


def enumerate_posteriors(params: HmmParams, obs: ObservationSequence):
    """(gamma, eta) by enumeration: ``P(X_t=s | O)`` and ``P(X_t=r, X_{t+1}=s | O)``."""
    L, S = len(obs), params.n_states
    paths = _paths(S, L)
    w = _path_weights(params, obs, paths)
    w = w / w.sum()
    gamma = np.zeros((L, S))
    eta = np.zeros((max(L - 1, 0), S, S))
    for t in range(L):
        np.add.at(gamma[t], paths[:, t], w)
        if t < L - 1:
            np.add.at(eta[t], (paths[:, t], paths[:, t + 1]), w)
    return gamma, eta


def enumerate_next_state_posterior(params: HmmParams, obs: ObservationSequence,
                                   elapsed: float = 0.0) -> np.ndarray:
    """``P(X_{t+1}=s | y_1..y_t, Y_{t+1} >= elapsed)`` by enumerating paths of
    length ``t + 1``."""
    L, S = len(obs), params.n_states
    paths = _paths(S, L + 1)
    w = _path_weights(params, obs, paths)
    w = w * np.exp(-elapsed / params.means[paths[:, L]])
    post = np.zeros(S)
    np.add.at(post, paths[:, L], w)
    return post / post.sum()
