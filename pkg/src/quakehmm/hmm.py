"""Hidden Markov model parameters and the scaled forward-backward recursions.

Emissions are exponential in the interevent time, optionally multiplied by a
state-specific categorical distribution over regions.  Forward variables are
normalised at every step (Rabiner scaling) and the backward variables are
divided by the same normalisers, so

    gamma[t] = scaled_forward[t] * scaled_backward[t]

and the log-likelihood is the sum of the log normalisers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping

import numba
import numpy as np

from .catalog import ObservationSequence
from .errors import ConfigurationError, DomainError, ImpossibleObservationError

PROB_TOL = 1e-12


def _frozen(a, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class HmmParams:
    """Initial distribution, transition matrix, exponential means (days) and
    optional per-state region distributions (``n_states x n_regions``)."""

    pi: np.ndarray
    trans: np.ndarray
    means: np.ndarray
    region_dist: np.ndarray | None = None

    def __post_init__(self):
        pi = _frozen(self.pi, 1)
        trans = _frozen(self.trans, 2)
        means = _frozen(self.means, 1)
        n = pi.size
        if n < 1:
            raise ValueError("need at least one state")
        if trans.shape != (n, n) or means.shape != (n,):
            raise ValueError(
                f"shape mismatch: pi {pi.shape}, trans {trans.shape}, means {means.shape}")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"pi must be a probability vector, got {pi}")
        if np.any(trans < 0) or np.any(np.abs(trans.sum(axis=1) - 1.0) > PROB_TOL):
            raise ValueError("trans must be row-stochastic")
        if np.any(~np.isfinite(means)) or np.any(means <= 0):
            raise ValueError(f"exponential means must be positive, got {means}")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "trans", trans)
        object.__setattr__(self, "means", means)
        if self.region_dist is not None:
            q = _frozen(self.region_dist, 2)
            if q.shape[0] != n:
                raise ValueError(f"region_dist needs {n} rows, got {q.shape[0]}")
            if np.any(q < 0) or np.any(np.abs(q.sum(axis=1) - 1.0) > PROB_TOL):
                raise ValueError("region_dist rows must be probability vectors")
            object.__setattr__(self, "region_dist", q)

    @classmethod
    def renormalized(cls, pi, trans, means, region_dist=None) -> "HmmParams":
        """Build parameters after rescaling each probability row to sum to 1.

        Useful for estimates whose rows were rounded to a few decimals.
        """
        def rows(a):
            a = np.array(a, dtype=float)
            return a / a.sum(axis=-1, keepdims=True)

        q = None if region_dist is None else rows(region_dist)
        return cls(rows(pi), rows(trans), means, q)

    @property
    def n_states(self) -> int:
        return self.pi.size

    @property
    def n_regions(self) -> int | None:
        return None if self.region_dist is None else self.region_dist.shape[1]

    @property
    def has_regions(self) -> bool:
        return self.region_dist is not None

    def permuted(self, order) -> "HmmParams":
        """States reordered so that new state ``i`` is old state ``order[i]``."""
        order = np.asarray(order, dtype=int)
        q = None if self.region_dist is None else self.region_dist[order]
        return HmmParams(self.pi[order], self.trans[np.ix_(order, order)], self.means[order], q)

    def without_regions(self) -> "HmmParams":
        return HmmParams(self.pi, self.trans, self.means)

    def __eq__(self, other):
        if not isinstance(other, HmmParams):
            return NotImplemented
        same_q = (self.region_dist is None and other.region_dist is None) or (
            self.region_dist is not None and other.region_dist is not None
            and np.array_equal(self.region_dist, other.region_dist))
        return (same_q and np.array_equal(self.pi, other.pi)
                and np.array_equal(self.trans, other.trans)
                and np.array_equal(self.means, other.means))

    def to_dict(self) -> dict:
        d = {
            "n_states": self.n_states,
            "pi": self.pi.tolist(),
            "trans": self.trans.tolist(),
            "lambda": self.means.tolist(),
        }
        if self.region_dist is not None:
            d["region_dist"] = self.region_dist.tolist()
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "HmmParams":
        params = cls(d["pi"], d["trans"], d["lambda"], d.get("region_dist"))
        if "n_states" in d and int(d["n_states"]) != params.n_states:
            raise ValueError(
                f"n_states={d['n_states']} disagrees with pi of length {params.n_states}")
        return params

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "HmmParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class Trellis:
    scaled_forward: np.ndarray
    scaled_backward: np.ndarray
    log_normalizers: np.ndarray
    log_likelihood: float

    @property
    def normalizers(self) -> np.ndarray:
        return np.exp(self.log_normalizers)


@dataclass(frozen=True, eq=False)
class Posteriors:
    gamma: np.ndarray
    eta: np.ndarray


def _check_region_args(params: HmmParams, region) -> None:
    if region is None and params.has_regions:
        raise ConfigurationError("location model needs a region label")
    if region is not None:
        if not params.has_regions:
            raise ConfigurationError("region given for a time-only model")
        if not 1 <= region <= params.n_regions:
            raise ConfigurationError(f"region {region} outside 1..{params.n_regions}")


def emission_density(params: HmmParams, state: int, obs: float, region: int | None = None) -> float:
    if obs < 0:
        raise DomainError(f"interevent time must be >= 0, got {obs}")
    _check_region_args(params, region)
    lam = params.means[state]
    p = math.exp(-obs / lam) / lam
    if region is not None:
        p *= params.region_dist[state, region - 1]
    return p


def log_emissions(params: HmmParams, obs: ObservationSequence) -> np.ndarray:
    """``L x S`` matrix of log emission densities (``-inf`` where impossible).

    A time-only model ignores any region labels on ``obs``.
    """
    y = obs.interevent_times[:, None]
    logp = -np.log(params.means)[None, :] - y / params.means[None, :]
    if params.has_regions:
        if obs.regions is None:
            raise ConfigurationError("location model needs region-labelled observations")
        if obs.regions.size and obs.regions.max() > params.n_regions:
            raise ConfigurationError(
                f"region label {obs.regions.max()} exceeds model's {params.n_regions} regions")
        with np.errstate(divide="ignore"):
            logq = np.log(params.region_dist)
        logp = logp + logq[:, obs.regions - 1].T
    return logp


def _shifted_emissions(logp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    shift = logp.max(axis=1)
    bad = np.flatnonzero(~np.isfinite(shift))
    if bad.size:
        raise ImpossibleObservationError(int(bad[0]) + 1)
    return np.exp(logp - shift[:, None]), shift


@numba.njit(cache=True)
def _forward_kernel(pi, trans, emis):
    L, S = emis.shape
    alpha = np.empty((L, S))
    scale = np.empty(L)
    tot = 0.0
    for s in range(S):
        alpha[0, s] = pi[s] * emis[0, s]
        tot += alpha[0, s]
    if not tot > 0.0:
        return alpha, scale, 0
    scale[0] = tot
    for s in range(S):
        alpha[0, s] /= tot
    for t in range(1, L):
        tot = 0.0
        for s in range(S):
            acc = 0.0
            for r in range(S):
                acc += alpha[t - 1, r] * trans[r, s]
            alpha[t, s] = acc * emis[t, s]
            tot += alpha[t, s]
        if not tot > 0.0:
            return alpha, scale, t
        scale[t] = tot
        for s in range(S):
            alpha[t, s] /= tot
    return alpha, scale, -1


@numba.njit(cache=True)
def _backward_kernel(trans, emis, scale):
    L, S = emis.shape
    beta = np.empty((L, S))
    for s in range(S):
        beta[L - 1, s] = 1.0
    tmp = np.empty(S)
    for t in range(L - 2, -1, -1):
        for s in range(S):
            tmp[s] = emis[t + 1, s] * beta[t + 1, s]
        for r in range(S):
            acc = 0.0
            for s in range(S):
                acc += trans[r, s] * tmp[s]
            beta[t, r] = acc / scale[t + 1]
    return beta


def _filter(params: HmmParams, obs: ObservationSequence):
    """Scaled forward pass; returns (alpha, log normalisers, shifted emissions, step scales)."""
    emis, shift = _shifted_emissions(log_emissions(params, obs))
    alpha, scale, failed = _forward_kernel(params.pi, params.trans, emis)
    if failed >= 0:
        raise ImpossibleObservationError(int(failed) + 1)
    return alpha, np.log(scale) + shift, emis, scale


def forward_filter(params: HmmParams, obs: ObservationSequence) -> tuple[np.ndarray, np.ndarray]:
    """Normalised forward rows ``P(X_t = s | y_1..y_t)`` and the log normalisers.

    Cheaper than :func:`forward_backward` when only filtering is needed.
    """
    if len(obs) == 0:
        return np.empty((0, params.n_states)), np.empty(0)
    alpha, log_c, _, _ = _filter(params, obs)
    return alpha, log_c


def forward_backward(params: HmmParams, obs: ObservationSequence) -> Trellis:
    if len(obs) < 1:
        raise ValueError("forward_backward needs at least one observation")
    alpha, log_c, emis, scale = _filter(params, obs)
    beta = _backward_kernel(params.trans, emis, scale)
    return Trellis(alpha, beta, log_c, float(log_c.sum()))


def _weighted_next(params: HmmParams, obs: ObservationSequence, trellis: Trellis) -> np.ndarray:
    # p_s(y_{t+1}) * beta_hat_s(t+1) / c_{t+1}, rows t = 0..L-2
    logp = log_emissions(params, obs)[1:]
    ratio = np.exp(logp - trellis.log_normalizers[1:, None])
    return ratio * trellis.scaled_backward[1:]


def posteriors(params: HmmParams, obs: ObservationSequence, trellis: Trellis) -> Posteriors:
    gamma = trellis.scaled_forward * trellis.scaled_backward
    nxt = _weighted_next(params, obs, trellis)
    eta = trellis.scaled_forward[:-1, :, None] * params.trans[None, :, :] * nxt[:, None, :]
    return Posteriors(gamma, eta)


def expected_transitions(params: HmmParams, obs: ObservationSequence, trellis: Trellis) -> np.ndarray:
    """``sum_t eta[t]`` without materialising the ``(L-1) x S x S`` array."""
    nxt = _weighted_next(params, obs, trellis)
    return params.trans * (trellis.scaled_forward[:-1].T @ nxt)


def log_likelihood(params: HmmParams, obs: ObservationSequence) -> float:
    return float(_filter(params, obs)[1].sum())
