import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from conftest import random_obs, random_params
from quakehmm.catalog import ObservationSequence
from quakehmm.errors import ConfigurationError, DomainError
from quakehmm.forecasting import (
    ForecastQuery,
    StateWeights,
    expected_wait_curve,
    expected_wait_slope,
    forecast_density,
    forecast_probability,
    post_event_weights,
    scheduled_weights,
    waiting_time_moments,
)
from quakehmm.hmm import HmmParams
from quakehmm.reference import TWO_STATE
from quakehmm.simulation import enumerate_next_state_posterior

HALF = HmmParams([0.5, 0.5], np.full((2, 2), 0.5), [1.0, 2.0])


def test_uniform_rows_give_uniform_weights(rng):
    params = HmmParams([0.2, 0.3, 0.5], np.full((3, 3), 1 / 3), [1.0, 4.0, 9.0])
    c = post_event_weights(params, random_obs(rng, 12))
    np.testing.assert_allclose(c.weights, 1 / 3, atol=1e-15)
    assert c.elapsed == 0 and c.history_len == 12


def test_single_state_weight_is_one(rng):
    params = HmmParams([1.0], [[1.0]], [3.0])
    assert post_event_weights(params, random_obs(rng, 5)).weights.tolist() == [1.0]


def test_empty_history_gives_initial_distribution():
    c = post_event_weights(TWO_STATE, ObservationSequence([]))
    np.testing.assert_array_equal(c.weights, TWO_STATE.pi)


@pytest.mark.parametrize("n_states,length", [(2, 5), (3, 4), (2, 8), (3, 1)])
def test_post_event_weights_match_enumeration(rng, n_states, length):
    params = random_params(rng, n_states)
    obs = random_obs(rng, length)
    np.testing.assert_allclose(post_event_weights(params, obs).weights,
                               enumerate_next_state_posterior(params, obs), atol=1e-10)


def test_zero_elapsed_returns_base_exactly(rng):
    base = post_event_weights(TWO_STATE, random_obs(rng, 20))
    d = scheduled_weights(base, TWO_STATE, 0.0)
    assert np.array_equal(d.weights, base.weights)


def test_scheduled_hand_value():
    base = StateWeights([0.5, 0.5])
    d = scheduled_weights(base, HALF, 2 * math.log(2))
    np.testing.assert_allclose(d.weights, [1 / 3, 2 / 3], atol=1e-15)
    assert d.elapsed == pytest.approx(2 * math.log(2))


@pytest.mark.parametrize("w", [1000.0, 1e6, 1e300])
def test_long_elapsed_concentrates_on_longest_mean(w):
    d = scheduled_weights(StateWeights([0.999, 0.001]), TWO_STATE, w).weights
    assert d[1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.isfinite(d))


def test_scheduled_rejects_negative():
    with pytest.raises(DomainError):
        scheduled_weights(StateWeights([0.5, 0.5]), HALF, -1.0)


def test_probability_examples():
    p = forecast_probability(StateWeights([0.0, 1.0]), TWO_STATE, ForecastQuery(1.0))
    assert p == pytest.approx(-math.expm1(-1 / 21.1), rel=1e-14)
    assert p == pytest.approx(0.04629, abs=5e-6)
    floor = -math.expm1(-100 / 21.1)
    assert floor == pytest.approx(0.99126, abs=5e-6)
    for w in [[1, 0], [0, 1], [0.3, 0.7]]:
        assert forecast_probability(StateWeights(w), TWO_STATE, 100.0) >= floor - 1e-15
    single = HmmParams([1.0], [[1.0]], [7.0])
    assert forecast_probability(StateWeights([1.0]), single, 7.0) == pytest.approx(1 - math.exp(-1), rel=1e-14)


def test_query_validation():
    with pytest.raises(ValueError):
        ForecastQuery(0.0)
    with pytest.raises(ConfigurationError):
        forecast_probability(StateWeights([0.5, 0.5]), HALF, ForecastQuery(1.0, region=1))


def test_density_hand_value_and_normalisation():
    d = StateWeights([1 / 3, 2 / 3])
    assert forecast_density(d, HALF, 0.0) == pytest.approx(2 / 3, rel=1e-15)
    total, _ = integrate.quad(lambda y: forecast_density(d, HALF, y), 0, np.inf)
    assert total == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(DomainError):
        forecast_density(d, HALF, -0.1)


def test_region_density_joint_normalisation(rng):
    params = random_params(rng, 3, n_regions=4)
    d = StateWeights(rng.dirichlet(np.ones(3)))
    total = sum(integrate.quad(lambda y: forecast_density(d, params, y, v), 0, np.inf)[0]
                for v in range(1, 5))
    assert total == pytest.approx(1.0, abs=1e-6)


def test_moment_examples():
    m = waiting_time_moments(StateWeights([1 / 3, 2 / 3]), HALF)
    assert m.mean == pytest.approx(5 / 3, rel=1e-14)
    assert m.variance == pytest.approx(29 / 9, rel=1e-14)
    assert m.paper_variance == pytest.approx(3.0, rel=1e-14)
    single = waiting_time_moments(StateWeights([1.0]), HmmParams([1.0], [[1.0]], [4.0]))
    assert single == (4.0, 16.0, 16.0)
    assert single.variance_gap == 0.0


def test_moments_match_quadrature():
    d = StateWeights([1 / 3, 2 / 3])
    f = lambda y: forecast_density(d, HALF, y)
    mean = integrate.quad(lambda y: y * f(y), 0, np.inf)[0]
    second = integrate.quad(lambda y: y * y * f(y), 0, np.inf)[0]
    m = waiting_time_moments(d, HALF)
    assert m.mean == pytest.approx(mean, rel=1e-8)
    assert m.variance == pytest.approx(second - mean**2, rel=1e-8)


def test_variance_matches_sampling():
    rng = np.random.default_rng(99)
    d = StateWeights([0.3, 0.7])
    n = 10**6
    states = rng.choice(2, size=n, p=d.weights)
    y = rng.exponential(TWO_STATE.means[states])
    m = waiting_time_moments(d, TWO_STATE)
    assert y.var() == pytest.approx(m.variance, rel=0.01)
    assert y.var() != pytest.approx(m.paper_variance, rel=0.01)


def test_curve_examples():
    base = StateWeights([0.5, 0.5])
    (_, h0), (_, h1) = expected_wait_curve(base, HALF, [0.0, 2 * math.log(2)])
    assert h0 == pytest.approx(1.5, rel=1e-15)
    assert h1 == pytest.approx(5 / 3, rel=1e-14)
    flat = HmmParams([0.5, 0.5], np.full((2, 2), 0.5), [3.0, 3.0])
    curve = expected_wait_curve(base, flat, [0, 1, 10, 100])
    assert all(m == pytest.approx(3.0, rel=1e-15) for _, m in curve)
    (_, far), = expected_wait_curve(StateWeights([0.9, 0.1]), TWO_STATE, [50 * 21.1])
    assert far == pytest.approx(21.1, abs=1e-9)


def test_curve_rejects_unsorted_grid():
    with pytest.raises(DomainError):
        expected_wait_curve(StateWeights([0.5, 0.5]), HALF, [2.0, 1.0])


def test_probability_is_integral_of_density(rng):
    params = random_params(rng, 3)
    d = StateWeights(rng.dirichlet(np.ones(3)))
    for n in [0.5, 3.0, 40.0]:
        integral = integrate.quad(lambda y: forecast_density(d, params, y), 0, n,
                                  epsabs=1e-13, epsrel=1e-12)[0]
        assert forecast_probability(d, params, n) == pytest.approx(integral, abs=1e-8)


def test_probability_monotone_in_horizon(rng):
    params = random_params(rng, 3)
    d = StateWeights(rng.dirichlet(np.ones(3)))
    # stay below the horizon where 1 - p is no longer representable
    p = [forecast_probability(d, params, n) for n in np.geomspace(0.01, 20 * params.means.max(), 60)]
    assert np.all(np.diff(p) > 0)
    assert forecast_probability(d, params, 1e4) == pytest.approx(1.0, abs=1e-12)


def test_region_probabilities_sum_to_time_only(rng):
    params = random_params(rng, 4, n_regions=2)
    d = StateWeights(rng.dirichlet(np.ones(4)))
    for n in [1.0, 5.0, 10.0]:
        by_region = sum(forecast_probability(d, params, ForecastQuery(n, v)) for v in (1, 2))
        assert by_region == pytest.approx(forecast_probability(d, params, n), abs=1e-12)
        assert by_region == pytest.approx(forecast_probability(d, params.without_regions(), n), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_states=st.integers(2, 4))
def test_expected_wait_strictly_increases(seed, n_states):
    rng = np.random.default_rng(seed)
    means = np.sort(rng.uniform(0.5, 30.0, n_states))
    if np.min(np.diff(means)) < 0.05:
        means = means + 0.1 * np.arange(n_states)
    params = HmmParams(np.full(n_states, 1 / n_states), np.full((n_states, n_states), 1 / n_states), means)
    base = StateWeights(rng.dirichlet(np.ones(n_states)) * 0.9 + 0.1 / n_states)
    # past w_max the short-mean weights fall below double resolution and the
    # mathematically increasing curve is flat in floating point
    w_max = 18.0 / (1 / means.min() - 1 / means.max())
    grid = np.linspace(0, min(2 * means.max(), w_max), 40)
    curve = np.array([m for _, m in expected_wait_curve(base, params, grid)])
    assert np.all(np.diff(curve) > 0)
    for w in grid[::8]:
        assert expected_wait_slope(base, params, w) > 0


@pytest.mark.parametrize("w", [0.0, 1.0, 7.5, 30.0])
def test_slope_matches_finite_difference(w):
    base = StateWeights([0.4, 0.6])
    h = 1e-5
    (_, lo), (_, hi) = expected_wait_curve(base, TWO_STATE, [w, w + h])
    if w > 0:
        (_, lo), (_, hi) = expected_wait_curve(base, TWO_STATE, [w - h, w + h])
        h *= 2
    assert expected_wait_slope(base, TWO_STATE, w) == pytest.approx((hi - lo) / h, rel=1e-5, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_states=st.integers(2, 3), length=st.integers(1, 6),
       w=st.floats(0, 60))
def test_scheduled_weights_are_bayes_posteriors(seed, n_states, length, w):
    rng = np.random.default_rng(seed)
    params = random_params(rng, n_states)
    obs = random_obs(rng, length)
    d = scheduled_weights(post_event_weights(params, obs), params, w)
    np.testing.assert_allclose(d.weights, enumerate_next_state_posterior(params, obs, w), atol=1e-10)
