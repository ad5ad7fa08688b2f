# tests/test_distributions.py

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
import sys
import os

# Add project root to the Python path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from core.distributions import (
    ContinuousCdf,
    affine_pushforward,
    cdf_at,
    cdf_left_limit,
    dirac,
    empirical,
    finite,
    from_atoms,
    gaussian,
    inv_cdf,
    is_tau_quantile,
    mix,
    mix_models,
    quantile_function,
    right_inv_cdf,
    right_quantile_function,
    uniform,
    wasserstein1,
    wasserstein_inf,
)
from core.errors import DomainError, ValidationError

HALF = finite([0.0, 1.0], [0.5, 0.5])
QUARTERS = finite([0.0, 1.0, 2.0, 3.0], [0.25] * 4)


@st.composite
def finite_distributions(draw, max_atoms=8):
    n = draw(st.integers(min_value=1, max_value=max_atoms))
    locs = draw(st.lists(st.floats(-10, 10, allow_nan=False), min_size=n, max_size=n))
    weights = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n)))
    return finite(locs, weights / weights.sum())


# ---------------- Construction ----------------
def test_finite_merges_duplicates_and_sorts():
    """
    Tests that duplicate locations are merged and atoms come out sorted.
    """
    # 1. Arrange & 2. Act
    nu = finite([2.0, 1.0, 1.0], [0.5, 0.25, 0.25])

    # 3. Assert
    assert nu.locations.tolist() == [1.0, 2.0]
    assert np.allclose(nu.probs, [0.5, 0.5])
    assert nu.cumulative[-1] == 1.0


def test_finite_drops_zero_mass_atoms():
    nu = finite([0.0, 5.0], [1.0, 0.0])
    assert nu.atoms == [(0.0, 1.0)]


@pytest.mark.parametrize("locs, probs", [
    ([0.0, 1.0], [0.5, 0.6]),     # does not sum to one
    ([0.0, 1.0], [1.5, -0.5]),    # negative mass
    ([], []),                     # empty
    ([0.0, 1.0], [1.0]),          # length mismatch
    ([np.inf], [1.0]),            # non-finite location
])
def test_finite_rejects_invalid_inputs(locs, probs):
    with pytest.raises(ValidationError):
        finite(locs, probs)


def test_finite_distribution_is_immutable():
    with pytest.raises(ValueError):
        HALF.locations[0] = 7.0


def test_from_atoms_and_empirical():
    assert from_atoms([(1.0, 0.25), (0.0, 0.75)]) == finite([0.0, 1.0], [0.75, 0.25])
    nu = empirical([3.0, 1.0, 3.0, 1.0])
    assert nu.atoms == [(1.0, 0.5), (3.0, 0.5)]
    with pytest.raises(ValidationError):
        empirical([])


# ---------------- CDF queries ----------------
@pytest.mark.parametrize("nu, t, expected", [
    (dirac(3.0), 3.0, 1.0),
    (HALF, 0.0, 0.5),
    (QUARTERS, 2.5, 0.75),
    (HALF, -1.0, 0.0),
])
def test_cdf_at(nu, t, expected):
    assert cdf_at(nu, t) == expected


@pytest.mark.parametrize("nu, t, expected", [
    (dirac(3.0), 3.0, 0.0),
    (HALF, 1.0, 0.5),
    (dirac(0.0), 5.0, 1.0),
])
def test_cdf_left_limit(nu, t, expected):
    assert cdf_left_limit(nu, t) == expected


@pytest.mark.parametrize("nu, tau, least, greatest", [
    (dirac(3.0), 0.5, 3.0, 3.0),
    (HALF, 0.5, 0.0, 1.0),
    (QUARTERS, 0.75, 2.0, 3.0),
    (QUARTERS, 0.6, 2.0, 2.0),
])
def test_least_and_greatest_quantiles(nu, tau, least, greatest):
    """
    Tests F^-1 and Fbar^-1 on flat and strictly increasing parts of the CDF.
    """
    assert inv_cdf(nu, tau) == least
    assert right_inv_cdf(nu, tau) == greatest


@pytest.mark.parametrize("tau", [0.0, 1.0, -0.1, 1.5, np.nan])
def test_quantiles_reject_levels_outside_unit_interval(tau):
    with pytest.raises(DomainError):
        inv_cdf(HALF, tau)
    with pytest.raises(DomainError):
        right_inv_cdf(HALF, tau)


def test_is_tau_quantile_examples():
    assert is_tau_quantile(dirac(3.0), 0.5, 3.0)
    assert is_tau_quantile(HALF, 0.5, 0.0)
    assert is_tau_quantile(HALF, 0.5, 1.0)
    assert is_tau_quantile(HALF, 0.5, 0.5)       # flat region of the CDF
    assert not is_tau_quantile(HALF, 0.6, 0.0)
    assert not is_tau_quantile(HALF, 0.4, 1.0)


def _brute_force_quantiles(nu, tau, tol=1e-12):
    """Independent cumulative scans for the least and greatest tau-quantile."""
    running = 0.0
    least = greatest = None
    for loc, p in zip(nu.locations.tolist(), nu.probs.tolist()):
        running += p
        if least is None and running >= tau - tol:
            least = loc
        if greatest is None and running > tau + tol:
            greatest = loc
    last = float(nu.locations[-1])
    return (last if least is None else least), (last if greatest is None else greatest)


def test_quantile_functions_match_brute_force_scan():
    """
    Oracle suite: 10^4 random distributions with at most 8 atoms, random levels.
    """
    # 1. Arrange
    rng = np.random.default_rng(20240601)

    for _ in range(10_000):
        n = int(rng.integers(1, 9))
        locs = np.round(rng.normal(size=n) * 3, 1)   # rounding creates duplicate locations
        probs = rng.random(n) + 0.01
        nu = finite(locs, probs / probs.sum())
        tau = float(rng.uniform(0.001, 0.999))

        # 2. Act
        least, greatest = _brute_force_quantiles(nu, tau)

        # 3. Assert
        assert inv_cdf(nu, tau) == least
        assert right_inv_cdf(nu, tau) == greatest
        assert is_tau_quantile(nu, tau, least)


def test_vectorised_quantiles_agree_with_scalar_versions():
    taus = np.array([0.1, 0.25, 0.5, 0.75, 0.9])
    assert quantile_function(QUARTERS, taus).tolist() == [inv_cdf(QUARTERS, t) for t in taus]
    assert right_quantile_function(QUARTERS, taus).tolist() == [right_inv_cdf(QUARTERS, t) for t in taus]


# ---------------- Wasserstein metrics ----------------
def test_wasserstein_examples():
    assert wasserstein1(dirac(1.0), dirac(-2.5)) == 3.5
    assert wasserstein1(HALF, dirac(0.0)) == 0.5
    assert wasserstein1(QUARTERS, QUARTERS) == 0.0
    assert wasserstein_inf(dirac(1.0), dirac(-2.5)) == 3.5
    assert wasserstein_inf(HALF, finite([0.0, 3.0], [0.5, 0.5])) == 2.0
    assert wasserstein_inf(QUARTERS, QUARTERS) == 0.0


def test_wasserstein1_against_scipy():
    rng = np.random.default_rng(7)
    a, b = rng.normal(size=200), rng.normal(1.0, 2.0, size=300)
    expected = stats.wasserstein_distance(a, b)
    assert np.isclose(wasserstein1(empirical(a), empirical(b)), expected, atol=1e-9)


def test_wasserstein1_matches_a_riemann_sum_of_the_quantile_integral():
    """
    Tests wasserstein1 against a midpoint Riemann sum of |F^-1 - G^-1| over 10^6 levels,
    for random distributions with at most 8 atoms on a 1e-4 grid.
    """
    rng = np.random.default_rng(12)
    levels = (np.arange(1_000_000) + 0.5) / 1_000_000
    for _ in range(20):
        # 1. Arrange
        pair = []
        for _ in range(2):
            n = int(rng.integers(1, 9))
            pair.append(finite(rng.integers(-100_000, 100_001, size=n) * 1e-4, rng.dirichlet(np.ones(n))))
        nu, mu = pair

        # 2. Act
        riemann = np.mean(np.abs(quantile_function(nu, levels) - quantile_function(mu, levels)))

        # 3. Assert
        assert abs(wasserstein1(nu, mu) - riemann) < 1e-3


@settings(max_examples=200, deadline=None)
@given(finite_distributions(), finite_distributions(), finite_distributions())
def test_wasserstein_metric_axioms(nu, mu, rho):
    """
    Property: symmetry, identity, triangle inequality and w1 <= w_inf.
    """
    for metric in (wasserstein1, wasserstein_inf):
        assert metric(nu, nu) == 0.0
        assert np.isclose(metric(nu, mu), metric(mu, nu), atol=1e-12)
    assert wasserstein1(nu, rho) <= wasserstein1(nu, mu) + wasserstein1(mu, rho) + 1e-9
    assert wasserstein1(nu, mu) <= wasserstein_inf(nu, mu) + 1e-6


# ---------------- Constructions ----------------
def test_mix_examples():
    assert mix([(1.0, dirac(2.0))]) == dirac(2.0)
    assert mix([(0.5, dirac(0.0)), (0.5, dirac(0.0))]) == dirac(0.0)
    assert mix([(0.25, dirac(1.0)), (0.75, dirac(0.0))]).atoms == [(0.0, 0.75), (1.0, 0.25)]


@pytest.mark.parametrize("parts", [
    [(0.5, dirac(0.0)), (0.6, dirac(1.0))],
    [(1.0, dirac(0.0)), (0.0, dirac(1.0))],
    [],
])
def test_mix_rejects_bad_weights(parts):
    with pytest.raises(ValidationError):
        mix(parts)


def test_affine_pushforward_examples():
    assert affine_pushforward(QUARTERS, 0.0, 1.5) == dirac(1.5)
    assert affine_pushforward(dirac(4.0), 0.5, 2.0) == dirac(4.0)
    assert affine_pushforward(QUARTERS, 1.0, 0.0) == QUARTERS
    with pytest.raises(DomainError):
        affine_pushforward(HALF, -1.0, 0.0)


# ---------------- Continuous reward models ----------------
def test_gaussian_and_uniform_models():
    g = gaussian(2.0, 1.0)
    u = uniform(0.0, 1.0)
    assert np.isclose(g.cdf(2.0), 0.5)
    assert g.cdf(2.0) == g.left_limit(2.0)
    assert not g.bounded and u.bounded
    assert u.support_hint == (0.0, 1.0)
    assert np.isclose(u.mean, 0.5)
    samples = g.sample(np.random.default_rng(0), 10_000)
    assert abs(samples.mean() - 2.0) < 0.05
    with pytest.raises(ValidationError):
        gaussian(0.0, 0.0)
    with pytest.raises(ValidationError):
        uniform(1.0, 1.0)


def test_continuous_cdf_rejects_a_decreasing_function():
    with pytest.raises(ValidationError):
        ContinuousCdf(
            cdf=lambda t: stats.norm.sf(t),
            left_limit=lambda t: stats.norm.sf(t),
            sampler=lambda rng, size=None: rng.normal(size=size),
            support_hint=(-10.0, 10.0),
        )


def test_mix_models_with_a_continuous_part_is_lazy():
    """
    Tests a Gaussian/Dirac mixture: CDF values add up and the mixture stays continuous-typed.
    """
    # 1. Arrange
    mixed = mix_models([(0.5, gaussian(0.0, 1.0)), (0.5, dirac(0.0))])

    # 2. Act & 3. Assert
    assert not mixed.is_finite
    assert np.isclose(mixed.cdf(0.0), 0.75)
    assert np.isclose(mixed.left_limit(0.0), 0.25)
    assert np.isclose(mixed.mean, 0.0)
    assert mixed.sample(np.random.default_rng(1), 5).shape == (5,)


def test_mix_models_of_finite_parts_is_exact():
    mixed = mix_models([(0.5, dirac(2.0)), (0.5, dirac(-1.0))])
    assert mixed.is_finite
    assert mixed.atoms == [(-1.0, 0.5), (2.0, 0.5)]
