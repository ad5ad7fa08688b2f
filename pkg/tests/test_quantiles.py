# tests/test_quantiles.py

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
import sys
import os

# Add project root to the Python path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from core.distributions import dirac, finite, is_tau_quantile, wasserstein_inf
from core.errors import DomainError, ValidationError
from core.quantiles import (
    InterpolationParams,
    QuantileTable,
    corner_lambdas,
    project,
    tau_levels,
    to_distribution,
)

HALF = finite([0.0, 1.0], [0.5, 0.5])


def test_tau_levels_are_interval_midpoints():
    assert tau_levels(1).tolist() == [0.5]
    assert tau_levels(4).tolist() == [0.125, 0.375, 0.625, 0.875]
    with pytest.raises(DomainError):
        tau_levels(0)


# ---------------- QuantileTable ----------------
def test_quantile_table_validation_and_immutability():
    table = QuantileTable([[1.0, 2.0], [3.0, 4.0]])
    assert (table.num_states, table.m) == (2, 2)
    with pytest.raises(ValueError):
        table.theta[0, 0] = 9.0
    with pytest.raises(ValidationError):
        QuantileTable([[np.nan]])
    with pytest.raises(ValidationError):
        QuantileTable([1.0, 2.0])


def test_table_does_not_alias_its_input():
    source = np.zeros((1, 2))
    table = QuantileTable(source)
    source[0, 0] = 5.0
    assert table.theta[0, 0] == 0.0


def test_sup_distance():
    a = QuantileTable([[0.0, 1.0], [2.0, 3.0]])
    b = QuantileTable([[0.5, 1.0], [2.0, 1.0]])
    assert a.sup_distance(b) == 2.0
    with pytest.raises(ValidationError):
        a.sup_distance(QuantileTable.full(1, 2))


def test_frame_rows_use_one_based_indices():
    rows = list(QuantileTable([[0.75, 20.0]]).to_frame_rows(["x1"]))
    assert rows == [("x1", 1, 0.25, 0.75), ("x1", 2, 0.75, 20.0)]


def test_to_distribution_merges_equal_quantiles():
    nu = to_distribution(QuantileTable([[1.0, 3.0, 1.0]]), 0)
    assert np.allclose(nu.locations, [1.0, 3.0])
    assert np.allclose(nu.probs, [2 / 3, 1 / 3])
    with pytest.raises(ValidationError):
        to_distribution(QuantileTable([[1.0]]), 1)


# ---------------- InterpolationParams ----------------
def test_interpolation_params_range():
    with pytest.raises(ValidationError):
        InterpolationParams([[1.5]])
    with pytest.raises(ValidationError):
        InterpolationParams([0.5])
    assert InterpolationParams.constant(2, 3, 0.25).lam.shape == (2, 3)


def test_corner_lambdas_enumerates_every_corner():
    corners = list(corner_lambdas(2, 2))
    assert len(corners) == 16
    assert len({tuple(c.lam.ravel()) for c in corners}) == 16


# ---------------- Projection ----------------
@pytest.mark.parametrize("nu, m, lam, expected", [
    (HALF, 2, [0.0, 0.0], [0.0, 1.0]),
    (HALF, 1, [0.0], [0.0]),
    (HALF, 1, [1.0], [1.0]),
    (HALF, 1, [0.5], [0.5]),
    (dirac(3.0), 3, [0.0, 0.5, 1.0], [3.0, 3.0, 3.0]),
])
def test_project_examples(nu, m, lam, expected):
    assert project(nu, m, lam).tolist() == expected


def test_project_rejects_bad_lambda_rows():
    with pytest.raises(ValidationError):
        project(HALF, 2, [0.0])
    with pytest.raises(ValidationError):
        project(HALF, 1, [1.2])


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.integers(-20, 20), min_size=1, max_size=8),
    st.integers(1, 6),
    st.data(),
)
def test_projection_is_sorted_and_made_of_quantiles(locs, m, data):
    """
    Property: every coordinate of Pi^lambda nu is a tau_i-quantile of nu and the row is nondecreasing.
    """
    # 1. Arrange
    nu = finite(locs, np.full(len(locs), 1.0 / len(locs)))
    lam = data.draw(st.lists(st.floats(0.0, 1.0), min_size=m, max_size=m))

    # 2. Act
    row = project(nu, m, lam)

    # 3. Assert
    assert np.all(np.diff(row) >= -1e-12)
    for tau, value in zip(tau_levels(m), row):
        assert is_tau_quantile(nu, tau, value)


def test_projection_of_a_table_distribution_is_identity():
    """
    Tests that projecting (1/m) sum_i delta_{theta_i} returns the sorted theta for lambda = 0.
    """
    table = QuantileTable([[4.0, -1.0, 2.5, 0.0]])
    row = project(to_distribution(table, 0), 4, np.zeros(4))
    assert row.tolist() == [-1.0, 0.0, 2.5, 4.0]


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.integers(-20, 20), min_size=1, max_size=8),
    st.lists(st.integers(-20, 20), min_size=1, max_size=8),
    st.integers(1, 6),
    st.data(),
)
def test_projection_does_not_expand_w_inf(a, b, m, data):
    """
    Property: max_i |Pi nu - Pi nu'|_i <= w_inf(nu, nu') for a shared lambda row.
    """
    # 1. Arrange
    nu = finite(a, np.full(len(a), 1.0 / len(a)))
    other = finite(b, np.full(len(b), 1.0 / len(b)))
    lam = data.draw(st.lists(st.floats(0.0, 1.0), min_size=m, max_size=m))

    # 2. Act
    gap = np.max(np.abs(project(nu, m, lam) - project(other, m, lam)))

    # 3. Assert
    assert gap <= wasserstein_inf(nu, other) + 1e-9
