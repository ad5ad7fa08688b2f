# tests/test_bellman.py

import numpy as np
import pytest
from scipy import stats
import sys
import os

# Add project root to the Python path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from core.bellman import (
    bellman_target_cdf,
    bellman_target_finite,
    bootstrap_values,
    target_cdf,
    td_target,
)
from core.distributions import dirac
from core.errors import UnsupportedModelError
from core.mdp import Transition, compile_mrp, single_action_mdp
from core.quantiles import QuantileTable


@pytest.fixture
def one_step_mrp():
    """x0 pays 1 and moves to the terminal state 'end'."""
    mdp = single_action_mdp([[0.0, 1.0], [0.0, 1.0]], [dirac(1.0), dirac(0.0)], 0.9,
                            terminal=[1], state_names=("x0", "end"))
    return compile_mrp(mdp)


def test_finite_target_at_zero_table_is_the_reward(fig3_dirac_mrp):
    target = bellman_target_finite(fig3_dirac_mrp, QuantileTable.full(2, 1), 0)
    assert target == dirac(2.0)


def test_finite_target_mixes_successor_quantiles(fig3_dirac_mrp):
    """
    Tests the exact target law at x1: 2 + 0.5 * theta(x', j) weighted by P(x'|x1) / m.
    """
    # 1. Arrange
    table = QuantileTable([[1.0], [3.0]])

    # 2. Act
    target = bellman_target_finite(fig3_dirac_mrp, table, 0)

    # 3. Assert
    assert target.locations.tolist() == [2.5, 3.5]
    assert np.allclose(target.probs, [0.3, 0.7])


def test_target_with_several_quantiles(fig3_dirac_mrp):
    table = QuantileTable([[0.0, 2.0], [-2.0, 4.0]])
    target = bellman_target_finite(fig3_dirac_mrp, table, 1)
    # -1 + 0.5 * {0, 2} with 0.6 / 2 each, -1 + 0.5 * {-2, 4} with 0.4 / 2 each
    assert target.locations.tolist() == [-2.0, -1.0, 0.0, 1.0]
    assert np.allclose(target.probs, [0.2, 0.3, 0.3, 0.2])


def test_terminal_successors_bootstrap_from_zero(one_step_mrp):
    table = QuantileTable([[5.0], [100.0]])
    assert bootstrap_values(one_step_mrp, table).tolist() == [[5.0], [0.0]]
    assert bellman_target_finite(one_step_mrp, table, 0) == dirac(1.0)


def test_finite_target_rejects_continuous_rewards(fig3_gaussian_mrp):
    with pytest.raises(UnsupportedModelError):
        bellman_target_finite(fig3_gaussian_mrp, QuantileTable.full(2, 1), 0)


def test_lazy_cdf_of_gaussian_target(fig3_gaussian_mrp):
    """
    Tests the lazily evaluated target CDF against the closed form at a zero table.
    """
    # 1. Arrange
    target = bellman_target_cdf(fig3_gaussian_mrp, QuantileTable.full(2, 1), 0)
    ts = np.array([-1.0, 2.0, 4.0])

    # 2. Act
    values = target.eval(ts)

    # 3. Assert
    assert np.allclose(values, stats.norm.cdf(ts, loc=2.0))
    assert np.allclose(target.eval_left(ts), values)


def test_lazy_cdf_with_shifts(fig3_gaussian_mrp):
    table = QuantileTable([[2.0], [-2.0]])
    target = bellman_target_cdf(fig3_gaussian_mrp, table, 0)
    expected = 0.3 * stats.norm.cdf(0.0, loc=3.0) + 0.7 * stats.norm.cdf(0.0, loc=1.0)
    assert np.isclose(float(target.eval(np.array(0.0))), expected)


def test_lazy_and_exact_cdfs_agree_on_finite_rewards(fig3_dirac_mrp):
    table = QuantileTable([[1.0, 4.0], [-3.0, 0.5]])
    exact = target_cdf(fig3_dirac_mrp, table, 0)
    lazy = bellman_target_cdf(fig3_dirac_mrp, table, 0)
    ts = np.linspace(-5.0, 10.0, 61)
    assert np.allclose(exact.eval(ts), lazy.eval(ts))
    assert np.allclose(exact.eval_left(ts), lazy.eval_left(ts))


def test_td_target():
    assert td_target(np.array([1.0, 4.0]), Transition(0, 0.5, 1), 0.5) == 2.5
