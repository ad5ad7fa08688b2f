# tests/conftest.py
import sys
import os

import numpy as np
import pytest

# Add project root to the Python path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from core.distributions import dirac, finite, gaussian, uniform
from core.mdp import compile_mrp, single_action_mdp


@pytest.fixture
def selfloop_mrp():
    """Single state, reward 1, gamma 0.5: return is exactly 2."""
    return compile_mrp(single_action_mdp([[1.0]], [dirac(1.0)], 0.5))


@pytest.fixture
def fig3_gaussian_mrp():
    mdp = single_action_mdp([[0.3, 0.7], [0.6, 0.4]], [gaussian(2.0, 1.0), gaussian(-1.0, 1.0)], 0.5,
                            state_names=("x1", "x2"))
    return compile_mrp(mdp)


@pytest.fixture
def fig3_dirac_mrp():
    mdp = single_action_mdp([[0.3, 0.7], [0.6, 0.4]], [dirac(2.0), dirac(-1.0)], 0.5,
                            state_names=("x1", "x2"))
    return compile_mrp(mdp)


@pytest.fixture
def det_half_mrp():
    """Deterministic rewards, all transitions 1/2: the fixed-point set is a box."""
    mdp = single_action_mdp([[0.5, 0.5], [0.5, 0.5]], [dirac(2.0), dirac(-1.0)], 0.5,
                            state_names=("x1", "x2"))
    return compile_mrp(mdp)


@pytest.fixture
def example63_mrp():
    mdp = single_action_mdp([[0.7, 0.3], [0.5, 0.5]], [dirac(2.0), dirac(-1.0)], 0.9,
                            state_names=("x1", "x2"))
    return compile_mrp(mdp)


@pytest.fixture
def chain_mrp():
    """x0 -> x1 -> x2 -> x3 -> end, N(0, 1) rewards, gamma 0.9."""
    transition = np.eye(5, k=1)
    transition[4, 4] = 1.0
    rewards = [gaussian(0.0, 1.0)] * 4 + [dirac(0.0)]
    mdp = single_action_mdp(transition, rewards, 0.9, terminal=[4],
                            state_names=("x0", "x1", "x2", "x3", "end"))
    return compile_mrp(mdp)


@pytest.fixture
def uniform_selfloop_mrp():
    return compile_mrp(single_action_mdp([[1.0]], [uniform(0.0, 1.0)], 0.5))


@pytest.fixture
def coin_mrp():
    """Reward 0 or 1 with equal probability, two states swapping, gamma 0.8."""
    reward = finite([0.0, 1.0], [0.5, 0.5])
    return compile_mrp(single_action_mdp([[0.0, 1.0], [1.0, 0.0]], [reward, reward], 0.8))
