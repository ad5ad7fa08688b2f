# core/bellman.py
"""
The distributional Bellman operator applied to quantile tables.

Terminal states bootstrap from zero regardless of what the table holds for them.
"""
import sys
import os
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

# Add project root to the Python path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from core.distributions import FiniteDistribution, finite
from core.errors import UnsupportedModelError
from core.mdp import Mrp, Transition
from core.quantiles import QuantileTable


@dataclass(frozen=True)
class TargetCdf:
    """CDF of (T^pi eta)(x) and its left limit, both vectorised over t."""
    state: int
    eval: Callable
    eval_left: Callable


def bootstrap_values(mrp: Mrp, table: QuantileTable) -> np.ndarray:
    """The table as seen by a bootstrapped target: terminal rows read as zero."""
    theta = np.array(table.theta)
    theta[mrp.terminal] = 0.0
    return theta


def bellman_target_finite(mrp: Mrp, table: QuantileTable, x: int) -> FiniteDistribution:
    """Exact law of R + gamma * theta(X', J) with J uniform on {1..m}."""
    theta = bootstrap_values(mrp, table)
    gamma = mrp.discount
    m = table.m
    locations: List[np.ndarray] = []
    probs: List[np.ndarray] = []
    for branch in mrp.branches[x]:
        reward = branch.reward
        if not reward.is_finite:
            raise UnsupportedModelError(
                f"state {mrp.state_names[x]}: continuous reward model has no finite Bellman target")
        successors = np.flatnonzero(branch.next_probs > 0)
        # shape (successor, reward atom, j)
        locs = reward.locations[None, :, None] + gamma * theta[successors][:, None, :]
        mass = (branch.weight * branch.next_probs[successors])[:, None, None] * reward.probs[None, :, None] / m
        locations.append(locs.ravel())
        probs.append(np.broadcast_to(mass, locs.shape).ravel())
    return finite(np.concatenate(locations), np.concatenate(probs))


def _components(mrp: Mrp, theta: np.ndarray, x: int) -> List[Tuple[object, np.ndarray, np.ndarray]]:
    """Per branch: reward model, shifts gamma*theta(x', j) and their weights."""
    m = theta.shape[1]
    parts = []
    for branch in mrp.branches[x]:
        successors = np.flatnonzero(branch.next_probs > 0)
        shifts = (mrp.discount * theta[successors]).ravel()
        weights = np.repeat(branch.weight * branch.next_probs[successors] / m, m)
        parts.append((branch.reward, shifts, weights))
    return parts


def bellman_target_cdf(mrp: Mrp, table: QuantileTable, x: int) -> TargetCdf:
    """
    Lazily evaluated target CDF
        t -> sum_x' P(x'|x) (1/m) sum_j F_R(t - gamma theta(x', j)),
    normalized by 1/m so that it is a proper CDF.
    """
    parts = _components(mrp, bootstrap_values(mrp, table), x)

    def evaluate(t, left: bool):
        t = np.asarray(t, dtype=float)
        total = np.zeros(t.shape)
        for reward, shifts, weights in parts:
            cdf = reward.left_limit if left else reward.cdf
            total = total + np.asarray(cdf(t[..., None] - shifts)) @ weights
        return np.clip(total, 0.0, 1.0)

    return TargetCdf(x, lambda t: evaluate(t, False), lambda t: evaluate(t, True))


def target_cdf(mrp: Mrp, table: QuantileTable, x: int) -> TargetCdf:
    """Exact (atom-backed) target CDF when rewards at x are finite, lazy otherwise."""
    if mrp.rewards[x].is_finite:
        target = bellman_target_finite(mrp, table, x)
        return TargetCdf(x, target.cdf, target.left_limit)
    return bellman_target_cdf(mrp, table, x)


def td_target(v: np.ndarray, t: Transition, gamma: float) -> float:
    """r + gamma * V(x')."""
    return t.reward + gamma * float(v[t.next_state])
