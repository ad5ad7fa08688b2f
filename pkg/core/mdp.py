# core/mdp.py
"""
Finite MDPs, policies and the policy-induced Markov reward process.

Terminal states are absorbing with a Dirac-0 reward, so every operator stays total.
The compiled Mrp keeps one branch per action with positive probability, which keeps
the joint law of (reward, next state) exact when both depend on the action.
"""
import logging
import sys
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.csgraph import connected_components

# Add project root to the Python path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from config import PROB_TOL
from core.distributions import RewardModel, dirac, mix_models
from core.errors import UnsupportedModelError, ValidationError

logger = logging.getLogger(__name__)

TERMINAL_REWARD = dirac(0.0)


def _check_rows(matrix: np.ndarray, what: str) -> None:
    if np.any(matrix < 0) or not np.all(np.isfinite(matrix)):
        raise ValidationError(f"{what}: entries must be finite and nonnegative")
    sums = matrix.sum(axis=-1)
    bad = np.argwhere(np.abs(sums - 1.0) > PROB_TOL)
    if bad.size:
        row = tuple(int(v) for v in bad[0])
        raise ValidationError(f"{what}: row {row} sums to {sums[tuple(bad[0])]!r}, expected 1")


# ---------------- Domain types ----------------
@dataclass(frozen=True, eq=False)
class Mdp:
    transition: np.ndarray          # [state, action, next_state]
    rewards: Tuple[Tuple[RewardModel, ...], ...]   # [state][action]
    discount: float
    terminal: np.ndarray            # [state] bool
    state_names: Tuple[str, ...] = ()
    deterministic_after_k: Optional[int] = None

    def __post_init__(self):
        if self.transition.ndim != 3 or self.transition.shape[0] != self.transition.shape[2]:
            raise ValidationError(f"transition must have shape (S, A, S), got {self.transition.shape}")
        if not 0.0 <= self.discount < 1.0:
            raise ValidationError(f"discount must lie in [0, 1), got {self.discount}")
        _check_rows(self.transition, "transition")
        if len(self.rewards) != self.num_states or any(len(row) != self.num_actions for row in self.rewards):
            raise ValidationError("rewards must be indexed [state][action]")
        if self.terminal.shape != (self.num_states,):
            raise ValidationError("terminal flags must have one entry per state")
        if not self.state_names:
            object.__setattr__(self, "state_names", tuple(f"x{s}" for s in range(self.num_states)))
        elif len(self.state_names) != self.num_states:
            raise ValidationError("state_names must have one entry per state")

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]


@dataclass(frozen=True, eq=False)
class Policy:
    probs: np.ndarray               # [state, action]

    def __post_init__(self):
        if self.probs.ndim != 2:
            raise ValidationError(f"policy must have shape (S, A), got {self.probs.shape}")
        _check_rows(self.probs, "policy")

    @classmethod
    def uniform(cls, num_states: int, num_actions: int) -> "Policy":
        return cls(np.full((num_states, num_actions), 1.0 / num_actions))


@dataclass(frozen=True, eq=False)
class Branch:
    """One action's contribution to P^pi(x', r | x)."""
    weight: float
    next_probs: np.ndarray
    reward: RewardModel


@dataclass(frozen=True, eq=False)
class Mrp:
    transition: np.ndarray          # [state, next_state] = P^pi(x'|x)
    rewards: Tuple[RewardModel, ...]
    discount: float
    terminal: np.ndarray
    branches: Tuple[Tuple[Branch, ...], ...]
    state_names: Tuple[str, ...]
    deterministic_after_k: Optional[int] = None

    def __post_init__(self):
        _check_rows(self.transition, "Mrp transition")
        if not 0.0 <= self.discount < 1.0:
            raise ValidationError(f"discount must lie in [0, 1), got {self.discount}")

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def all_finite(self) -> bool:
        return all(model.is_finite for model in self.rewards)


@dataclass(frozen=True)
class Transition:
    state: int
    reward: float
    next_state: int


# ---------------- Construction ----------------
def single_action_mdp(transition, rewards: Sequence[RewardModel], discount: float,
                      terminal: Sequence[int] = (), state_names: Sequence[str] = (),
                      deterministic_after_k: Optional[int] = None) -> Mdp:
    """Convenience builder for Markov reward processes written as one-action MDPs."""
    transition = np.asarray(transition, dtype=float)
    num_states = transition.shape[0]
    flags = np.zeros(num_states, dtype=bool)
    flags[list(terminal)] = True
    transition = transition.copy()
    for s in np.flatnonzero(flags):
        transition[s] = np.eye(num_states)[s]
    rewards = tuple((TERMINAL_REWARD,) if flags[s] else (rewards[s],) for s in range(num_states))
    return Mdp(transition[:, None, :], rewards, float(discount), flags,
               tuple(state_names), deterministic_after_k)


def compile_mrp(mdp: Mdp, policy: Optional[Policy] = None) -> Mrp:
    """Folds the policy into the MDP: P^pi(x'|x) and the policy-mixed reward model at x."""
    if policy is None:
        policy = Policy.uniform(mdp.num_states, mdp.num_actions)
    if policy.probs.shape != (mdp.num_states, mdp.num_actions):
        raise ValidationError(
            f"policy shape {policy.probs.shape} does not match MDP ({mdp.num_states}, {mdp.num_actions})")

    eye = np.eye(mdp.num_states)
    transition = np.einsum("sa,sat->st", policy.probs, mdp.transition)
    rewards: List[RewardModel] = []
    branches = []
    for s in range(mdp.num_states):
        if mdp.terminal[s]:
            transition[s] = eye[s]
            rewards.append(TERMINAL_REWARD)
            branches.append((Branch(1.0, eye[s], TERMINAL_REWARD),))
            continue
        state_branches = tuple(
            Branch(float(policy.probs[s, a]), mdp.transition[s, a], mdp.rewards[s][a])
            for a in range(mdp.num_actions) if policy.probs[s, a] > 0
        )
        branches.append(state_branches)
        rewards.append(mix_models([(b.weight, b.reward) for b in state_branches]))

    return Mrp(transition, tuple(rewards), mdp.discount, mdp.terminal.copy(),
               tuple(branches), mdp.state_names, mdp.deterministic_after_k)


# ---------------- Sampling ----------------
def _draw_index(cumulative: np.ndarray, u):
    return np.minimum(np.searchsorted(cumulative, u, side='right'), len(cumulative) - 1)


def sample_transitions(mrp: Mrp, x: int, rng: np.random.Generator, size: int) -> Tuple[np.ndarray, np.ndarray]:
    """Draws `size` iid (reward, next_state) pairs from P^pi(. | x)."""
    if mrp.terminal[x]:
        return np.zeros(size), np.full(size, x, dtype=np.int64)
    state_branches = mrp.branches[x]
    rewards = np.empty(size)
    next_states = np.empty(size, dtype=np.int64)
    if len(state_branches) == 1:
        picks = np.zeros(size, dtype=np.int64)
    else:
        weights = np.cumsum([b.weight for b in state_branches])
        picks = _draw_index(weights, rng.random(size))
    for k, branch in enumerate(state_branches):
        chosen = picks == k
        count = int(chosen.sum())
        if count == 0:
            continue
        rewards[chosen] = branch.reward.sample(rng, count)
        next_states[chosen] = _draw_index(np.cumsum(branch.next_probs), rng.random(count))
    return rewards, next_states


def sample_transition(mrp: Mrp, x: int, rng: np.random.Generator) -> Transition:
    if not 0 <= x < mrp.num_states:
        raise ValidationError(f"state index {x} out of range")
    rewards, next_states = sample_transitions(mrp, x, rng, 1)
    return Transition(x, float(rewards[0]), int(next_states[0]))


def enumerate_transitions(mrp: Mrp, x: int) -> List[Tuple[int, float, float]]:
    """Full support of the joint (next_state, reward) law at x with its probabilities."""
    if mrp.terminal[x]:
        return [(x, 0.0, 1.0)]
    joint = {}
    for branch in mrp.branches[x]:
        if not branch.reward.is_finite:
            raise UnsupportedModelError(
                f"state {mrp.state_names[x]}: continuous reward model cannot be enumerated")
        for nxt in np.flatnonzero(branch.next_probs > 0):
            p_next = branch.weight * branch.next_probs[nxt]
            for r, p in zip(branch.reward.locations.tolist(), branch.reward.probs.tolist()):
                key = (int(nxt), r)
                joint[key] = joint.get(key, 0.0) + p_next * p
    return [(nxt, r, p) for (nxt, r), p in sorted(joint.items())]


# ---------------- Values ----------------
def mean_rewards(mrp: Mrp) -> np.ndarray:
    means = [model.mean for model in mrp.rewards]
    if any(m is None for m in means):
        raise UnsupportedModelError("value computations need reward models with known means")
    return np.asarray(means, dtype=float)


def value_function(mrp: Mrp) -> np.ndarray:
    """Solves (I - gamma P^pi) V = r_bar."""
    system = np.eye(mrp.num_states) - mrp.discount * mrp.transition
    return np.linalg.solve(system, mean_rewards(mrp))


# ---------------- Structure ----------------
def reset_chain(mrp: Mrp) -> np.ndarray:
    """
    State chain followed by trajectory-mode updates: transitions into terminal
    states are redirected to a uniform restart over the non-terminal states.
    Returned over non-terminal states only.
    """
    live = np.flatnonzero(~mrp.terminal)
    if live.size == 0:
        raise ValidationError("every state is terminal; there is nothing to update")
    restart = np.full(live.size, 1.0 / live.size)
    chain = mrp.transition[np.ix_(live, live)].copy()
    into_terminal = mrp.transition[np.ix_(live, np.flatnonzero(mrp.terminal))].sum(axis=1)
    chain += into_terminal[:, None] * restart[None, :]
    return chain


def is_irreducible(chain: np.ndarray) -> bool:
    n_components, _ = connected_components((chain > 0).astype(float), directed=True, connection='strong')
    return n_components == 1


# ---------------- Returns ----------------
def truncation_horizon(mrp: Mrp, eps: float) -> int:
    """Smallest H with gamma^H * R_abs / (1 - gamma) <= eps."""
    gamma = mrp.discount
    bounds = [abs(v) for model in mrp.rewards if model.support_hint for v in model.support_hint]
    r_abs = max(bounds) if bounds else 0.0
    if gamma == 0.0 or r_abs == 0.0:
        return 1
    return max(1, int(np.ceil(np.log(eps * (1.0 - gamma) / r_abs) / np.log(gamma))))


def sample_returns(mrp: Mrp, x: int, horizon: int, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """n_samples truncated discounted returns sum_{t < horizon} gamma^t R_t started from x."""
    states = np.full(n_samples, x, dtype=np.int64)
    returns = np.zeros(n_samples)
    discount = 1.0
    for _ in range(horizon):
        live = ~mrp.terminal[states]
        if not live.any():
            break
        # Every sample moves once per step: select on the pre-step states.
        next_states = states.copy()
        for s in np.unique(states[live]):
            at_s = states == s
            rewards, moved = sample_transitions(mrp, int(s), rng, int(at_s.sum()))
            returns[at_s] += discount * rewards
            next_states[at_s] = moved
        states = next_states
        discount *= mrp.discount
    return returns
