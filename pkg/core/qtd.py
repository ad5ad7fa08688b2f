# core/qtd.py
"""
Stochastic learning rules: quantile temporal-difference learning (QTD) in its
synchronous and asynchronous forms, Monte Carlo quantile regression and classical TD.

Every run owns its table. Transitions are pre-drawn in chunks from one RNG stream
per state (children of the run's generator), so results depend only on the seed.
"""
import logging
import sys
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

# Add project root to the Python path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from config import DEFAULT_SCHEDULE_C, DEFAULT_SCHEDULE_RHO, SAMPLE_CHUNK
from core.errors import DomainError, ValidationError
from core.mdp import Mrp, Transition, is_irreducible, reset_chain, sample_returns, sample_transitions
from core.quantiles import QuantileTable, tau_levels

logger = logging.getLogger(__name__)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator used for every run; children come from Generator.spawn."""
    return np.random.Generator(np.random.Philox(seed))


# ---------------- Step sizes ----------------
@dataclass(frozen=True)
class StepSchedule:
    """alpha_k = c / (1 + k)^rho (polynomial) or alpha_k = alpha (constant)."""
    kind: str = "polynomial"
    c: float = DEFAULT_SCHEDULE_C
    rho: float = DEFAULT_SCHEDULE_RHO
    alpha_const: float = 0.0

    def __post_init__(self):
        if self.kind == "polynomial":
            if self.c <= 0:
                raise ValidationError(f"polynomial schedule needs c > 0, got {self.c}")
            if not 0.5 < self.rho <= 1.0:
                raise ValidationError(f"polynomial schedule needs rho in (0.5, 1], got {self.rho}")
        elif self.kind == "constant":
            if self.alpha_const <= 0:
                raise ValidationError(f"constant schedule needs alpha > 0, got {self.alpha_const}")
            logger.warning("Constant step size %.4g does not satisfy the convergence conditions; "
                           "use it for experiments only.", self.alpha_const)
        else:
            raise ValidationError(f"unknown schedule kind '{self.kind}'")

    @classmethod
    def polynomial(cls, c: float = DEFAULT_SCHEDULE_C, rho: float = DEFAULT_SCHEDULE_RHO) -> "StepSchedule":
        return cls("polynomial", c=c, rho=rho)

    @classmethod
    def constant(cls, alpha: float) -> "StepSchedule":
        return cls("constant", alpha_const=alpha)

    @property
    def converges_in_theory(self) -> bool:
        return self.kind == "polynomial"

    def alpha(self, k: int) -> float:
        if self.kind == "constant":
            return self.alpha_const
        return self.c / (1.0 + k) ** self.rho

    def alphas(self, ks: np.ndarray) -> np.ndarray:
        """Vectorised alpha over an array of step counters."""
        # Scalar arithmetic so that alphas(ks)[n] == alpha(ks[n]) bit for bit.
        return np.array([self.alpha(int(k)) for k in np.asarray(ks).ravel()])


@dataclass
class RunRecord:
    snapshots: List[Tuple[int, QuantileTable]]
    final: QuantileTable
    seed: Optional[int] = None
    update_counts: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        steps = [step for step, _ in self.snapshots]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValidationError("snapshot steps must be strictly increasing")


# ---------------- Single updates ----------------
def _qtd_increment(row: np.ndarray, next_row: np.ndarray, reward: float,
                   alpha: float, gamma: float, taus: np.ndarray) -> np.ndarray:
    # indicators[i] = (1/m) sum_j 1{r + gamma theta(x', j) - theta(x, i) < 0}, all read from the old row
    targets = reward + gamma * next_row
    below = (targets[None, :] - row[:, None] < 0).mean(axis=1)
    return alpha * (taus - below)


def _check_alpha(alpha: float) -> None:
    if alpha < 0:
        raise DomainError(f"step size must be nonnegative, got {alpha}")


def qtd_update(table: QuantileTable, t: Transition, alpha: float, gamma: float) -> QuantileTable:
    """One QTD update of row t.state against the averaged target r + gamma theta(x', J)."""
    _check_alpha(alpha)
    theta = np.array(table.theta)
    theta[t.state] += _qtd_increment(table.theta[t.state], table.theta[t.next_state],
                                     t.reward, alpha, gamma, table.taus)
    return QuantileTable(theta)


def qtd_update_sampled(table: QuantileTable, t: Transition, j: int, alpha: float, gamma: float) -> QuantileTable:
    """Single-target variant: bootstraps from theta(x', j) only."""
    _check_alpha(alpha)
    if not 0 <= j < table.m:
        raise ValidationError(f"target index {j} out of range for m={table.m}")
    theta = np.array(table.theta)
    target = t.reward + gamma * table.theta[t.next_state, j]
    theta[t.state] += alpha * (table.taus - (target - table.theta[t.state] < 0))
    return QuantileTable(theta)


def mc_quantile_update(table: QuantileTable, x: int, return_sample: float, alpha: float) -> QuantileTable:
    """theta(x, i) += alpha * (tau_i - 1{G < theta(x, i)})."""
    _check_alpha(alpha)
    theta = np.array(table.theta)
    theta[x] += alpha * (table.taus - (return_sample < table.theta[x]))
    return QuantileTable(theta)


# ---------------- Transition streams ----------------
class _TransitionBuffer:
    """Chunked draws of (reward, next_state) for one state from its own stream."""

    def __init__(self, mrp: Mrp, x: int, rng: np.random.Generator, chunk: int = SAMPLE_CHUNK):
        self.mrp, self.x, self.rng, self.chunk = mrp, x, rng, chunk
        self.rewards: np.ndarray = np.empty(0)
        self.next_states: np.ndarray = np.empty(0, dtype=np.int64)
        self.pos = 0

    def take(self, count: int) -> Tuple[np.ndarray, np.ndarray]:
        """The next `count` transitions in stream order."""
        parts_r, parts_n = [], []
        while count > 0:
            if self.pos >= len(self.rewards):
                self.rewards, self.next_states = sample_transitions(self.mrp, self.x, self.rng, self.chunk)
                self.pos = 0
            n = min(count, len(self.rewards) - self.pos)
            parts_r.append(self.rewards[self.pos:self.pos + n])
            parts_n.append(self.next_states[self.pos:self.pos + n])
            self.pos += n
            count -= n
        return np.concatenate(parts_r), np.concatenate(parts_n)

    def next(self) -> Tuple[float, int]:
        if self.pos >= len(self.rewards):
            self.rewards, self.next_states = sample_transitions(self.mrp, self.x, self.rng, self.chunk)
            self.pos = 0
        r, nx = self.rewards[self.pos], self.next_states[self.pos]
        self.pos += 1
        return float(r), int(nx)


def _state_buffers(mrp: Mrp, rng: np.random.Generator) -> List[_TransitionBuffer]:
    return [_TransitionBuffer(mrp, x, stream) for x, stream in enumerate(rng.spawn(mrp.num_states))]


def _check_run(mrp: Mrp, m: int, steps: int, init: QuantileTable) -> None:
    if steps < 0:
        raise DomainError(f"steps must be nonnegative, got {steps}")
    if init.num_states != mrp.num_states or init.m != m:
        raise ValidationError(
            f"init table has shape {init.theta.shape}, expected ({mrp.num_states}, {m})")


def _snapshot_due(step: int, snapshot_every: int) -> bool:
    return snapshot_every > 0 and step % snapshot_every == 0


# ---------------- Runs ----------------
def run_synchronous(mrp: Mrp, m: int, schedule: StepSchedule, steps: int, init: QuantileTable,
                    rng: np.random.Generator, snapshot_every: int = 0,
                    seed: Optional[int] = None) -> RunRecord:
    """
    Synchronous QTD: at step k every non-terminal state draws its own transition and
    all rows are updated from theta_k. Terminal rows are never updated and are read as zero.
    """
    _check_run(mrp, m, steps, init)
    taus = tau_levels(m)
    theta = np.array(init.theta)
    live = np.flatnonzero(~mrp.terminal)
    buffers = _state_buffers(mrp, rng)
    gamma = mrp.discount
    snapshots = [(0, init)] if snapshot_every > 0 else []

    # Live rows followed by one zero row that terminal successors bootstrap from.
    work = np.zeros((live.size + 1, m))
    work[:live.size] = theta[live]
    rows = work[:live.size]
    position = np.full(mrp.num_states, live.size)
    position[live] = np.arange(live.size)

    k = 0
    while k < steps and live.size:
        block = min(SAMPLE_CHUNK, steps - k)
        drawn = [buffers[x].take(block) for x in live]
        rewards = np.ascontiguousarray(np.stack([r for r, _ in drawn]).T)              # [step, live]
        successors = np.ascontiguousarray(position[np.stack([n for _, n in drawn])].T)  # [step, live]
        alphas = schedule.alphas(np.arange(k, k + block))
        for b in range(block):
            targets = rewards[b, :, None] + gamma * work[successors[b]]          # [live, j]
            below = targets[:, None, :] < rows[:, :, None]                        # [live, i, j]
            below = below[:, :, 0] if m == 1 else below.sum(axis=2) / m
            rows += alphas[b] * (taus - below)
            if _snapshot_due(k + b + 1, snapshot_every):
                theta[live] = rows
                snapshots.append((k + b + 1, QuantileTable(theta)))
        k += block

    theta[live] = rows
    final = QuantileTable(theta)
    logger.debug("Synchronous QTD run finished after %d steps", steps)
    return RunRecord(snapshots, final, seed, np.where(mrp.terminal, 0, steps))


def _pick_source(state_source) -> Tuple[str, Optional[np.ndarray]]:
    if isinstance(state_source, str):
        return state_source, None
    kind, weights = state_source
    return kind, None if weights is None else np.asarray(weights, dtype=float)


def run_asynchronous(mrp: Mrp, m: int, schedule: StepSchedule, steps: int, init: QuantileTable,
                     rng: np.random.Generator, state_source=("iid", None), snapshot_every: int = 0,
                     seed: Optional[int] = None) -> RunRecord:
    """
    Asynchronous QTD: one state per step, with per-state step sizes alpha_{n_x}
    where n_x counts earlier updates of x.

    state_source is "trajectory" (follow the chain, restarting uniformly over
    non-terminal states after a terminal transition) or ("iid", weights).
    """
    _check_run(mrp, m, steps, init)
    kind, weights = _pick_source(state_source)
    num_states = mrp.num_states
    live = np.flatnonzero(~mrp.terminal)
    if live.size == 0:
        raise ValidationError("every state is terminal; there is nothing to update")

    if kind == "iid":
        weights = np.full(num_states, 1.0 / num_states) if weights is None else weights
        if weights.shape != (num_states,) or np.any(weights <= 0):
            raise ValidationError("iid state weights must be strictly positive over all states")
        weights = weights / weights.sum()
    elif kind == "trajectory":
        if not is_irreducible(reset_chain(mrp)):
            raise ValidationError("some state is unreachable under trajectory mode; "
                                  "the chain must form a single recurrent class")
    else:
        raise ValidationError(f"unknown state source '{kind}'")

    taus = tau_levels(m)
    theta = np.array(init.theta)
    buffers = _state_buffers(mrp, rng)
    selector = rng.spawn(1)[0]
    counts = np.zeros(num_states, dtype=np.int64)
    gamma = mrp.discount
    snapshots = [(0, init)] if snapshot_every > 0 else []

    if kind == "iid":
        cumulative = np.cumsum(weights)
        cumulative[-1] = 1.0
        current = -1
        picks = np.empty(0, dtype=np.int64)
    else:
        current = int(live[selector.integers(live.size)])

    for k in range(steps):
        if kind == "iid":
            if k % SAMPLE_CHUNK == 0:
                draws = selector.random(min(SAMPLE_CHUNK, steps - k))
                picks = np.minimum(np.searchsorted(cumulative, draws, side='right'), num_states - 1)
            x = int(picks[k % SAMPLE_CHUNK])
        else:
            x = current
        if not mrp.terminal[x]:
            r, nx = buffers[x].next()
            next_row = np.zeros(m) if mrp.terminal[nx] else theta[nx]
            theta[x] = theta[x] + _qtd_increment(theta[x], next_row, r,
                                                 schedule.alpha(int(counts[x])), gamma, taus)
            counts[x] += 1
            if kind == "trajectory":
                current = int(live[selector.integers(live.size)]) if mrp.terminal[nx] else nx
        if _snapshot_due(k + 1, snapshot_every):
            snapshots.append((k + 1, QuantileTable(theta)))

    logger.debug("Asynchronous QTD run (%s) finished; update counts %s", kind, counts.tolist())
    return RunRecord(snapshots, QuantileTable(theta), seed, counts)


def run_monte_carlo(mrp: Mrp, m: int, schedule: StepSchedule, steps: int, init: QuantileTable,
                    rng: np.random.Generator, horizon: int, snapshot_every: int = 0,
                    seed: Optional[int] = None) -> RunRecord:
    """Quantile regression against truncated Monte Carlo returns, every non-terminal state per step."""
    _check_run(mrp, m, steps, init)
    if horizon < 1:
        raise DomainError(f"horizon must be at least 1, got {horizon}")
    taus = tau_levels(m)
    theta = np.array(init.theta)
    live = np.flatnonzero(~mrp.terminal)
    streams = rng.spawn(mrp.num_states)
    snapshots = [(0, init)] if snapshot_every > 0 else []

    k = 0
    while k < steps and live.size:
        block = min(SAMPLE_CHUNK, steps - k)
        returns = np.stack([sample_returns(mrp, int(x), horizon, block, streams[x]) for x in live])
        alphas = schedule.alphas(np.arange(k, k + block))
        for b in range(block):
            theta[live] += alphas[b] * (taus[None, :] - (returns[:, b, None] < theta[live]))
            if _snapshot_due(k + b + 1, snapshot_every):
                snapshots.append((k + b + 1, QuantileTable(theta)))
        k += block
    return RunRecord(snapshots, QuantileTable(theta), seed, np.where(mrp.terminal, 0, steps))


def td_run(mrp: Mrp, schedule: StepSchedule, steps: int, init: Sequence[float],
           rng: np.random.Generator, snapshot_every: int = 0,
           history: Optional[List[Tuple[int, np.ndarray]]] = None) -> np.ndarray:
    """
    Synchronous classical TD, V(x) += alpha (R + gamma V(X') - V(x)). When a history
    list is given, (step, V) pairs are appended to it every snapshot_every steps.
    """
    if steps < 0:
        raise DomainError(f"steps must be nonnegative, got {steps}")
    values = np.array(init, dtype=float)
    if values.shape != (mrp.num_states,):
        raise ValidationError(f"init must have one value per state, got shape {values.shape}")
    live = np.flatnonzero(~mrp.terminal)
    buffers = _state_buffers(mrp, rng)
    if history is not None and snapshot_every > 0:
        history.append((0, values.copy()))

    k = 0
    while k < steps and live.size:
        block = min(SAMPLE_CHUNK, steps - k)
        drawn = [buffers[x].take(block) for x in live]
        rewards = np.stack([r for r, _ in drawn])
        next_states = np.stack([n for _, n in drawn])
        alphas = schedule.alphas(np.arange(k, k + block))
        for b in range(block):
            nxt = next_states[:, b]
            boot = np.where(mrp.terminal[nxt], 0.0, values[nxt])
            values[live] += alphas[b] * (rewards[:, b] + mrp.discount * boot - values[live])
            if history is not None and _snapshot_due(k + b + 1, snapshot_every):
                history.append((k + b + 1, values.copy()))
        k += block
    return values
