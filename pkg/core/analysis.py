# core/analysis.py
"""
Ground truth and diagnostics: Monte Carlo return distributions, fixed-point quality
bounds, distance to the fixed-point set and local quantile back-up diagrams.
"""
import logging
import sys
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

# Add project root to the Python path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from config import LAMBDA_SAMPLES, MC_BOOTSTRAP, MC_SAMPLES, MC_TRUNCATION_EPS
from core.bellman import bootstrap_values
from core.distributions import FiniteDistribution, empirical, quantile_function, wasserstein1
from core.dynamics import lyapunov_general
from core.errors import DomainError, UnsupportedModelError, ValidationError
from core.mdp import Mrp, enumerate_transitions, sample_returns, truncation_horizon, value_function
from core.qdp import default_tol_inf, is_qdp_fixed_point, qdp_solve
from core.quantiles import InterpolationParams, QuantileTable, tau_levels, to_distribution

logger = logging.getLogger(__name__)

__all__ = [
    "BackupDiagram", "BackupEdge", "BoundReport", "backup_diagram", "bound_factor",
    "check_w1_bound", "distance_to_fixed_point_set", "monte_carlo_returns",
    "return_quantiles", "value_sup_error",
]


# ---------------- Ground truth ----------------
def monte_carlo_returns(mrp: Mrp, x: int, horizon: Optional[int] = None,
                        n_samples: int = MC_SAMPLES, rng: Optional[np.random.Generator] = None) -> FiniteDistribution:
    """
    Empirical law of sum_{t < horizon} gamma^t R_t over n_samples trajectories from x.
    The default horizon keeps the truncation error below MC_TRUNCATION_EPS.
    """
    if n_samples < 1:
        raise DomainError(f"n_samples must be at least 1, got {n_samples}")
    horizon = truncation_horizon(mrp, MC_TRUNCATION_EPS) if horizon is None else horizon
    rng = np.random.default_rng() if rng is None else rng
    return empirical(sample_returns(mrp, x, horizon, n_samples, rng))


def return_quantiles(mrp: Mrp, m: int, n_samples: int, rng: np.random.Generator,
                     horizon: Optional[int] = None) -> QuantileTable:
    """Least tau_i-quantiles of the Monte Carlo return distribution at every state."""
    taus = tau_levels(m)
    rows = [quantile_function(monte_carlo_returns(mrp, x, horizon, n_samples, rng), taus)
            for x in range(mrp.num_states)]
    return QuantileTable(np.vstack(rows))


def value_sup_error(mrp: Mrp, values: np.ndarray) -> float:
    return float(np.max(np.abs(np.asarray(values) - value_function(mrp))))


# ---------------- Fixed-point quality ----------------
def bound_factor(taus: Sequence[float]) -> float:
    """max(tau_1, max_i (tau_{i+1} - tau_i) / 2, 1 - tau_m): the level-dependent part of the w1 bound."""
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or taus.size == 0:
        raise ValidationError("bound_factor needs a non-empty vector of levels")
    if np.any(taus <= 0) or np.any(taus >= 1) or np.any(np.diff(taus) < 0):
        raise DomainError("levels must be sorted and lie in (0, 1)")
    gaps = np.diff(taus) / 2.0
    return float(max(taus[0], gaps.max() if gaps.size else 0.0, 1.0 - taus[-1]))


@dataclass
class BoundReport:
    measured_w1: float
    bound: float
    m: int
    gamma: float
    v_min: float
    v_max: float
    k: Optional[int] = None
    bound_general: float = 0.0
    bound_k: Optional[float] = None
    mc_margin: float = 0.0
    truncation_error: float = 0.0
    solver_tolerance: float = 0.0
    n_samples: int = 0
    per_state: Dict[str, float] = field(default_factory=dict)

    @property
    def within_bound(self) -> bool:
        return self.measured_w1 <= self.bound + self.mc_margin + self.truncation_error + self.solver_tolerance

    def to_text(self) -> str:
        lines = [
            f"measured_w1: {self.measured_w1:.12g}",
            f"bound: {self.bound:.12g}",
            f"bound_general: {self.bound_general:.12g}",
            f"bound_k: {'' if self.bound_k is None else format(self.bound_k, '.12g')}",
            f"k: {'' if self.k is None else self.k}",
            f"m: {self.m}",
            f"gamma: {self.gamma:.12g}",
            f"v_min: {self.v_min:.12g}",
            f"v_max: {self.v_max:.12g}",
            f"mc_margin: {self.mc_margin:.12g}",
            f"truncation_error: {self.truncation_error:.12g}",
            f"solver_tolerance: {self.solver_tolerance:.12g}",
            f"n_samples: {self.n_samples}",
            f"within_bound: {str(self.within_bound).lower()}",
        ]
        lines += [f"w1[{name}]: {value:.12g}" for name, value in self.per_state.items()]
        return "\n".join(lines) + "\n"

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{
            "measured_w1": self.measured_w1, "bound": self.bound, "bound_general": self.bound_general,
            "bound_k": self.bound_k, "k": self.k, "m": self.m, "gamma": self.gamma,
            "v_min": self.v_min, "v_max": self.v_max, "mc_margin": self.mc_margin,
            "truncation_error": self.truncation_error, "n_samples": self.n_samples,
        }])


def _reward_range(mrp: Mrp) -> Tuple[float, float]:
    for x, model in enumerate(mrp.rewards):
        if not model.bounded or model.support_hint is None:
            raise UnsupportedModelError(
                f"state {mrp.state_names[x]}: the w1 bound needs bounded rewards, got {getattr(model, 'name', 'model')}")
    return (min(model.support_hint[0] for model in mrp.rewards),
            max(model.support_hint[1] for model in mrp.rewards))


def check_w1_bound(mrp: Mrp, m: int, lam: Optional[InterpolationParams] = None,
                   n_samples: int = MC_SAMPLES, rng: Optional[np.random.Generator] = None,
                   horizon: Optional[int] = None, bootstrap: int = MC_BOOTSTRAP,
                   ground_truth: Optional[List[np.ndarray]] = None) -> BoundReport:
    """
    Compares the QDP fixed point against Monte Carlo ground truth in w1, state by state,
    and reports (V_MAX - V_MIN) / (2m(1 - gamma)) alongside the measured maximum.
    When the MDP declares deterministic_after_k the (1 - gamma^k) refinement is reported too.

    ground_truth, when given, holds one array of return samples per state and is reused;
    otherwise it is sampled here (and can be captured by passing an empty list).
    """
    r_min, r_max = _reward_range(mrp)
    gamma = mrp.discount
    v_min, v_max = r_min / (1.0 - gamma), r_max / (1.0 - gamma)
    bound_general = (v_max - v_min) / (2.0 * m * (1.0 - gamma))
    k = mrp.deterministic_after_k
    bound_k = None if k is None else bound_general * (1.0 - gamma ** k)
    bound = bound_general if bound_k is None else min(bound_general, bound_k)

    rng = np.random.default_rng() if rng is None else rng
    horizon = truncation_horizon(mrp, MC_TRUNCATION_EPS) if horizon is None else horizon
    r_abs = max(abs(r_min), abs(r_max))
    truncation_error = 0.0 if gamma == 0 else gamma ** horizon * r_abs / (1.0 - gamma)

    lam = InterpolationParams.constant(mrp.num_states, m) if lam is None else lam
    fixed_point, _ = qdp_solve(mrp, lam, QuantileTable.full(mrp.num_states, m))

    if ground_truth is None or not ground_truth:
        samples = [sample_returns(mrp, x, horizon, n_samples, rng) for x in range(mrp.num_states)]
        if ground_truth is not None:
            ground_truth.extend(samples)
    else:
        samples = ground_truth

    per_state = {}
    for x in range(mrp.num_states):
        per_state[mrp.state_names[x]] = wasserstein1(to_distribution(fixed_point, x), empirical(samples[x]))
    measured = max(per_state.values())

    replicates = []
    for _ in range(bootstrap):
        worst = 0.0
        for x in range(mrp.num_states):
            resample = samples[x][rng.integers(0, samples[x].size, samples[x].size)]
            worst = max(worst, wasserstein1(to_distribution(fixed_point, x), empirical(resample)))
        replicates.append(worst)
    mc_margin = 3.0 * float(np.std(replicates, ddof=1)) if bootstrap > 1 else 0.0

    report = BoundReport(measured, bound, m, gamma, v_min, v_max, k, bound_general, bound_k,
                         mc_margin, truncation_error, default_tol_inf(mrp),
                         int(samples[0].size), per_state)
    logger.info("w1 bound check (m=%d): measured %.4g, bound %.4g, margin %.2g",
                m, measured, bound, mc_margin)
    return report


# ---------------- Fixed-point set ----------------
def distance_to_fixed_point_set(mrp: Mrp, table: QuantileTable, lambda_samples: int = LAMBDA_SAMPLES,
                                rng: Optional[np.random.Generator] = None) -> float:
    """inf over lambda of ||theta - theta_hat^lambda||_inf; see dynamics.lyapunov_general."""
    return lyapunov_general(mrp, table, lambda_samples, rng)


# ---------------- Back-up diagrams ----------------
@dataclass(frozen=True)
class BackupEdge:
    source_state: int
    source_i: int
    reward: float
    weight: float


@dataclass
class BackupDiagram:
    """edges[(x, i)] lists the target atoms that reproduce theta(x, i); indices are 0-based."""
    edges: Dict[Tuple[int, int], List[BackupEdge]]
    resolved: Dict[Tuple[int, int], bool]
    state_names: Tuple[str, ...] = ()

    def rows(self):
        """(x, i, source_x, source_i, reward, weight) with state names and 1-based i; blanks when unresolved."""
        for (x, i), edges in sorted(self.edges.items()):
            if not edges:
                yield self.state_names[x], i + 1, None, None, None, None
            for e in edges:
                yield (self.state_names[x], i + 1, self.state_names[e.source_state],
                       e.source_i + 1, e.reward, e.weight)


def backup_diagram(mrp: Mrp, fixed_point: QuantileTable, match_tol: Optional[float] = None) -> BackupDiagram:
    """
    For each (x, i), every target atom (x', j, r) with r + gamma theta(x', j) == theta(x, i).
    Matching is bitwise unless match_tol is given.
    """
    if not mrp.all_finite:
        raise ValidationError("back-up diagrams need finite-support rewards at every state")
    if not is_qdp_fixed_point(mrp, fixed_point):
        raise ValidationError("back-up diagrams are defined at QDP fixed points only")
    theta = bootstrap_values(mrp, fixed_point)
    gamma = mrp.discount
    m = fixed_point.m

    edges: Dict[Tuple[int, int], List[BackupEdge]] = {}
    resolved: Dict[Tuple[int, int], bool] = {}
    for x in range(mrp.num_states):
        support = enumerate_transitions(mrp, x)
        for i in range(m):
            value = fixed_point.theta[x, i]
            found = []
            for nxt, r, p in support:
                atoms = r + gamma * theta[nxt]
                hits = atoms == value if match_tol is None else np.abs(atoms - value) <= match_tol
                found += [BackupEdge(nxt, int(j), r, p / m) for j in np.flatnonzero(hits)]
            edges[(x, i)] = found
            resolved[(x, i)] = bool(found)

    unresolved = [k for k, ok in resolved.items() if not ok]
    if unresolved:
        logger.warning("%d quantile coordinates have no exactly matching target atom: %s",
                       len(unresolved), [(mrp.state_names[x], i + 1) for x, i in unresolved])
    return BackupDiagram(edges, resolved, mrp.state_names)

