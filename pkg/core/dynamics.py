# core/dynamics.py
"""
Mean-field view of QTD: the expected update, the interval map of the differential
inclusion, forward-Euler trajectories and Lyapunov functions measuring distance to
the fixed point (set).
"""
import itertools
import logging
import sys
import os
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

# Add project root to the Python path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from config import CORNER_ENUMERATION_LIMIT, EULER_DT, EULER_HORIZON, LAMBDA_SAMPLES
from core.bellman import bellman_target_finite, target_cdf
from core.distributions import quantile_function, right_quantile_function
from core.errors import DomainError, ValidationError
from core.mdp import Mrp
from core.qdp import is_qdp_fixed_point, qdp_solve
from core.quantiles import InterpolationParams, QuantileTable, corner_lambdas, tau_levels

logger = logging.getLogger(__name__)

# Corners of a random coordinate subset of this size when full enumeration is too large.
_SUBSET_CORNER_BITS = 4


@dataclass(frozen=True)
class IntervalMapValue:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValidationError(f"empty interval [{self.lo}, {self.hi}]")

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= value <= self.hi + tol

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi


# ---------------- Vector field ----------------
def _target_limits(mrp: Mrp, table: QuantileTable) -> Tuple[np.ndarray, np.ndarray]:
    """F(theta(x, i)) and F(theta(x, i)-) of each state's Bellman target; terminal rows are left at tau."""
    taus = tau_levels(table.m)
    at = np.tile(taus, (table.num_states, 1))
    left = at.copy()
    for x in np.flatnonzero(~mrp.terminal):
        target = target_cdf(mrp, table, int(x))
        at[x] = target.eval(table.theta[x])
        left[x] = target.eval_left(table.theta[x])
    return at, left


def expected_update(mrp: Mrp, table: QuantileTable) -> np.ndarray:
    """tau_i - P(R + gamma theta(X', J) < theta(x, i)); zero on terminal rows."""
    if table.num_states != mrp.num_states:
        raise ValidationError(f"table has {table.num_states} states, MRP has {mrp.num_states}")
    _, left = _target_limits(mrp, table)
    return table.taus[None, :] - left


def di_intervals(mrp: Mrp, table: QuantileTable) -> Tuple[np.ndarray, np.ndarray]:
    """Lower and upper ends of the interval map at every coordinate."""
    at, left = _target_limits(mrp, table)
    taus = table.taus[None, :]
    return taus - at, taus - left


def di_interval(mrp: Mrp, table: QuantileTable, x: int, i: int) -> IntervalMapValue:
    """[tau_i - F(theta(x, i)), tau_i - F(theta(x, i)-)] for the Bellman target at x (i is 0-based)."""
    if not 0 <= x < table.num_states or not 0 <= i < table.m:
        raise ValidationError(f"coordinate ({x}, {i}) out of range for table {table.theta.shape}")
    tau = table.taus[i]
    if mrp.terminal[x]:
        return IntervalMapValue(0.0, 0.0)
    target = target_cdf(mrp, table, x)
    z = table.theta[x, i]
    return IntervalMapValue(float(tau - target.eval(z)), float(tau - target.eval_left(z)))


def vector_field(mrp: Mrp, grid_axes: Sequence[Sequence[float]],
                 base_table: Optional[QuantileTable] = None,
                 coords: Optional[Sequence[Tuple[int, int]]] = None) -> np.ndarray:
    """
    Evaluates expected_update on a 2-d grid over two table coordinates.
    Returns rows (c1, c2, g1, g2) with c1 varying slowest.
    """
    if len(grid_axes) != 2:
        raise ValidationError(f"field grids are two-dimensional, got {len(grid_axes)} axes")
    if base_table is None:
        base_table = QuantileTable.full(mrp.num_states, 1)
    if coords is None:
        flat = [(x, i) for x in range(base_table.num_states) for i in range(base_table.m)]
        if len(flat) != 2:
            raise ValidationError(f"field needs exactly two free coordinates, table has {len(flat)}")
        coords = flat
    (x1, i1), (x2, i2) = coords
    rows = []
    for c1, c2 in itertools.product(grid_axes[0], grid_axes[1]):
        theta = np.array(base_table.theta)
        theta[x1, i1], theta[x2, i2] = c1, c2
        drift = expected_update(mrp, QuantileTable(theta))
        rows.append((c1, c2, drift[x1, i1], drift[x2, i2]))
    return np.asarray(rows, dtype=float)


# ---------------- Trajectories ----------------
def euler_integrate(mrp: Mrp, init: QuantileTable, dt: float = EULER_DT,
                    horizon: float = EULER_HORIZON) -> List[Tuple[float, QuantileTable]]:
    """Forward Euler on d/dt theta = expected_update(theta); records every step including t = 0."""
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if horizon < 0:
        raise DomainError(f"horizon must be nonnegative, got {horizon}")
    n_steps = int(round(horizon / dt))
    table = init
    trajectory = [(0.0, table)]
    for k in range(1, n_steps + 1):
        table = QuantileTable(table.theta + dt * expected_update(mrp, table))
        trajectory.append((k * dt, table))
    return trajectory


# ---------------- Lyapunov functions ----------------
def lyapunov_simple(table: QuantileTable, fixed_point: QuantileTable) -> float:
    """max_x max_i |theta(x, i) - fixed_point(x, i)|."""
    return table.sup_distance(fixed_point)


def fitted_lambda(mrp: Mrp, table: QuantileTable) -> InterpolationParams:
    """
    Per-coordinate lambda placing Pi^lambda T theta as close to theta as possible:
    theta's relative position between the least and greatest tau_i-quantiles of the
    target, clipped to [0, 1]. Zero wherever the two quantiles coincide.
    """
    lam = np.zeros(table.theta.shape)
    if not mrp.all_finite:
        return InterpolationParams(lam)
    taus = table.taus
    for x in np.flatnonzero(~mrp.terminal):
        target = bellman_target_finite(mrp, table, int(x))
        lower = quantile_function(target, taus)
        upper = right_quantile_function(target, taus)
        gap = upper - lower
        spread = gap > 0
        lam[x, spread] = np.clip((table.theta[x, spread] - lower[spread]) / gap[spread], 0.0, 1.0)
    return InterpolationParams(lam)


def _candidate_lambdas(mrp: Mrp, table: QuantileTable, lambda_samples: int,
                       rng: np.random.Generator) -> Iterator[InterpolationParams]:
    num_states, m = table.theta.shape
    if not mrp.all_finite:
        # Continuous targets have a single quantile per level; every lambda gives the same fixed point.
        yield InterpolationParams.constant(num_states, m)
        return
    yield fitted_lambda(mrp, table)
    n = num_states * m
    if n <= CORNER_ENUMERATION_LIMIT:
        yield from corner_lambdas(num_states, m)
    else:
        subset = rng.choice(n, size=min(n, _SUBSET_CORNER_BITS), replace=False)
        for bits in itertools.product((0.0, 1.0), repeat=subset.size):
            flat = np.zeros(n)
            flat[subset] = bits
            yield InterpolationParams(flat.reshape(num_states, m))
    for _ in range(lambda_samples):
        yield InterpolationParams(rng.random((num_states, m)))


def lyapunov_general(mrp: Mrp, table: QuantileTable, lambda_samples: int = LAMBDA_SAMPLES,
                     rng: Optional[np.random.Generator] = None, tol_inf: Optional[float] = None) -> float:
    """
    min over lambda of ||theta - theta_hat^lambda||_inf, approximated over corner
    lambdas, a fitted lambda and uniform draws. The result is an upper bound on the
    true minimum and exactly zero when theta is itself a QDP fixed point.
    """
    if lambda_samples < 1:
        raise DomainError(f"lambda_samples must be at least 1, got {lambda_samples}")
    if table.num_states != mrp.num_states:
        raise ValidationError(f"table has {table.num_states} states, MRP has {mrp.num_states}")
    if mrp.all_finite and is_qdp_fixed_point(mrp, table):
        return 0.0
    rng = np.random.default_rng(0) if rng is None else rng

    solved: Dict[bytes, QuantileTable] = {}
    best = np.inf
    for lam in _candidate_lambdas(mrp, table, lambda_samples, rng):
        key = lam.lam.tobytes()
        if key not in solved:
            solved[key], _ = qdp_solve(mrp, lam, table, tol_inf=tol_inf)
        best = min(best, table.sup_distance(solved[key]))
    logger.debug("Fixed-point set distance %.4g over %d distinct lambdas", best, len(solved))
    return float(best)
