# core/qdp.py
"""
Quantile dynamic programming: theta <- Pi^lambda T^pi theta.

Two step implementations are provided. The discrete one materializes the Bellman
target as a sorted list of atoms; the continuous one solves phi_x(theta') = tau_i
by bisection on the target CDF, which is monotone but kinked, so no derivatives.
"""
import logging
import sys
import os
from typing import Iterator, Optional, Tuple

import numpy as np

# Add project root to the Python path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from config import (
    BISECTION_MAX_DOUBLINGS,
    BISECTION_TOL,
    QDP_MAX_ITERS,
    QDP_POLISH_ITERS,
    QDP_SNAP_DECIMALS,
    QDP_SNAP_TOL,
    QDP_TOL_INF,
    QDP_TOL_INF_CONTINUOUS,
)
from core.bellman import bellman_target_cdf, bellman_target_finite, bootstrap_values, target_cdf
from core.distributions import quantile_function
from core.errors import DomainError, NonConvergenceError, NumericError, UnsupportedModelError, ValidationError
from core.mdp import Mrp
from core.quantiles import InterpolationParams, QuantileTable, project, tau_levels

logger = logging.getLogger(__name__)

_MAX_BISECTIONS = 200


def _check_shapes(mrp: Mrp, table: QuantileTable, lam: Optional[InterpolationParams] = None) -> None:
    if table.num_states != mrp.num_states:
        raise ValidationError(f"table has {table.num_states} states, MRP has {mrp.num_states}")
    if lam is not None and lam.lam.shape != table.theta.shape:
        raise ValidationError(f"lambda shape {lam.lam.shape} does not match table shape {table.theta.shape}")


# ---------------- One-step operators ----------------
def qdp_step_discrete(mrp: Mrp, table: QuantileTable, lam: InterpolationParams) -> QuantileTable:
    """Pi^lambda T^pi for finitely supported rewards; every row reads from the input table."""
    _check_shapes(mrp, table, lam)
    if not mrp.all_finite:
        raise UnsupportedModelError("the discrete QDP step needs finite-support rewards at every state")
    rows = [project(bellman_target_finite(mrp, table, x), table.m, lam.lam[x])
            for x in range(mrp.num_states)]
    return QuantileTable(np.vstack(rows))


def _bracket(evaluate, taus: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Widens [lo, hi] geometrically until eval(lo) < tau <= eval(hi) for every level."""
    width = np.full(taus.shape, max(float(np.max(hi - lo)), 1.0))
    for _ in range(BISECTION_MAX_DOUBLINGS):
        low_bad = evaluate(lo) >= taus
        if not low_bad.any():
            break
        lo = np.where(low_bad, lo - width, lo)
        width = np.where(low_bad, 2.0 * width, width)
    else:
        raise NumericError(f"no lower bracket found within {BISECTION_MAX_DOUBLINGS} doublings")

    width = np.full(taus.shape, max(float(np.max(hi - lo)), 1.0))
    for _ in range(BISECTION_MAX_DOUBLINGS):
        high_bad = evaluate(hi) < taus
        if not high_bad.any():
            break
        hi = np.where(high_bad, hi + width, hi)
        width = np.where(high_bad, 2.0 * width, width)
    else:
        raise NumericError(f"no upper bracket found within {BISECTION_MAX_DOUBLINGS} doublings")
    return lo, hi


def qdp_step_continuous(mrp: Mrp, table: QuantileTable, tol: float = BISECTION_TOL) -> QuantileTable:
    """Solves (1/m) sum_x' P(x'|x) sum_j F_R(t - gamma theta(x', j)) = tau_i by bisection, per state."""
    if tol <= 0:
        raise DomainError(f"bisection tolerance must be positive, got {tol}")
    _check_shapes(mrp, table)
    taus = tau_levels(table.m)
    theta = bootstrap_values(mrp, table)
    rows = []
    for x in range(mrp.num_states):
        reward = mrp.rewards[x]
        if reward.is_finite:
            # Bisection on a step CDF converges to the least quantile; take it exactly.
            rows.append(quantile_function(bellman_target_finite(mrp, table, x), taus))
            continue

        target = bellman_target_cdf(mrp, table, x)
        hint_lo, hint_hi = reward.support_hint if reward.support_hint else (-1.0, 1.0)
        scaled = mrp.discount * theta
        lo = np.full(taus.shape, hint_lo + scaled.min())
        hi = np.full(taus.shape, hint_hi + scaled.max())
        lo, hi = _bracket(target.eval, taus, lo, hi)

        for _ in range(_MAX_BISECTIONS):
            if np.max(hi - lo) <= tol:
                break
            mid = 0.5 * (lo + hi)
            above = target.eval(mid) >= taus
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
        rows.append(np.maximum.accumulate(0.5 * (lo + hi)))
    return QuantileTable(np.vstack(rows))


def qdp_step(mrp: Mrp, table: QuantileTable, lam: InterpolationParams,
             tol: float = BISECTION_TOL) -> QuantileTable:
    """Discrete step when every reward is finite, bisection step otherwise (lambda is then immaterial)."""
    if mrp.all_finite:
        return qdp_step_discrete(mrp, table, lam)
    return qdp_step_continuous(mrp, table, tol)


# ---------------- Fixed-point iteration ----------------
def qdp_iterates(mrp: Mrp, lam: InterpolationParams, init: QuantileTable,
                 tol: float = BISECTION_TOL) -> Iterator[QuantileTable]:
    """Yields theta_1, theta_2, ... of the QDP iteration started at init."""
    table = init
    while True:
        table = qdp_step(mrp, table, lam, tol)
        yield table


def default_tol_inf(mrp: Mrp) -> float:
    return QDP_TOL_INF if mrp.all_finite else QDP_TOL_INF_CONTINUOUS


def qdp_solve(mrp: Mrp, lam: InterpolationParams, init: QuantileTable,
              tol_inf: Optional[float] = None, max_iters: int = QDP_MAX_ITERS,
              bisection_tol: float = BISECTION_TOL, polish: bool = False) -> Tuple[QuantileTable, int]:
    """
    Iterates Pi^lambda T^pi until successive iterates differ by at most
    tol_inf * (1 - gamma) / gamma in sup-norm, which puts the last iterate within
    tol_inf of the fixed point by the gamma-contraction.

    With polish=True and finite rewards, iteration continues until the table stops
    changing (at most QDP_POLISH_ITERS more steps). Entries within rounding of a
    short decimal are then snapped onto it when the snapped table is still a float
    fixed point, so 2 / (1 - 0.9) comes back as 20.0.
    """
    tol_inf = default_tol_inf(mrp) if tol_inf is None else tol_inf
    if tol_inf <= 0:
        raise DomainError(f"tol_inf must be positive, got {tol_inf}")
    _check_shapes(mrp, init, lam)
    gamma = mrp.discount
    threshold = np.inf if gamma == 0 else tol_inf * (1.0 - gamma) / gamma

    previous = init
    change = np.inf
    for iters in range(1, max_iters + 1):
        table = qdp_step(mrp, previous, lam, bisection_tol)
        change = table.sup_distance(previous)
        logger.debug("QDP iteration %d: sup change %.3e", iters, change)
        if change <= threshold:
            logger.info("QDP converged after %d iterations (last change %.3e)", iters, change)
            if polish and mrp.all_finite:
                return _polish(mrp, table, lam, iters)
            return table, iters
        previous = table
    raise NonConvergenceError(
        f"QDP did not converge within {max_iters} iterations (last change {change:.3e})",
        table=previous, iters=max_iters)


def _settle(mrp: Mrp, table: QuantileTable, lam: InterpolationParams) -> Tuple[QuantileTable, int, bool]:
    """Steps until the table is bit-for-bit stable; returns the table, extra steps and whether it settled."""
    for extra in range(QDP_POLISH_ITERS):
        nxt = qdp_step_discrete(mrp, table, lam)
        if np.array_equal(nxt.theta, table.theta):
            return table, extra, True
        table = nxt
    return table, QDP_POLISH_ITERS, False


def _snap(mrp: Mrp, table: QuantileTable, lam: InterpolationParams) -> QuantileTable:
    """
    Moves entries lying within a relative QDP_SNAP_TOL of a QDP_SNAP_DECIMALS-decimal value
    onto it, e.g. 20.000000000000004 -> 20.0, and keeps the result only if it settles into
    a float fixed point next to the original.
    """
    theta = table.theta
    rounded = np.round(theta, QDP_SNAP_DECIMALS)
    close = np.abs(rounded - theta) <= QDP_SNAP_TOL * np.maximum(1.0, np.abs(theta))
    if np.array_equal(np.where(close, rounded, theta), theta):
        return table
    snapped, _, settled = _settle(mrp, QuantileTable(np.where(close, rounded, theta)), lam)
    limit = QDP_SNAP_TOL * max(1.0, float(np.max(np.abs(theta))))
    if settled and snapped.sup_distance(table) <= limit:
        logger.debug("QDP fixed point snapped onto %d short decimals", int(close.sum()))
        return snapped
    return table


def _polish(mrp: Mrp, table: QuantileTable, lam: InterpolationParams, iters: int) -> Tuple[QuantileTable, int]:
    table, extra, settled = _settle(mrp, table, lam)
    if not settled:
        logger.debug("QDP polishing stopped after %d extra iterations", QDP_POLISH_ITERS)
        return table, iters + extra
    return _snap(mrp, table, lam), iters + extra


def is_qdp_fixed_point(mrp: Mrp, table: QuantileTable, tol: float = 1e-12) -> bool:
    """True iff every theta(x, i) is a tau_i-quantile of (T^pi theta)(x), up to tol."""
    _check_shapes(mrp, table)
    taus = tau_levels(table.m)
    for x in range(mrp.num_states):
        target = target_cdf(mrp, table, x)
        row = table.theta[x]
        if np.any(np.asarray(target.eval_left(row)) - tol > taus):
            return False
        if np.any(taus > np.asarray(target.eval(row)) + tol):
            return False
    return True
