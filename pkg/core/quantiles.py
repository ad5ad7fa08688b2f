# core/quantiles.py
"""Quantile tables theta[x, i], their levels tau_i = (2i-1)/(2m), and the projections Pi^lambda."""
import itertools
import sys
import os
from dataclasses import dataclass
from typing import Iterator

import numpy as np

# Add project root to the Python path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from core.distributions import FiniteDistribution, finite, quantile_function, right_quantile_function
from core.errors import DomainError, ValidationError


def tau_levels(m: int) -> np.ndarray:
    """tau_i = (2i - 1) / (2m) for i = 1..m."""
    if m < 1:
        raise DomainError(f"number of quantiles must be at least 1, got {m}")
    return (2.0 * np.arange(1, m + 1) - 1.0) / (2.0 * m)


# ---------------- Domain types ----------------
@dataclass(frozen=True, eq=False)
class QuantileTable:
    """theta in R^{X x m}; rows are not required to be sorted."""
    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        if theta.ndim != 2 or theta.shape[1] < 1:
            raise ValidationError(f"quantile table must have shape (X, m), got {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise ValidationError("quantile table entries must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def num_states(self) -> int:
        return self.theta.shape[0]

    @property
    def m(self) -> int:
        return self.theta.shape[1]

    @property
    def taus(self) -> np.ndarray:
        return tau_levels(self.m)

    @classmethod
    def full(cls, num_states: int, m: int, value: float = 0.0) -> "QuantileTable":
        return cls(np.full((num_states, m), float(value)))

    def sup_distance(self, other: "QuantileTable") -> float:
        if self.theta.shape != other.theta.shape:
            raise ValidationError(f"table shapes differ: {self.theta.shape} vs {other.theta.shape}")
        return float(np.max(np.abs(self.theta - other.theta)))

    def to_frame_rows(self, state_names):
        taus = self.taus
        for s in range(self.num_states):
            for i in range(self.m):
                yield state_names[s], i + 1, float(taus[i]), float(self.theta[s, i])


@dataclass(frozen=True, eq=False)
class InterpolationParams:
    """lambda in [0, 1]^{X x m}, selecting between least and greatest quantiles."""
    lam: np.ndarray

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float)
        if lam.ndim != 2:
            raise ValidationError(f"interpolation parameters must have shape (X, m), got {lam.shape}")
        if np.any(lam < 0.0) or np.any(lam > 1.0) or not np.all(np.isfinite(lam)):
            raise ValidationError("interpolation parameters must lie in [0, 1]")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def constant(cls, num_states: int, m: int, value: float = 0.0) -> "InterpolationParams":
        return cls(np.full((num_states, m), float(value)))


def corner_lambdas(num_states: int, m: int) -> Iterator[InterpolationParams]:
    """All 2^(X*m) corners of [0, 1]^{X x m}."""
    for bits in itertools.product((0.0, 1.0), repeat=num_states * m):
        yield InterpolationParams(np.reshape(bits, (num_states, m)))


# ---------------- Distribution view and projection ----------------
def to_distribution(table: QuantileTable, x: int) -> FiniteDistribution:
    """(1/m) sum_i delta_{theta(x, i)}."""
    if not 0 <= x < table.num_states:
        raise ValidationError(f"state index {x} out of range")
    return finite(table.theta[x], np.full(table.m, 1.0 / table.m))


def project(nu: FiniteDistribution, m: int, lam_row) -> np.ndarray:
    """(1 - lambda_i) F^-1(tau_i) + lambda_i Fbar^-1(tau_i); nondecreasing in i."""
    taus = tau_levels(m)
    lam_row = np.asarray(lam_row, dtype=float)
    if lam_row.shape != (m,):
        raise ValidationError(f"lambda row must have length {m}, got shape {lam_row.shape}")
    if np.any(lam_row < 0.0) or np.any(lam_row > 1.0):
        raise ValidationError("lambda entries must lie in [0, 1]")
    lower = quantile_function(nu, taus)
    upper = right_quantile_function(nu, taus)
    # Clipped so rounding never leaves [lower, upper]; the corners are returned exactly.
    mixed = np.clip(lower + lam_row * (upper - lower), lower, upper)
    return np.where(lam_row == 1.0, upper, mixed)
