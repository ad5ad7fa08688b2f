# core/distributions.py
"""
Probability distributions on the real line.

FiniteDistribution is an exact, sorted, merged list of atoms; ContinuousCdf wraps a
CDF (plus its left limit) that can only be queried pointwise. Both serve as reward
models, so they share the small interface used by the Bellman operators:
``cdf``, ``left_limit``, ``sample``, ``mean``, ``support_hint`` and ``bounded``.
"""
import logging
import sys
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

# Add project root to the Python path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from config import PROB_TOL
from core.errors import DomainError, ValidationError

logger = logging.getLogger(__name__)

# Grid size for the ContinuousCdf monotonicity and limit checks
_CHECK_POINTS = 64
_LIMIT_TOL = 1e-9


# ---------------- Finite distributions ----------------
@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    """Atoms sorted by location, duplicates merged, probabilities summing to one."""
    locations: np.ndarray
    probs: np.ndarray
    cumulative: np.ndarray = field(repr=False)
    padded: np.ndarray = field(repr=False)

    is_finite = True
    bounded = True

    @property
    def atoms(self) -> list:
        return list(zip(self.locations.tolist(), self.probs.tolist()))

    @property
    def mean(self) -> float:
        return float(np.dot(self.locations, self.probs))

    @property
    def support_hint(self) -> Tuple[float, float]:
        return float(self.locations[0]), float(self.locations[-1])

    def __len__(self) -> int:
        return len(self.locations)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteDistribution):
            return NotImplemented
        return (len(self) == len(other)
                and np.array_equal(self.locations, other.locations)
                and np.allclose(self.probs, other.probs, rtol=0.0, atol=PROB_TOL))

    __hash__ = None

    def cdf(self, t):
        """P(Z <= t), vectorised over t."""
        idx = np.searchsorted(self.locations, t, side='right')
        return self.padded[idx]

    def left_limit(self, t):
        """P(Z < t), vectorised over t."""
        idx = np.searchsorted(self.locations, t, side='left')
        return self.padded[idx]

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        u = rng.random(size)
        idx = np.minimum(np.searchsorted(self.cumulative, u, side='right'), len(self) - 1)
        return self.locations[idx]


def finite(locations: Iterable[float], probs: Iterable[float]) -> FiniteDistribution:
    """
    Builds a FiniteDistribution from parallel location/probability sequences.
    Zero-probability atoms are dropped, duplicates are merged and the result is
    renormalized once the total is confirmed to be within PROB_TOL of one.
    """
    locs = np.asarray(locations, dtype=float).ravel()
    ps = np.asarray(probs, dtype=float).ravel()
    if locs.shape != ps.shape:
        raise ValidationError(f"{locs.size} locations but {ps.size} probabilities")
    if locs.size == 0:
        raise ValidationError("a distribution needs at least one atom")
    if not np.all(np.isfinite(locs)):
        raise ValidationError("atom locations must be finite")
    if np.any(ps < 0) or not np.all(np.isfinite(ps)):
        raise ValidationError("atom probabilities must be finite and nonnegative")
    total = ps.sum()
    if abs(total - 1.0) > PROB_TOL:
        raise ValidationError(f"atom probabilities sum to {total!r}, expected 1")

    keep = ps > 0
    unique_locs, inverse = np.unique(locs[keep], return_inverse=True)
    merged = np.bincount(inverse, weights=ps[keep], minlength=unique_locs.size)
    merged = merged / merged.sum()
    cumulative = np.cumsum(merged)
    cumulative[-1] = 1.0

    padded = np.concatenate(([0.0], cumulative))
    for arr in (unique_locs, merged, cumulative, padded):
        arr.setflags(write=False)
    return FiniteDistribution(unique_locs, merged, cumulative, padded)


def from_atoms(atoms: Iterable[Tuple[float, float]]) -> FiniteDistribution:
    atoms = list(atoms)
    return finite([a[0] for a in atoms], [a[1] for a in atoms])


def dirac(location: float) -> FiniteDistribution:
    return finite([location], [1.0])


def empirical(samples: Sequence[float]) -> FiniteDistribution:
    """Equally weighted empirical distribution of the given samples."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValidationError("cannot build an empirical distribution from zero samples")
    return finite(samples, np.full(samples.size, 1.0 / samples.size))


# ---------------- CDF queries ----------------
def cdf_at(nu: FiniteDistribution, t: float) -> float:
    """F_nu(t) = P(Z <= t)."""
    return float(nu.cdf(t))


def cdf_left_limit(nu: FiniteDistribution, t: float) -> float:
    """F_nu(t-) = P(Z < t)."""
    return float(nu.left_limit(t))


def _check_level(tau) -> None:
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0.0) or np.any(tau >= 1.0) or not np.all(np.isfinite(tau)):
        raise DomainError(f"quantile level must lie in (0, 1), got {tau.tolist()}")


def quantile_function(nu: FiniteDistribution, taus) -> np.ndarray:
    """Least quantiles inf{y : F(y) >= tau}, vectorised over tau."""
    _check_level(taus)
    idx = np.searchsorted(nu.cumulative, np.asarray(taus, dtype=float) - PROB_TOL, side='left')
    return nu.locations[np.clip(idx, 0, len(nu) - 1)]


def right_quantile_function(nu: FiniteDistribution, taus) -> np.ndarray:
    """Greatest quantiles inf{y : F(y) > tau}, vectorised over tau."""
    _check_level(taus)
    idx = np.searchsorted(nu.cumulative, np.asarray(taus, dtype=float) + PROB_TOL, side='right')
    return nu.locations[np.clip(idx, 0, len(nu) - 1)]


def inv_cdf(nu: FiniteDistribution, tau: float) -> float:
    return float(quantile_function(nu, tau))


def right_inv_cdf(nu: FiniteDistribution, tau: float) -> float:
    return float(right_quantile_function(nu, tau))


def is_tau_quantile(nu: FiniteDistribution, tau: float, z: float) -> bool:
    """Membership of z in the set of tau-quantiles: F(z-) <= tau <= F(z)."""
    _check_level(tau)
    return bool(cdf_left_limit(nu, z) - PROB_TOL <= tau <= cdf_at(nu, z) + PROB_TOL)


# ---------------- Wasserstein metrics ----------------
def _quantile_gaps(nu: FiniteDistribution, other: FiniteDistribution) -> Tuple[np.ndarray, np.ndarray]:
    """
    Widths of the merged cumulative-probability intervals and the absolute gap
    between both quantile functions on each interval. F^-1 is left-continuous
    and constant on (q_{k-1}, q_k], so evaluating it at q_k is exact.
    """
    qs = np.sort(np.concatenate((nu.cumulative, other.cumulative)))
    widths = np.diff(np.concatenate(([0.0], qs)))
    idx_a = np.clip(np.searchsorted(nu.cumulative, qs, side='left'), 0, len(nu) - 1)
    idx_b = np.clip(np.searchsorted(other.cumulative, qs, side='left'), 0, len(other) - 1)
    return widths, np.abs(nu.locations[idx_a] - other.locations[idx_b])


def wasserstein1(nu: FiniteDistribution, other: FiniteDistribution) -> float:
    """Exact integral of |F^-1_nu - F^-1_other| over (0, 1)."""
    widths, gaps = _quantile_gaps(nu, other)
    return float(np.dot(widths, gaps))


def wasserstein_inf(nu: FiniteDistribution, other: FiniteDistribution) -> float:
    """Exact supremum of |F^-1_nu - F^-1_other| over (0, 1)."""
    widths, gaps = _quantile_gaps(nu, other)
    # Slivers narrower than the probability tolerance come from rounding in cumsum.
    live = widths > PROB_TOL
    return float(gaps[live].max()) if np.any(live) else 0.0


# ---------------- Constructions ----------------
def mix(parts: Sequence[Tuple[float, FiniteDistribution]]) -> FiniteDistribution:
    """Weighted mixture of finite distributions; weights must be positive and sum to one."""
    if not parts:
        raise ValidationError("cannot mix an empty list of distributions")
    weights = np.array([w for w, _ in parts], dtype=float)
    if np.any(weights <= 0):
        raise ValidationError(f"mixture weights must be positive, got {weights.tolist()}")
    if abs(weights.sum() - 1.0) > PROB_TOL:
        raise ValidationError(f"mixture weights sum to {weights.sum()!r}, expected 1")
    locs = np.concatenate([nu.locations for _, nu in parts])
    probs = np.concatenate([w * nu.probs for w, nu in parts])
    return finite(locs, probs)


def affine_pushforward(nu: FiniteDistribution, scale: float, shift: float) -> FiniteDistribution:
    """Law of scale * Z + shift for Z ~ nu."""
    if scale < 0:
        raise DomainError(f"pushforward scale must be nonnegative, got {scale}")
    return finite(scale * nu.locations + shift, nu.probs)


# ---------------- Continuous CDFs ----------------
@dataclass(frozen=True, eq=False)
class ContinuousCdf:
    """
    A reward distribution known through its CDF. ``cdf`` and ``left_limit`` must
    accept numpy arrays. ``sampler(rng, size)`` draws iid samples.
    """
    cdf: Callable
    left_limit: Callable
    sampler: Callable
    inv_cdf: Optional[Callable] = None
    support_hint: Optional[Tuple[float, float]] = None
    mean: Optional[float] = None
    bounded: bool = False
    name: str = "continuous"

    is_finite = False

    def __post_init__(self):
        if self.support_hint is None:
            return
        lo, hi = self.support_hint
        if not lo < hi:
            raise ValidationError(f"{self.name}: support hint ({lo}, {hi}) is empty")
        if self.cdf(lo) > _LIMIT_TOL or self.cdf(hi) < 1.0 - _LIMIT_TOL:
            raise ValidationError(f"{self.name}: CDF does not reach its limits on the support hint")
        grid = np.linspace(lo, hi, _CHECK_POINTS)
        values = np.asarray(self.cdf(grid), dtype=float)
        lefts = np.asarray(self.left_limit(grid), dtype=float)
        if np.any(np.diff(values) < -_LIMIT_TOL):
            raise ValidationError(f"{self.name}: CDF is not nondecreasing")
        if np.any(lefts > values + _LIMIT_TOL):
            raise ValidationError(f"{self.name}: left limit exceeds the CDF")

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        return self.sampler(rng, size)


RewardModel = Union[FiniteDistribution, ContinuousCdf]


def _frozen_continuous(dist, name: str, support: Tuple[float, float], bounded: bool) -> ContinuousCdf:
    return ContinuousCdf(
        cdf=dist.cdf,
        left_limit=dist.cdf,
        sampler=lambda rng, size=None: dist.rvs(size=size, random_state=rng),
        inv_cdf=dist.ppf,
        support_hint=support,
        mean=float(dist.mean()),
        bounded=bounded,
        name=name,
    )


def gaussian(mean: float, std: float) -> ContinuousCdf:
    if std <= 0:
        raise ValidationError(f"gaussian std must be positive, got {std}")
    dist = stats.norm(loc=mean, scale=std)
    return _frozen_continuous(dist, f"N({mean}, {std}^2)", (mean - 10 * std, mean + 10 * std), bounded=False)


def uniform(low: float, high: float) -> ContinuousCdf:
    if not low < high:
        raise ValidationError(f"uniform needs low < high, got [{low}, {high}]")
    dist = stats.uniform(loc=low, scale=high - low)
    return _frozen_continuous(dist, f"U[{low}, {high}]", (low, high), bounded=True)


def mix_models(parts: Sequence[Tuple[float, RewardModel]]) -> RewardModel:
    """
    Mixture of reward models. Finite parts are mixed exactly; as soon as one part
    is continuous the result is a ContinuousCdf whose CDF is evaluated lazily.
    """
    parts = [(float(w), model) for w, model in parts if w > 0]
    if all(model.is_finite for _, model in parts):
        return mix(parts)

    weights = np.array([w for w, _ in parts])
    if abs(weights.sum() - 1.0) > PROB_TOL:
        raise ValidationError(f"mixture weights sum to {weights.sum()!r}, expected 1")
    models = [model for _, model in parts]
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0

    def cdf(t):
        return sum(w * model.cdf(t) for w, model in parts)

    def left_limit(t):
        return sum(w * model.left_limit(t) for w, model in parts)

    def sampler(rng, size=None):
        n = 1 if size is None else size
        choice = np.searchsorted(cumulative, rng.random(n), side='right')
        out = np.empty(n)
        for k, model in enumerate(models):
            picked = choice == k
            if picked.any():
                out[picked] = model.sample(rng, int(picked.sum()))
        return out[0] if size is None else out

    hints = [model.support_hint for model in models if model.support_hint is not None]
    support = (min(h[0] for h in hints), max(h[1] for h in hints)) if len(hints) == len(models) else None
    means = [model.mean for model in models]
    return ContinuousCdf(
        cdf=cdf,
        left_limit=left_limit,
        sampler=sampler,
        support_hint=support,
        mean=None if any(m is None for m in means) else float(np.dot(weights, means)),
        bounded=all(model.bounded for model in models),
        name="mixture",
    )
