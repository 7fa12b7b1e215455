"""Amplitude aggregation, cutoff resampling and random-walk proposals."""

import logging
import math
from typing import Callable

import numpy as np
import scipy.linalg

from .exceptions import (
    ArffFactorizationError,
    ArffValidationError,
    EmptyCutoffError,
)
from .models import (
    AggregatedAmplitudes,
    CutoffConfig,
    FrequencySet,
    WalkConfig,
)
from .models.base import ArffModel, frozen_array
from .rng import RngStream

logger = logging.getLogger(__name__)

PROBABILITY_TOL = 1e-9

FrequencySampler = Callable[[int, RngStream], FrequencySet]


class CovarianceState(ArffModel):
    """Empirical frequency covariances and their running average.

    Before the first update the running average is the identity prior C_1.
    """

    per_iteration_covariances: tuple[np.ndarray, ...] = ()
    running_average: np.ndarray

    @classmethod
    def initial(cls, dimension: int) -> "CovarianceState":
        return cls(running_average=frozen_array(np.eye(dimension), float, 2, "C"))

    @property
    def dimension(self) -> int:
        return self.running_average.shape[0]


def _coerce_amplitudes(freqs: FrequencySet, amps) -> np.ndarray:
    amps = np.asarray(amps, dtype=np.complex128)
    if amps.ndim != 1 or amps.shape[0] != freqs.size:
        raise ArffValidationError("one amplitude per frequency is required")
    return amps


def aggregate_equal_frequencies(freqs: FrequencySet, amps) -> AggregatedAmplitudes:
    """Sum amplitudes over exactly coinciding frequencies.

    Keys are lattice indices for lattice sets and coordinate bit patterns
    for continuous sets; distinct keys come out in sorted key order.
    """
    amps = _coerce_amplitudes(freqs, amps)
    keys = freqs.grouping_keys()
    _, first, inverse, counts = np.unique(
        keys, axis=0, return_index=True, return_inverse=True, return_counts=True
    )
    inverse = inverse.ravel()
    aggregates = np.zeros(first.shape[0], dtype=np.complex128)
    np.add.at(aggregates, inverse, amps)
    return AggregatedAmplitudes(
        representatives=freqs.take(first),
        aggregates=aggregates,
        multiplicities=counts,
    )


def group_by_sorted_amplitudes(amps, rtol: float = 1e-8) -> list[np.ndarray]:
    """Group positions whose amplitudes agree, by sorting |beta_k|.

    Coinciding frequencies carry equal amplitudes, so runs of equal
    magnitude in the sorted order identify candidate duplicate groups.
    Groups come out in increasing magnitude.
    """
    amps = np.asarray(amps, dtype=np.complex128)
    if amps.size == 0:
        return []
    order = np.argsort(np.abs(amps), kind="stable")
    groups = [[order[0]]]
    for position in order[1:]:
        anchor = amps[groups[-1][0]]
        scale = max(abs(anchor), abs(amps[position]))
        if abs(amps[position] - anchor) <= rtol * scale:
            groups[-1].append(position)
        else:
            groups.append([position])
    return [np.sort(np.array(g, dtype=np.int64)) for g in groups]


def cutoff_distribution(
    agg: AggregatedAmplitudes, epsilon: float
) -> tuple[FrequencySet, np.ndarray]:
    """Probabilities |beta_n| / sum |beta_m| over entries with |beta_n| >= epsilon.

    Raises:
        EmptyCutoffError: If no aggregate reaches ``epsilon``.
    """
    magnitudes = np.abs(agg.aggregates)
    keep = np.flatnonzero(magnitudes >= epsilon)
    total = float(magnitudes[keep].sum()) if keep.size else 0.0
    if keep.size == 0 or total == 0.0:
        raise EmptyCutoffError(
            f"no aggregated amplitude reaches the cutoff {epsilon:g}"
        )
    return agg.representatives.take(keep), magnitudes[keep] / total


def multinomial_resample(probabilities, count: int, rng: RngStream) -> np.ndarray:
    """Draw ``count`` indices with replacement from a categorical distribution.

    Raises:
        ArffValidationError: If the probability vector is invalid.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    if p.ndim != 1 or p.size == 0 or not np.all(np.isfinite(p)):
        raise ArffValidationError("probabilities must be a nonempty finite vector")
    if np.any(p < 0):
        raise ArffValidationError("probabilities must be nonnegative")
    if abs(float(p.sum()) - 1.0) > PROBABILITY_TOL:
        raise ArffValidationError(f"probabilities sum to {p.sum():.12g}, not 1")
    if count < 0:
        raise ArffValidationError("count must be nonnegative")
    cumulative = np.cumsum(p)
    cumulative /= cumulative[-1]
    draws = np.searchsorted(cumulative, rng.uniform(count), side="right")
    return np.minimum(draws, p.size - 1).astype(np.int64)


def weighted_resample(
    freqs: FrequencySet, weights, count: int, rng: RngStream
) -> FrequencySet:
    """Resample ``count`` frequencies with probability proportional to weights.

    Raises:
        EmptyCutoffError: If every weight is zero.
    """
    weights = np.asarray(weights, dtype=np.float64)
    total = float(weights.sum())
    if total <= 0.0:
        raise EmptyCutoffError("all resampling weights are zero")
    return freqs.take(multinomial_resample(weights / total, count, rng))


def amplitude_resample(freqs: FrequencySet, amps, rng: RngStream) -> FrequencySet:
    """K draws with probability |beta_k| / sum |beta_l| (no cutoff)."""
    amps = _coerce_amplitudes(freqs, amps)
    return weighted_resample(freqs, np.abs(amps), freqs.size, rng)


def simplified_cutoff_resample(
    freqs: FrequencySet, amps, epsilon: float, rng: RngStream
) -> FrequencySet:
    """K draws with weights |beta_k| zeroed where |beta_k| < epsilon.

    Falls back to no cutoff when every amplitude is below ``epsilon``.
    """
    amps = _coerce_amplitudes(freqs, amps)
    weights = np.abs(amps)
    cut = np.where(weights >= epsilon, weights, 0.0)
    if not np.any(cut > 0.0):
        logger.warning(
            f"all amplitudes below cutoff {epsilon:g}; resampling without cutoff"
        )
        cut = weights
    return weighted_resample(freqs, cut, freqs.size, rng)


def split_counts(K: int, q_epsilon: float) -> tuple[int, int]:
    """(K_bar, K_tilde) = (floor(K (1 - q)), ceil(K q)), which add up to K."""
    k_bar = math.floor(K * (1.0 - q_epsilon))
    return k_bar, K - k_bar


def mixed_resample(
    agg: AggregatedAmplitudes,
    cfg: CutoffConfig,
    base_sampler: FrequencySampler,
    K: int,
    rng: RngStream,
) -> FrequencySet:
    """K_bar draws from the cutoff distribution then K_tilde base draws.

    An empty cutoff set falls back to epsilon = 0 with a warning.
    """
    k_bar, k_tilde = split_counts(K, cfg.q_epsilon)
    try:
        support, probabilities = cutoff_distribution(agg, cfg.epsilon)
    except EmptyCutoffError:
        logger.warning(
            f"no amplitude reaches cutoff {cfg.epsilon:g}; resampling without cutoff"
        )
        support, probabilities = cutoff_distribution(agg, 0.0)
    resampled = support.take(multinomial_resample(probabilities, k_bar, rng))
    if k_tilde == 0:
        return resampled
    fresh = base_sampler(k_tilde, rng)
    return resampled.concat(fresh)


def random_walk_step(
    freqs: FrequencySet, cfg: WalkConfig, rng: RngStream
) -> FrequencySet:
    """omega_k <- omega_k + delta * zeta_k with zeta_k standard normal."""
    if freqs.is_lattice:
        raise ArffValidationError("the continuous walk needs a continuous set")
    step = cfg.delta * rng.normal(freqs.coordinates.shape)
    return FrequencySet.continuous(freqs.coordinates + step)


def lattice_walk_step(
    freqs: FrequencySet, cfg: WalkConfig, rng: RngStream
) -> FrequencySet:
    """Gaussian step followed by projection to the nearest lattice point."""
    if cfg.mode != "lattice" or cfg.lattice is None:
        raise ArffValidationError("lattice_walk_step needs a lattice walk config")
    lattice = cfg.lattice
    if freqs.is_lattice and freqs.lattice != lattice:
        raise ArffValidationError("frequency set and walk use different lattices")
    if freqs.dimension != lattice.dimension:
        raise ArffValidationError("frequency and lattice dimensions differ")
    moved = freqs.coordinates + cfg.delta * rng.normal(freqs.coordinates.shape)
    return FrequencySet.on_lattice(lattice.to_indices(moved), lattice)


def adaptive_walk_step(
    freqs: FrequencySet,
    cfg: WalkConfig,
    cov: CovarianceState,
    rng: RngStream,
) -> FrequencySet:
    """Step delta * z with z ~ N(0, C_n + eps_hat I) for every frequency.

    Raises:
        ArffFactorizationError: If C_n + eps_hat I is not positive definite.
    """
    if freqs.dimension != cov.dimension:
        raise ArffValidationError("covariance and frequency dimensions differ")
    proposal = cov.running_average + cfg.eps_hat * np.eye(cov.dimension)
    try:
        factor = scipy.linalg.cholesky(proposal, lower=True)
    except np.linalg.LinAlgError as e:
        raise ArffFactorizationError(
            "proposal covariance is not positive definite"
        ) from e
    z = rng.normal(freqs.coordinates.shape) @ factor.T
    return FrequencySet.continuous(freqs.coordinates + cfg.delta * z)


def empirical_covariance(freqs: FrequencySet) -> np.ndarray:
    """sum_k (omega_k - m)(omega_k - m)^T / K about the empirical mean m."""
    if freqs.size == 0:
        raise ArffValidationError("covariance of an empty frequency set")
    centered = freqs.coordinates - freqs.coordinates.mean(axis=0)
    covariance = centered.T @ centered / freqs.size
    return 0.5 * (covariance + covariance.T)


def update_covariance(cov: CovarianceState, freqs: FrequencySet) -> CovarianceState:
    """Append the empirical covariance and re-average all stored ones."""
    current = frozen_array(empirical_covariance(freqs), float, 2, "C_hat")
    stored = cov.per_iteration_covariances + (current,)
    average = np.mean(np.stack(stored), axis=0)
    return CovarianceState(
        per_iteration_covariances=stored,
        running_average=frozen_array(0.5 * (average + average.T), float, 2, "C"),
    )
