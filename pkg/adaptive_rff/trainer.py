"""Adaptive resampling loops for the continuous, lattice and adaptive walks."""

import logging
import math
import time
from typing import Optional

import numpy as np

from .core import evaluate_model, relative_l2_error
from .exceptions import (
    ArffSolverError,
    ArffTrainingError,
    ArffValidationError,
    OracleGuardError,
)
from .linalg import DENSE_MAX_K, dense_solve, solve
from .models import (
    BaseDistribution,
    Dataset,
    EqualAmplitudeCheck,
    FrequencySet,
    FrequencySnapshot,
    IterationRecord,
    LatticeNormalDistribution,
    PhaseTiming,
    ProjectedHistogram,
    RffModel,
    RunHistory,
    StandardNormalDistribution,
    TabulatedDistribution,
    TrainConfig,
)
from .rng import RngStream
from .sampler import (
    CovarianceState,
    adaptive_walk_step,
    aggregate_equal_frequencies,
    amplitude_resample,
    lattice_walk_step,
    mixed_resample,
    random_walk_step,
    simplified_cutoff_resample,
    update_covariance,
)
from .targets import sample_base

logger = logging.getLogger(__name__)

SNAPSHOT_COUNT = 20

# Child stream indices of the run seed.
SPLIT_STREAM = 0
INIT_STREAM = 1
LOOP_STREAM = 2


def default_base(config: TrainConfig, dimension: int) -> BaseDistribution:
    """Base distribution used when the config leaves it unset."""
    if config.base is not None:
        return config.base
    if config.lattice is not None:
        return LatticeNormalDistribution(lattice=config.lattice)
    return StandardNormalDistribution(dimension=dimension)


def snapshot_cadence(config: TrainConfig) -> int:
    """Iterations between frequency snapshots."""
    if config.full_history:
        return 1
    if config.snapshot_every is not None:
        return config.snapshot_every
    return max(1, math.ceil(config.iterations / SNAPSHOT_COUNT))


def _check_dimensions(config: TrainConfig, dimension: int):
    lattice = config.lattice
    if lattice is not None and lattice.dimension != dimension:
        raise ArffValidationError(
            f"lattice has dimension {lattice.dimension}, data has {dimension}"
        )
    if config.base is not None and config.base.dimension != dimension:
        raise ArffValidationError(
            f"base distribution has dimension {config.base.dimension}, "
            f"data has {dimension}"
        )
    if lattice is not None and config.base is not None:
        if config.base.kind != "standard_normal" and config.base.lattice != lattice:
            raise ArffValidationError("base distribution and walk lattice differ")


def _initial_frequencies(
    config: TrainConfig, base: BaseDistribution, dimension: int, rng: RngStream
) -> FrequencySet:
    if config.init == "base":
        drawn = sample_base(base, config.K, rng)
        if drawn.is_lattice and config.lattice is None:
            return FrequencySet.continuous(drawn.coordinates)
        return drawn
    return FrequencySet.zeros(config.K, dimension, config.lattice)


def _equal_amplitude_check(
    iteration: int, freqs: FrequencySet, train: Dataset, config: TrainConfig
) -> Optional[EqualAmplitudeCheck]:
    """Dense re-solve and the largest relative spread within duplicate groups."""
    if freqs.size > DENSE_MAX_K or config.solver.lambda2 != 0.0:
        return None
    try:
        amplitudes = dense_solve(freqs, train, config.solver.lambda1).amplitudes
    except (ArffSolverError, OracleGuardError) as e:
        logger.debug(f"equal-amplitude check skipped at iteration {iteration}: {e}")
        return None
    _, inverse = np.unique(freqs.grouping_keys(), axis=0, return_inverse=True)
    inverse = inverse.ravel()
    groups = 0
    spread = 0.0
    for group in range(int(inverse.max()) + 1):
        members = amplitudes[inverse == group]
        if members.size < 2:
            continue
        groups += 1
        scale = float(np.max(np.abs(members)))
        if scale > 0.0:
            spread = max(spread, float(np.max(np.abs(members - members[0]))) / scale)
    return EqualAmplitudeCheck(
        iteration=iteration, groups=groups, max_rel_spread=spread
    )


class _Loop:
    """Records, snapshots and checks collected while one run proceeds."""

    def __init__(self, config: TrainConfig, train: Dataset, val: Dataset):
        self.config = config
        self.train = train
        self.val = val
        self.records: list[IterationRecord] = []
        self.snapshots: list[FrequencySnapshot] = []
        self.checks: list[EqualAmplitudeCheck] = []
        self.timings: list[PhaseTiming] = []
        self.every = snapshot_cadence(config)

    def solve(self, iteration: int, freqs: FrequencySet):
        try:
            return solve(freqs, self.train, self.config.solver)
        except ArffSolverError as e:
            raise ArffTrainingError(
                f"solve failed at iteration {iteration}: {e}",
                iteration=iteration,
                iterations=e.iterations,
                residual=e.residual,
            ) from e

    def record(
        self,
        iteration: int,
        phase: str,
        freqs: FrequencySet,
        amplitudes: np.ndarray,
        cg_iters: int,
        started: float,
    ) -> RffModel:
        model = RffModel(frequencies=freqs, amplitudes=amplitudes)
        train_err = relative_l2_error(
            evaluate_model(model, self.train.inputs), self.train.targets
        )
        val_err = relative_l2_error(
            evaluate_model(model, self.val.inputs), self.val.targets
        )
        wall_ms = 0.0
        if self.config.record_timing:
            wall_ms = 1000.0 * (time.perf_counter() - started)
        self.records.append(
            IterationRecord(
                iteration=iteration,
                phase=phase,
                train_rel_err=train_err,
                val_rel_err=val_err,
                cg_iters=cg_iters,
                wall_ms=wall_ms,
            )
        )
        if phase == "final" or iteration == 1 or iteration % self.every == 0:
            self.snapshots.append(
                FrequencySnapshot(
                    iteration=iteration,
                    coordinates=freqs.coordinates,
                    abs_beta=np.abs(amplitudes),
                )
            )
            logger.info(
                f"iteration {iteration} ({phase}): train {train_err:.4e}, "
                f"val {val_err:.4e}, cg {cg_iters}"
            )
        verify = self.config.verify_every
        if verify is not None and phase == "resample" and iteration % verify == 0:
            check = _equal_amplitude_check(iteration, freqs, self.train, self.config)
            if check is not None:
                self.checks.append(check)
        return model

    def time_phases(
        self,
        iteration: int,
        walk: float,
        solved: float,
        resampled: float,
        started: float,
    ):
        walk_ms = 1000.0 * (walk - started)
        solve_ms = 1000.0 * (solved - walk)
        resample_ms = 1000.0 * (resampled - solved)
        logger.debug(
            f"iteration {iteration}: walk {walk_ms:.1f} ms, solve {solve_ms:.1f} ms, "
            f"resample {resample_ms:.1f} ms"
        )
        if self.config.record_timing:
            self.timings.append(
                PhaseTiming(
                    iteration=iteration,
                    walk_ms=walk_ms,
                    solve_ms=solve_ms,
                    resample_ms=resample_ms,
                )
            )


def run(
    config: TrainConfig, dataset: Dataset, test_set: Optional[Dataset] = None
) -> tuple[RffModel, RunHistory]:
    """Run walk, solve and resample for N iterations, then solve once more.

    Alg1 resamples with weights |beta_k| (no cutoff), Alg2 aggregates equal
    lattice frequencies and applies the cutoff with the optional q_eps mix,
    and Alg3 uses the simplified cutoff and updates the walk covariance.
    Errors are recorded after every solve and before resampling.

    Raises:
        ArffValidationError: If dimensions disagree with the config.
        ArffTrainingError: If a solve fails; carries the iteration index.
    """
    d = dataset.dimension
    _check_dimensions(config, d)
    if test_set is not None and test_set.dimension != d:
        raise ArffValidationError("test set dimension differs from the data")

    root = RngStream(config.seed)
    train, val = dataset.split(config.validation_fraction, root.spawn(SPLIT_STREAM))
    base = default_base(config, d)
    freqs = _initial_frequencies(config, base, d, root.spawn(INIT_STREAM))
    rng = root.spawn(LOOP_STREAM)
    covariance = CovarianceState.initial(d)

    def base_sampler(count: int, stream: RngStream) -> FrequencySet:
        return sample_base(base, count, stream)

    logger.info(
        f"{config.algorithm}: K={config.K}, N={config.iterations}, "
        f"J_train={train.size}, J_val={val.size}, d={d}, seed={config.seed}"
    )
    loop = _Loop(config, train, val)
    algorithm = config.algorithm
    for n in range(1, config.iterations + 1):
        started = time.perf_counter()
        if algorithm == "alg1":
            freqs = random_walk_step(freqs, config.walk, rng)
        elif algorithm == "alg2":
            freqs = lattice_walk_step(freqs, config.walk, rng)
        else:
            freqs = adaptive_walk_step(freqs, config.walk, covariance, rng)
        walked = time.perf_counter()

        result = loop.solve(n, freqs)
        solved = time.perf_counter()
        loop.record(n, "resample", freqs, result.amplitudes, result.iterations, started)

        if algorithm == "alg1":
            freqs = amplitude_resample(freqs, result.amplitudes, rng)
        elif algorithm == "alg2":
            aggregated = aggregate_equal_frequencies(freqs, result.amplitudes)
            freqs = mixed_resample(
                aggregated, config.cutoff, base_sampler, config.K, rng
            )
        else:
            freqs = simplified_cutoff_resample(
                freqs, result.amplitudes, config.cutoff.epsilon, rng
            )
            covariance = update_covariance(covariance, freqs)
        loop.time_phases(n, walked, solved, time.perf_counter(), started)

    final_iteration = config.iterations + 1
    started = time.perf_counter()
    result = loop.solve(final_iteration, freqs)
    model = loop.record(
        final_iteration, "final", freqs, result.amplitudes, result.iterations, started
    )

    test_rel_err = None
    if test_set is not None:
        test_rel_err = relative_l2_error(
            evaluate_model(model, test_set.inputs), test_set.targets
        )
    history = RunHistory(
        records=tuple(loop.records),
        test_rel_err=test_rel_err,
        snapshots=tuple(loop.snapshots),
        equal_amplitude_checks=tuple(loop.checks),
        timings=tuple(loop.timings),
    )
    logger.info(
        f"{config.algorithm} finished: train {history.final.train_rel_err:.4e}, "
        f"val {history.final.val_rel_err:.4e}"
        + ("" if test_rel_err is None else f", test {test_rel_err:.4e}")
    )
    return model, history


def histogram_projected(
    freqs: FrequencySet,
    direction,
    bins: int,
    value_range: tuple[float, float],
) -> ProjectedHistogram:
    """Histogram of v . omega_k on ``bins`` equal bins over ``value_range``.

    Values outside the range are counted as underflow or overflow, so the
    counts always add up to K.
    """
    v = np.asarray(direction, dtype=np.float64)
    if v.shape != (freqs.dimension,):
        raise ArffValidationError("direction must match the frequency dimension")
    if abs(float(np.linalg.norm(v)) - 1.0) > 1e-12:
        raise ArffValidationError("direction must be a unit vector")
    low, high = float(value_range[0]), float(value_range[1])
    if bins < 1 or not low < high:
        raise ArffValidationError("need bins >= 1 and a nonempty range")
    values = freqs.coordinates @ v
    counts, edges = np.histogram(values, bins=bins, range=(low, high))
    return ProjectedHistogram(
        edges=edges,
        counts=counts,
        underflow=int(np.sum(values < low)),
        overflow=int(np.sum(values > high)),
    )


def tv_distance_to_optimal(freqs: FrequencySet, p_star: TabulatedDistribution) -> float:
    """Total variation between the empirical lattice measure and p*.

    Frequencies outside p*'s atoms count fully toward the distance.
    """
    if not freqs.is_lattice or freqs.lattice != p_star.lattice:
        raise ArffValidationError("tv distance needs frequencies on p*'s lattice")
    keys = np.vstack([freqs.indices, p_star.indices])
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    empirical = np.bincount(inverse[: freqs.size], minlength=inverse.max() + 1)
    target = np.bincount(
        inverse[freqs.size :], weights=p_star.probabilities, minlength=inverse.max() + 1
    )
    distance = 0.5 * float(np.sum(np.abs(empirical / freqs.size - target)))
    return min(max(distance, 0.0), 1.0)


def train_error_median_ratio(history: RunHistory) -> float:
    """Median training error over the last tenth of the resampling iterations
    divided by the median over the first tenth."""
    errors = np.array(
        [r.train_rel_err for r in history.records if r.phase == "resample"]
    )
    if errors.size == 0:
        raise ArffValidationError("history has no resampling iterations")
    window = max(1, errors.size // 10)
    first = float(np.median(errors[:window]))
    last = float(np.median(errors[-window:]))
    return last / first if first > 0.0 else math.inf
