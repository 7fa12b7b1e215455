"""Experiment presets for the hyperparameter sweeps and the figure runs.

Every regularization and cutoff expression is resolved here, e.g.
lambda1 = c K J^(-1/2) and epsilon = c K^(-1/2), so configs carry plain
numbers. Table sweeps start from zero frequencies and the figure runs from
the base distribution. Desk scale divides J and K by 8 and N by 4 unless a
preset states its own desk values.
"""

import difflib
import logging
import math
from typing import Callable, Literal, NamedTuple, Optional, TypeVar

from pydantic import NonNegativeFloat, PositiveInt, ValidationError

from .core import noise_to_signal_ratio
from .exceptions import ArffConfigError
from .models import (
    ClassifierConfig,
    CutoffConfig,
    Dataset,
    RffModel,
    RunHistory,
    SolverConfig,
    SweepPoint,
    TargetSpec,
    TrainConfig,
    WalkConfig,
)
from .models.base import ArffModel
from .rng import RngStream
from .targets import evaluate_target, sample_dataset, sample_test_set
from .trainer import run

logger = logging.getLogger(__name__)

_Seeded = TypeVar("_Seeded", TrainConfig, ClassifierConfig)


def _reseeded(config: _Seeded, seed: int) -> _Seeded:
    """Copy of a config with a new seed, validated like a fresh one."""
    try:
        return type(config).model_validate({**dict(config), "seed": seed})
    except ValidationError as e:
        raise ArffConfigError(
            f"seed must lie in [0, 2**64), got {seed}", key="seed"
        ) from e


Scale = Literal["full", "desk"]

# Child streams of a point seed; the trainer owns indices 0-2.
DATA_STREAM = 3
TEST_STREAM = 4

DESK_SIZE_DIVISOR = 8
DESK_ITERATION_DIVISOR = 4
TEST_FRACTION = 0.5

TABLE_ITERATIONS = 100
FIGURE_ITERATIONS = 200
ADAPTIVE_FIGURE_ITERATIONS = 30

PERIOD = 12.0
SHARPNESS = 0.1
FIGURE_DIRECTION = (0.3308, 0.9437)


def regularization(c: float, K: int, J: int) -> float:
    """lambda1 = c K J^(-1/2)."""
    return c * K / math.sqrt(J)


def cutoff(c: float, K: int) -> float:
    """epsilon = c K^(-1/2)."""
    return c / math.sqrt(K)


def axis_direction(d: int) -> tuple[float, ...]:
    return (1.0,) + (0.0,) * (d - 1)


class ExperimentPoint(ArffModel):
    """One training run of a sweep: target, data sizes and the run config."""

    label: str
    parameter: str
    value: float
    target: TargetSpec
    J: PositiveInt
    noise_std: NonNegativeFloat = 0.0
    test_size: Optional[PositiveInt] = None
    config: TrainConfig

    def with_seed(self, seed: int) -> "ExperimentPoint":
        return self.model_copy(update={"config": _reseeded(self.config, seed)})


class ExperimentPreset(ArffModel):
    """A named sweep, or the classifier settings for ``mnist``."""

    name: str
    scale: Scale
    description: str
    points: tuple[ExperimentPoint, ...] = ()
    classifier: Optional[ClassifierConfig] = None

    def with_seed(self, seed: int) -> "ExperimentPreset":
        update: dict = {"points": tuple(p.with_seed(seed) for p in self.points)}
        if self.classifier is not None:
            update["classifier"] = _reseeded(self.classifier, seed)
        return self.model_copy(update=update)


class _Sizes(NamedTuple):
    J: int
    K: int
    N: int


def _scaled(scale: Scale, J: int, K: int, N: int) -> _Sizes:
    if scale == "full":
        return _Sizes(J, K, N)
    return _Sizes(
        max(2, J // DESK_SIZE_DIVISOR),
        max(1, K // DESK_SIZE_DIVISOR),
        max(1, math.ceil(N / DESK_ITERATION_DIVISOR)),
    )


def _sine_integral(d: int = 4, period: Optional[float] = PERIOD) -> TargetSpec:
    return TargetSpec(
        kind="sine_integral",
        direction=axis_direction(d),
        sharpness=SHARPNESS,
        period=period,
    )


def _bump(
    d: int,
    period: Optional[float] = None,
    direction: Optional[tuple[float, ...]] = None,
    sharpness: float = SHARPNESS,
) -> TargetSpec:
    return TargetSpec(
        kind="bump",
        direction=direction or axis_direction(d),
        sharpness=sharpness,
        period=period,
    )


def _walk(algorithm: str, delta: float, target: TargetSpec, **extra) -> WalkConfig:
    if algorithm == "alg2":
        return WalkConfig(delta=delta, mode="lattice", lattice=target.lattice)
    mode = "continuous" if algorithm == "alg1" else "adaptive"
    return WalkConfig(delta=delta, mode=mode, **extra)


def _point(
    label: str,
    parameter: str,
    value: float,
    *,
    target: TargetSpec,
    algorithm: str,
    sizes: _Sizes,
    delta: float,
    lambda1: float,
    epsilon: float = 0.0,
    lambda2: float = 0.0,
    noise_std: float = 0.0,
    eps_hat: float = 1e-3,
    init: Literal["zero", "base"] = "zero",
) -> ExperimentPoint:
    extra = {"eps_hat": eps_hat} if algorithm == "alg3" else {}
    config = TrainConfig(
        algorithm=algorithm,
        K=sizes.K,
        iterations=sizes.N,
        walk=_walk(algorithm, delta, target, **extra),
        cutoff=CutoffConfig(epsilon=epsilon),
        solver=SolverConfig(lambda1=lambda1, lambda2=lambda2),
        init=init,
    )
    return ExperimentPoint(
        label=label,
        parameter=parameter,
        value=value,
        target=target,
        J=sizes.J,
        noise_std=noise_std,
        test_size=max(1, round(TEST_FRACTION * sizes.J)),
        config=config,
    )


def _table_point(
    label: str,
    parameter: str,
    value: float,
    scale: Scale,
    *,
    algorithm: str,
    J: int,
    K: int,
    delta: float,
    lambda_c: float,
    epsilon_c: float = 1 / 200,
    target: Optional[TargetSpec] = None,
    **kwargs,
) -> ExperimentPoint:
    sizes = _scaled(scale, J, K, TABLE_ITERATIONS)
    return _point(
        label,
        parameter,
        value,
        target=target or _sine_integral(),
        algorithm=algorithm,
        sizes=sizes,
        delta=delta,
        lambda1=regularization(lambda_c, sizes.K, sizes.J),
        epsilon=cutoff(epsilon_c, sizes.K),
        **kwargs,
    )


# Table presets


def _test1(scale: Scale) -> ExperimentPreset:
    if scale == "full":
        deltas, algorithms = (0.02, 0.05, 0.2, 0.5, 2.0), ("alg2", "alg3")
    else:
        deltas, algorithms = (0.02, 0.2, 2.0), ("alg2",)
    points = tuple(
        _table_point(
            f"{alg}_delta_{delta:g}",
            "delta",
            delta,
            scale,
            algorithm=alg,
            J=8000,
            K=2500,
            delta=delta,
            lambda_c=1 / 100,
        )
        for alg in algorithms
        for delta in deltas
    )
    return ExperimentPreset(
        name="test1",
        scale=scale,
        description="random walk step size delta",
        points=points,
    )


def _test2(scale: Scale) -> ExperimentPreset:
    if scale == "desk":
        # Two-dimensional bump so the K range fits a desk machine.
        target = _bump(2, period=PERIOD)
        points = tuple(
            _point(
                f"alg2_K_{K}",
                "K",
                K,
                target=target,
                algorithm="alg2",
                sizes=_Sizes(5000, K, 25),
                delta=0.5,
                lambda1=regularization(1 / 20, K, 5000),
                epsilon=cutoff(1 / 200, K),
            )
            for K in (312, 625, 1250, 2500)
        )
        return ExperimentPreset(
            name="test2",
            scale=scale,
            description="network size K",
            points=points,
        )

    ks = (312, 625, 1250, 2500, 5000, 10000)
    lattice_points = [
        _table_point(
            f"alg2_K_{K}",
            "K",
            K,
            scale,
            algorithm="alg2",
            J=20000,
            K=K,
            delta=0.5,
            lambda_c=1 / 20,
        )
        for K in ks
    ]
    continuous_points = [
        _table_point(
            f"{alg}_K_{K}",
            "K",
            K,
            scale,
            algorithm=alg,
            J=20000,
            K=K,
            delta=0.2,
            lambda_c=1 / 20,
            target=_bump(4),
        )
        for alg in ("alg1", "alg3")
        for K in ks
    ]
    return ExperimentPreset(
        name="test2",
        scale=scale,
        description="network size K",
        points=tuple(lattice_points + continuous_points),
    )


def _test3(scale: Scale) -> ExperimentPreset:
    points = tuple(
        _table_point(
            alg,
            "algorithm",
            float(alg[-1]),
            scale,
            algorithm=alg,
            J=20000,
            K=5000,
            delta=0.2,
            lambda_c=1 / 20,
            target=_bump(4),
        )
        for alg in ("alg1", "alg3")
    )
    return ExperimentPreset(
        name="test3",
        scale=scale,
        description="continuous against covariance-adaptive walk",
        points=points,
    )


def _test4(scale: Scale) -> ExperimentPreset:
    points = [
        _table_point(
            f"J_{J}_s_{s:g}",
            "J",
            J,
            scale,
            algorithm="alg2",
            J=J,
            K=2500,
            delta=0.2,
            lambda_c=1 / 20,
            noise_std=s,
        )
        for s in (0.0, 2.5e-3)
        for J in (2000, 8000, 32000)
    ]
    # Over-parameterized regime, J <= K.
    points += [
        _table_point(
            f"overparam_J_{J}",
            "J",
            J,
            scale,
            algorithm="alg2",
            J=J,
            K=20000,
            delta=0.2,
            lambda_c=1 / 20,
        )
        for J in (5000, 10000, 20000)
    ]
    return ExperimentPreset(
        name="test4",
        scale=scale,
        description="training set size J, noiseless and mildly noisy",
        points=tuple(points),
    )


def _test5(scale: Scale) -> ExperimentPreset:
    points = tuple(
        _table_point(
            f"epsilon_{c:g}",
            "epsilon_coefficient",
            c,
            scale,
            algorithm="alg2",
            J=8000,
            K=2500,
            delta=0.5,
            lambda_c=1 / 20,
            epsilon_c=c,
        )
        for c in (0.0, 1 / 200, 1 / 50, 1 / 20)
    )
    return ExperimentPreset(
        name="test5",
        scale=scale,
        description="amplitude cutoff epsilon",
        points=points,
    )


def _test6(scale: Scale) -> ExperimentPreset:
    points = tuple(
        _table_point(
            f"lambda1_{c:g}",
            "lambda1_coefficient",
            c,
            scale,
            algorithm="alg3",
            J=8000,
            K=2500,
            delta=0.5,
            lambda_c=c,
        )
        for c in (1 / 500, 1 / 100, 1 / 20, 1 / 5)
    )
    return ExperimentPreset(
        name="test6",
        scale=scale,
        description="Tikhonov weight lambda1",
        points=points,
    )


def _test7(scale: Scale) -> ExperimentPreset:
    points = tuple(
        _table_point(
            f"lambda2_{lam:g}",
            "lambda2",
            lam,
            scale,
            algorithm="alg3",
            J=4000,
            K=1250,
            delta=0.5,
            lambda_c=1 / 20,
            lambda2=lam,
        )
        for lam in (0.0, 1e-3, 1e-2, 1e-1)
    )
    return ExperimentPreset(
        name="test7",
        scale=scale,
        description="quartic penalty lambda2",
        points=points,
    )


def _test8(scale: Scale) -> ExperimentPreset:
    noise_levels = (0.025, 0.05, 0.1)
    if scale == "desk":
        target = _sine_integral(d=2)
        sizes = _Sizes(6000, 1250, 25)
        points = tuple(
            _point(
                f"s_{s:g}",
                "noise_std",
                s,
                target=target,
                algorithm="alg2",
                sizes=sizes,
                delta=0.5,
                lambda1=regularization(1 / 100, sizes.K, sizes.J),
                epsilon=cutoff(1 / 200, sizes.K),
                noise_std=s,
            )
            for s in noise_levels
        )
    else:
        points = tuple(
            _table_point(
                f"s_{s:g}",
                "noise_std",
                s,
                scale,
                algorithm="alg2",
                J=50000,
                K=10000,
                delta=0.5,
                lambda_c=1 / 100,
                noise_std=s,
            )
            for s in noise_levels
        )
    return ExperimentPreset(
        name="test8",
        scale=scale,
        description="training noise level s",
        points=points,
    )


# Figure presets: two-dimensional bump along a fixed direction, J = 15000
# and K = 1.5 J.


def _figure_sizes(scale: Scale, iterations: int) -> _Sizes:
    J = 15000
    return _scaled(scale, J, 3 * J // 2, iterations)


def _fig_f29(scale: Scale) -> ExperimentPreset:
    sizes = _figure_sizes(scale, FIGURE_ITERATIONS)
    point = _point(
        "alg1",
        "algorithm",
        1.0,
        target=_bump(2, direction=FIGURE_DIRECTION),
        algorithm="alg1",
        sizes=sizes,
        delta=0.5,
        lambda1=regularization(1 / 100, sizes.K, sizes.J),
        init="base",
    )
    return ExperimentPreset(
        name="fig_f29",
        scale=scale,
        description="continuous walk on the non-periodic bump",
        points=(point,),
    )


def _fig_f27(scale: Scale) -> ExperimentPreset:
    sizes = _figure_sizes(scale, FIGURE_ITERATIONS)
    point = _point(
        "alg2",
        "algorithm",
        2.0,
        target=_bump(2, period=PERIOD, direction=FIGURE_DIRECTION),
        algorithm="alg2",
        sizes=sizes,
        delta=0.2,
        lambda1=regularization(1 / 500, sizes.K, sizes.J),
        epsilon=cutoff(1 / 200, sizes.K),
        init="base",
    )
    return ExperimentPreset(
        name="fig_f27",
        scale=scale,
        description="lattice walk on the periodized bump",
        points=(point,),
    )


def _fig_alg3(scale: Scale) -> ExperimentPreset:
    sizes = _figure_sizes(scale, ADAPTIVE_FIGURE_ITERATIONS)
    point = _point(
        "alg3",
        "algorithm",
        3.0,
        target=_bump(2, direction=FIGURE_DIRECTION),
        algorithm="alg3",
        sizes=sizes,
        delta=0.5,
        lambda1=regularization(1 / 100, sizes.K, sizes.J),
        eps_hat=1e-3,
        init="base",
    )
    return ExperimentPreset(
        name="fig_alg3",
        scale=scale,
        description="covariance-adaptive walk on the non-periodic bump",
        points=(point,),
    )


def _mnist(scale: Scale) -> ExperimentPreset:
    if scale == "full":
        classifier = ClassifierConfig(K=10000, iterations=6000)
    else:
        classifier = ClassifierConfig(K=2000, iterations=300, digits=(0, 1, 2, 8))
    return ExperimentPreset(
        name="mnist",
        scale=scale,
        description="one-vs-all cos/sin networks on MNIST",
        classifier=classifier,
    )


PRESETS: dict[str, Callable[[Scale], ExperimentPreset]] = {
    "test1": _test1,
    "test2": _test2,
    "test3": _test3,
    "test4": _test4,
    "test5": _test5,
    "test6": _test6,
    "test7": _test7,
    "test8": _test8,
    "fig_f29": _fig_f29,
    "fig_f27": _fig_f27,
    "fig_alg3": _fig_alg3,
    "mnist": _mnist,
}


def build_preset(name: str, scale: Scale = "desk") -> ExperimentPreset:
    """Return the named preset at the given scale.

    Raises:
        ArffConfigError: If the name is unknown; suggests the closest name.
    """
    builder = PRESETS.get(name)
    if builder is None:
        close = difflib.get_close_matches(name, PRESETS, n=1)
        suggestion = close[0] if close else None
        hint = f"; did you mean {suggestion!r}?" if suggestion else ""
        raise ArffConfigError(
            f"unknown preset {name!r}{hint}", key=name, suggestion=suggestion
        )
    if scale not in ("full", "desk"):
        raise ArffConfigError(f"unknown scale {scale!r}", key="scale")
    return builder(scale)


# Running points


class PointOutcome(NamedTuple):
    model: RffModel
    history: RunHistory
    summary: SweepPoint
    noise_to_signal: float


def point_data(point: ExperimentPoint) -> tuple[Dataset, Optional[Dataset]]:
    """Training data and test set drawn from the point's seed."""
    root = RngStream(point.config.seed)
    d = point.target.dimension
    dataset = sample_dataset(
        point.target, point.J, d, point.noise_std, root.spawn(DATA_STREAM)
    )
    test_set = None
    if point.test_size is not None:
        test_set = sample_test_set(
            point.target, point.test_size, root.spawn(TEST_STREAM)
        )
    return dataset, test_set


def run_point(point: ExperimentPoint) -> PointOutcome:
    """Draw the point's data and run the resampling loop on it."""
    dataset, test_set = point_data(point)
    nsr = 0.0
    if point.noise_std > 0:
        clean = evaluate_target(point.target, dataset.inputs)
        nsr = noise_to_signal_ratio(dataset, clean)
    logger.info(f"point {point.label}: {point.parameter}={point.value:g}, J={point.J}")
    model, history = run(point.config, dataset, test_set)
    summary = SweepPoint(
        point=point.label,
        parameter=point.parameter,
        value=point.value,
        train_rel_err=history.final.train_rel_err,
        val_rel_err=history.final.val_rel_err,
        test_rel_err=history.test_rel_err,
    )
    return PointOutcome(model, history, summary, nsr)
