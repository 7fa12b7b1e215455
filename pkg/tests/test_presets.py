"""Tests for experiment presets and point runs."""

import math

import numpy as np
import pytest

from adaptive_rff.exceptions import ArffConfigError
from adaptive_rff.models import (
    CutoffConfig,
    SolverConfig,
    TargetSpec,
    TrainConfig,
    WalkConfig,
)
from adaptive_rff.presets import (
    FIGURE_DIRECTION,
    PRESETS,
    ExperimentPoint,
    build_preset,
    cutoff,
    point_data,
    regularization,
    run_point,
)


@pytest.fixture
def tiny_point():
    """A noisy lattice run small enough for unit tests."""
    target = TargetSpec(kind="bump", direction=(1.0,), sharpness=0.5, period=12.0)
    config = TrainConfig(
        algorithm="alg2",
        K=8,
        iterations=2,
        walk=WalkConfig(delta=0.5, mode="lattice", lattice=target.lattice),
        cutoff=CutoffConfig(epsilon=1e-3),
        solver=SolverConfig(lambda1=1e-2),
        init="base",
        seed=9,
    )
    return ExperimentPoint(
        label="tiny",
        parameter="noise_std",
        value=0.1,
        target=target,
        J=100,
        noise_std=0.1,
        test_size=20,
        config=config,
    )


class TestExpressions:
    """Tests for the resolved regularization expressions."""

    def test_regularization(self):
        """lambda1 = c K / sqrt(J)."""
        assert regularization(1 / 20, 2500, 10000) == pytest.approx(1.25)

    def test_cutoff(self):
        """epsilon = c / sqrt(K)."""
        assert cutoff(1 / 200, 2500) == pytest.approx(1e-4)


class TestBuildPreset:
    """Tests for preset construction."""

    @pytest.mark.parametrize("name", sorted(PRESETS))
    @pytest.mark.parametrize("scale", ["full", "desk"])
    def test_every_preset_builds(self, name, scale):
        """Every preset validates at both scales."""
        preset = build_preset(name, scale)
        assert preset.name == name and preset.scale == scale
        assert preset.points or preset.classifier is not None
        labels = [p.label for p in preset.points]
        assert len(labels) == len(set(labels))
        for point in preset.points:
            assert point.target.dimension >= 1

    @pytest.mark.parametrize("scale", ["full", "desk"])
    @pytest.mark.parametrize("name", [f"test{i}" for i in range(1, 9)])
    def test_table_sweeps_start_from_zero(self, name, scale):
        """Table sweeps start every run from zero frequencies."""
        points = build_preset(name, scale).points
        assert {p.config.init for p in points} == {"zero"}

    @pytest.mark.parametrize("name", ["fig_f29", "fig_f27", "fig_alg3"])
    def test_figures_start_from_base(self, name):
        """Figure runs start from standard normal frequencies."""
        assert build_preset(name, "desk").points[0].config.init == "base"

    def test_test1_desk(self):
        """Desk scale divides J and K by 8 and N by 4."""
        preset = build_preset("test1", "desk")
        assert [p.value for p in preset.points] == [0.02, 0.2, 2.0]
        point = preset.points[0]
        assert (point.J, point.config.K, point.config.iterations) == (1000, 312, 25)
        assert point.test_size == 500
        assert point.config.algorithm == "alg2"
        assert point.config.walk.lattice.half_period == 6.0
        assert point.config.solver.lambda1 == pytest.approx(
            312 / 100 / math.sqrt(1000)
        )
        assert point.config.cutoff.epsilon == pytest.approx(1 / 200 / math.sqrt(312))
        assert point.target.kind == "sine_integral"
        assert point.target.direction == (1.0, 0.0, 0.0, 0.0)

    def test_test1_full(self):
        """The full sweep covers five step sizes for two algorithms."""
        preset = build_preset("test1", "full")
        assert len(preset.points) == 10
        assert {p.config.K for p in preset.points} == {2500}
        assert {p.config.iterations for p in preset.points} == {100}

    def test_test2_desk_sizes(self):
        """The desk K sweep keeps J fixed and doubles K."""
        preset = build_preset("test2", "desk")
        assert [p.config.K for p in preset.points] == [312, 625, 1250, 2500]
        assert {p.J for p in preset.points} == {5000}
        assert preset.points[0].target.dimension == 2

    def test_test4_overparameterized(self):
        """The J sweep includes points with J <= K."""
        preset = build_preset("test4", "full")
        over = [p for p in preset.points if p.label.startswith("overparam")]
        assert over and all(p.J <= p.config.K for p in over)
        noisy = [p for p in preset.points if p.noise_std > 0]
        assert {p.noise_std for p in noisy} == {2.5e-3}

    def test_test7_quartic(self):
        """The lambda2 sweep starts from zero."""
        values = [p.config.solver.lambda2 for p in build_preset("test7").points]
        assert values == [0.0, 1e-3, 1e-2, 1e-1]

    def test_figure_sizes(self):
        """Figure runs use K = 1.5 J on the fixed direction."""
        point = build_preset("fig_f27", "full").points[0]
        assert (point.J, point.config.K, point.config.iterations) == (15000, 22500, 200)
        assert point.target.direction == pytest.approx(
            tuple(np.asarray(FIGURE_DIRECTION) / np.linalg.norm(FIGURE_DIRECTION))
        )
        assert point.config.solver.lambda1 == pytest.approx(
            22500 / 500 / math.sqrt(15000)
        )
        adaptive = build_preset("fig_alg3", "full").points[0]
        assert adaptive.config.iterations == 30
        assert adaptive.config.walk.eps_hat == 1e-3

    def test_mnist_carries_classifier(self):
        """The mnist preset has classifier settings and no points."""
        full = build_preset("mnist", "full")
        assert full.points == ()
        assert (full.classifier.K, full.classifier.iterations) == (10000, 6000)
        assert build_preset("mnist", "desk").classifier.digits == (0, 1, 2, 8)

    def test_unknown_name_suggests(self):
        """A misspelled name names the closest preset."""
        with pytest.raises(ArffConfigError) as excinfo:
            build_preset("tset1")
        assert excinfo.value.key == "tset1"
        assert excinfo.value.suggestion == "test1"
        assert "did you mean" in str(excinfo.value)

    def test_unknown_scale(self):
        """Only full and desk scales exist."""
        with pytest.raises(ArffConfigError):
            build_preset("test1", "huge")

    def test_with_seed(self):
        """with_seed reseeds every point and the classifier."""
        preset = build_preset("test5").with_seed(77)
        assert {p.config.seed for p in preset.points} == {77}
        assert build_preset("mnist").with_seed(5).classifier.seed == 5

    @pytest.mark.parametrize("seed", [-1, 2**64])
    def test_with_seed_range(self, seed):
        """Reseeding validates the seed like a fresh config."""
        with pytest.raises(ArffConfigError):
            build_preset("test5").with_seed(seed)
        with pytest.raises(ArffConfigError):
            build_preset("mnist").with_seed(seed)


class TestRunPoint:
    """Tests for running a single sweep point."""

    def test_point_data_is_seeded(self, tiny_point):
        """Data and test set depend only on the point seed."""
        first, first_test = point_data(tiny_point)
        second, second_test = point_data(tiny_point)
        np.testing.assert_array_equal(first.targets, second.targets)
        np.testing.assert_array_equal(first_test.inputs, second_test.inputs)
        assert first.size == 100 and first_test.size == 20
        assert not np.array_equal(first.inputs[:20], first_test.inputs)

    def test_run_point(self, tiny_point):
        """A point run yields a summary and the noise-to-signal ratio."""
        outcome = run_point(tiny_point)
        assert outcome.summary.point == "tiny"
        assert outcome.summary.value == 0.1
        assert outcome.summary.test_rel_err is not None
        assert outcome.noise_to_signal > 0.0
        assert outcome.history.final.iteration == 3

    def test_noise_free_point(self, tiny_point):
        """Without noise the ratio is zero."""
        clean = tiny_point.model_copy(update={"noise_std": 0.0})
        assert run_point(clean).noise_to_signal == 0.0
