"""Tests for the adaptive resampling loops."""

import numpy as np
import pytest

from adaptive_rff.exceptions import ArffTrainingError, ArffValidationError
from adaptive_rff.models import (
    CutoffConfig,
    FrequencySet,
    IterationRecord,
    LatticeNormalDistribution,
    LatticeSpec,
    RunHistory,
    SolverConfig,
    StandardNormalDistribution,
    TabulatedDistribution,
    TargetSpec,
    TrainConfig,
    WalkConfig,
)
from adaptive_rff.rng import RngStream
from adaptive_rff.targets import sample_dataset, sample_test_set
from adaptive_rff.trainer import (
    default_base,
    histogram_projected,
    run,
    snapshot_cadence,
    train_error_median_ratio,
    tv_distance_to_optimal,
)

LATTICE = LatticeSpec(half_period=6.0, dimension=1)


@pytest.fixture
def bump_target():
    """Periodized one-dimensional bump."""
    return TargetSpec(kind="bump", direction=(1.0,), sharpness=0.5, period=12.0)


@pytest.fixture
def bump_data(bump_target):
    """200 noise-free samples of the bump."""
    return sample_dataset(bump_target, 200, 1, 0.0, RngStream(101))


def _config(algorithm: str, **overrides) -> TrainConfig:
    walks = {
        "alg1": WalkConfig(delta=0.5),
        "alg2": WalkConfig(delta=0.5, mode="lattice", lattice=LATTICE),
        "alg3": WalkConfig(delta=0.5, mode="adaptive"),
    }
    settings = dict(
        algorithm=algorithm,
        K=16,
        iterations=5,
        walk=walks[algorithm],
        solver=SolverConfig(lambda1=1e-3, cg_rel_tol=1e-8),
        seed=7,
    )
    settings.update(overrides)
    return TrainConfig(**settings)


class TestRun:
    """Tests for complete resampling runs."""

    @pytest.mark.parametrize("algorithm", ["alg1", "alg2", "alg3"])
    def test_records_every_iteration(self, algorithm, bump_data):
        """N resampling records are followed by one final record."""
        model, history = run(_config(algorithm), bump_data)
        assert [r.iteration for r in history.records] == list(range(1, 7))
        assert [r.phase for r in history.records] == ["resample"] * 5 + ["final"]
        assert model.size == 16
        assert all(r.train_rel_err <= 1.0 for r in history.records)
        assert history.test_rel_err is None

    def test_lattice_run_stays_on_lattice(self, bump_data):
        """The lattice walk keeps every frequency on the lattice."""
        model, _ = run(_config("alg2"), bump_data)
        assert model.frequencies.lattice == LATTICE

    def test_cutoff_mix_keeps_size(self, bump_data):
        """A base-distribution share keeps K frequencies."""
        config = _config("alg2", cutoff=CutoffConfig(epsilon=1e-3, q_epsilon=0.25))
        model, _ = run(config, bump_data)
        assert model.size == 16

    def test_deterministic(self, bump_data):
        """One seed reproduces the run exactly."""
        first_model, first = run(_config("alg3"), bump_data)
        second_model, second = run(_config("alg3"), bump_data)
        np.testing.assert_array_equal(first.train_errors, second.train_errors)
        np.testing.assert_array_equal(
            first_model.amplitudes, second_model.amplitudes
        )

    def test_seed_changes_run(self, bump_data):
        """Different seeds give different frequencies."""
        a, _ = run(_config("alg1", seed=1), bump_data)
        b, _ = run(_config("alg1", seed=2), bump_data)
        assert not np.array_equal(
            a.frequencies.coordinates, b.frequencies.coordinates
        )

    def test_base_initialization(self, bump_data):
        """Frequencies drawn from the base distribution also train."""
        _, history = run(_config("alg1", init="base"), bump_data)
        assert history.final.phase == "final"

    def test_test_error(self, bump_target, bump_data):
        """A held-out set adds a test error."""
        test_set = sample_test_set(bump_target, 50, RngStream(5))
        _, history = run(_config("alg1"), bump_data, test_set)
        assert history.test_rel_err is not None and history.test_rel_err >= 0.0

    def test_snapshots_follow_cadence(self, bump_data):
        """Snapshots at iteration 1, every multiple of the cadence and the end."""
        _, history = run(_config("alg1", iterations=10, snapshot_every=4), bump_data)
        assert [s.iteration for s in history.snapshots] == [1, 4, 8, 11]
        assert history.snapshots[0].coordinates.shape == (16, 1)

    def test_full_history(self, bump_data):
        """full_history snapshots every iteration."""
        _, history = run(_config("alg1", full_history=True), bump_data)
        assert [s.iteration for s in history.snapshots] == list(range(1, 7))

    def test_equal_amplitude_checks(self, bump_data):
        """Duplicate lattice frequencies get equal dense amplitudes."""
        _, history = run(_config("alg2", verify_every=1), bump_data)
        checks = history.equal_amplitude_checks
        assert [c.iteration for c in checks] == [1, 2, 3, 4, 5]
        assert max(c.max_rel_spread for c in checks) <= 1e-8

    def test_timings(self, bump_data):
        """Phase timings are kept only when requested."""
        _, quiet = run(_config("alg1"), bump_data)
        assert quiet.timings == ()
        assert all(r.wall_ms == 0.0 for r in quiet.records)
        _, timed = run(_config("alg1", record_timing=True), bump_data)
        assert len(timed.timings) == 5

    def test_solver_failure_reports_iteration(self, bump_data):
        """A failed solve is wrapped with the iteration it happened at."""
        solver = SolverConfig(lambda1=1e-3, cg_rel_tol=1e-14, cg_max_iters=1)
        with pytest.raises(ArffTrainingError) as excinfo:
            run(_config("alg1", solver=solver), bump_data)
        assert excinfo.value.iteration == 1

    def test_dimension_mismatch(self, bump_data):
        """A two-dimensional lattice cannot walk one-dimensional data."""
        lattice = LatticeSpec(half_period=6.0, dimension=2)
        walk = WalkConfig(delta=0.5, mode="lattice", lattice=lattice)
        with pytest.raises(ArffValidationError):
            run(_config("alg2", walk=walk), bump_data)


class TestHelpers:
    """Tests for run helpers and diagnostics."""

    def test_default_base(self):
        """Lattice walks default to the rounded normal."""
        assert isinstance(
            default_base(_config("alg2"), 1), LatticeNormalDistribution
        )
        assert isinstance(
            default_base(_config("alg1"), 1), StandardNormalDistribution
        )

    def test_snapshot_cadence(self):
        """About twenty snapshots by default."""
        assert snapshot_cadence(_config("alg1", iterations=200)) == 10
        assert snapshot_cadence(_config("alg1", iterations=5)) == 1
        assert snapshot_cadence(_config("alg1", snapshot_every=3)) == 3

    def test_histogram_counts_everything(self):
        """Counts plus underflow and overflow add up to K."""
        freqs = FrequencySet.continuous([[-5.0, 0.0], [0.1, 0.0], [0.2, 9.0], [7.0, 0]])
        hist = histogram_projected(freqs, (1.0, 0.0), 4, (-1.0, 1.0))
        assert hist.total == 4
        assert hist.underflow == 1 and hist.overflow == 1
        assert hist.counts.tolist() == [0, 0, 2, 0]

    def test_histogram_needs_unit_direction(self):
        """Directions must be unit vectors."""
        with pytest.raises(ArffValidationError):
            histogram_projected(FrequencySet.zeros(2, 2), (1.0, 1.0), 4, (-1.0, 1.0))

    def test_tv_distance(self):
        """Matching measures are at distance 0, disjoint ones at 1."""
        p_star = TabulatedDistribution(
            lattice=LATTICE, indices=[[0], [1]], probabilities=[0.5, 0.5]
        )
        matching = FrequencySet.on_lattice([[0], [1], [1], [0]], LATTICE)
        disjoint = FrequencySet.on_lattice([[5], [5]], LATTICE)
        assert tv_distance_to_optimal(matching, p_star) == pytest.approx(0.0)
        assert tv_distance_to_optimal(disjoint, p_star) == pytest.approx(1.0)
        skewed = FrequencySet.on_lattice([[0], [0], [0], [1]], LATTICE)
        assert tv_distance_to_optimal(skewed, p_star) == pytest.approx(0.25)

    def test_median_ratio(self):
        """Last-tenth median over first-tenth median."""
        errors = [1.0, 1.0] + [0.5] * 16 + [0.25, 0.25]
        records = tuple(
            IterationRecord(
                iteration=i + 1,
                phase="resample",
                train_rel_err=e,
                val_rel_err=e,
                cg_iters=1,
            )
            for i, e in enumerate(errors)
        )
        history = RunHistory(records=records)
        assert train_error_median_ratio(history) == pytest.approx(0.25)
