"""Tests for aggregation, cutoff resampling and walk proposals."""

import logging

import numpy as np
import pytest
import scipy.stats

from adaptive_rff.exceptions import (
    ArffFactorizationError,
    ArffValidationError,
    EmptyCutoffError,
)
from adaptive_rff.linalg import dense_solve
from adaptive_rff.models import (
    AggregatedAmplitudes,
    CutoffConfig,
    FrequencySet,
    LatticeSpec,
    WalkConfig,
)
from adaptive_rff.rng import RngStream
from adaptive_rff.sampler import (
    CovarianceState,
    adaptive_walk_step,
    aggregate_equal_frequencies,
    amplitude_resample,
    cutoff_distribution,
    empirical_covariance,
    group_by_sorted_amplitudes,
    lattice_walk_step,
    mixed_resample,
    multinomial_resample,
    random_walk_step,
    simplified_cutoff_resample,
    split_counts,
    update_covariance,
)


def _aggregated(magnitudes) -> AggregatedAmplitudes:
    n = len(magnitudes)
    return AggregatedAmplitudes(
        representatives=FrequencySet.continuous(np.arange(n, dtype=float)[:, None]),
        aggregates=np.asarray(magnitudes, dtype=complex),
        multiplicities=np.ones(n, dtype=np.int64),
    )


def _normal_sampler(dimension: int):
    def sample(count: int, rng: RngStream) -> FrequencySet:
        return FrequencySet.continuous(rng.normal((count, dimension)))

    return sample


class TestAggregation:
    """Tests for summing amplitudes of coinciding frequencies."""

    def test_planted_duplicates_share_amplitude(self, make_dataset):
        """Duplicated frequencies get equal amplitudes that sum to the aggregate."""
        stream = RngStream(31)
        for trial in range(10):
            rng = stream.spawn(trial)
            distinct = rng.normal((5, 2))
            repeats = 1 + (rng.uniform(5) * 4).astype(int)
            positions = rng.permutation(int(repeats.sum()))
            coords = np.repeat(distinct, repeats, axis=0)[positions]
            freqs = FrequencySet.continuous(coords)
            dataset = make_dataset(60, 2, rng)
            beta = dense_solve(freqs, dataset, 0.1).amplitudes

            agg = aggregate_equal_frequencies(freqs, beta)
            assert len(agg) == 5
            assert agg.total == freqs.size
            keys = freqs.grouping_keys()
            for n, rep in enumerate(agg.representatives.grouping_keys()):
                members = np.flatnonzero(np.all(keys == rep, axis=1))
                assert members.size == agg.multiplicities[n]
                np.testing.assert_allclose(
                    beta[members], beta[members[0]], rtol=0, atol=1e-10
                )
                assert np.sum(np.abs(beta[members])) == pytest.approx(
                    abs(agg.aggregates[n]), rel=1e-10
                )

    def test_lattice_keys_are_indices(self):
        """Lattice sets aggregate by integer index."""
        lattice = LatticeSpec(half_period=6.0, dimension=1)
        freqs = FrequencySet.on_lattice([[2], [-1], [2]], lattice)
        agg = aggregate_equal_frequencies(freqs, [1.0, 0.5j, 2.0])
        assert agg.as_mapping() == {(-1,): (0.5j, 1), (2,): (3.0 + 0j, 2)}

    def test_amplitude_count_mismatch(self):
        """One amplitude per frequency is required."""
        with pytest.raises(ArffValidationError):
            aggregate_equal_frequencies(FrequencySet.zeros(3, 1), [1.0, 2.0])

    def test_sorted_amplitude_groups(self):
        """Equal amplitudes fall into one group, smallest magnitude first."""
        groups = group_by_sorted_amplitudes([1.0, 2.0, 1.0 + 1e-12, 2.0])
        assert [g.tolist() for g in groups] == [[0, 2], [1, 3]]


class TestCutoff:
    """Tests for the cutoff distribution."""

    def test_probabilities(self):
        """Entries below epsilon are dropped and the rest normalized."""
        support, probabilities = cutoff_distribution(_aggregated([0.1, 0.5, 0.4]), 0.3)
        np.testing.assert_allclose(support.coordinates.ravel(), [1.0, 2.0])
        np.testing.assert_allclose(probabilities, [5 / 9, 4 / 9])

    def test_threshold_is_inclusive(self):
        """|beta| equal to epsilon is kept."""
        support, _ = cutoff_distribution(_aggregated([0.25, 0.1]), 0.25)
        assert support.size == 1

    def test_empty_cutoff(self):
        """No entry reaching epsilon raises EmptyCutoffError."""
        with pytest.raises(EmptyCutoffError):
            cutoff_distribution(_aggregated([0.1, 0.2]), 1.0)


class TestMultinomial:
    """Tests for categorical resampling."""

    def test_frequencies_match_probabilities(self):
        """Draw counts pass a chi-square test."""
        p = np.array([0.1, 0.2, 0.3, 0.4])
        draws = multinomial_resample(p, 20_000, RngStream(3))
        counts = np.bincount(draws, minlength=4)
        assert scipy.stats.chisquare(counts, 20_000 * p).pvalue > 1e-4

    def test_zero_probability_never_drawn(self):
        """Zero-probability entries are never selected."""
        draws = multinomial_resample([0.5, 0.0, 0.5], 5000, RngStream(4))
        assert 1 not in set(draws.tolist())

    @pytest.mark.parametrize("p", [[0.5, 0.6], [-0.1, 1.1], [], [np.nan, 1.0]])
    def test_invalid_probabilities(self, p):
        """Invalid probability vectors are rejected."""
        with pytest.raises(ArffValidationError):
            multinomial_resample(p, 3, RngStream(0))

    def test_deterministic(self):
        """One seed gives one draw sequence."""
        p = [0.2, 0.3, 0.5]
        np.testing.assert_array_equal(
            multinomial_resample(p, 50, RngStream(8)),
            multinomial_resample(p, 50, RngStream(8)),
        )


class TestResampling:
    """Tests for the resampling variants."""

    def test_split_counts(self):
        """K_bar + K_tilde = K with K_tilde = ceil(K q)."""
        assert split_counts(10, 0.0) == (10, 0)
        assert split_counts(10, 0.25) == (7, 3)
        assert split_counts(3, 0.5) == (1, 2)

    def test_mixed_appends_base_draws(self, rng):
        """The last K_tilde frequencies come from the base sampler."""
        agg = _aggregated([1.0, 3.0])
        cfg = CutoffConfig(epsilon=0.0, q_epsilon=0.25)
        freqs = mixed_resample(agg, cfg, _normal_sampler(1), 8, rng)
        assert freqs.size == 8
        assert set(freqs.coordinates[:6, 0].tolist()) <= {0.0, 1.0}

    def test_mixed_falls_back_without_cutoff(self, rng, caplog):
        """An empty cutoff set falls back to epsilon = 0 with a warning."""
        agg = _aggregated([0.1, 0.2])
        cfg = CutoffConfig(epsilon=10.0)
        with caplog.at_level(logging.WARNING, logger="adaptive_rff.sampler"):
            freqs = mixed_resample(agg, cfg, _normal_sampler(1), 5, rng)
        assert freqs.size == 5
        assert "without cutoff" in caplog.text

    def test_amplitude_resample_keeps_size(self, rng):
        """Resampling keeps K and draws only existing frequencies."""
        freqs = FrequencySet.continuous([[0.0], [1.0], [2.0]])
        out = amplitude_resample(freqs, [0.0, 1.0, 1.0j], rng)
        assert out.size == 3
        assert set(out.coordinates.ravel().tolist()) <= {1.0, 2.0}

    def test_simplified_cutoff(self, rng):
        """Only frequencies above the cutoff survive."""
        freqs = FrequencySet.continuous([[0.0], [1.0], [2.0]])
        out = simplified_cutoff_resample(freqs, [0.1, 0.9, 0.2], 0.5, rng)
        np.testing.assert_array_equal(out.coordinates.ravel(), [1.0, 1.0, 1.0])


class TestWalks:
    """Tests for the random-walk proposals."""

    def test_continuous_step_scale(self, rng):
        """Increments have standard deviation delta."""
        freqs = FrequencySet.zeros(20_000, 1)
        moved = random_walk_step(freqs, WalkConfig(delta=0.3), rng)
        assert np.std(moved.coordinates) == pytest.approx(0.3, rel=0.05)

    def test_continuous_rejects_lattice(self, lattice_1d, rng):
        """The continuous walk refuses lattice sets."""
        freqs = FrequencySet.zeros(3, 1, lattice_1d)
        with pytest.raises(ArffValidationError):
            random_walk_step(freqs, WalkConfig(delta=0.1), rng)

    def test_lattice_step_stays_on_lattice(self, lattice_1d, rng):
        """Projected steps land on the lattice."""
        cfg = WalkConfig(delta=2.0, mode="lattice", lattice=lattice_1d)
        freqs = FrequencySet.zeros(100, 1, lattice_1d)
        moved = lattice_walk_step(freqs, cfg, rng)
        assert moved.lattice == lattice_1d
        np.testing.assert_allclose(
            moved.coordinates, moved.indices * lattice_1d.spacing
        )
        assert np.any(moved.indices != 0)

    def test_small_lattice_step_is_identity(self, lattice_1d, rng):
        """A step far below the spacing projects back to the start."""
        cfg = WalkConfig(delta=1e-6, mode="lattice", lattice=lattice_1d)
        freqs = FrequencySet.on_lattice([[3], [-2]], lattice_1d)
        moved = lattice_walk_step(freqs, cfg, rng)
        np.testing.assert_array_equal(moved.indices, freqs.indices)

    def test_adaptive_step_covariance(self, rng):
        """Adaptive increments have covariance delta^2 (C + eps_hat I)."""
        cov = CovarianceState(running_average=np.diag([4.0, 0.25]))
        cfg = WalkConfig(delta=0.5, mode="adaptive", eps_hat=1e-3)
        freqs = FrequencySet.zeros(40_000, 2)
        moved = adaptive_walk_step(freqs, cfg, cov, rng)
        steps = moved.coordinates / 0.5
        np.testing.assert_allclose(
            np.cov(steps.T), np.diag([4.001, 0.251]), rtol=0.05, atol=0.02
        )

    def test_adaptive_rejects_indefinite(self, rng):
        """A negative definite proposal cannot be factored."""
        cov = CovarianceState(running_average=-np.eye(2))
        cfg = WalkConfig(delta=0.5, mode="adaptive")
        with pytest.raises(ArffFactorizationError):
            adaptive_walk_step(FrequencySet.zeros(2, 2), cfg, cov, rng)


class TestCovariance:
    """Tests for the running covariance."""

    def test_empirical_covariance(self):
        """Covariance is taken about the empirical mean with 1/K weight."""
        freqs = FrequencySet.continuous([[0.0, 0.0], [2.0, 0.0]])
        np.testing.assert_allclose(
            empirical_covariance(freqs), [[1.0, 0.0], [0.0, 0.0]]
        )

    def test_running_average(self):
        """The running matrix averages all stored covariances."""
        cov = CovarianceState.initial(1)
        np.testing.assert_array_equal(cov.running_average, [[1.0]])
        cov = update_covariance(cov, FrequencySet.continuous([[0.0], [2.0]]))
        cov = update_covariance(cov, FrequencySet.continuous([[0.0], [4.0]]))
        assert len(cov.per_iteration_covariances) == 2
        np.testing.assert_allclose(cov.running_average, [[2.5]])
