"""Tests for the matrix-free least-squares solvers."""

import numpy as np
import pytest

from adaptive_rff.exceptions import (
    ArffConvergenceError,
    ArffSolverError,
    ArffValidationError,
    OracleGuardError,
)
from adaptive_rff.linalg import (
    apply_adjoint,
    apply_design,
    cg_solve,
    conjugate_gradient,
    dense_solve,
    newton_solve,
    objective,
    objective_gradient,
    solve,
)
from adaptive_rff.models import Dataset, FrequencySet, SolverConfig
from adaptive_rff.rng import RngStream


def _size(rng: RngStream, low: int, high: int) -> int:
    return low + int(rng.uniform(1)[0] * (high - low + 1))


class TestDesignOperator:
    """Tests for applying A and A^*."""

    def test_adjoint_consistency(self, rng, make_instance):
        """<A v, r> equals <v, A^* r>."""
        freqs, dataset = make_instance(9, 40, 2, rng)
        v = rng.normal(9) + 1j * rng.normal(9)
        r = rng.normal(40) + 1j * rng.normal(40)
        left = np.vdot(r, apply_design(freqs, dataset.inputs, v))
        right = np.vdot(apply_adjoint(freqs, dataset.inputs, r), v)
        assert left == pytest.approx(right, rel=1e-12)

    def test_rejects_wrong_length(self, rng, make_instance):
        """A coefficient vector of the wrong length is rejected."""
        freqs, dataset = make_instance(4, 10, 1, rng)
        with pytest.raises(ArffValidationError):
            apply_design(freqs, dataset.inputs, np.zeros(5))


class TestConjugateGradient:
    """Tests for the generic CG routine."""

    def test_solves_spd_system(self, rng):
        """CG solves a small real SPD system."""
        m = rng.normal((6, 6))
        matrix = m @ m.T + 6 * np.eye(6)
        rhs = rng.normal(6)
        outcome = conjugate_gradient(lambda v: matrix @ v, rhs, 1e-12, 100)
        assert outcome.converged
        np.testing.assert_allclose(outcome.solution, np.linalg.solve(matrix, rhs))

    def test_zero_rhs(self):
        """A zero right-hand side returns zero without iterating."""
        outcome = conjugate_gradient(lambda v: v, np.zeros(3), 1e-8, 10)
        assert outcome.iterations == 0 and outcome.converged

    def test_indefinite_operator(self):
        """Negative curvature raises ArffSolverError."""
        with pytest.raises(ArffSolverError):
            conjugate_gradient(lambda v: -v, np.ones(3), 1e-8, 10)


class TestCgSolve:
    """Tests for the lambda2 = 0 solve."""

    @pytest.mark.parametrize("lambda1", [1e-3, 0.1, 1.0])
    def test_agrees_with_dense_oracle(self, lambda1, make_instance):
        """CG and Cholesky agree to 1e-6 on random instances."""
        stream = RngStream(11)
        cfg = SolverConfig(lambda1=lambda1, cg_rel_tol=1e-12, cg_max_iters=5000)
        for trial in range(50):
            rng = stream.spawn(trial)
            K, J, d = _size(rng, 1, 50), _size(rng, 1, 200), _size(rng, 1, 3)
            freqs, dataset = make_instance(K, J, d, rng)
            iterative = cg_solve(freqs, dataset, cfg).amplitudes
            direct = dense_solve(freqs, dataset, lambda1).amplitudes
            gap = np.linalg.norm(iterative - direct) / max(
                np.linalg.norm(direct), 1e-300
            )
            assert gap <= 1e-6, f"trial {trial}: K={K} J={J} d={d} gap={gap:.2e}"

    def test_unregularized_overparameterized(self, rng, make_instance):
        """lambda1 = 0 with K > J is rejected."""
        freqs, dataset = make_instance(20, 10, 1, rng)
        with pytest.raises(ArffValidationError):
            cg_solve(freqs, dataset, SolverConfig(lambda1=0.0))

    def test_rejects_quartic_penalty(self, rng, make_instance):
        """cg_solve refuses lambda2 > 0."""
        freqs, dataset = make_instance(3, 10, 1, rng)
        with pytest.raises(ArffValidationError):
            cg_solve(freqs, dataset, SolverConfig(lambda1=0.1, lambda2=0.1))

    def test_iteration_cap(self, rng, make_instance):
        """Hitting the iteration cap raises ArffConvergenceError."""
        freqs, dataset = make_instance(30, 60, 2, rng)
        cfg = SolverConfig(lambda1=1e-3, cg_rel_tol=1e-14, cg_max_iters=1)
        with pytest.raises(ArffConvergenceError) as excinfo:
            cg_solve(freqs, dataset, cfg)
        assert excinfo.value.iterations == 1

    def test_zero_targets_give_zero(self, rng):
        """Zero data gives zero amplitudes."""
        freqs = FrequencySet.continuous(rng.normal((4, 1)))
        dataset = Dataset(inputs=rng.normal((8, 1)), targets=np.zeros(8))
        result = cg_solve(freqs, dataset, SolverConfig(lambda1=0.1))
        np.testing.assert_array_equal(result.amplitudes, np.zeros(4))


class TestDenseSolve:
    """Tests for the direct oracle."""

    def test_guard(self, rng, make_dataset):
        """K beyond the dense guard is refused."""
        freqs = FrequencySet.zeros(2001, 1)
        with pytest.raises(OracleGuardError):
            dense_solve(freqs, make_dataset(5, 1, rng), 0.1)

    def test_satisfies_normal_equations(self, rng, make_instance):
        """The dense solution zeroes the gradient."""
        freqs, dataset = make_instance(6, 30, 2, rng)
        beta = dense_solve(freqs, dataset, 0.05).amplitudes
        gradient = objective_gradient(freqs, dataset, 0.05, 0.0, beta)
        assert np.linalg.norm(gradient) <= 1e-10


class TestObjectiveGradient:
    """Tests for the real-coordinate gradient."""

    @pytest.mark.parametrize("lambda2", [0.0, 0.3])
    def test_matches_central_differences(self, lambda2, rng, make_instance):
        """The analytic gradient matches central differences."""
        freqs, dataset = make_instance(4, 25, 2, rng)
        beta = rng.normal(4) + 1j * rng.normal(4)
        gradient = objective_gradient(freqs, dataset, 0.2, lambda2, beta)
        h = 1e-6
        numeric = np.empty(8)
        for i in range(8):
            step = np.zeros(4, dtype=np.complex128)
            step[i % 4] = h if i < 4 else 1j * h
            upper = objective(freqs, dataset, 0.2, lambda2, beta + step)
            lower = objective(freqs, dataset, 0.2, lambda2, beta - step)
            numeric[i] = (upper - lower) / (2 * h)
        scale = max(1.0, float(np.linalg.norm(gradient)))
        assert np.max(np.abs(numeric - gradient)) <= 1e-6 * scale


class TestNewtonSolve:
    """Tests for the quartic-penalty solve."""

    @pytest.mark.parametrize("lambda2", [1e-3, 1.0])
    def test_reaches_stationary_point(self, lambda2, make_instance):
        """Newton reaches gradient 1e-8 and improves on the lambda2 = 0 start."""
        stream = RngStream(23)
        for trial in range(20):
            rng = stream.spawn(trial)
            K, J, d = _size(rng, 1, 20), _size(rng, 20, 100), _size(rng, 1, 3)
            freqs, dataset = make_instance(K, J, d, rng)
            cfg = SolverConfig(lambda1=0.1, lambda2=lambda2, cg_rel_tol=1e-10)
            result = newton_solve(freqs, dataset, cfg)
            assert result.method == "newton"
            assert result.residual <= 1e-8
            start = cg_solve(
                freqs, dataset, cfg.model_copy(update={"lambda2": 0.0})
            ).amplitudes
            assert objective(
                freqs, dataset, 0.1, lambda2, result.amplitudes
            ) <= objective(freqs, dataset, 0.1, lambda2, start) * (1 + 1e-12)

    @pytest.mark.parametrize("lambda1,lambda2", [(0.1, 0.5), (1e-3, 2.0)])
    def test_single_frequency_closed_form(self, lambda1, lambda2, rng):
        """For K = 1 the amplitude solves (1+l1) t + 2 l2 t^3 = |c|."""
        freqs = FrequencySet.continuous([[0.7]])
        inputs = rng.normal((50, 1))
        targets = 2.0 * np.exp(0.7j * inputs[:, 0]) + 0.3 * rng.normal(50)
        dataset = Dataset(inputs=inputs, targets=targets)
        c = apply_adjoint(freqs, inputs, targets)[0] / dataset.size
        roots = np.roots([2 * lambda2, 0.0, 1 + lambda1, -abs(c)])
        t = next(r.real for r in roots if abs(r.imag) < 1e-12 and r.real > 0)
        expected = c * t / abs(c)
        result = newton_solve(
            freqs, dataset, SolverConfig(lambda1=lambda1, lambda2=lambda2)
        )
        assert abs(result.amplitudes[0] - expected) <= 1e-8

    def test_rejects_zero_lambda2(self, rng, make_instance):
        """newton_solve needs a quartic penalty."""
        freqs, dataset = make_instance(2, 10, 1, rng)
        with pytest.raises(ArffValidationError):
            newton_solve(freqs, dataset, SolverConfig(lambda1=0.1))


class TestSolve:
    """Tests for solver dispatch."""

    def test_dispatch(self, rng, make_instance):
        """lambda2 selects the method."""
        freqs, dataset = make_instance(3, 20, 1, rng)
        assert solve(freqs, dataset, SolverConfig(lambda1=0.1)).method == "cg"
        quartic = SolverConfig(lambda1=0.1, lambda2=0.1)
        assert solve(freqs, dataset, quartic).method == "newton"
