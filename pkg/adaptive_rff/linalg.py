"""Matrix-free regularized least squares for random Fourier features.

The data-fit term is scaled by 1/J inside the operator, so for design matrix
A (A_jk = exp(i nu_k . x_j)) the normal equations read

    (A^* A / J + lambda1 I) beta = A^* y / J.

``cg_solve`` handles lambda2 = 0, ``newton_solve`` the quartic penalty
lambda2 * ||beta||^4, and ``dense_solve`` is a small-K direct oracle.
"""

import logging
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg

from .core import as_points, row_blocks
from .exceptions import (
    ArffConvergenceError,
    ArffFactorizationError,
    ArffSolverError,
    ArffValidationError,
    OracleGuardError,
)
from .models import Dataset, FrequencySet, SolverConfig, SolveResult

logger = logging.getLogger(__name__)

DENSE_MAX_K = 2000

# Relative slack when comparing objectives that agree up to roundoff.
OBJECTIVE_SLACK = 8 * np.finfo(np.float64).eps


class CGOutcome(NamedTuple):
    solution: np.ndarray
    iterations: int
    residual: float
    converged: bool
    restarts: int


class DesignOperator:
    """Applies A, A^* and A^* A block by block without storing A."""

    def __init__(self, freqs: FrequencySet, inputs):
        self.omega = freqs.coordinates
        self.x = as_points(inputs, freqs.dimension)

    @property
    def shape(self) -> tuple[int, int]:
        return self.x.shape[0], self.omega.shape[0]

    def _blocks(self):
        for block in row_blocks(*self.shape):
            yield block, np.exp(1j * (self.x[block] @ self.omega.T))

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = np.empty(self.shape[0], dtype=np.complex128)
        for block, design in self._blocks():
            out[block] = design @ v
        return out

    def rmatvec(self, r: np.ndarray) -> np.ndarray:
        out = np.zeros(self.shape[1], dtype=np.complex128)
        for block, design in self._blocks():
            out += design.conj().T @ r[block]
        return out

    def gram_matvec(self, v: np.ndarray) -> np.ndarray:
        """A^* A v in one pass over the blocks."""
        out = np.zeros(self.shape[1], dtype=np.complex128)
        for _, design in self._blocks():
            out += design.conj().T @ (design @ v)
        return out

    def dense(self) -> np.ndarray:
        return np.exp(1j * (self.x @ self.omega.T))


def _check_length(vector: np.ndarray, expected: int, name: str):
    if vector.ndim != 1 or vector.shape[0] != expected:
        raise ArffValidationError(
            f"{name} must have length {expected}, got shape {vector.shape}"
        )


def apply_design(freqs: FrequencySet, inputs, v) -> np.ndarray:
    """Return A v, i.e. sum_k v_k exp(i nu_k . x_j) for every input x_j."""
    op = DesignOperator(freqs, inputs)
    v = np.asarray(v, dtype=np.complex128)
    _check_length(v, op.shape[1], "v")
    return op.matvec(v)


def apply_adjoint(freqs: FrequencySet, inputs, r) -> np.ndarray:
    """Return A^* r, i.e. sum_j conj(exp(i nu_k . x_j)) r_j for every k."""
    op = DesignOperator(freqs, inputs)
    r = np.asarray(r, dtype=np.complex128)
    _check_length(r, op.shape[0], "r")
    return op.rmatvec(r)


def conjugate_gradient(
    apply: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    rel_tol: float,
    max_iters: int,
    restart: bool = True,
) -> CGOutcome:
    """Conjugate gradient for a symmetric positive definite operator.

    Works on real or complex vectors; inner products use the real part of
    ``vdot`` so real-linear operators on C^K (seen as R^2K) are handled too.
    Starts from zero and stops when ||r|| <= rel_tol * ||rhs||. When the
    residual norm grows the search direction is reset to the residual.

    Raises:
        ArffSolverError: If the operator is not positive definite or the
            iterates stop being finite.
    """
    rhs_norm = float(np.linalg.norm(rhs))
    x = np.zeros_like(rhs)
    if rhs_norm == 0.0:
        return CGOutcome(x, 0, 0.0, True, 0)

    r = rhs.copy()
    p = r.copy()
    rr = float(np.vdot(r, r).real)
    restarts = 0
    relative = 1.0
    for iteration in range(1, max_iters + 1):
        ap = apply(p)
        curvature = float(np.vdot(p, ap).real)
        if not np.isfinite(curvature) or curvature <= 0.0:
            raise ArffSolverError(
                "normal operator is not positive definite",
                iterations=iteration,
                residual=relative,
            )
        alpha = rr / curvature
        x = x + alpha * p
        r = r - alpha * ap
        if not np.all(np.isfinite(x)):
            raise ArffSolverError(
                "non-finite CG iterate", iterations=iteration, residual=relative
            )
        rr_new = float(np.vdot(r, r).real)
        relative = float(np.sqrt(rr_new)) / rhs_norm
        if relative <= rel_tol:
            return CGOutcome(x, iteration, relative, True, restarts)
        if restart and rr_new > rr:
            r = rhs - apply(x)
            rr_new = float(np.vdot(r, r).real)
            relative = float(np.sqrt(rr_new)) / rhs_norm
            p = r.copy()
            restarts += 1
            logger.debug(
                f"CG restart at iteration {iteration}, residual {relative:.3e}"
            )
        else:
            p = r + (rr_new / rr) * p
        rr = rr_new
    return CGOutcome(x, max_iters, relative, False, restarts)


def _require_regularized(freqs: FrequencySet, dataset: Dataset, lambda1: float):
    if lambda1 == 0.0 and freqs.size > dataset.size:
        raise ArffValidationError(
            f"K={freqs.size} exceeds J={dataset.size}; "
            "the over-parameterized problem needs lambda1 > 0"
        )


def cg_solve(freqs: FrequencySet, dataset: Dataset, cfg: SolverConfig) -> SolveResult:
    """Minimize (1/J) sum |beta(x_j) - y_j|^2 + lambda1 ||beta||^2 with CG.

    Raises:
        ArffValidationError: If lambda2 > 0 or the problem is unregularized
            with K > J.
        ArffConvergenceError: If the tolerance is not reached in
            ``cfg.cg_max_iters`` iterations.
    """
    if cfg.lambda2 != 0.0:
        raise ArffValidationError("cg_solve needs lambda2 = 0; use newton_solve")
    _require_regularized(freqs, dataset, cfg.lambda1)
    op = DesignOperator(freqs, dataset.inputs)
    J = dataset.size
    rhs = op.rmatvec(dataset.targets) / J

    def normal(v):
        return op.gram_matvec(v) / J + cfg.lambda1 * v

    outcome = conjugate_gradient(normal, rhs, cfg.cg_rel_tol, cfg.cg_max_iters)
    if not outcome.converged:
        raise ArffConvergenceError(
            f"CG did not reach {cfg.cg_rel_tol:g} in {outcome.iterations} "
            f"iterations (residual {outcome.residual:.3e})",
            iterations=outcome.iterations,
            residual=outcome.residual,
        )
    logger.debug(
        f"CG converged in {outcome.iterations} iterations "
        f"({outcome.restarts} restarts), residual {outcome.residual:.3e}"
    )
    return SolveResult(
        amplitudes=outcome.solution,
        method="cg",
        iterations=outcome.iterations,
        residual=outcome.residual,
        restarts=outcome.restarts,
    )


def dense_solve(freqs: FrequencySet, dataset: Dataset, lambda1: float) -> SolveResult:
    """Solve the normal equations by Cholesky factorization of A^*A/J + lambda1 I.

    Raises:
        OracleGuardError: If K exceeds the dense guard.
        ArffFactorizationError: If the operator is singular.
    """
    if freqs.size > DENSE_MAX_K:
        raise OracleGuardError(f"dense_solve is limited to K <= {DENSE_MAX_K}")
    op = DesignOperator(freqs, dataset.inputs)
    J = dataset.size
    design = op.dense()
    gram = design.conj().T @ design / J + lambda1 * np.eye(freqs.size)
    rhs = design.conj().T @ dataset.targets / J
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True)
    except np.linalg.LinAlgError as e:
        raise ArffFactorizationError(
            f"normal operator is singular for lambda1={lambda1:g}"
        ) from e
    amplitudes = scipy.linalg.cho_solve(factor, rhs)
    return SolveResult(
        amplitudes=amplitudes, method="dense", iterations=0, residual=0.0
    )


def objective(
    freqs: FrequencySet,
    dataset: Dataset,
    lambda1: float,
    lambda2: float,
    beta,
) -> float:
    """Value of (1/J)||A beta - y||^2 + lambda1 ||beta||^2 + lambda2 ||beta||^4."""
    beta = np.asarray(beta, dtype=np.complex128)
    residual = apply_design(freqs, dataset.inputs, beta) - dataset.targets
    norm2 = float(np.vdot(beta, beta).real)
    return (
        float(np.vdot(residual, residual).real) / dataset.size
        + lambda1 * norm2
        + lambda2 * norm2**2
    )


def _complex_gradient(
    op: DesignOperator, dataset: Dataset, lambda1: float, lambda2: float, beta
) -> np.ndarray:
    residual = op.matvec(beta) - dataset.targets
    norm2 = float(np.vdot(beta, beta).real)
    return (
        2.0 * op.rmatvec(residual) / dataset.size
        + 2.0 * lambda1 * beta
        + 4.0 * lambda2 * norm2 * beta
    )


def objective_gradient(
    freqs: FrequencySet,
    dataset: Dataset,
    lambda1: float,
    lambda2: float,
    beta,
) -> np.ndarray:
    """Gradient with respect to (Re beta, Im beta), as a real 2K vector."""
    beta = np.asarray(beta, dtype=np.complex128)
    op = DesignOperator(freqs, dataset.inputs)
    g = _complex_gradient(op, dataset, lambda1, lambda2, beta)
    return np.concatenate([g.real, g.imag])


def _initial_guess(
    freqs: FrequencySet, dataset: Dataset, cfg: SolverConfig
) -> np.ndarray:
    quadratic = cfg.model_copy(update={"lambda2": 0.0})
    try:
        return np.array(cg_solve(freqs, dataset, quadratic).amplitudes)
    except (ArffValidationError, ArffSolverError) as e:
        logger.debug(f"lambda2=0 initial guess unavailable ({e}); starting from zero")
        return np.zeros(freqs.size, dtype=np.complex128)


def newton_solve(
    freqs: FrequencySet, dataset: Dataset, cfg: SolverConfig
) -> SolveResult:
    """Minimize the lambda2 > 0 objective by damped Newton iteration.

    The Hessian is taken with respect to the real and imaginary parts of
    beta and is applied matrix-free; each Newton system is solved by CG.
    The lambda2 = 0 solution is the starting point. Steps are halved until
    the objective decreases.

    Raises:
        ArffValidationError: If lambda2 is zero.
        ArffSolverError: If no halving gives descent.
        ArffConvergenceError: If the gradient norm stays above
            ``cfg.newton_tol``.
    """
    if cfg.lambda2 <= 0.0:
        raise ArffValidationError("newton_solve needs lambda2 > 0")
    op = DesignOperator(freqs, dataset.inputs)
    J = dataset.size
    lam1, lam2 = cfg.lambda1, cfg.lambda2

    def value(beta):
        residual = op.matvec(beta) - dataset.targets
        norm2 = float(np.vdot(beta, beta).real)
        misfit = float(np.vdot(residual, residual).real) / J
        return misfit + lam1 * norm2 + lam2 * norm2**2

    beta = _initial_guess(freqs, dataset, cfg)
    current = value(beta)
    grad_norm = np.inf
    inner_total = 0
    for iteration in range(cfg.newton_max_iters + 1):
        gradient = _complex_gradient(op, dataset, lam1, lam2, beta)
        grad_norm = float(np.linalg.norm(gradient))
        if grad_norm <= cfg.newton_tol:
            logger.debug(
                f"Newton converged in {iteration} steps, gradient {grad_norm:.3e}"
            )
            return SolveResult(
                amplitudes=beta,
                method="newton",
                iterations=inner_total,
                residual=grad_norm,
            )
        if iteration == cfg.newton_max_iters:
            break

        norm2 = float(np.vdot(beta, beta).real)

        def hessian(u, beta=beta, norm2=norm2):
            radial = float(np.vdot(beta, u).real)
            return (
                2.0 * op.gram_matvec(u) / J
                + 2.0 * lam1 * u
                + 4.0 * lam2 * (norm2 * u + 2.0 * radial * beta)
            )

        forcing = min(0.1, np.sqrt(grad_norm))
        inner = conjugate_gradient(
            hessian, -gradient, max(forcing, 1e-14), cfg.cg_max_iters
        )
        inner_total += inner.iterations
        step = inner.solution

        t = 1.0
        for _ in range(cfg.max_halvings):
            candidate = beta + t * step
            trial = value(candidate)
            if trial <= current + OBJECTIVE_SLACK * abs(current):
                break
            t *= 0.5
        else:
            raise ArffSolverError(
                "Newton step gives no descent after "
                f"{cfg.max_halvings} halvings",
                iterations=iteration,
                residual=grad_norm,
            )
        if t < 1.0:
            logger.debug(f"Newton step {iteration} damped to t={t:g}")
        beta, current = candidate, trial

    raise ArffConvergenceError(
        f"Newton did not reach gradient norm {cfg.newton_tol:g} "
        f"(last {grad_norm:.3e})",
        iterations=cfg.newton_max_iters,
        residual=grad_norm,
    )


def solve(freqs: FrequencySet, dataset: Dataset, cfg: SolverConfig) -> SolveResult:
    """CG when lambda2 = 0, Newton otherwise."""
    if cfg.lambda2 == 0.0:
        return cg_solve(freqs, dataset, cfg)
    return newton_solve(freqs, dataset, cfg)
