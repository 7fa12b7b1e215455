"""Synthetic targets, datasets and the Fourier-coefficient oracle."""

import logging
import math
from typing import NamedTuple, Optional

import numpy as np
import scipy.special

from .core import as_points, evaluate_model
from .exceptions import (
    ArffValidationError,
    OracleGuardError,
    SupportError,
    ZeroSignalError,
)
from .models import (
    BaseDistribution,
    Dataset,
    FourierCoefficientTable,
    FrequencySet,
    ParsevalReport,
    RffModel,
    TabulatedDistribution,
    TargetSpec,
)
from .models.target import box_indices
from .rng import RngStream
from .sampler import multinomial_resample

logger = logging.getLogger(__name__)

ORACLE_MAX_DIMENSION = 3
ORACLE_MAX_GRID_POINTS = 1 << 24
DEFAULT_GRID_POINTS = 64


class PopulationFit(NamedTuple):
    """Exact J = infinity least-squares fit on a lattice."""

    amplitudes: np.ndarray
    objective: float


def periodize(points: np.ndarray, period: float) -> np.ndarray:
    """Wrap every coordinate into [-q/2, q/2)."""
    return points - period * np.floor(points / period + 0.5)


def evaluate_target(spec: TargetSpec, points):
    """Evaluate the target at one point (returns a float) or at (J, d) points.

    Raises:
        ArffValidationError: If the point dimension differs from the target's.
    """
    single = np.ndim(points) == 1
    x = as_points(points, spec.dimension)
    if spec.period is not None:
        x = periodize(x, spec.period)

    if spec.kind == "spectrum":
        lattice = spec.lattice
        indices = np.array([term.index for term in spec.spectrum], dtype=np.int64)
        coefficients = np.array([term.value for term in spec.spectrum])
        phases = x @ lattice.to_coordinates(indices).T
        values = (np.exp(1j * phases) @ coefficients).real
    else:
        projection = x @ np.asarray(spec.direction)
        envelope = np.exp(-0.5 * np.sum(x * x, axis=1))
        if spec.kind == "bump":
            values = np.exp(-np.abs(projection) / spec.sharpness) * envelope
        else:
            si, _ = scipy.special.sici(projection / spec.sharpness)
            values = si * envelope

    return float(values[0]) if single else values


def sample_dataset(
    spec: TargetSpec, J: int, d: int, noise_std: float, rng: RngStream
) -> Dataset:
    """Draw x_j ~ N(0, I_d) and y_j = f(x_j) + xi_j with xi_j ~ N(0, s^2).

    Inputs are drawn first, then the noise, from the same stream.
    """
    if J < 1:
        raise ArffValidationError("a dataset needs J >= 1")
    if d != spec.dimension:
        raise ArffValidationError(
            f"target has dimension {spec.dimension}, requested d={d}"
        )
    if noise_std < 0:
        raise ArffValidationError("noise_std must be nonnegative")
    inputs = rng.normal((J, d))
    targets = evaluate_target(spec, inputs)
    if noise_std > 0:
        targets = targets + noise_std * rng.normal(J)
    return Dataset(inputs=inputs, targets=targets, noise_std=noise_std)


def sample_test_set(spec: TargetSpec, size: int, rng: RngStream) -> Dataset:
    """Noise-free held-out points drawn like the training inputs."""
    return sample_dataset(spec, size, spec.dimension, 0.0, rng)


def _check_oracle(spec: TargetSpec, n_max: int, grid: int):
    if spec.period is None:
        raise OracleGuardError("the Fourier oracle needs a periodized target")
    if spec.dimension > ORACLE_MAX_DIMENSION:
        raise OracleGuardError(
            f"the Fourier oracle supports d <= {ORACLE_MAX_DIMENSION}, "
            f"got d={spec.dimension}"
        )
    if n_max < 0:
        raise OracleGuardError("n_max must be nonnegative")
    if grid < max(4 * n_max, 1):
        raise OracleGuardError(
            f"grid_points_per_dim={grid} is below 4 * n_max = {4 * n_max}"
        )
    if grid**spec.dimension > ORACLE_MAX_GRID_POINTS:
        raise OracleGuardError(
            f"{grid}^{spec.dimension} grid points exceed the oracle limit"
        )


def torus_grid(spec: TargetSpec, grid: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform points -L + m q/M per axis and target samples on their product.

    Returns the 1-D axis and the samples shaped (M,) * d.
    """
    half = spec.period / 2.0
    axis = -half + spec.period * np.arange(grid) / grid
    mesh = np.meshgrid(*([axis] * spec.dimension), indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    samples = evaluate_target(spec, points).reshape((grid,) * spec.dimension)
    return axis, samples


def default_grid(n_max: int) -> int:
    return max(4 * n_max, DEFAULT_GRID_POINTS)


def compute_fourier_table(
    spec: TargetSpec, n_max: int, grid_points_per_dim: Optional[int] = None
) -> FourierCoefficientTable:
    """Trapezoidal coefficients f_hat(w_n) for every |n_i| <= n_max.

    The rule is applied as a direct transform along each axis in turn, so a
    d-dimensional table costs d matrix products on the sample grid.

    Raises:
        OracleGuardError: If the target is not periodized, d > 3, or the grid
            is coarser than 4 * n_max points per axis.
    """
    grid = default_grid(n_max) if grid_points_per_dim is None else grid_points_per_dim
    _check_oracle(spec, n_max, grid)
    lattice = spec.lattice
    axis, samples = torus_grid(spec, grid)

    modes = np.arange(-n_max, n_max + 1)
    kernel = np.exp(-1j * lattice.spacing * np.outer(modes, axis)) / grid
    coefficients = samples.astype(np.complex128)
    for dim in range(spec.dimension):
        coefficients = np.moveaxis(
            np.tensordot(kernel, coefficients, axes=(1, dim)), 0, dim
        )

    logger.debug(
        f"Fourier table: d={spec.dimension}, n_max={n_max}, grid={grid}"
    )
    return FourierCoefficientTable(
        lattice=lattice,
        n_max=n_max,
        indices=box_indices(n_max, spec.dimension),
        coefficients=coefficients.ravel(),
    )


def _table_positions(
    table: FourierCoefficientTable, indices: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Flat table positions of lattice indices and a mask of those in the box."""
    indices = np.atleast_2d(np.asarray(indices, dtype=np.int64))
    inside = np.all(np.abs(indices) <= table.n_max, axis=1)
    width = 2 * table.n_max + 1
    flat = np.zeros(indices.shape[0], dtype=np.int64)
    for component in range(indices.shape[1]):
        flat = flat * width + indices[:, component] + table.n_max
    return np.where(inside, flat, 0), inside


def coefficients_at(table: FourierCoefficientTable, indices) -> np.ndarray:
    """f_hat at arbitrary lattice indices; zero outside the truncation box."""
    flat, inside = _table_positions(table, indices)
    return np.where(inside, table.coefficients[flat], 0.0)


def _require_tabulated(
    table: FourierCoefficientTable, p: BaseDistribution
) -> TabulatedDistribution:
    if not isinstance(p, TabulatedDistribution):
        raise ArffValidationError("rate constants need a tabulated distribution")
    if p.lattice != table.lattice:
        raise ArffValidationError("distribution and table use different lattices")
    return p


def _probabilities_on_table(
    table: FourierCoefficientTable, p: TabulatedDistribution
) -> np.ndarray:
    """p aligned with the table's index order; zero where p has no atom."""
    if np.array_equal(p.indices, table.indices):
        return np.asarray(p.probabilities)
    flat, inside = _table_positions(table, p.indices)
    aligned = np.zeros(table.size)
    np.add.at(aligned, flat[inside], p.probabilities[inside])
    return aligned


def optimal_distribution(table: FourierCoefficientTable) -> TabulatedDistribution:
    """p*(w_n) = |f_hat(w_n)| / sum_m |f_hat(w_m)| over the truncated lattice.

    Raises:
        ZeroSignalError: If every coefficient is zero.
    """
    magnitudes = np.abs(table.coefficients)
    total = math.fsum(magnitudes)
    if total == 0.0:
        raise ZeroSignalError("optimal distribution of an all-zero table")
    return TabulatedDistribution(
        lattice=table.lattice,
        indices=table.indices,
        probabilities=magnitudes / total,
    )


def _weighted_support_sum(
    table: FourierCoefficientTable, p: BaseDistribution, power: int
) -> float:
    p = _require_tabulated(table, p)
    probabilities = _probabilities_on_table(table, p)
    magnitudes = np.abs(table.coefficients)
    nonzero = magnitudes > 0.0
    missing = nonzero & (probabilities <= 0.0)
    if np.any(missing):
        first = tuple(int(i) for i in table.indices[np.argmax(missing)])
        raise SupportError(
            f"p vanishes at {int(missing.sum())} nonzero coefficient(s), "
            f"first at n={first}"
        )
    terms = magnitudes[nonzero] ** (2 * power) / probabilities[nonzero] ** (
        2 * power - 1
    )
    return math.fsum(terms)


def rate_constant(table: FourierCoefficientTable, p: BaseDistribution) -> float:
    """C_p = sum_n |f_hat(w_n)|^2 / p(w_n).

    Raises:
        SupportError: If p is zero where f_hat is not (C_p is infinite).
    """
    return _weighted_support_sum(table, p, 1)


def rate_constant_prime(table: FourierCoefficientTable, p: BaseDistribution) -> float:
    """C'_p = sum_n |f_hat(w_n)|^4 / p(w_n)^3, the noisy-data companion of C_p."""
    return _weighted_support_sum(table, p, 2)


def sample_base(dist: BaseDistribution, count: int, rng: RngStream) -> FrequencySet:
    """Draw ``count`` independent frequencies from a base distribution."""
    if count < 1:
        raise ArffValidationError("count must be at least 1")
    if dist.kind == "standard_normal":
        return FrequencySet.continuous(dist.scale * rng.normal((count, dist.dimension)))
    if dist.kind == "lattice_normal":
        draws = dist.scale * rng.normal((count, dist.dimension))
        return FrequencySet.on_lattice(dist.lattice.to_indices(draws), dist.lattice)
    positions = multinomial_resample(dist.probabilities, count, rng)
    return FrequencySet.on_lattice(dist.indices[positions], dist.lattice)


def reconstruct(table: FourierCoefficientTable, points) -> np.ndarray:
    """Truncated Fourier series sum_n f_hat(w_n) exp(i w_n . x)."""
    model = RffModel(frequencies=table.frequencies(), amplitudes=table.coefficients)
    return evaluate_model(model, points)


def parseval_check(
    table: FourierCoefficientTable,
    spec: TargetSpec,
    grid_points_per_dim: Optional[int] = None,
) -> ParsevalReport:
    """Compare sum |f_hat|^2 with the torus mean of |f|^2 on a uniform grid."""
    grid = (
        default_grid(table.n_max)
        if grid_points_per_dim is None
        else grid_points_per_dim
    )
    _check_oracle(spec, table.n_max, grid)
    _, samples = torus_grid(spec, grid)
    return ParsevalReport(
        coefficient_energy=math.fsum(np.abs(table.coefficients) ** 2),
        mean_square=float(np.mean(samples**2)),
        grid_points_per_dim=grid,
    )


def monte_carlo_estimate(
    table: FourierCoefficientTable,
    p: TabulatedDistribution,
    K: int,
    points,
    rng: RngStream,
) -> np.ndarray:
    """zeta(x) = sum_k f_hat(nu_k) / (K p(nu_k)) exp(i nu_k . x) with nu_k ~ p."""
    p = _require_tabulated(table, p)
    positions = multinomial_resample(p.probabilities, K, rng)
    atoms = p.indices[positions]
    weights = coefficients_at(table, atoms) / (K * p.probabilities[positions])
    model = RffModel(
        frequencies=FrequencySet.on_lattice(atoms, p.lattice), amplitudes=weights
    )
    return evaluate_model(model, points)


def monte_carlo_variance(
    table: FourierCoefficientTable, p: TabulatedDistribution, K: int, points
) -> np.ndarray:
    """Exact variance K^-1 (sum |f_hat|^2 / p - |E zeta(x)|^2) of the estimator."""
    p = _require_tabulated(table, p)
    support = p.probabilities > 0.0
    atoms = p.indices[support]
    coefficients = coefficients_at(table, atoms)
    second_moment = math.fsum(np.abs(coefficients) ** 2 / p.probabilities[support])
    mean = evaluate_model(
        RffModel(
            frequencies=FrequencySet.on_lattice(atoms, p.lattice),
            amplitudes=coefficients,
        ),
        points,
    )
    return (second_moment - np.abs(mean) ** 2) / K


def population_fit(
    table: FourierCoefficientTable, freqs: FrequencySet, lam: float
) -> PopulationFit:
    """Minimize E|beta - f|^2 + lam ||beta_hat||^2 exactly over the torus.

    Lattice exponentials are orthonormal, so a frequency sampled m times gets
    amplitude f_hat / (m + lam) on every copy and the minimum is
    sum_unsampled |f_hat|^2 + sum_sampled |f_hat|^2 lam / (m + lam).
    """
    if not freqs.is_lattice or freqs.lattice != table.lattice:
        raise ArffValidationError(
            "population_fit needs frequencies on the table lattice"
        )
    if lam < 0:
        raise ArffValidationError("lam must be nonnegative")
    _, first, inverse, counts = np.unique(
        freqs.indices,
        axis=0,
        return_index=True,
        return_inverse=True,
        return_counts=True,
    )
    inverse = inverse.ravel()
    distinct = coefficients_at(table, freqs.indices[first])
    amplitudes = (distinct / (counts + lam))[inverse]

    energy = np.abs(table.coefficients) ** 2
    flat, inside = _table_positions(table, freqs.indices[first])
    sampled = np.zeros(table.size, dtype=bool)
    sampled[flat[inside]] = True
    kept = np.abs(distinct) ** 2 * lam / (counts + lam)
    objective = math.fsum(energy[~sampled]) + math.fsum(kept)
    return PopulationFit(amplitudes=amplitudes, objective=objective)


def orthogonal_direction(direction) -> np.ndarray:
    """Unit vector orthogonal to v: +pi/2 rotation in 2-D, Gram-Schmidt above."""
    v = np.asarray(direction, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if v.ndim != 1 or v.size < 2 or norm == 0.0:
        raise ArffValidationError("need a nonzero direction with d >= 2")
    v = v / norm
    if v.size == 2:
        return np.array([-v[1], v[0]])
    for axis in range(v.size):
        candidate = -v[axis] * v
        candidate[axis] += 1.0
        length = float(np.linalg.norm(candidate))
        if length > 1e-8:
            return candidate / length
    raise ArffValidationError("no orthogonal complement found")  # pragma: no cover
