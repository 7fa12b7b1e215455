"""Model evaluation and error metrics shared by all modules."""

import logging
from typing import Iterator

import numpy as np

from .exceptions import ArffValidationError, ZeroSignalError
from .models import Dataset, RffModel
from .rng import RngStream

logger = logging.getLogger(__name__)

# Upper bound on the number of design-matrix entries held at once.
BLOCK_ENTRIES = 1 << 20

__all__ = [
    "RngStream",
    "as_points",
    "row_blocks",
    "evaluate_model",
    "relative_l2_error",
    "noise_to_signal_ratio",
]


def as_points(points, dimension: int) -> np.ndarray:
    """Coerce points to a (J, d) float array and check the dimension.

    Raises:
        ArffValidationError: If the point dimension is not ``dimension``.
    """
    array = np.asarray(points, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(1, -1)
    if array.ndim != 2 or array.shape[1] != dimension:
        raise ArffValidationError(
            f"points must have dimension {dimension}, got shape {array.shape}"
        )
    return array


def row_blocks(rows: int, columns: int) -> Iterator[slice]:
    """Fixed row slices so a (rows, columns) matrix is never held whole."""
    step = max(1, BLOCK_ENTRIES // max(columns, 1))
    for start in range(0, rows, step):
        yield slice(start, min(start + step, rows))


def evaluate_model(model: RffModel, points) -> np.ndarray:
    """Evaluate sum_k beta_k exp(i nu_k . x_j) at every point.

    Args:
        model: Frequencies and amplitudes.
        points: (J, d) array or a single d-vector.

    Returns:
        Complex array of length J.

    Raises:
        ArffValidationError: On a dimension mismatch.
    """
    x = as_points(points, model.dimension)
    omega = model.frequencies.coordinates
    output = np.empty(x.shape[0], dtype=np.complex128)
    for block in row_blocks(x.shape[0], model.size):
        output[block] = np.exp(1j * (x[block] @ omega.T)) @ model.amplitudes
    return output


def relative_l2_error(predicted, truth) -> float:
    """Return sum |truth - predicted|^2 / sum |truth|^2.

    Raises:
        ArffValidationError: If lengths differ or are zero.
        ZeroSignalError: If ``truth`` is identically zero.
    """
    predicted = np.asarray(predicted, dtype=np.complex128).ravel()
    truth = np.asarray(truth, dtype=np.complex128).ravel()
    if predicted.shape != truth.shape or truth.size == 0:
        raise ArffValidationError("predicted and truth need equal nonzero length")
    denominator = float(np.sum(np.abs(truth) ** 2))
    if denominator == 0.0:
        raise ZeroSignalError("relative error of an all-zero reference")
    return float(np.sum(np.abs(truth - predicted) ** 2)) / denominator


def noise_to_signal_ratio(dataset: Dataset, clean) -> float:
    """Return sum |y_j - f(x_j)|^2 / sum |y_j|^2 for a noisy dataset.

    Raises:
        ArffValidationError: If ``clean`` does not match the dataset size.
        ZeroSignalError: If every target is zero.
    """
    clean = np.asarray(clean, dtype=np.complex128).ravel()
    if clean.shape[0] != dataset.size:
        raise ArffValidationError("one clean value per data point is required")
    signal = float(np.sum(np.abs(dataset.targets) ** 2))
    if signal == 0.0:
        raise ZeroSignalError("noise-to-signal ratio of all-zero targets")
    return float(np.sum(np.abs(dataset.targets - clean) ** 2)) / signal
