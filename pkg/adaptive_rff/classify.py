"""IDX ingestion and one-vs-all cos/sin random feature classifiers."""

import gzip
import logging
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from itertools import repeat
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .core import relative_l2_error, row_blocks
from .exceptions import (
    ArffConvergenceError,
    ArffTrainingError,
    ArffValidationError,
    IdxCountMismatchError,
    IdxFormatError,
    IdxMagicError,
    IdxTruncatedError,
    ZeroSignalError,
)
from .linalg import conjugate_gradient
from .models import (
    ClassifierConfig,
    CosSinModel,
    DigitRecord,
    FrequencySet,
    IdxImages,
    IdxLabels,
    OneVsAllResult,
    OverallRecord,
    WalkConfig,
)
from .rng import RngStream
from .sampler import random_walk_step, weighted_resample

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049
GZIP_PREFIX = b"\x1f\x8b"
PIXEL_SCALE = 255.0


# IDX streams


def _decompress(data: bytes) -> bytes:
    if data[:2] != GZIP_PREFIX:
        return data
    try:
        return gzip.decompress(data)
    except EOFError as e:
        raise IdxTruncatedError(f"gzip stream ends early: {e}") from e
    except (OSError, zlib.error) as e:
        raise IdxFormatError(f"corrupt gzip stream: {e}") from e


def _read_header(data: bytes, fields: int, magic: int) -> tuple[int, ...]:
    size = 4 * fields
    if len(data) < size:
        raise IdxTruncatedError(
            f"IDX header needs {size} bytes, stream has {len(data)}"
        )
    header = struct.unpack(f">{fields}I", data[:size])
    if header[0] != magic:
        raise IdxMagicError(
            f"IDX magic {header[0]} does not match expected {magic}", magic=header[0]
        )
    return header[1:]


def _payload(data: bytes, offset: int, expected: int) -> np.ndarray:
    available = len(data) - offset
    if available < expected:
        raise IdxTruncatedError(
            f"IDX payload has {available} bytes, header declares {expected}"
        )
    if available > expected:
        raise IdxCountMismatchError(
            f"IDX payload has {available} bytes, header declares {expected}"
        )
    return np.frombuffer(data, dtype=np.uint8, offset=offset, count=expected)


def load_idx_images(data: bytes) -> IdxImages:
    """Parse an IDX3 image stream (optionally gzip-compressed).

    Raises:
        IdxMagicError: If the magic number is not 2051.
        IdxTruncatedError: If the header or payload ends early.
        IdxCountMismatchError: If the payload is longer than declared.
    """
    data = _decompress(data)
    count, rows, cols = _read_header(data, 4, IMAGES_MAGIC)
    pixels = _payload(data, 16, count * rows * cols)
    return IdxImages(
        count=count,
        rows=rows,
        cols=cols,
        pixels=pixels.reshape(count, rows, cols) / PIXEL_SCALE,
    )


def load_idx_labels(data: bytes) -> IdxLabels:
    """Parse an IDX1 label stream (optionally gzip-compressed).

    Raises:
        IdxMagicError: If the magic number is not 2049.
        IdxTruncatedError: If the header or payload ends early.
        IdxCountMismatchError: If the payload is longer than declared.
        IdxFormatError: If a label lies outside 0..9.
    """
    data = _decompress(data)
    (count,) = _read_header(data, 2, LABELS_MAGIC)
    labels = _payload(data, 8, count)
    if np.any(labels > 9):
        raise IdxFormatError("IDX labels must lie in 0..9")
    return IdxLabels(count=count, labels=labels)


def read_idx_images(path: Path) -> IdxImages:
    return load_idx_images(Path(path).read_bytes())


def read_idx_labels(path: Path) -> IdxLabels:
    return load_idx_labels(Path(path).read_bytes())


def dump_idx_images(images: IdxImages) -> bytes:
    """Serialize images as an uncompressed IDX3 stream."""
    raw = np.rint(np.asarray(images.pixels) * PIXEL_SCALE).astype(np.uint8)
    header = struct.pack(">4I", IMAGES_MAGIC, images.count, images.rows, images.cols)
    return header + raw.tobytes()


def dump_idx_labels(labels: IdxLabels) -> bytes:
    """Serialize labels as an uncompressed IDX1 stream."""
    header = struct.pack(">2I", LABELS_MAGIC, labels.count)
    return header + np.asarray(labels.labels, dtype=np.uint8).tobytes()


def split_labeled(
    images: IdxImages,
    labels: IdxLabels,
    validation_fraction: float,
    rng: RngStream,
) -> tuple[tuple[IdxImages, IdxLabels], tuple[IdxImages, IdxLabels]]:
    """Seeded (train, validation) partition of a labeled image set."""
    if images.count != labels.count:
        raise ArffValidationError("image and label counts differ")
    if not 0.0 < validation_fraction < 1.0 or images.count < 2:
        raise ArffValidationError("need 0 < validation_fraction < 1 and two images")
    n_val = int(round(validation_fraction * images.count))
    n_val = min(max(n_val, 1), images.count - 1)
    order = rng.permutation(images.count)
    train, val = np.sort(order[n_val:]), np.sort(order[:n_val])
    return (
        (images.subset(train), labels.subset(train)),
        (images.subset(val), labels.subset(val)),
    )


def select_digits(
    images: IdxImages, labels: IdxLabels, digits: Sequence[int]
) -> tuple[IdxImages, IdxLabels]:
    """Keep only the images whose label is one of ``digits``."""
    keep = np.flatnonzero(np.isin(labels.labels, list(digits)))
    return images.subset(keep), labels.subset(keep)


# cos/sin networks


def cos_sin_features(frequencies: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """Real feature matrix [cos(X W^T), sin(X W^T)] of shape (J, 2K)."""
    J, K = inputs.shape[0], frequencies.shape[0]
    features = np.empty((J, 2 * K))
    for block in row_blocks(J, K):
        phases = inputs[block] @ frequencies.T
        features[block, :K] = np.cos(phases)
        features[block, K:] = np.sin(phases)
    return features


def evaluate_cos_sin(model: CosSinModel, inputs) -> np.ndarray:
    """Network output sum_k b_k cos(w_k . x) + c_k sin(w_k . x)."""
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if x.shape[1] != model.dimension:
        raise ArffValidationError(
            f"inputs must have dimension {model.dimension}, got {x.shape[1]}"
        )
    weights = np.concatenate([model.cos_weights, model.sin_weights])
    return cos_sin_features(model.frequencies, x) @ weights


class CosSinFit(NamedTuple):
    weights: np.ndarray
    iterations: int
    residual: float


def solve_cos_sin(
    features: np.ndarray,
    targets: np.ndarray,
    lambda1: float,
    rel_tol: float,
    max_iters: int,
) -> CosSinFit:
    """Solve (Phi^T Phi / J + lambda1 I) w = Phi^T y / J for the 2K real weights.

    Raises:
        ArffConvergenceError: If CG misses the tolerance.
    """
    J = features.shape[0]
    rhs = features.T @ targets / J

    def normal(v):
        return features.T @ (features @ v) / J + lambda1 * v

    outcome = conjugate_gradient(normal, rhs, rel_tol, max_iters)
    if not outcome.converged:
        raise ArffConvergenceError(
            f"cos/sin CG did not reach {rel_tol:g} in {outcome.iterations} iterations",
            iterations=outcome.iterations,
            residual=outcome.residual,
        )
    return CosSinFit(outcome.solution, outcome.iterations, outcome.residual)


class _Split(NamedTuple):
    train_x: np.ndarray
    train_labels: IdxLabels
    val_x: np.ndarray
    val_labels: IdxLabels


class _Network:
    """Frequencies, stream and latest fit of the network for one digit."""

    def __init__(
        self,
        digit: int,
        config: ClassifierConfig,
        data: _Split,
        rng: RngStream,
    ):
        self.digit = digit
        self.config = config
        self.data = data
        self.train_y = _one_vs_all_targets(data.train_labels, digit)
        self.val_y = _one_vs_all_targets(data.val_labels, digit)
        self.rng = rng
        self.walk = WalkConfig(delta=config.delta)
        self.freqs = FrequencySet.zeros(config.K, data.train_x.shape[1])
        self.model: Optional[CosSinModel] = None
        self.train_output: Optional[np.ndarray] = None
        self.val_output: Optional[np.ndarray] = None
        self.records: list[DigitRecord] = []

    def step(self, iteration: int) -> "_Network":
        """Walk, solve and record; resampling happens in :meth:`resample`."""
        cfg = self.config
        train_x, train_y = self.data.train_x, self.train_y
        val_x, val_y = self.data.val_x, self.val_y
        self.freqs = random_walk_step(self.freqs, self.walk, self.rng)
        features = cos_sin_features(self.freqs.coordinates, train_x)
        try:
            fit = solve_cos_sin(
                features, train_y, cfg.lambda1, cfg.cg_rel_tol, cfg.cg_max_iters
            )
        except ArffConvergenceError as e:
            raise ArffTrainingError(
                f"digit {self.digit}: solve failed at iteration {iteration}: {e}",
                iteration=iteration,
                iterations=e.iterations,
                residual=e.residual,
            ) from e
        K = cfg.K
        self.model = CosSinModel(
            frequencies=self.freqs.coordinates,
            cos_weights=fit.weights[:K],
            sin_weights=fit.weights[K:],
        )
        self.train_output = features @ fit.weights
        self.val_output = evaluate_cos_sin(self.model, val_x)
        self.records.append(
            DigitRecord(
                digit=self.digit,
                iteration=iteration,
                train_accuracy=_binary_accuracy(self.train_output, train_y),
                val_accuracy=_binary_accuracy(self.val_output, val_y),
                train_rel_err=relative_l2_error(self.train_output, train_y),
                val_rel_err=relative_l2_error(self.val_output, val_y),
                cg_iters=fit.iterations,
            )
        )
        return self

    def resample(self):
        """Resample with weights ||(b_k, c_k)||_2."""
        weights = np.hypot(self.model.cos_weights, self.model.sin_weights)
        self.freqs = weighted_resample(self.freqs, weights, self.config.K, self.rng)


def _binary_accuracy(output: np.ndarray, targets: np.ndarray) -> float:
    return float(np.mean((output > 0.5) == (targets > 0.5)))


def _one_vs_all_targets(labels: IdxLabels, digit: int) -> np.ndarray:
    targets = (np.asarray(labels.labels) == digit).astype(np.float64)
    if not targets.any():
        raise ArffValidationError(f"digit {digit} has no examples")
    return targets


def train_one_vs_all(
    train: tuple[IdxImages, IdxLabels],
    val: tuple[IdxImages, IdxLabels],
    config: ClassifierConfig,
) -> OneVsAllResult:
    """Train one cos/sin network per digit with the continuous walk.

    Networks advance in lockstep so the weights of all of them can be kept
    at the iteration with the best overall validation accuracy. Each digit
    owns its frequencies and a stream spawned from the seed by digit.

    Raises:
        ArffValidationError: If a digit has no training or validation example.
        ArffTrainingError: If a solve fails.
    """
    train_images, train_labels = train
    val_images, val_labels = val
    if train_images.count != train_labels.count or val_images.count != val_labels.count:
        raise ArffValidationError("image and label counts differ")
    digits = tuple(sorted(config.digits))
    data = _Split(train_images.flat, train_labels, val_images.flat, val_labels)

    root = RngStream(config.seed)
    networks = [_Network(digit, config, data, root.spawn(digit)) for digit in digits]
    logger.info(
        f"one-vs-all: digits={digits}, K={config.K}, N={config.iterations}, "
        f"train={train_images.count}, val={val_images.count}, jobs={config.jobs}"
    )

    best_models: tuple[CosSinModel, ...] = ()
    best_iteration, best_accuracy = 0, -1.0
    overall: list[OverallRecord] = []
    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        for n in range(1, config.iterations + 1):
            list(pool.map(_Network.step, networks, repeat(n)))
            train_acc = _argmax_accuracy(
                [net.train_output for net in networks], digits, train_labels
            )
            val_acc = _argmax_accuracy(
                [net.val_output for net in networks], digits, val_labels
            )
            overall.append(
                OverallRecord(
                    iteration=n, train_accuracy=train_acc, val_accuracy=val_acc
                )
            )
            if val_acc > best_accuracy:
                best_iteration, best_accuracy = n, val_acc
                best_models = tuple(net.model for net in networks)
            if n == 1 or n % max(1, config.iterations // 20) == 0:
                logger.info(
                    f"iteration {n}: train accuracy {train_acc:.4f}, "
                    f"val accuracy {val_acc:.4f}"
                )
            for net in networks:
                net.resample()

    logger.info(
        f"best validation accuracy {best_accuracy:.4f} at iteration {best_iteration}"
    )
    return OneVsAllResult(
        digits=digits,
        models=best_models,
        best_iteration=best_iteration,
        best_val_accuracy=best_accuracy,
        digit_histories={net.digit: tuple(net.records) for net in networks},
        overall_history=tuple(overall),
    )


def _argmax_digits(outputs: np.ndarray, digits: Sequence[int]) -> np.ndarray:
    """Row-wise argmax over networks; ties go to the smallest digit."""
    order = np.argsort(np.asarray(digits), kind="stable")
    ranked = outputs[:, order]
    return np.asarray(digits)[order][np.argmax(ranked, axis=1)]


def _argmax_accuracy(outputs: list, digits: Sequence[int], labels: IdxLabels) -> float:
    predicted = _argmax_digits(np.column_stack(outputs), digits)
    return float(np.mean(predicted == np.asarray(labels.labels)))


def _resolve_digits(models: Sequence[CosSinModel], digits) -> tuple[int, ...]:
    if digits is None:
        digits = tuple(range(len(models)))
    if len(digits) != len(models) or not models:
        raise ArffValidationError("need one digit per model")
    return tuple(digits)


def predict_batch(
    models: Sequence[CosSinModel], inputs, digits: Optional[Sequence[int]] = None
) -> np.ndarray:
    """Digit with the highest network output for every row of ``inputs``."""
    digits = _resolve_digits(models, digits)
    outputs = np.column_stack([evaluate_cos_sin(model, inputs) for model in models])
    return _argmax_digits(outputs, digits)


def predict(
    models: Sequence[CosSinModel], image, digits: Optional[Sequence[int]] = None
) -> int:
    """Digit whose network produces the highest output for one image.

    ``digits`` labels the models and defaults to 0, 1, ...; ties go to the
    smallest digit.
    """
    x = np.asarray(image, dtype=np.float64).reshape(1, -1)
    return int(predict_batch(models, x, digits)[0])


def accuracy(
    models: Sequence[CosSinModel],
    images: IdxImages,
    labels: IdxLabels,
    digits: Optional[Sequence[int]] = None,
) -> float:
    """Fraction of images classified correctly.

    Raises:
        ZeroSignalError: If the set is empty.
        ArffValidationError: If image and label counts differ.
    """
    if images.count != labels.count:
        raise ArffValidationError("image and label counts differ")
    if images.count == 0:
        raise ZeroSignalError("accuracy of an empty set")
    predicted = predict_batch(models, images.flat, digits)
    return float(np.mean(predicted == np.asarray(labels.labels)))
