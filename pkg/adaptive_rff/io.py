"""Atomic CSV and JSON result files and their readers."""

import csv
import importlib.metadata
import io
import json
import logging
import os
import platform
import tempfile
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np
from tenacity import (
    before_sleep_log,
    retry,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from .exceptions import ArffValidationError
from .models import (
    DigitRecord,
    FourierCoefficientTable,
    FrequencySet,
    FrequencySnapshot,
    IterationRecord,
    LatticeSpec,
    OverallRecord,
    RffModel,
    RunHistory,
    SweepPoint,
)
from .models.target import box_indices

logger = logging.getLogger(__name__)

# Retry configuration for replacing the destination file
REPLACE_MAX_ATTEMPTS = 5
REPLACE_MIN_WAIT_SECONDS = 0.05
REPLACE_MAX_WAIT_SECONDS = 1.0

HISTORY_HEADER = (
    "iteration",
    "phase",
    "train_rel_err",
    "val_rel_err",
    "cg_iters",
    "wall_ms",
)
SWEEP_HEADER = (
    "point",
    "parameter",
    "value",
    "train_rel_err",
    "val_rel_err",
    "test_rel_err",
)
DIGIT_HEADER = (
    "iteration",
    "train_accuracy",
    "val_accuracy",
    "train_rel_err",
    "val_rel_err",
    "cg_iters",
)
OVERALL_HEADER = ("iteration", "train_accuracy", "val_accuracy")
ACCURACY_HEADER = ("split", "accuracy", "iteration")


def fmt(value: float) -> str:
    """17 significant digits, enough to read every double back exactly."""
    return format(float(value), ".17g")


@retry(
    retry=retry_if_exception_type(OSError),
    stop=stop_after_attempt(REPLACE_MAX_ATTEMPTS),
    wait=wait_exponential(
        multiplier=REPLACE_MIN_WAIT_SECONDS,
        min=REPLACE_MIN_WAIT_SECONDS,
        max=REPLACE_MAX_WAIT_SECONDS,
    ),
    before_sleep=before_sleep_log(logger, logging.WARNING),
    reraise=True,
)
def _replace(source: str, destination: Path) -> None:
    os.replace(source, destination)


def atomic_write_text(path: Path, text: str) -> Path:
    """Write ``text`` to a temporary file beside ``path`` and rename it over.

    Readers never observe a partially written file.

    Raises:
        OSError: If the file cannot be written or replaced after retries.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temporary = tempfile.mkstemp(
        prefix=f".{path.name}.", suffix=".tmp", dir=path.parent
    )
    try:
        with os.fdopen(handle, "w", encoding="utf-8", newline="") as stream:
            stream.write(text)
            stream.flush()
            os.fsync(stream.fileno())
        _replace(temporary, path)
    except BaseException:
        if os.path.exists(temporary):
            os.unlink(temporary)
        raise
    logger.debug(f"wrote {path}")
    return path


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a CSV with LF line endings through :func:`atomic_write_text`."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return atomic_write_text(path, buffer.getvalue())


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    """Return the header and the data rows of a CSV file."""
    with open(path, encoding="utf-8", newline="") as stream:
        rows = list(csv.reader(stream))
    if not rows:
        raise ArffValidationError(f"{path} is empty")
    return rows[0], rows[1:]


def _require_header(path: Path, header: list[str], expected: Sequence[str]):
    if tuple(header) != tuple(expected):
        raise ArffValidationError(f"{path}: expected header {','.join(expected)}")


# Run history


def write_history(path: Path, history: RunHistory) -> Path:
    rows = (
        (
            r.iteration,
            r.phase,
            fmt(r.train_rel_err),
            fmt(r.val_rel_err),
            r.cg_iters,
            fmt(r.wall_ms),
        )
        for r in history.records
    )
    return write_csv(path, HISTORY_HEADER, rows)


def read_history(path: Path) -> tuple[IterationRecord, ...]:
    header, rows = read_csv(path)
    _require_header(path, header, HISTORY_HEADER)
    return tuple(
        IterationRecord(
            iteration=int(row[0]),
            phase=row[1],
            train_rel_err=float(row[2]),
            val_rel_err=float(row[3]),
            cg_iters=int(row[4]),
            wall_ms=float(row[5]),
        )
        for row in rows
    )


# Frequencies and models


def _frequency_header(dimension: int, prefix: str) -> list[str]:
    return [f"{prefix}_{i}" for i in range(1, dimension + 1)]


def write_snapshot(path: Path, snapshot: FrequencySnapshot) -> Path:
    d = snapshot.coordinates.shape[1]
    header = _frequency_header(d, "omega") + ["abs_beta"]
    rows = (
        [fmt(c) for c in omega] + [fmt(b)]
        for omega, b in zip(snapshot.coordinates, snapshot.abs_beta)
    )
    return write_csv(path, header, rows)


def read_snapshot(path: Path, iteration: int) -> FrequencySnapshot:
    header, rows = read_csv(path)
    d = len(header) - 1
    _require_header(path, header, _frequency_header(d, "omega") + ["abs_beta"])
    values = np.array(rows, dtype=np.float64).reshape(-1, d + 1)
    return FrequencySnapshot(
        iteration=iteration,
        coordinates=values[:, :d],
        abs_beta=values[:, d],
    )


def write_model(path: Path, model: RffModel) -> Path:
    header = _frequency_header(model.dimension, "omega") + ["re", "im"]
    rows = (
        [fmt(c) for c in omega] + [fmt(beta.real), fmt(beta.imag)]
        for omega, beta in zip(model.frequencies.coordinates, model.amplitudes)
    )
    return write_csv(path, header, rows)


def read_model(path: Path) -> RffModel:
    """Read a model CSV; frequencies come back as a continuous set."""
    header, rows = read_csv(path)
    d = len(header) - 2
    _require_header(path, header, _frequency_header(d, "omega") + ["re", "im"])
    values = np.array(rows, dtype=np.float64).reshape(-1, d + 2)
    return RffModel(
        frequencies=FrequencySet.continuous(values[:, :d].reshape(-1, d)),
        amplitudes=values[:, d] + 1j * values[:, d + 1],
    )


def write_table(path: Path, table: FourierCoefficientTable) -> Path:
    header = _frequency_header(table.lattice.dimension, "n") + ["re", "im"]
    rows = (
        [int(i) for i in n] + [fmt(c.real), fmt(c.imag)]
        for n, c in zip(table.indices, table.coefficients)
    )
    return write_csv(path, header, rows)


def read_table(path: Path, lattice: LatticeSpec) -> FourierCoefficientTable:
    """Read a coefficient table; ``lattice`` supplies the period the CSV omits."""
    header, rows = read_csv(path)
    d = lattice.dimension
    _require_header(path, header, _frequency_header(d, "n") + ["re", "im"])
    indices = np.array([row[:d] for row in rows], dtype=np.int64).reshape(-1, d)
    coefficients = np.array(
        [complex(float(row[d]), float(row[d + 1])) for row in rows],
        dtype=np.complex128,
    )
    n_max = int(np.max(np.abs(indices))) if indices.size else 0
    if not np.array_equal(indices, box_indices(n_max, d)):
        raise ArffValidationError(f"{path}: indices do not enumerate a full box")
    return FourierCoefficientTable(
        lattice=lattice, n_max=n_max, indices=indices, coefficients=coefficients
    )


# Sweeps and classification


def write_sweep(path: Path, points: Sequence[SweepPoint]) -> Path:
    rows = (
        (
            p.point,
            p.parameter,
            fmt(p.value),
            fmt(p.train_rel_err),
            fmt(p.val_rel_err),
            "" if p.test_rel_err is None else fmt(p.test_rel_err),
        )
        for p in points
    )
    return write_csv(path, SWEEP_HEADER, rows)


def read_sweep(path: Path) -> tuple[SweepPoint, ...]:
    header, rows = read_csv(path)
    _require_header(path, header, SWEEP_HEADER)
    return tuple(
        SweepPoint(
            point=row[0],
            parameter=row[1],
            value=float(row[2]),
            train_rel_err=float(row[3]),
            val_rel_err=float(row[4]),
            test_rel_err=float(row[5]) if row[5] else None,
        )
        for row in rows
    )


def write_digit_history(path: Path, records: Sequence[DigitRecord]) -> Path:
    rows = (
        (
            r.iteration,
            fmt(r.train_accuracy),
            fmt(r.val_accuracy),
            fmt(r.train_rel_err),
            fmt(r.val_rel_err),
            r.cg_iters,
        )
        for r in records
    )
    return write_csv(path, DIGIT_HEADER, rows)


def write_overall(path: Path, records: Sequence[OverallRecord]) -> Path:
    rows = (
        (r.iteration, fmt(r.train_accuracy), fmt(r.val_accuracy)) for r in records
    )
    return write_csv(path, OVERALL_HEADER, rows)


def write_accuracy(
    path: Path, rows: Sequence[tuple[str, float, Optional[int]]]
) -> Path:
    return write_csv(
        path,
        ACCURACY_HEADER,
        ((split, fmt(acc), "" if it is None else it) for split, acc, it in rows),
    )


def read_accuracy(path: Path) -> dict[str, tuple[float, Optional[int]]]:
    header, rows = read_csv(path)
    _require_header(path, header, ACCURACY_HEADER)
    return {row[0]: (float(row[1]), int(row[2]) if row[2] else None) for row in rows}


# Metadata


def _version(distribution: str) -> str:
    try:
        return importlib.metadata.version(distribution)
    except importlib.metadata.PackageNotFoundError:
        return "unknown"


def environment_record() -> dict[str, str]:
    """Package, interpreter and platform versions for a metadata record."""
    return {
        "adaptive-rff": _version("adaptive-rff"),
        "numpy": _version("numpy"),
        "scipy": _version("scipy"),
        "pydantic": _version("pydantic"),
        "python": platform.python_version(),
        "platform": platform.platform(),
    }


def write_metadata(path: Path, record: dict[str, Any]) -> Path:
    text = json.dumps(record, indent=2, sort_keys=True) + "\n"
    return atomic_write_text(path, text)


def read_metadata(path: Path) -> dict[str, Any]:
    with open(path, encoding="utf-8") as stream:
        return json.load(stream)
