"""Run history models for resampling runs."""

from typing import Literal, Optional

import numpy as np
from pydantic import Field, NonNegativeFloat, field_validator

from .base import ArffModel, frozen_array


class IterationRecord(ArffModel):
    """Errors measured after one solve."""

    iteration: int = Field(ge=1)
    phase: Literal["resample", "final"]
    train_rel_err: NonNegativeFloat
    val_rel_err: NonNegativeFloat
    cg_iters: int = Field(ge=0)
    wall_ms: NonNegativeFloat = 0.0


class PhaseTiming(ArffModel):
    """Wall-clock milliseconds spent in each phase of one iteration."""

    iteration: int
    walk_ms: float = 0.0
    solve_ms: float = 0.0
    resample_ms: float = 0.0


class FrequencySnapshot(ArffModel):
    """Frequencies and amplitude magnitudes at one iteration."""

    iteration: int
    coordinates: np.ndarray
    abs_beta: np.ndarray

    @field_validator("coordinates", mode="before")
    @classmethod
    def _coerce_coordinates(cls, value):
        return frozen_array(value, np.float64, 2, "coordinates")

    @field_validator("abs_beta", mode="before")
    @classmethod
    def _coerce_abs_beta(cls, value):
        return frozen_array(value, np.float64, 1, "abs_beta")


class EqualAmplitudeCheck(ArffModel):
    """Largest relative spread of amplitudes within duplicate groups."""

    iteration: int
    groups: int
    max_rel_spread: float


class RunHistory(ArffModel):
    """Per-iteration metrics, snapshots and diagnostics of one run."""

    records: tuple[IterationRecord, ...]
    test_rel_err: Optional[float] = None
    snapshots: tuple[FrequencySnapshot, ...] = ()
    equal_amplitude_checks: tuple[EqualAmplitudeCheck, ...] = ()
    timings: tuple[PhaseTiming, ...] = ()

    @property
    def train_errors(self) -> np.ndarray:
        return np.array([r.train_rel_err for r in self.records])

    @property
    def val_errors(self) -> np.ndarray:
        return np.array([r.val_rel_err for r in self.records])

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]


class ProjectedHistogram(ArffModel):
    """Counts of v . omega_k over fixed bins plus out-of-range counts."""

    edges: np.ndarray
    counts: np.ndarray
    underflow: int = Field(ge=0)
    overflow: int = Field(ge=0)

    @field_validator("edges", mode="before")
    @classmethod
    def _coerce_edges(cls, value):
        return frozen_array(value, np.float64, 1, "edges")

    @field_validator("counts", mode="before")
    @classmethod
    def _coerce_counts(cls, value):
        return frozen_array(value, np.int64, 1, "counts")

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


class SweepPoint(ArffModel):
    """Final errors of one point of a hyperparameter sweep."""

    point: str
    parameter: str
    value: float
    train_rel_err: NonNegativeFloat
    val_rel_err: NonNegativeFloat
    test_rel_err: Optional[NonNegativeFloat] = None
