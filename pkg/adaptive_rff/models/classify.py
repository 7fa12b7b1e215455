"""IDX data and one-vs-all classifier models."""

import numpy as np
from pydantic import Field, NonNegativeFloat, field_validator, model_validator

from .base import ArffModel, frozen_array
from .frequency import FrequencySet, RffModel


class IdxImages(ArffModel):
    """Images parsed from an IDX3 stream, pixels scaled to [0, 1]."""

    count: int = Field(ge=0)
    rows: int = Field(ge=0)
    cols: int = Field(ge=0)
    pixels: np.ndarray

    @field_validator("pixels", mode="before")
    @classmethod
    def _coerce_pixels(cls, value):
        return frozen_array(value, np.float64, 3, "pixels")

    @model_validator(mode="after")
    def _check_shape(self) -> "IdxImages":
        if self.pixels.shape != (self.count, self.rows, self.cols):
            raise ValueError("pixels must have shape (count, rows, cols)")
        return self

    @property
    def flat(self) -> np.ndarray:
        """Images as (count, rows * cols) row-major vectors."""
        return self.pixels.reshape(self.count, self.rows * self.cols)

    def subset(self, positions) -> "IdxImages":
        positions = np.asarray(positions, dtype=np.int64)
        return IdxImages(
            count=positions.size,
            rows=self.rows,
            cols=self.cols,
            pixels=self.pixels[positions],
        )


class IdxLabels(ArffModel):
    """Digit labels parsed from an IDX1 stream."""

    count: int = Field(ge=0)
    labels: np.ndarray

    @field_validator("labels", mode="before")
    @classmethod
    def _coerce_labels(cls, value):
        return frozen_array(value, np.int64, 1, "labels")

    @model_validator(mode="after")
    def _check_count(self) -> "IdxLabels":
        if self.labels.shape[0] != self.count:
            raise ValueError("label count does not match the header")
        return self

    def subset(self, positions) -> "IdxLabels":
        positions = np.asarray(positions, dtype=np.int64)
        return IdxLabels(count=positions.size, labels=self.labels[positions])


class CosSinModel(ArffModel):
    """Real network x -> sum_k b_k cos(w_k . x) + c_k sin(w_k . x)."""

    frequencies: np.ndarray
    cos_weights: np.ndarray
    sin_weights: np.ndarray

    @field_validator("frequencies", mode="before")
    @classmethod
    def _coerce_frequencies(cls, value):
        return frozen_array(value, np.float64, 2, "frequencies")

    @field_validator("cos_weights", "sin_weights", mode="before")
    @classmethod
    def _coerce_weights(cls, value):
        return frozen_array(value, np.float64, 1, "weights")

    @model_validator(mode="after")
    def _check_lengths(self) -> "CosSinModel":
        K = self.frequencies.shape[0]
        if self.cos_weights.shape[0] != K or self.sin_weights.shape[0] != K:
            raise ValueError("one cos and one sin weight per frequency")
        return self

    @property
    def size(self) -> int:
        return self.frequencies.shape[0]

    @property
    def dimension(self) -> int:
        return self.frequencies.shape[1]

    def to_complex_model(self) -> RffModel:
        """Equivalent complex model on frequencies w_k and -w_k.

        b cos(w.x) + c sin(w.x) = (b - ic)/2 e^{iw.x} + (b + ic)/2 e^{-iw.x}.
        """
        half = 0.5 * (self.cos_weights - 1j * self.sin_weights)
        return RffModel(
            frequencies=FrequencySet.continuous(
                np.vstack([self.frequencies, -self.frequencies])
            ),
            amplitudes=np.concatenate([half, np.conj(half)]),
        )


class DigitRecord(ArffModel):
    """Per-iteration metrics of one one-vs-all network."""

    digit: int
    iteration: int
    train_accuracy: NonNegativeFloat
    val_accuracy: NonNegativeFloat
    train_rel_err: NonNegativeFloat
    val_rel_err: NonNegativeFloat
    cg_iters: int


class OverallRecord(ArffModel):
    """Per-iteration accuracy of the argmax classifier over all networks."""

    iteration: int
    train_accuracy: NonNegativeFloat
    val_accuracy: NonNegativeFloat


class OneVsAllResult(ArffModel):
    """Networks with the best validation accuracy and the full histories."""

    digits: tuple[int, ...]
    models: tuple[CosSinModel, ...]
    best_iteration: int
    best_val_accuracy: float
    digit_histories: dict[int, tuple[DigitRecord, ...]]
    overall_history: tuple[OverallRecord, ...]
