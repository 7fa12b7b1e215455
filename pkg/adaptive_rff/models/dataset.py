"""Training data models."""

import numpy as np
from pydantic import NonNegativeFloat, field_validator, model_validator

from ..rng import RngStream
from .base import ArffModel, frozen_array


class Dataset(ArffModel):
    """J input points in R^d with (possibly noisy) targets y_j = f(x_j) + xi_j."""

    inputs: np.ndarray
    targets: np.ndarray
    noise_std: NonNegativeFloat = 0.0

    @field_validator("inputs", mode="before")
    @classmethod
    def _coerce_inputs(cls, value):
        return frozen_array(value, np.float64, 2, "inputs")

    @field_validator("targets", mode="before")
    @classmethod
    def _coerce_targets(cls, value):
        return frozen_array(value, np.complex128, 1, "targets")

    @model_validator(mode="after")
    def _check_sizes(self) -> "Dataset":
        if self.inputs.shape[0] < 1:
            raise ValueError("a dataset needs at least one point")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets must have equal length")
        return self

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    @property
    def dimension(self) -> int:
        return self.inputs.shape[1]

    def subset(self, positions) -> "Dataset":
        """Return the points at the given positions."""
        positions = np.asarray(positions, dtype=np.int64)
        return Dataset(
            inputs=self.inputs[positions],
            targets=self.targets[positions],
            noise_std=self.noise_std,
        )

    def split(
        self, validation_fraction: float, rng: RngStream
    ) -> tuple["Dataset", "Dataset"]:
        """Partition into (train, validation) by a seeded permutation.

        Both parts keep at least one point and the original point order.
        """
        if not 0.0 < validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in (0, 1)")
        if self.size < 2:
            raise ValueError("splitting needs at least two points")
        n_val = int(round(validation_fraction * self.size))
        n_val = min(max(n_val, 1), self.size - 1)
        order = rng.permutation(self.size)
        return self.subset(np.sort(order[n_val:])), self.subset(np.sort(order[:n_val]))
