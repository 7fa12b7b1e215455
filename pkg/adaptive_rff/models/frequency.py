"""Frequency, lattice and amplitude models."""

import math
from typing import Iterator, Literal, Optional

import numpy as np
from pydantic import PositiveFloat, PositiveInt, field_validator, model_validator

from .base import ArffModel, frozen_array


def round_half_away(values: np.ndarray) -> np.ndarray:
    """Round to the nearest integer, ties away from zero."""
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


class LatticeSpec(ArffModel):
    """Periodic lattice (pi/L) Z^d of a 2L-periodic target."""

    half_period: PositiveFloat
    dimension: PositiveInt

    @property
    def period(self) -> float:
        return 2.0 * self.half_period

    @property
    def spacing(self) -> float:
        """Distance pi/L between neighbouring lattice frequencies."""
        return math.pi / self.half_period

    def to_indices(self, coordinates: np.ndarray) -> np.ndarray:
        """Project coordinates to the nearest lattice index."""
        return round_half_away(np.asarray(coordinates) / self.spacing).astype(np.int64)

    def to_coordinates(self, indices: np.ndarray) -> np.ndarray:
        """Convert integer lattice indices to frequency coordinates."""
        return np.asarray(indices, dtype=np.float64) * self.spacing


class Frequency(ArffModel):
    """A single frequency; lattice frequencies also carry their index."""

    coordinates: tuple[float, ...]
    index: Optional[tuple[int, ...]] = None

    @property
    def dimension(self) -> int:
        return len(self.coordinates)


class FrequencySet(ArffModel):
    """Ordered list of K frequencies in R^d or on a lattice.

    Lattice sets store exact integer indices next to the coordinates so
    grouping equal frequencies never depends on floating-point equality.
    """

    coordinates: np.ndarray
    indices: Optional[np.ndarray] = None
    lattice: Optional[LatticeSpec] = None

    @field_validator("coordinates", mode="before")
    @classmethod
    def _coerce_coordinates(cls, value):
        return frozen_array(value, np.float64, 2, "coordinates")

    @field_validator("indices", mode="before")
    @classmethod
    def _coerce_indices(cls, value):
        if value is None:
            return None
        return frozen_array(value, np.int64, 2, "indices")

    @model_validator(mode="after")
    def _check_lattice(self) -> "FrequencySet":
        if (self.indices is None) != (self.lattice is None):
            raise ValueError("indices and lattice must be given together")
        if self.lattice is not None:
            if self.indices.shape != self.coordinates.shape:
                raise ValueError("indices and coordinates must have equal shape")
            if self.coordinates.shape[1] != self.lattice.dimension:
                raise ValueError("lattice dimension does not match frequencies")
            expected = self.lattice.to_coordinates(self.indices)
            if not np.array_equal(expected, self.coordinates):
                raise ValueError("lattice coordinates must equal (pi/L) * indices")
        return self

    @classmethod
    def continuous(cls, coordinates) -> "FrequencySet":
        """Build a continuous frequency set from a (K, d) array."""
        return cls(coordinates=np.atleast_2d(np.asarray(coordinates, dtype=float)))

    @classmethod
    def on_lattice(cls, indices, lattice: LatticeSpec) -> "FrequencySet":
        """Build a lattice frequency set from integer indices."""
        indices = np.atleast_2d(np.asarray(indices, dtype=np.int64))
        return cls(
            coordinates=lattice.to_coordinates(indices),
            indices=indices,
            lattice=lattice,
        )

    @classmethod
    def zeros(
        cls, size: int, dimension: int, lattice: Optional[LatticeSpec] = None
    ) -> "FrequencySet":
        """K copies of the zero frequency, the default initialization."""
        if lattice is not None:
            return cls.on_lattice(np.zeros((size, dimension), np.int64), lattice)
        return cls.continuous(np.zeros((size, dimension)))

    @property
    def size(self) -> int:
        return self.coordinates.shape[0]

    @property
    def dimension(self) -> int:
        return self.coordinates.shape[1]

    @property
    def is_lattice(self) -> bool:
        return self.lattice is not None

    @property
    def domain_tag(self) -> Literal["continuous", "lattice"]:
        return "lattice" if self.is_lattice else "continuous"

    def __len__(self) -> int:
        return self.size

    def __getitem__(self, k: int) -> Frequency:
        index = None if self.indices is None else tuple(int(i) for i in self.indices[k])
        return Frequency(
            coordinates=tuple(float(c) for c in self.coordinates[k]), index=index
        )

    def __iter__(self) -> Iterator[Frequency]:  # type: ignore[override]
        for k in range(self.size):
            yield self[k]

    def take(self, positions) -> "FrequencySet":
        """Return the frequencies at the given positions, in that order."""
        positions = np.asarray(positions, dtype=np.int64)
        if self.is_lattice:
            return FrequencySet.on_lattice(self.indices[positions], self.lattice)
        return FrequencySet.continuous(
            self.coordinates[positions].reshape(-1, self.dimension)
        )

    def concat(self, other: "FrequencySet") -> "FrequencySet":
        """Append ``other`` after this set; both must share the domain."""
        if other.dimension != self.dimension:
            raise ValueError("cannot concatenate sets of different dimension")
        if self.is_lattice:
            if other.lattice != self.lattice:
                raise ValueError("cannot concatenate sets on different lattices")
            return FrequencySet.on_lattice(
                np.vstack([self.indices, other.indices]), self.lattice
            )
        if other.is_lattice:
            raise ValueError("cannot append lattice frequencies to a continuous set")
        return FrequencySet.continuous(np.vstack([self.coordinates, other.coordinates]))

    def grouping_keys(self) -> np.ndarray:
        """Exact equality keys, one row per frequency.

        Lattice sets use their integer indices; continuous sets use the raw
        bit patterns of the coordinates with -0.0 folded onto +0.0.
        """
        if self.is_lattice:
            return np.asarray(self.indices)
        normalized = np.ascontiguousarray(self.coordinates + 0.0)
        return normalized.view(np.int64)


class AggregatedAmplitudes(ArffModel):
    """Sum of amplitudes and multiplicity per distinct frequency."""

    representatives: FrequencySet
    aggregates: np.ndarray
    multiplicities: np.ndarray

    @field_validator("aggregates", mode="before")
    @classmethod
    def _coerce_aggregates(cls, value):
        return frozen_array(value, np.complex128, 1, "aggregates")

    @field_validator("multiplicities", mode="before")
    @classmethod
    def _coerce_multiplicities(cls, value):
        return frozen_array(value, np.int64, 1, "multiplicities")

    @model_validator(mode="after")
    def _check_lengths(self) -> "AggregatedAmplitudes":
        n = self.representatives.size
        if self.aggregates.shape[0] != n or self.multiplicities.shape[0] != n:
            raise ValueError("one aggregate and multiplicity per distinct frequency")
        if np.any(self.multiplicities < 1):
            raise ValueError("multiplicities must be positive")
        return self

    @property
    def total(self) -> int:
        """Total number of frequencies, K."""
        return int(self.multiplicities.sum())

    def __len__(self) -> int:
        return self.representatives.size

    def as_mapping(self) -> dict[tuple, tuple[complex, int]]:
        """Map each exact frequency key to (aggregate, multiplicity)."""
        keys = self.representatives.grouping_keys()
        return {
            tuple(int(v) for v in keys[n]): (
                complex(self.aggregates[n]),
                int(self.multiplicities[n]),
            )
            for n in range(len(self))
        }


class RffModel(ArffModel):
    """Random Fourier feature model x -> sum_k beta_k exp(i nu_k . x)."""

    frequencies: FrequencySet
    amplitudes: np.ndarray

    @field_validator("amplitudes", mode="before")
    @classmethod
    def _coerce_amplitudes(cls, value):
        return frozen_array(value, np.complex128, 1, "amplitudes")

    @model_validator(mode="after")
    def _check_lengths(self) -> "RffModel":
        if self.amplitudes.shape[0] != self.frequencies.size:
            raise ValueError("one amplitude per frequency is required")
        return self

    @property
    def size(self) -> int:
        return self.frequencies.size

    @property
    def dimension(self) -> int:
        return self.frequencies.dimension
