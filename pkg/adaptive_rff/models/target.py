"""Target function, Fourier table and base distribution models."""

from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import (
    Field,
    PositiveFloat,
    PositiveInt,
    field_validator,
    model_validator,
)

from .base import ArffModel, frozen_array
from .frequency import FrequencySet, LatticeSpec

PROBABILITY_SUM_TOL = 1e-12


def box_indices(n_max: int, dimension: int) -> np.ndarray:
    """All n in Z^d with |n_i| <= n_max, last coordinate varying fastest."""
    axis = np.arange(-n_max, n_max + 1, dtype=np.int64)
    grids = np.meshgrid(*([axis] * dimension), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


class SpectrumTerm(ArffModel):
    """One coefficient c_n of a trigonometric polynomial target."""

    index: tuple[int, ...]
    re: float
    im: float = 0.0

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)


class TargetSpec(ArffModel):
    """Synthetic target: bump, sine-integral, or a lattice spectrum.

    Bump:          f(x) = exp(-|v.x|/a) exp(-|x|^2/2)
    SineIntegral:  f(x) = Si(v.x/a) exp(-|x|^2/2)
    Spectrum:      f(x) = Re sum_n c_n exp(i w_n . x), w_n = (pi/L) n

    With ``period`` set, x is wrapped into [-q/2, q/2)^d before evaluation.
    """

    kind: Literal["bump", "sine_integral", "spectrum"]
    direction: Optional[tuple[float, ...]] = None
    sharpness: PositiveFloat = 0.1
    period: Optional[PositiveFloat] = None
    spectrum: tuple[SpectrumTerm, ...] = ()

    @field_validator("direction")
    @classmethod
    def _normalize_direction(cls, value):
        if value is None:
            return None
        v = np.asarray(value, dtype=np.float64)
        norm = float(np.linalg.norm(v))
        if v.ndim != 1 or v.size == 0 or norm == 0.0 or not np.isfinite(norm):
            raise ValueError("direction must be a nonzero finite vector")
        return tuple(float(c) for c in v / norm)

    @model_validator(mode="after")
    def _check_kind(self) -> "TargetSpec":
        if self.kind == "spectrum":
            if not self.spectrum:
                raise ValueError("spectrum targets need at least one term")
            if self.period is None:
                raise ValueError("spectrum targets are periodic; set period")
            if len({len(term.index) for term in self.spectrum}) != 1:
                raise ValueError("all spectrum indices must share one dimension")
        elif self.direction is None:
            raise ValueError(f"{self.kind} targets need a direction")
        return self

    @property
    def dimension(self) -> int:
        if self.kind == "spectrum":
            return len(self.spectrum[0].index)
        return len(self.direction)

    @property
    def lattice(self) -> Optional[LatticeSpec]:
        if self.period is None:
            return None
        return LatticeSpec(half_period=self.period / 2.0, dimension=self.dimension)


class FourierCoefficientTable(ArffModel):
    """Coefficients f_hat(w_n) over the full box |n_i| <= n_max."""

    lattice: LatticeSpec
    n_max: int = Field(ge=0)
    indices: np.ndarray
    coefficients: np.ndarray

    @field_validator("indices", mode="before")
    @classmethod
    def _coerce_indices(cls, value):
        return frozen_array(value, np.int64, 2, "indices")

    @field_validator("coefficients", mode="before")
    @classmethod
    def _coerce_coefficients(cls, value):
        return frozen_array(value, np.complex128, 1, "coefficients")

    @model_validator(mode="after")
    def _check_box(self) -> "FourierCoefficientTable":
        d = self.lattice.dimension
        expected = (2 * self.n_max + 1) ** d
        if self.indices.shape != (expected, d):
            raise ValueError(f"expected {expected} indices of dimension {d}")
        if self.coefficients.shape[0] != expected:
            raise ValueError("one coefficient per index is required")
        if not np.array_equal(self.indices, box_indices(self.n_max, d)):
            raise ValueError("indices must enumerate the box in lexicographic order")
        return self

    @property
    def size(self) -> int:
        return self.indices.shape[0]

    def frequencies(self) -> FrequencySet:
        return FrequencySet.on_lattice(self.indices, self.lattice)

    def as_dict(self) -> dict[tuple[int, ...], complex]:
        return {
            tuple(int(i) for i in row): complex(c)
            for row, c in zip(self.indices, self.coefficients)
        }

    def lookup(self, index) -> complex:
        """Coefficient at ``index``; zero outside the truncation box."""
        index = np.asarray(index, dtype=np.int64)
        if np.any(np.abs(index) > self.n_max):
            return 0.0j
        width = 2 * self.n_max + 1
        flat = 0
        for component in index:
            flat = flat * width + int(component) + self.n_max
        return complex(self.coefficients[flat])


class StandardNormalDistribution(ArffModel):
    """Isotropic normal frequencies N(0, scale^2 I) in R^d."""

    kind: Literal["standard_normal"] = "standard_normal"
    scale: PositiveFloat = 1.0
    dimension: PositiveInt


class LatticeNormalDistribution(ArffModel):
    """Normal frequencies rounded to the nearest lattice point."""

    kind: Literal["lattice_normal"] = "lattice_normal"
    scale: PositiveFloat = 1.0
    lattice: LatticeSpec

    @property
    def dimension(self) -> int:
        return self.lattice.dimension


class TabulatedDistribution(ArffModel):
    """Explicit probabilities over a finite set of lattice indices."""

    kind: Literal["tabulated"] = "tabulated"
    lattice: LatticeSpec
    indices: np.ndarray
    probabilities: np.ndarray

    @field_validator("indices", mode="before")
    @classmethod
    def _coerce_indices(cls, value):
        return frozen_array(value, np.int64, 2, "indices")

    @field_validator("probabilities", mode="before")
    @classmethod
    def _coerce_probabilities(cls, value):
        return frozen_array(value, np.float64, 1, "probabilities")

    @model_validator(mode="after")
    def _check_probabilities(self) -> "TabulatedDistribution":
        if self.indices.shape != (self.probabilities.shape[0], self.lattice.dimension):
            raise ValueError("one lattice index per probability is required")
        if np.any(self.probabilities < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(float(self.probabilities.sum()) - 1.0) > PROBABILITY_SUM_TOL:
            raise ValueError("probabilities must sum to 1")
        return self

    @property
    def dimension(self) -> int:
        return self.lattice.dimension

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {
            tuple(int(i) for i in row): float(p)
            for row, p in zip(self.indices, self.probabilities)
        }


BaseDistribution = Annotated[
    Union[StandardNormalDistribution, LatticeNormalDistribution, TabulatedDistribution],
    Field(discriminator="kind"),
]


class ParsevalReport(ArffModel):
    """Coefficient energy of a truncated table against the mean square of f."""

    coefficient_energy: float
    mean_square: float
    grid_points_per_dim: int

    @property
    def gap(self) -> float:
        return self.mean_square - self.coefficient_energy

    @property
    def relative_gap(self) -> float:
        return self.gap / self.mean_square if self.mean_square else 0.0
