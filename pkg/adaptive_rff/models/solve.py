"""Solver result model."""

from typing import Literal

import numpy as np
from pydantic import Field, field_validator

from .base import ArffModel, frozen_array


class SolveResult(ArffModel):
    """Amplitudes returned by a least-squares solve and how they were found.

    ``residual`` is the relative residual of the system that was solved
    (normal equations for CG, gradient norm for Newton, zero for dense).
    """

    amplitudes: np.ndarray
    method: Literal["cg", "dense", "newton"]
    iterations: int = Field(ge=0)
    residual: float
    converged: bool = True
    restarts: int = 0

    @field_validator("amplitudes", mode="before")
    @classmethod
    def _coerce_amplitudes(cls, value):
        value = np.asarray(value)
        dtype = np.float64 if np.isrealobj(value) else np.complex128
        return frozen_array(value, dtype, 1, "amplitudes")
