"""Base model classes and array coercion helpers for adaptive-rff types."""

from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict


class ArffModel(BaseModel):
    """Base model for immutable domain types that may carry numpy arrays."""

    model_config = ConfigDict(
        arbitrary_types_allowed=True,
        frozen=True,
        extra="forbid",
    )


def frozen_array(
    value: Any,
    dtype: Any,
    ndim: int,
    name: str,
    finite: bool = True,
) -> np.ndarray:
    """Copy ``value`` into a read-only array of the given dtype and rank.

    Raises:
        ValueError: If the rank is wrong or entries are not finite.
    """
    array = np.array(value, dtype=dtype, copy=True)
    if ndim == 2 and array.ndim == 1 and array.size == 0:
        array = array.reshape(0, 0)
    if array.ndim != ndim:
        raise ValueError(f"{name} must have {ndim} dimension(s), got {array.ndim}")
    if finite and np.issubdtype(array.dtype, np.inexact):
        if not np.all(np.isfinite(array)):
            raise ValueError(f"{name} must contain only finite values")
    array.setflags(write=False)
    return array
