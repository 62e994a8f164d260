"""
Shared exceptions and small numeric helpers for the Heavy Ball lab.
"""
import math
from typing import Any, Optional

import numpy as np

from config import POWER_MULTIPLY_LIMIT


class LabError(Exception):
    """Base class for errors raised by the lab."""


class RangeError(LabError, ValueError):
    """An argument lies outside the regime an operation is defined for."""


class ConfigError(LabError, ValueError):
    """An experiment definition failed to parse or validate."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ConsistencyError(LabError, RuntimeError):
    """Two independent computations of the same quantity disagree."""


class AdaptiveAbort(LabError, RuntimeError):
    """The adaptive method doubled its L estimate too many times."""


class DivergenceError(LabError, RuntimeError):
    """
    An iteration produced a non-finite or exploding state.

    Attributes:
        last_finite_index: Index of the last finite iterate
        trajectory: Partial trajectory up to that iterate, if one was being recorded
    """

    def __init__(self, message: str, last_finite_index: int, trajectory: Any = None):
        self.last_finite_index = last_finite_index
        self.trajectory = trajectory
        super().__init__(f"{message} (last finite index {last_finite_index})")


def int_power(base: float, k: int) -> float:
    """
    Raise a scalar to a nonnegative integer power.

    Repeated multiplication for k <= POWER_MULTIPLY_LIMIT, exp/log above,
    so results are reproducible across platforms.
    """
    if k < 0:
        raise ValueError(f"Exponent must be nonnegative, got {k}")
    if k <= POWER_MULTIPLY_LIMIT:
        result = 1.0
        for _ in range(k):
            result *= base
        return result
    if base == 0.0:
        return 0.0
    magnitude = math.exp(k * math.log(abs(base)))
    return -magnitude if (base < 0 and k % 2 == 1) else magnitude


def as_vector(x: Any, name: str = "x") -> np.ndarray:
    """Return x as a one-dimensional float64 array."""
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {arr.shape}")
    return arr


def check_dimension(x: np.ndarray, dim: int, name: str = "x") -> None:
    """Reject a vector whose length differs from dim."""
    if x.shape[0] != dim:
        raise ValueError(f"Dimension mismatch for {name}: expected {dim}, got {x.shape[0]}")
