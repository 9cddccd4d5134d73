"""Core value types: frequency bands, sample grids, samples and band partitions.

Frequencies are stored in Hz as floats and responses as real linear magnitudes.
Every comparison between frequencies uses the band tolerance of 1e-6 x width.
"""
import math
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .errors import InputError

# Relative tolerance applied to the band width for frequency comparisons
TOLERANCE_FRACTION = 1e-6


class FrequencyBand(BaseModel):
    """Swept interval [f_min, f_max] in Hz."""

    model_config = ConfigDict(frozen=True)

    f_min: float
    f_max: float

    @model_validator(mode="after")
    def _check_bounds(self) -> "FrequencyBand":
        if not (math.isfinite(self.f_min) and math.isfinite(self.f_max)):
            raise ValueError("band edges must be finite")
        if self.f_min < 0:
            raise ValueError(f"band start must be non-negative, got {self.f_min}")
        if not self.f_min < self.f_max:
            raise ValueError(f"band start {self.f_min} must be below band stop {self.f_max}")
        return self

    @property
    def width(self) -> float:
        return self.f_max - self.f_min

    @property
    def tolerance(self) -> float:
        """Absolute frequency tolerance (Hz) for equality tests inside this band."""
        return TOLERANCE_FRACTION * self.width

    def contains(self, freq: float) -> bool:
        tol = self.tolerance
        return self.f_min - tol <= freq <= self.f_max + tol


class Sample(BaseModel):
    """One (frequency, response) pair produced by an oracle."""

    model_config = ConfigDict(frozen=True)

    freq: float
    value: float

    @model_validator(mode="after")
    def _check_finite(self) -> "Sample":
        if not math.isfinite(self.freq):
            raise ValueError("sample frequency must be finite")
        if not math.isfinite(self.value):
            raise ValueError(f"sample value at {self.freq} Hz must be finite")
        return self


class SampleGrid(BaseModel):
    """Ordered frequencies inside a band."""

    model_config = ConfigDict(frozen=True)

    band: FrequencyBand
    points: Tuple[float, ...]

    @model_validator(mode="after")
    def _check_points(self) -> "SampleGrid":
        if not self.points:
            raise ValueError("grid must contain at least one point")
        arr = np.asarray(self.points, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("grid points must be finite")
        if arr.size > 1 and not np.all(np.diff(arr) > 0):
            raise ValueError("grid points must be strictly increasing")
        tol = self.band.tolerance
        if arr[0] < self.band.f_min - tol or arr[-1] > self.band.f_max + tol:
            raise ValueError("grid points must lie inside the band")
        return self

    def __len__(self) -> int:
        return len(self.points)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)

    @property
    def spacing(self) -> float:
        """Nominal spacing (exact for uniform grids, mean spacing otherwise)."""
        if len(self.points) < 2:
            return self.band.width
        return (self.points[-1] - self.points[0]) / (len(self.points) - 1)

    def index_of(self, freq: float, tolerance: Optional[float] = None) -> Optional[int]:
        """Return the index of the grid point within tolerance of freq.

        Args:
            freq: Frequency in Hz
            tolerance: Absolute tolerance (defaults to the band tolerance)

        Returns:
            Grid index, or None when no point is close enough
        """
        tol = self.band.tolerance if tolerance is None else tolerance
        idx = self.nearest_index(freq)
        if abs(self.points[idx] - freq) <= tol:
            return idx
        return None

    def nearest_index(self, freq: float) -> int:
        """Index of the grid point closest to freq (ties go to the lower point)."""
        arr = self.as_array()
        pos = int(np.searchsorted(arr, freq))
        if pos <= 0:
            return 0
        if pos >= arr.size:
            return arr.size - 1
        if freq - arr[pos - 1] <= arr[pos] - freq:
            return pos - 1
        return pos


class BandPartition(BaseModel):
    """Contiguous sub-intervals tiling a band, used for error control."""

    model_config = ConfigDict(frozen=True)

    band: FrequencyBand
    parts: Tuple[Tuple[float, float], ...]

    @model_validator(mode="after")
    def _check_tiling(self) -> "BandPartition":
        if not self.parts:
            raise ValueError("partition needs at least one part")
        if self.parts[0][0] != self.band.f_min or self.parts[-1][1] != self.band.f_max:
            raise ValueError("parts must start at f_min and end at f_max")
        for (lo, hi), (next_lo, _) in zip(self.parts, self.parts[1:]):
            if next_lo != hi:
                raise ValueError(f"parts must be contiguous, gap or overlap at {hi}")
        for lo, hi in self.parts:
            if not lo < hi:
                raise ValueError(f"empty part [{lo}, {hi}]")
        return self

    @property
    def count(self) -> int:
        return len(self.parts)

    @property
    def edges(self) -> np.ndarray:
        return np.asarray([lo for lo, _ in self.parts] + [self.parts[-1][1]], dtype=float)

    def part_of(self, freq: float) -> int:
        """Index of the part holding freq; interior edges belong to the right part."""
        inner = self.edges[1:-1]
        return int(np.searchsorted(inner, freq + self.band.tolerance, side="right"))

    def dense_indices(self, grid: SampleGrid) -> List[np.ndarray]:
        """Grid indices falling in each part, in part order."""
        inner = self.edges[1:-1]
        owner = np.searchsorted(inner, grid.as_array() + self.band.tolerance, side="right")
        return [np.flatnonzero(owner == k) for k in range(self.count)]


def make_uniform_grid(band: FrequencyBand, n_points: int) -> SampleGrid:
    """Build n_points equally spaced frequencies, endpoints included.

    Args:
        band: Swept interval
        n_points: Number of points (at least 2)

    Returns:
        Dense grid with spacing (f_max - f_min) / (n_points - 1)

    Raises:
        InputError: If n_points < 2
    """
    if not isinstance(band, FrequencyBand):
        raise InputError("band must be a FrequencyBand")
    if n_points < 2:
        raise InputError(f"a uniform grid needs at least 2 points, got {n_points}")
    points = np.linspace(band.f_min, band.f_max, int(n_points))
    points[0] = band.f_min
    points[-1] = band.f_max
    return SampleGrid(band=band, points=tuple(float(p) for p in points))


def partition_band(band: FrequencyBand, n_parts: int) -> BandPartition:
    """Split a band into n_parts equal-width contiguous parts.

    Args:
        band: Swept interval
        n_parts: Number of parts (at least 1)

    Returns:
        Partition whose first part starts at f_min and last part ends at f_max

    Raises:
        InputError: If n_parts < 1
    """
    if n_parts < 1:
        raise InputError(f"number of parts must be at least 1, got {n_parts}")
    edges = np.linspace(band.f_min, band.f_max, int(n_parts) + 1)
    edges[0] = band.f_min
    edges[-1] = band.f_max
    parts = tuple((float(edges[k]), float(edges[k + 1])) for k in range(int(n_parts)))
    return BandPartition(band=band, parts=parts)
