"""Classify samples into single and non-single groups around extreme points.

A group never holds more than three samples, which keeps every Lagrange
polynomial built from it at degree two or below.
"""
from enum import Enum
from typing import List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, model_validator

from .domain import FrequencyBand, Sample
from .errors import InputError

MAX_GROUP_SIZE = 3


class GroupKind(str, Enum):
    """Group classification."""
    NON_SINGLE = "NonSingle"
    SINGLE = "Single"


class Group(BaseModel):
    """Ordered run of samples (X_i) with its gap to the previous group (D_i)."""

    model_config = ConfigDict(frozen=True)

    samples: Tuple[Sample, ...]
    kind: GroupKind
    dist_prev: float = 0.0
    is_extreme: bool = False

    @model_validator(mode="after")
    def _check_group(self) -> "Group":
        size = len(self.samples)
        if not 1 <= size <= MAX_GROUP_SIZE:
            raise ValueError(f"group size must be 1..{MAX_GROUP_SIZE}, got {size}")
        if self.kind is GroupKind.SINGLE and size != 1:
            raise ValueError("single groups hold exactly one sample")
        if self.kind is GroupKind.NON_SINGLE and size < 2:
            raise ValueError("non-single groups hold 2 or 3 samples")
        if self.is_extreme and self.kind is not GroupKind.SINGLE:
            raise ValueError("extreme points always form single groups")
        freqs = [s.freq for s in self.samples]
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("group samples must be strictly increasing in frequency")
        if self.dist_prev < 0:
            raise ValueError("distance to previous group must be non-negative")
        return self

    @property
    def size(self) -> int:
        return len(self.samples)

    @property
    def is_single(self) -> bool:
        return self.kind is GroupKind.SINGLE

    @property
    def f_lo(self) -> float:
        return self.samples[0].freq

    @property
    def f_hi(self) -> float:
        return self.samples[-1].freq

    @property
    def first(self) -> Sample:
        return self.samples[0]

    @property
    def last(self) -> Sample:
        return self.samples[-1]


class GroupSet(BaseModel):
    """All groups of one sample set, ordered by frequency."""

    model_config = ConfigDict(frozen=True)

    band: FrequencyBand
    groups: Tuple[Group, ...]

    @model_validator(mode="after")
    def _check_order(self) -> "GroupSet":
        for prev, cur in zip(self.groups, self.groups[1:]):
            if cur.f_lo <= prev.f_hi:
                raise ValueError("groups must be ordered and non-overlapping")
            if cur.dist_prev <= 0:
                raise ValueError("every group after the first needs a positive gap")
        return self

    def __len__(self) -> int:
        return len(self.groups)

    @property
    def m_ns(self) -> int:
        return sum(1 for g in self.groups if not g.is_single)

    @property
    def m_s(self) -> int:
        return sum(1 for g in self.groups if g.is_single)

    @property
    def samples(self) -> List[Sample]:
        return [s for g in self.groups for s in g.samples]

    def neighbor(self, i: int, step: int) -> Optional[Group]:
        """Group at index i + step, or None past either end."""
        j = i + step
        if 0 <= j < len(self.groups):
            return self.groups[j]
        return None

    def window(self, i: int) -> Tuple[float, float]:
        """Window [min(X_i) - D_i/2, max(X_i) + D_{i+1}/2] of group i.

        The first window starts at the band start and the last one ends at the
        band stop.
        """
        group = self.groups[i]
        lo = self.band.f_min if i == 0 else group.f_lo - group.dist_prev / 2.0
        if i == len(self.groups) - 1:
            hi = self.band.f_max
        else:
            hi = group.f_hi + self.groups[i + 1].dist_prev / 2.0
        return lo, hi


def detect_extrema(samples: Sequence[Sample]) -> List[int]:
    """Find interior samples that are strict local maxima or minima.

    Args:
        samples: Samples ordered by frequency

    Returns:
        Indices i with 0 < i < n-1; plateaus and endpoints are never extrema
    """
    if len(samples) < 3:
        return []
    extrema = []
    for i in range(1, len(samples) - 1):
        left, mid, right = samples[i - 1].value, samples[i].value, samples[i + 1].value
        if (mid > left and mid > right) or (mid < left and mid < right):
            extrema.append(i)
    return extrema


def _chunk_run(run: List[Sample]) -> List[Tuple[Tuple[Sample, ...], GroupKind]]:
    # Greedy left-to-right chunks of 3; a trailing 1 becomes a single group
    chunks = []
    for start in range(0, len(run), MAX_GROUP_SIZE):
        chunk = tuple(run[start:start + MAX_GROUP_SIZE])
        kind = GroupKind.SINGLE if len(chunk) == 1 else GroupKind.NON_SINGLE
        chunks.append((chunk, kind))
    return chunks


def partition_into_groups(samples: Sequence[Sample], band: Optional[FrequencyBand] = None) -> GroupSet:
    """Cast samples into groups around their extreme points.

    Each extreme point becomes a single group. Every maximal run of the other
    samples is cut left to right into chunks of three; a remainder of one is a
    single (non-extreme) group and a remainder of two stays non-single.

    Args:
        samples: Samples strictly increasing in frequency (at least 2)
        band: Band the windows extend to (defaults to the sample span)

    Returns:
        GroupSet covering every input sample exactly once

    Raises:
        InputError: On fewer than 2 samples, unsorted or duplicate frequencies
    """
    samples = list(samples)
    if len(samples) < 2:
        raise InputError(f"grouping needs at least 2 samples, got {len(samples)}")
    for a, b in zip(samples, samples[1:]):
        if b.freq <= a.freq:
            raise InputError(f"samples must be strictly increasing, {b.freq} follows {a.freq}")
    if band is None:
        band = FrequencyBand(f_min=samples[0].freq, f_max=samples[-1].freq)

    extrema = set(detect_extrema(samples))
    layout: List[Tuple[Tuple[Sample, ...], GroupKind, bool]] = []
    run: List[Sample] = []
    for i, sample in enumerate(samples):
        if i in extrema:
            layout.extend((chunk, kind, False) for chunk, kind in _chunk_run(run))
            run = []
            layout.append(((sample,), GroupKind.SINGLE, True))
        else:
            run.append(sample)
    layout.extend((chunk, kind, False) for chunk, kind in _chunk_run(run))

    groups = []
    prev_hi = None
    for chunk, kind, is_extreme in layout:
        dist_prev = 0.0 if prev_hi is None else chunk[0].freq - prev_hi
        groups.append(Group(samples=chunk, kind=kind, dist_prev=dist_prev, is_extreme=is_extreme))
        prev_hi = chunk[-1].freq
    return GroupSet(band=band, groups=tuple(groups))


def window_contains(group_set: GroupSet, i: int, x: float) -> bool:
    """Check whether frequency x falls in the window of group i.

    Args:
        group_set: Grouped samples
        i: Group index
        x: Query frequency (Hz)

    Returns:
        True iff min(X_i) - D_i/2 <= x <= max(X_i) + D_{i+1}/2, band-extended at the ends
    """
    lo, hi = group_set.window(i)
    tol = group_set.band.tolerance
    return lo - tol <= x <= hi + tol
