"""Tests for extreme-point detection and sample grouping."""
import sys
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

# Add src to path
sys.path.insert(0, str(Path(__file__).parent))

from src.domain import FrequencyBand, Sample
from src.errors import InputError
from src.grouping import (
    MAX_GROUP_SIZE, Group, GroupKind, GroupSet, detect_extrema, partition_into_groups, window_contains
)


def samples_of(freqs, values):
    return [Sample(freq=float(f), value=float(v)) for f, v in zip(freqs, values)]


def test_detect_extrema():
    samples = samples_of(range(5), [1, 3, 2, 4, 1])
    assert detect_extrema(samples) == [1, 2, 3]


def test_plateaus_and_endpoints_are_not_extrema():
    assert detect_extrema(samples_of(range(4), [1, 2, 2, 1])) == []
    assert detect_extrema(samples_of(range(3), [5, 1, 5])) == [1]
    assert detect_extrema(samples_of(range(2), [1, 2])) == []


def test_monotone_run_is_chunked_by_three():
    gs = partition_into_groups(samples_of(range(7), range(7)))
    assert [g.size for g in gs.groups] == [3, 3, 1]
    assert [g.kind for g in gs.groups] == [GroupKind.NON_SINGLE, GroupKind.NON_SINGLE, GroupKind.SINGLE]
    assert not gs.groups[-1].is_extreme

    gs = partition_into_groups(samples_of(range(5), range(5)))
    assert [g.size for g in gs.groups] == [3, 2]
    assert gs.m_ns == 2 and gs.m_s == 0


def test_extreme_point_becomes_single_group():
    gs = partition_into_groups(samples_of(range(7), [0, 1, 2, 5, 2, 1, 0]))
    assert [g.size for g in gs.groups] == [3, 1, 3]
    assert gs.groups[1].is_extreme and gs.groups[1].is_single
    assert gs.groups[1].first.freq == 3.0
    assert gs.m_ns == 2 and gs.m_s == 1
    assert gs.groups[0].dist_prev == 0.0
    assert gs.groups[1].dist_prev == 1.0
    assert gs.groups[2].dist_prev == 1.0


def test_band_defaults_to_sample_span():
    gs = partition_into_groups(samples_of([2.0, 3.0, 5.0], [1, 2, 3]))
    assert gs.band.f_min == 2.0 and gs.band.f_max == 5.0


def test_grouping_rejects_bad_input():
    with pytest.raises(InputError):
        partition_into_groups(samples_of([1.0], [1.0]))
    with pytest.raises(InputError):
        partition_into_groups(samples_of([1.0, 3.0, 2.0], [1, 2, 3]))
    with pytest.raises(InputError):
        partition_into_groups(samples_of([1.0, 1.0, 2.0], [1, 2, 3]))


def test_group_validation():
    s = samples_of([1.0, 2.0], [1, 2])
    with pytest.raises(ValidationError):
        Group(samples=tuple(s), kind=GroupKind.SINGLE)
    with pytest.raises(ValidationError):
        Group(samples=(s[0],), kind=GroupKind.NON_SINGLE)
    with pytest.raises(ValidationError):
        Group(samples=tuple(s), kind=GroupKind.NON_SINGLE, is_extreme=True)
    with pytest.raises(ValidationError):
        Group(samples=tuple(samples_of(range(4), range(4))), kind=GroupKind.NON_SINGLE)


def test_window_bounds():
    band = FrequencyBand(f_min=0.0, f_max=5.0)
    gs = GroupSet(band=band, groups=(
        Group(samples=tuple(samples_of([1.0], [1.0])), kind=GroupKind.SINGLE),
        Group(samples=tuple(samples_of([2.0, 3.0], [2.0, 3.0])), kind=GroupKind.NON_SINGLE, dist_prev=1.0),
        Group(samples=tuple(samples_of([4.0], [1.0])), kind=GroupKind.SINGLE, dist_prev=1.0),
    ))
    assert window_contains(gs, 1, 1.5)
    assert window_contains(gs, 1, 3.5)
    assert not window_contains(gs, 1, 1.4)
    assert not window_contains(gs, 1, 3.6)


def test_end_windows_extend_to_band_edges():
    gs = partition_into_groups(samples_of([1.0, 2.0, 3.0, 4.0, 5.0], range(5)), FrequencyBand(f_min=0.0, f_max=6.0))
    assert gs.window(0)[0] == 0.0
    assert gs.window(len(gs) - 1)[1] == 6.0


def test_random_partitions_cover_every_sample_once():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        freqs = np.sort(rng.choice(np.arange(1000), size=n, replace=False)).astype(float)
        values = rng.normal(size=n)
        samples = samples_of(freqs, values)
        gs = partition_into_groups(samples)

        assert [s.freq for s in gs.samples] == [s.freq for s in samples]
        assert all(1 <= g.size <= MAX_GROUP_SIZE for g in gs.groups)
        extreme_freqs = {samples[i].freq for i in detect_extrema(samples)}
        assert {g.first.freq for g in gs.groups if g.is_extreme} == extreme_freqs
        for g in gs.groups:
            if g.size == 1:
                assert g.kind is GroupKind.SINGLE
            else:
                assert g.kind is GroupKind.NON_SINGLE and not g.is_extreme
        for prev, cur in zip(gs.groups, gs.groups[1:]):
            assert cur.dist_prev == pytest.approx(cur.f_lo - prev.f_hi)
