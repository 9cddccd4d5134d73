"""Tests for error assessment, bisection refinement and the adaptive loop."""
import sys
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

# Add src to path
sys.path.insert(0, str(Path(__file__).parent))

from src.domain import BandPartition, FrequencyBand, make_uniform_grid, partition_band
from src.errors import InputError, MetricError, OracleError
from src.oracles import RationalOracle, get_model
from src.refinement import (
    SweepConfig, assess_parts, reconstruct_samples, refine_parts, relative_error,
    run_adaptive_sweep, seed_indices, study_parts, study_thresholds
)


@pytest.fixture(scope="module")
def filter_oracle():
    return RationalOracle(get_model("filter-like"))


def filter_config(**overrides):
    params = dict(band=FrequencyBand(f_min=0.6e9, f_max=2.4e9), dense_points=601, n_parts=70,
                  part_error_threshold=0.05)
    params.update(overrides)
    return SweepConfig(**params)


class TestRelativeError:

    def test_identity_is_zero(self):
        assert relative_error([0.3, -2.0, 5.0], [0.3, -2.0, 5.0]) == 0.0

    def test_hand_computed(self):
        assert relative_error([1, 1], [1, 3]) == pytest.approx(0.5)
        assert relative_error([0, 0], [2, 2]) == pytest.approx(1.0)

    def test_undefined_cases(self):
        with pytest.raises(MetricError):
            relative_error([1, 2], [0, 0])
        with pytest.raises(MetricError):
            relative_error([1, 2], [1, 2, 3])
        with pytest.raises(MetricError):
            relative_error([], [])


class TestAssessParts:

    def test_two_parts_hand_computed(self):
        band = FrequencyBand(f_min=0.0, f_max=3.0)
        grid = make_uniform_grid(band, 4)
        errors = assess_parts(partition_band(band, 2), [1, 1, 1, 1], [1, 1, 3, 3], grid, threshold=0.5)
        assert errors[0].error == 0.0 and not errors[0].failed
        assert errors[1].error == pytest.approx(4 / 6) and errors[1].failed

    def test_identical_curves(self):
        band = FrequencyBand(f_min=0.0, f_max=10.0)
        grid = make_uniform_grid(band, 101)
        curve = np.sin(grid.as_array()) + 2
        errors = assess_parts(partition_band(band, 7), curve, curve, grid, threshold=0.01)
        assert all(e.error == 0.0 and not e.failed for e in errors)

    def test_difference_stays_in_its_part(self):
        band = FrequencyBand(f_min=0.0, f_max=10.0)
        grid = make_uniform_grid(band, 101)
        partition = partition_band(band, 5)
        prev = np.ones(len(grid))
        new = prev.copy()
        new[partition.dense_indices(grid)[3]] += 0.5
        errors = assess_parts(partition, prev, new, grid)
        assert [e.error > 0 for e in errors] == [False, False, False, True, False]

    def test_small_part_merges_left(self):
        band = FrequencyBand(f_min=0.0, f_max=10.0)
        grid = make_uniform_grid(band, 11)
        partition = BandPartition(band=band, parts=((0.0, 4.5), (4.5, 5.2), (5.2, 10.0)))
        prev = np.ones(11)
        new = np.ones(11)
        new[5] = 2.0
        errors = assess_parts(partition, prev, new, grid)
        assert errors[0].error == pytest.approx(1 / 7)
        assert errors[1].error == errors[0].error
        assert errors[2].error == 0.0

    def test_zero_part_fails(self):
        band = FrequencyBand(f_min=0.0, f_max=3.0)
        grid = make_uniform_grid(band, 4)
        errors = assess_parts(partition_band(band, 2), [0, 0, 1, 1], [0, 0, 1, 1], grid, threshold=0.5)
        assert errors[0].failed and errors[0].error == float("inf")
        assert not errors[1].failed

    def test_curve_length_checked(self):
        band = FrequencyBand(f_min=0.0, f_max=3.0)
        grid = make_uniform_grid(band, 4)
        with pytest.raises(InputError):
            assess_parts(partition_band(band, 2), [1, 1, 1], [1, 1, 1], grid)


class TestRefineParts:

    band = FrequencyBand(f_min=1.0, f_max=3.0)
    grid = make_uniform_grid(band, 5)
    halves = partition_band(band, 2)

    def test_single_bisection(self):
        plan = refine_parts(self.halves, [0], [1.0, 2.0], self.grid)
        assert plan.frequencies == [1.5]
        assert not plan.saturated

    def test_every_interval_in_part(self):
        whole = partition_band(self.band, 1)
        assert refine_parts(whole, [0], [1.0, 2.0, 3.0], self.grid).frequencies == [1.5, 2.5]
        assert refine_parts(self.halves, [0, 1], [1.0, 2.0, 3.0], self.grid).frequencies == [1.5, 2.5]

    def test_saturated_part(self):
        plan = refine_parts(self.halves, [0], list(self.grid.points), self.grid)
        assert plan.saturated
        assert plan.indices == [] and plan.saturated_parts == [0]

    def test_new_samples_stay_in_failing_part(self):
        band = FrequencyBand(f_min=0.0, f_max=10.0)
        grid = make_uniform_grid(band, 11)
        partition = partition_band(band, 5)
        plan = refine_parts(partition, [0], [0.0, 4.0, 8.0, 10.0], grid)
        assert plan.frequencies == [1.0]
        assert partition.part_of(plan.frequencies[0]) == 0

    def test_wide_sample_gap_is_clipped_to_each_part(self):
        band = FrequencyBand(f_min=0.0, f_max=10.0)
        grid = make_uniform_grid(band, 101)
        partition = partition_band(band, 10)
        plan = refine_parts(partition, [3, 7], [0.0, 10.0], grid)
        assert [partition.part_of(f) for f in plan.frequencies] == [3, 7]

    def test_random_failing_sets_never_leak(self):
        rng = np.random.default_rng(11)
        band = FrequencyBand(f_min=0.0, f_max=1.0)
        grid = make_uniform_grid(band, 201)
        partition = partition_band(band, 23)
        for _ in range(50):
            inner = rng.choice(np.arange(1, 200), size=int(rng.integers(1, 30)), replace=False)
            sampled = [grid.points[i] for i in sorted({0, 200, *inner.tolist()})]
            failing = sorted(rng.choice(partition.count, size=int(rng.integers(1, 8)), replace=False).tolist())
            plan = refine_parts(partition, failing, sampled, grid)
            assert {partition.part_of(f) for f in plan.frequencies} <= set(failing)
            assert not set(plan.frequencies) & set(sampled)

    def test_needs_failing_parts(self):
        with pytest.raises(InputError):
            refine_parts(self.halves, [], [1.0, 2.0], self.grid)
        with pytest.raises(InputError):
            refine_parts(self.halves, [2], [1.0, 2.0], self.grid)


class TestSweepConfig:

    def test_default_seed(self):
        assert filter_config().initial_samples == 14
        assert filter_config(n_parts=10).initial_samples == 10
        assert filter_config(dense_points=8).initial_samples == 8

    def test_validation(self):
        with pytest.raises(ValidationError):
            filter_config(initial_samples=3)
        with pytest.raises(ValidationError):
            filter_config(dense_points=10, initial_samples=11)
        with pytest.raises(ValidationError):
            filter_config(part_error_threshold=0.0)
        with pytest.raises(ValidationError):
            filter_config(max_iterations=0)

    def test_seed_indices_keep_edges(self):
        idx = seed_indices(601, 14)
        assert len(idx) == 14
        assert idx[0] == 0 and idx[-1] == 600


class TestAdaptiveSweep:

    def test_constant_oracle_converges_on_seed(self):
        config = SweepConfig(band=FrequencyBand(f_min=1e9, f_max=2e9), dense_points=101, n_parts=10)
        report = run_adaptive_sweep(lambda f: 0.5, config)
        assert report.converged
        assert report.iterations == 1
        assert report.solver_calls == config.initial_samples
        assert report.global_error == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(report.values, 0.5, rtol=0, atol=1e-12)

    def test_each_frequency_called_once(self, filter_oracle):
        calls = Counter()

        def counting(f):
            calls[f] += 1
            return filter_oracle(f)

        report = run_adaptive_sweep(counting, filter_config())
        assert max(calls.values()) == 1
        assert len(calls) == report.solver_calls == len(report.samples)
        assert 0 < report.reduction_ratio <= 1

    def test_samples_grow_and_final_errors_pass(self, filter_oracle):
        report = run_adaptive_sweep(filter_oracle, filter_config())
        counts = report.sample_counts
        assert all(b > a for a, b in zip(counts, counts[1:]))
        assert len(report.per_part_errors) == report.iterations
        if report.converged and not report.saturated:
            assert all(e <= 0.05 for e in report.final_part_errors)

    def test_passing_parts_get_no_new_samples(self, filter_oracle):
        calls = []

        def recording(f):
            calls.append(f)
            return filter_oracle(f)

        config = filter_config()
        report = run_adaptive_sweep(recording, config)
        partition = partition_band(config.band, config.n_parts)
        counts = report.sample_counts
        assert len(counts) >= 2
        for it in range(1, len(counts)):
            failing = {k for k, e in enumerate(report.per_part_errors[it - 1]) if e > config.part_error_threshold}
            added = calls[counts[it - 1]:counts[it]]
            assert added
            assert {partition.part_of(f) for f in added} <= failing

    def test_self_consistent_final_curve(self, filter_oracle):
        config = filter_config()
        report = run_adaptive_sweep(filter_oracle, config)
        grid = make_uniform_grid(config.band, config.dense_points)
        again = reconstruct_samples(report.samples, grid)
        assert np.array_equal(again.values, report.values)

    def test_thread_count_does_not_change_result(self, filter_oracle):
        one = run_adaptive_sweep(filter_oracle, filter_config(), threads=1)
        many = run_adaptive_sweep(filter_oracle, filter_config(), threads=4)
        assert one.samples == many.samples
        assert np.array_equal(one.values, many.values)

    def test_iteration_cap(self, filter_oracle):
        report = run_adaptive_sweep(filter_oracle, filter_config(max_iterations=1))
        assert report.iterations == 1
        assert not report.converged
        assert report.solver_calls == 14

    def test_oracle_failure_keeps_partial_report(self, filter_oracle):
        calls = []

        def flaky(f):
            if len(calls) >= 14:
                raise RuntimeError("solver crashed")
            calls.append(f)
            return filter_oracle(f)

        with pytest.raises(OracleError) as excinfo:
            run_adaptive_sweep(flaky, filter_config())
        partial = excinfo.value.partial_report
        assert partial is not None
        assert partial.iterations == 1
        assert partial.solver_calls == 14
        assert not partial.converged

    def test_non_finite_oracle_value(self):
        config = SweepConfig(band=FrequencyBand(f_min=1.0, f_max=2.0), dense_points=11, n_parts=2)
        with pytest.raises(OracleError):
            run_adaptive_sweep(lambda f: float("nan"), config)


class TestStudies:

    def test_threshold_study_rows(self, filter_oracle):
        rows = study_thresholds(filter_oracle, filter_config(), [0.05, 0.1])
        assert [r.value for r in rows] == [0.05, 0.1]
        assert all(r.true_error is None for r in rows)

    def test_parts_study_with_truth(self, filter_oracle):
        config = filter_config(dense_points=201)
        grid = make_uniform_grid(config.band, config.dense_points)
        truth = np.asarray([filter_oracle(f) for f in grid.points])
        rows = study_parts(filter_oracle, config, [10, 30], truth=truth)
        assert [r.value for r in rows] == [10.0, 30.0]
        assert all(r.true_error is not None and r.true_error >= 0 for r in rows)
