"""Error-controlled adaptive sweep.

Each iteration groups the current samples, reconstructs the dense grid,
compares it with the previous reconstruction part by part and bisects only the
sample intervals of parts whose relative error exceeds the threshold. Every
solver request is snapped to the dense grid and answered at most once.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .domain import BandPartition, FrequencyBand, Sample, SampleGrid, make_uniform_grid, partition_band
from .errors import InputError, MetricError, OracleError, SweepError
from .grouping import partition_into_groups
from .interpolator import Reconstruction, reconstruct

logger = logging.getLogger(__name__)

Oracle = Callable[[float], float]

MIN_SEED_SAMPLES = 4
DEFAULT_MIN_SEED = 10


def default_initial_samples(n_parts: int, dense_points: int) -> int:
    """Seed size max(n_parts / 5, 10), capped by the dense grid size."""
    return max(MIN_SEED_SAMPLES, min(dense_points, max(int(round(n_parts / 5.0)), DEFAULT_MIN_SEED)))


class SweepConfig(BaseModel):
    """Parameters of one adaptive sweep."""

    model_config = ConfigDict(frozen=True)

    band: FrequencyBand
    dense_points: int = 601
    n_parts: int = 70
    part_error_threshold: float = 0.03
    initial_samples: Optional[int] = None
    max_iterations: int = 20

    @model_validator(mode="before")
    @classmethod
    def _fill_seed(cls, data):
        if isinstance(data, dict) and data.get("initial_samples") is None:
            data = dict(data)
            data["initial_samples"] = default_initial_samples(
                int(data.get("n_parts", 70)), int(data.get("dense_points", 601))
            )
        return data

    @model_validator(mode="after")
    def _check_config(self) -> "SweepConfig":
        if self.n_parts < 1:
            raise ValueError(f"n_parts must be positive, got {self.n_parts}")
        if not self.dense_points >= self.initial_samples >= MIN_SEED_SAMPLES:
            raise ValueError(
                f"need dense_points >= initial_samples >= {MIN_SEED_SAMPLES}, "
                f"got {self.dense_points} and {self.initial_samples}"
            )
        if not self.part_error_threshold > 0:
            raise ValueError(f"part_error_threshold must be positive, got {self.part_error_threshold}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be at least 1, got {self.max_iterations}")
        return self


class PartError(NamedTuple):
    part: int
    error: float
    failed: bool


class SweepReport(BaseModel):
    """Outcome of run_adaptive_sweep."""

    model_config = ConfigDict(frozen=True)

    config: SweepConfig
    final_curve: Tuple[Sample, ...]
    samples: Tuple[Sample, ...]
    solver_calls: int
    per_part_errors: Tuple[Tuple[float, ...], ...]
    sample_counts: Tuple[int, ...]
    global_error: float
    iterations: int
    converged: bool
    saturated: bool = False
    edge_fallbacks: int = 0

    @property
    def reduction_ratio(self) -> float:
        return self.solver_calls / self.config.dense_points

    @property
    def frequencies(self) -> np.ndarray:
        return np.asarray([s.freq for s in self.final_curve], dtype=float)

    @property
    def values(self) -> np.ndarray:
        return np.asarray([s.value for s in self.final_curve], dtype=float)

    @property
    def final_part_errors(self) -> Tuple[float, ...]:
        return self.per_part_errors[-1] if self.per_part_errors else ()


def relative_error(previous: Sequence[float], refined: Sequence[float]) -> float:
    """sum |refined - previous| / sum |refined|.

    Raises:
        MetricError: On length mismatch, empty input or an all-zero refined curve
    """
    prev = np.asarray(previous, dtype=float)
    new = np.asarray(refined, dtype=float)
    if prev.shape != new.shape or new.size == 0:
        raise MetricError(f"relative error needs equal non-empty curves, got {prev.size} and {new.size} points")
    denom = float(np.sum(np.abs(new)))
    if denom == 0.0:
        raise MetricError("relative error is undefined for an all-zero curve")
    return float(np.sum(np.abs(new - prev))) / denom


def _assessment_buckets(partition: BandPartition, grid: SampleGrid) -> List[Tuple[List[int], np.ndarray]]:
    # Parts with fewer than 2 dense points are assessed together with their left neighbour
    buckets: List[Tuple[List[int], np.ndarray]] = []
    for k, idx in enumerate(partition.dense_indices(grid)):
        if buckets and (idx.size < 2 or buckets[-1][1].size < 2):
            parts, held = buckets[-1]
            buckets[-1] = (parts + [k], np.concatenate([held, idx]))
        else:
            buckets.append(([k], idx))
    return buckets


def assess_parts(
    partition: BandPartition,
    prev_curve: Sequence[float],
    new_curve: Sequence[float],
    grid: SampleGrid,
    threshold: Optional[float] = None
) -> List[PartError]:
    """Relative error of new_curve against prev_curve inside each part.

    Args:
        partition: Error-control parts of the band
        prev_curve: Previous reconstruction on grid
        new_curve: Current reconstruction on grid
        grid: Dense grid both curves are evaluated on
        threshold: Error above which a part fails (no part fails when None)

    Returns:
        One PartError per part, in part order; an undefined error counts as failed
    """
    prev = np.asarray(prev_curve, dtype=float)
    new = np.asarray(new_curve, dtype=float)
    if prev.size != len(grid) or new.size != len(grid):
        raise InputError(f"curves must have {len(grid)} points, got {prev.size} and {new.size}")

    results: Dict[int, PartError] = {}
    for parts, idx in _assessment_buckets(partition, grid):
        try:
            error = relative_error(prev[idx], new[idx])
            failed = threshold is not None and error > threshold
        except MetricError as e:
            logger.debug(f"Parts {parts}: {e}")
            error, failed = float("inf"), True
        for k in parts:
            results[k] = PartError(part=k, error=error, failed=failed)
    return [results[k] for k in range(partition.count)]


class RefinementPlan(NamedTuple):
    indices: List[int]
    frequencies: List[float]
    saturated_parts: List[int]

    @property
    def saturated(self) -> bool:
        """True when no failing part admits a new sample."""
        return not self.indices


def refine_parts(
    partition: BandPartition,
    failing_parts: Sequence[int],
    current_sample_freqs: Sequence[float],
    grid: SampleGrid
) -> RefinementPlan:
    """Bisect the sampled intervals of failing parts, staying inside those parts.

    Each consecutive sample pair is clipped to the grid points a failing part
    owns; the middle unsampled point of the clipped range is added. A part with
    no unsampled grid point left is saturated.

    Args:
        partition: Error-control parts
        failing_parts: Indices of the parts over threshold
        current_sample_freqs: Frequencies already sampled (on the grid)
        grid: Dense grid

    Returns:
        RefinementPlan with the new grid indices and frequencies, sorted
    """
    if not failing_parts:
        raise InputError("refine_parts needs at least one failing part")
    sampled = sorted({grid.nearest_index(f) for f in current_sample_freqs})
    owned = partition.dense_indices(grid)
    pts = grid.points
    new: set = set()
    saturated = []
    for k in failing_parts:
        if not 0 <= k < partition.count:
            raise InputError(f"part index {k} outside 0..{partition.count - 1}")
        inserted = False
        if owned[k].size:
            first, last = int(owned[k][0]), int(owned[k][-1])
            for ia, ib in zip(sampled, sampled[1:]):
                lo, hi = max(first, ia + 1), min(last, ib - 1)
                if lo <= hi:
                    new.add((lo + hi) // 2)
                    inserted = True
        if not inserted:
            saturated.append(k)
    indices = sorted(new)
    return RefinementPlan(indices=indices, frequencies=[pts[i] for i in indices], saturated_parts=saturated)


def seed_indices(dense_points: int, initial_samples: int) -> List[int]:
    """Evenly spread seed indices, both band edges included."""
    step = (dense_points - 1) / (initial_samples - 1)
    return sorted({int(round(k * step)) for k in range(initial_samples)})


def evaluate_batch(
    oracle: Oracle,
    grid: SampleGrid,
    indices: Sequence[int],
    cache: Dict[int, float],
    threads: int = 1
) -> int:
    """Call the oracle at the grid indices missing from cache.

    Results are stored in index order whatever the thread count.

    Returns:
        Number of new oracle calls

    Raises:
        OracleError: If the oracle fails or answers a non-finite value
    """
    todo = sorted(i for i in set(indices) if i not in cache)
    if not todo:
        return 0
    freqs = [grid.points[i] for i in todo]

    def call(f: float) -> float:
        try:
            value = float(oracle(f))
        except OracleError:
            raise
        except Exception as e:
            raise OracleError(f"oracle failed at {f} Hz: {e}", frequency=f) from e
        if not np.isfinite(value):
            raise OracleError(f"oracle returned {value} at {f} Hz", frequency=f)
        return value

    if threads > 1 and len(freqs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            futures = [(i, executor.submit(call, f)) for i, f in zip(todo, freqs)]
            results = [(i, future.result()) for i, future in futures]
    else:
        results = [(i, call(f)) for i, f in zip(todo, freqs)]

    for i, value in results:
        cache[i] = value
    return len(todo)


def reconstruct_samples(samples: Sequence[Sample], grid: SampleGrid) -> Reconstruction:
    """Group samples over the grid band and reconstruct every grid point."""
    group_set = partition_into_groups(samples, grid.band)
    return reconstruct(group_set, grid)


def _samples_at(grid: SampleGrid, cache: Dict[int, float], indices: Sequence[int]) -> List[Sample]:
    return [Sample(freq=grid.points[i], value=cache[i]) for i in indices]


def _coarse_subset(indices: List[int]) -> List[int]:
    # Every other seed sample, both band edges kept
    subset = indices[::2]
    if subset[-1] != indices[-1]:
        subset.append(indices[-1])
    return subset


def run_adaptive_sweep(oracle: Oracle, config: SweepConfig, threads: int = 1) -> SweepReport:
    """Reconstruct the oracle response on the dense grid with as few calls as possible.

    The first assessment compares the seed reconstruction with the one from
    every other seed sample, so it costs no extra solver calls. The loop stops
    when every part error is within the threshold, when every failing part is
    saturated at dense resolution, or after max_iterations assessments.

    Args:
        oracle: Frequency (Hz) to response evaluator; pure and thread-safe
        config: Sweep configuration
        threads: Maximum concurrent oracle calls per batch

    Returns:
        SweepReport of the final iteration

    Raises:
        OracleError: Oracle failure; carries a partial report of completed iterations
    """
    grid = make_uniform_grid(config.band, config.dense_points)
    partition = partition_band(config.band, config.n_parts)
    cache: Dict[int, float] = {}
    sample_idx = seed_indices(config.dense_points, config.initial_samples)

    part_history: List[Tuple[float, ...]] = []
    count_history: List[int] = []
    state = {"curve": None, "global_error": float("inf"), "fallbacks": 0, "iterations": 0}

    def build_report(converged: bool, saturated: bool) -> SweepReport:
        curve = state["curve"]
        final = tuple(Sample(freq=f, value=float(v)) for f, v in zip(grid.points, curve)) if curve is not None else ()
        return SweepReport(
            config=config,
            final_curve=final,
            samples=tuple(_samples_at(grid, cache, sorted(cache))),
            solver_calls=len(cache),
            per_part_errors=tuple(part_history),
            sample_counts=tuple(count_history),
            global_error=state["global_error"],
            iterations=state["iterations"],
            converged=converged,
            saturated=saturated,
            edge_fallbacks=state["fallbacks"]
        )

    try:
        evaluate_batch(oracle, grid, sample_idx, cache, threads)
    except OracleError as e:
        e.partial_report = build_report(False, False)
        raise

    prev_curve = reconstruct_samples(_samples_at(grid, cache, _coarse_subset(sample_idx)), grid).values
    converged = saturated = False

    for iteration in range(1, config.max_iterations + 1):
        result = reconstruct_samples(_samples_at(grid, cache, sample_idx), grid)
        curve = result.values
        errors = assess_parts(partition, prev_curve, curve, grid, config.part_error_threshold)
        try:
            global_error = relative_error(prev_curve, curve)
        except MetricError:
            global_error = float("inf")

        part_history.append(tuple(e.error for e in errors))
        count_history.append(len(sample_idx))
        state.update(curve=curve, global_error=global_error, fallbacks=result.edge_fallbacks, iterations=iteration)

        failing = [e.part for e in errors if e.failed]
        logger.info(
            f"Iteration {iteration}: {len(sample_idx)} samples, {len(failing)} failing parts, "
            f"global error {global_error:.4g}"
        )
        if not failing:
            converged = True
            break
        if iteration == config.max_iterations:
            break

        plan = refine_parts(partition, failing, [grid.points[i] for i in sample_idx], grid)
        if plan.saturated:
            logger.warning(f"All {len(failing)} failing parts are sampled at dense resolution")
            converged = saturated = True
            break
        logger.debug(
            f"Iteration {iteration}: {len(plan.indices)} new samples in parts "
            f"{sorted({partition.part_of(f) for f in plan.frequencies})}"
        )

        try:
            evaluate_batch(oracle, grid, plan.indices, cache, threads)
        except OracleError as e:
            e.partial_report = build_report(False, False)
            raise
        sample_idx = sorted(set(sample_idx) | set(plan.indices))
        prev_curve = curve

    if not converged:
        logger.warning(f"Sweep did not converge within {config.max_iterations} iterations")
    report = build_report(converged, saturated)
    logger.info(
        f"Sweep finished: {report.solver_calls}/{config.dense_points} solver calls "
        f"({report.reduction_ratio:.1%}), global error {report.global_error:.4g}"
    )
    return report


def dense_reference(oracle: Oracle, grid: SampleGrid, threads: int = 1) -> np.ndarray:
    """Brute-force oracle sweep over every grid point."""
    cache: Dict[int, float] = {}
    evaluate_batch(oracle, grid, range(len(grid)), cache, threads)
    return np.asarray([cache[i] for i in range(len(grid))], dtype=float)


class StudyRow(NamedTuple):
    value: float
    solver_calls: int
    reported_error: float
    true_error: Optional[float]
    converged: bool


def _study(
    oracle: Oracle,
    configs: Sequence[Tuple[float, SweepConfig]],
    truth: Optional[np.ndarray],
    threads: int
) -> List[StudyRow]:
    rows = []
    for value, config in configs:
        report = run_adaptive_sweep(oracle, config, threads)
        true_error = None
        if truth is not None:
            try:
                true_error = relative_error(report.values, truth)
            except SweepError:
                true_error = float("inf")
        rows.append(StudyRow(value, report.solver_calls, report.global_error, true_error, report.converged))
    return rows


def study_parts(
    oracle: Oracle,
    config: SweepConfig,
    part_counts: Sequence[int],
    truth: Optional[np.ndarray] = None,
    threads: int = 1
) -> List[StudyRow]:
    """Run the sweep once per part count, other settings fixed.

    The seed size is kept from config so only the error-control resolution changes.
    """
    configs = [(float(n), SweepConfig.model_validate({**config.model_dump(), "n_parts": int(n)}))
               for n in part_counts]
    return _study(oracle, configs, truth, threads)


def study_thresholds(
    oracle: Oracle,
    config: SweepConfig,
    thresholds: Sequence[float],
    truth: Optional[np.ndarray] = None,
    threads: int = 1
) -> List[StudyRow]:
    """Run the sweep once per part error threshold, other settings fixed."""
    configs = [(float(t), SweepConfig.model_validate({**config.model_dump(), "part_error_threshold": t}))
               for t in thresholds]
    return _study(oracle, configs, truth, threads)
