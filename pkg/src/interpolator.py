"""Reconstruct responses at query frequencies from grouped samples.

Queries inside a non-single group window use that group's Lagrange polynomial.
Other queries are answered near the closest single group (X_near): scenario 1
when X_near is an extreme point, scenario 2 when it is an isolated point. The
adaptive branches may lean on the previous query (x_app-1) and tag their
strategy so a later correction can replace the value.
"""
import logging
from enum import Enum
from threading import Lock
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .domain import Sample, SampleGrid
from .errors import InterpolationError
from .grouping import GroupSet, MAX_GROUP_SIZE

logger = logging.getLogger(__name__)

MAX_SUPPORT = MAX_GROUP_SIZE


class CaseTag(str, Enum):
    """Strategy recorded by the adaptive branches for the correction pass."""
    NONE = "None"
    CASE2 = "Case2"
    CASE3 = "Case3"


class Branch(str, Enum):
    """Code path that produced a value."""
    GROUP = "group"
    NODE = "node"
    S1_PRED_QUADRATIC = "s1_pred_quadratic"
    S1_ANCHOR_QUADRATIC = "s1_anchor_quadratic"
    S1_PRED_LINEAR = "s1_pred_linear"
    S1_ANCHOR_LINEAR = "s1_anchor_linear"
    S2_FORMER_PRED = "s2_former_pred"
    S2_FORMER_GROUP = "s2_former_group"
    S2_LATTER_PRED = "s2_latter_pred"
    S2_LATTER_ANCHOR = "s2_latter_anchor"
    S2_LINEAR = "s2_linear"
    EDGE_FALLBACK = "edge_fallback"
    CORRECT_CASE2 = "correct_case2"
    CORRECT_CASE3 = "correct_case3"


class TraceEntry(NamedTuple):
    x: float
    branch: Branch
    direction: int
    support: Tuple[float, ...]


class EvaluationTrace:
    """Collects (branch, support) for every evaluated query."""

    def __init__(self):
        self.entries: List[TraceEntry] = []

    def record(self, x: float, branch: Branch, direction: int, support: Sequence[Sample]):
        self.entries.append(TraceEntry(x, branch, direction, tuple(s.freq for s in support)))

    def branches(self) -> List[Branch]:
        return [e.branch for e in self.entries]

    def count(self, branch: Branch) -> int:
        return sum(1 for e in self.entries if e.branch is branch)

    @property
    def last(self) -> Optional[TraceEntry]:
        return self.entries[-1] if self.entries else None


class LagrangeCounter:
    """Thread-safe instrumentation of every Lagrange evaluation."""

    def __init__(self):
        self.lock = Lock()
        self.reset()

    def reset(self):
        with self.lock:
            self.calls = 0
            self.max_support = 0
            self.violations = 0

    def record(self, support_size: int):
        with self.lock:
            self.calls += 1
            self.max_support = max(self.max_support, support_size)
            if support_size > MAX_SUPPORT:
                self.violations += 1

    def snapshot(self) -> Dict[str, int]:
        with self.lock:
            return {
                "calls": self.calls,
                "max_support": self.max_support,
                "violations": self.violations
            }


lagrange_counter = LagrangeCounter()


class QueryContext(BaseModel):
    """Per-query state: x_app, its predecessor and the nearest single group."""

    model_config = ConfigDict(frozen=True)

    x_app: float
    x_prev: Optional[Sample] = None
    y_prev_case: CaseTag = CaseTag.NONE
    x_near: Optional[int] = None
    direction: int = 0

    @model_validator(mode="after")
    def _check_order(self) -> "QueryContext":
        if self.x_prev is not None and not self.x_prev.freq < self.x_app:
            raise ValueError("queries must proceed in increasing frequency")
        if self.direction not in (-1, 0, 1):
            raise ValueError("direction must be -1, 0 or 1")
        return self


class QueryRecord(BaseModel):
    """One evaluated query as kept in the sweep history."""

    model_config = ConfigDict(frozen=True)

    context: QueryContext
    value: float
    case: CaseTag = CaseTag.NONE
    branch: Branch = Branch.GROUP


class GroupIndex:
    """Array view of a GroupSet for fast window and nearest-single lookups."""

    def __init__(self, group_set: GroupSet):
        self.group_set = group_set
        tol = group_set.band.tolerance
        ns, lo, hi, singles, single_freq = [], [], [], [], []
        for i, group in enumerate(group_set.groups):
            if group.is_single:
                singles.append(i)
                single_freq.append(group.first.freq)
            else:
                w_lo, w_hi = group_set.window(i)
                ns.append(i)
                lo.append(w_lo - tol)
                hi.append(w_hi + tol)
        self.ns_index = np.asarray(ns, dtype=int)
        self.ns_lo = np.asarray(lo, dtype=float)
        self.ns_hi = np.asarray(hi, dtype=float)
        self.single_index = np.asarray(singles, dtype=int)
        self.single_freq = np.asarray(single_freq, dtype=float)

    def window_group(self, x: float) -> Optional[int]:
        """First non-single group (index order) whose window contains x."""
        if self.ns_index.size == 0:
            return None
        hits = np.flatnonzero((self.ns_lo <= x) & (x <= self.ns_hi))
        if hits.size == 0:
            return None
        return int(self.ns_index[hits[0]])

    def nearest_single(self, x: float) -> Optional[int]:
        """Closest single group; equidistant ties go to the lower frequency."""
        if self.single_index.size == 0:
            return None
        return int(self.single_index[int(np.argmin(np.abs(self.single_freq - x)))])


def lagrange_eval(support: Sequence[Sample], x: float) -> float:
    """Evaluate the Lagrange polynomial through the support samples at x.

    g(x) = sum_i f_i v_i(x), v_i(x) = prod_{k != i} (x - x_k) / (x_i - x_k).
    One support sample gives the constant polynomial.

    Args:
        support: 1 to 3 samples with pairwise distinct frequencies
        x: Query frequency (Hz); may lie outside the support (extrapolation)

    Returns:
        Interpolated or extrapolated response

    Raises:
        InterpolationError: Empty or oversized support, duplicate frequencies, non-finite values
    """
    size = len(support)
    lagrange_counter.record(size)
    if size == 0:
        raise InterpolationError("Lagrange support is empty")
    if size > MAX_SUPPORT:
        raise InterpolationError(f"Lagrange support of {size} points exceeds the degree cap of {MAX_SUPPORT}")
    xs = [s.freq for s in support]
    fs = [s.value for s in support]
    if not all(np.isfinite(fs)):
        raise InterpolationError(f"non-finite response in Lagrange support at {xs}")
    for i in range(size):
        for k in range(i + 1, size):
            if xs[i] == xs[k]:
                raise InterpolationError(f"duplicate support frequency {xs[i]} makes the basis singular")

    total = 0.0
    for i in range(size):
        basis = 1.0
        for k in range(size):
            if k != i:
                basis *= (x - xs[k]) / (xs[i] - xs[k])
        total += fs[i] * basis
    return total


def _support(group_set: GroupSet, nodes: Sequence[Sample], pred: Optional[Sample] = None) -> Tuple[Sample, ...]:
    # Sampled nodes first; the predecessor is dropped when it sits on a node
    tol = group_set.band.tolerance
    chosen: List[Sample] = []
    for s in nodes:
        if all(abs(s.freq - c.freq) > tol for c in chosen):
            chosen.append(s)
    if pred is not None and all(abs(pred.freq - c.freq) > tol for c in chosen):
        chosen.append(pred)
    return tuple(sorted(chosen, key=lambda s: s.freq))


def _evaluate(
    x: float,
    branch: Branch,
    direction: int,
    support: Sequence[Sample],
    trace: Optional[EvaluationTrace]
) -> float:
    value = lagrange_eval(support, x)
    if trace is not None:
        trace.record(x, branch, direction, support)
    return value


def make_context(
    group_set: GroupSet,
    x: float,
    prev: Optional[Sample] = None,
    prev_case: CaseTag = CaseTag.NONE,
    index: Optional[GroupIndex] = None
) -> QueryContext:
    """Build the query context for x: nearest single group and direction.

    Args:
        group_set: Grouped samples
        x: Query frequency
        prev: Previous query with its computed value (x_app-1)
        prev_case: Case tag of the previous query
        index: Precomputed lookup arrays for group_set

    Returns:
        QueryContext for evaluate_at
    """
    index = index or GroupIndex(group_set)
    near = index.nearest_single(x)
    direction = 0
    if near is not None:
        delta = x - group_set.groups[near].first.freq
        if abs(delta) > group_set.band.tolerance:
            direction = 1 if delta > 0 else -1
    return QueryContext(x_app=x, x_prev=prev, y_prev_case=prev_case, x_near=near, direction=direction)


def _edge_fallback(group_set: GroupSet, ctx: QueryContext, trace: Optional[EvaluationTrace]) -> Tuple[float, CaseTag]:
    # X_near sits at a band edge: extrapolate from its only existing neighbour
    i = ctx.x_near
    anchor = group_set.groups[i].first
    step = 1 if ctx.direction >= 0 else -1
    other = group_set.neighbor(i, -step)
    if other is None:
        support = (anchor,)
    else:
        support = _support(group_set, (anchor, other.last if -step < 0 else other.first))
    logger.warning(f"Edge fallback at {ctx.x_app:.6g} Hz: group {i} has no neighbour in direction {step}")
    return _evaluate(ctx.x_app, Branch.EDGE_FALLBACK, ctx.direction, support, trace), CaseTag.NONE


def scenario1(
    group_set: GroupSet,
    ctx: QueryContext,
    trace: Optional[EvaluationTrace] = None
) -> Tuple[float, CaseTag]:
    """Adaptive interpolation next to an extreme single group.

    Positive direction uses X_near+1; the negative direction mirrors with
    X_near-1 (its last two points) and compares x_app-1 against max(X_near-1).

    Args:
        group_set: Grouped samples
        ctx: Query context with x_near pointing at an extreme single group
        trace: Optional branch recorder

    Returns:
        (response, case tag)
    """
    i = ctx.x_near
    near = group_set.groups[i]
    if not near.is_extreme:
        raise InterpolationError("scenario 1 needs an extreme X_near")
    anchor = near.first
    step = 1 if ctx.direction >= 0 else -1
    nb = group_set.neighbor(i, step)
    if nb is None:
        return _edge_fallback(group_set, ctx, trace)

    pred = ctx.x_prev
    if step > 0:
        pred_beyond = pred is not None and pred.freq > anchor.freq
        nb_points = nb.samples[:2]
    else:
        pred_beyond = pred is not None and pred.freq > nb.f_hi
        nb_points = nb.samples[-2:]

    if not nb.is_single:
        if pred_beyond:
            support = _support(group_set, nb_points, pred)
            return _evaluate(ctx.x_app, Branch.S1_PRED_QUADRATIC, ctx.direction, support, trace), CaseTag.NONE
        support = _support(group_set, (anchor,) + tuple(nb_points))
        return _evaluate(ctx.x_app, Branch.S1_ANCHOR_QUADRATIC, ctx.direction, support, trace), CaseTag.CASE2

    if pred_beyond:
        support = _support(group_set, nb_points, pred)
        return _evaluate(ctx.x_app, Branch.S1_PRED_LINEAR, ctx.direction, support, trace), CaseTag.CASE3
    support = _support(group_set, (anchor,) + tuple(nb_points))
    return _evaluate(ctx.x_app, Branch.S1_ANCHOR_LINEAR, ctx.direction, support, trace), CaseTag.NONE


def scenario2(
    group_set: GroupSet,
    ctx: QueryContext,
    trace: Optional[EvaluationTrace] = None
) -> Tuple[float, CaseTag]:
    """Adaptive interpolation next to an isolated (non-extreme) single group.

    Prefers the non-single former group, then the non-single latter group,
    then a line to the single neighbour nearer to x_app.

    Args:
        group_set: Grouped samples
        ctx: Query context with x_near pointing at a non-extreme single group
        trace: Optional branch recorder

    Returns:
        (response, case tag)
    """
    i = ctx.x_near
    near = group_set.groups[i]
    if near.is_extreme:
        raise InterpolationError("scenario 2 needs a non-extreme X_near")
    anchor = near.first
    former = group_set.neighbor(i, -1)
    latter = group_set.neighbor(i, 1)
    pred = ctx.x_prev
    x = ctx.x_app

    if former is not None and not former.is_single:
        if pred is not None and pred.freq > former.f_hi:
            support = _support(group_set, (former.last, anchor), pred)
            return _evaluate(x, Branch.S2_FORMER_PRED, ctx.direction, support, trace), CaseTag.NONE
        support = _support(group_set, (former.samples[-2], former.last, anchor))
        return _evaluate(x, Branch.S2_FORMER_GROUP, ctx.direction, support, trace), CaseTag.NONE

    if latter is not None and not latter.is_single:
        if pred is not None and pred.freq > anchor.freq:
            support = _support(group_set, latter.samples[:2], pred)
            return _evaluate(x, Branch.S2_LATTER_PRED, ctx.direction, support, trace), CaseTag.NONE
        support = _support(group_set, (anchor,) + tuple(latter.samples[:2]))
        return _evaluate(x, Branch.S2_LATTER_ANCHOR, ctx.direction, support, trace), CaseTag.NONE

    candidates = [g.first for g in (former, latter) if g is not None]
    if not candidates:
        return _edge_fallback(group_set, ctx, trace)
    other = min(candidates, key=lambda s: abs(s.freq - x))
    support = _support(group_set, (anchor, other))
    return _evaluate(x, Branch.S2_LINEAR, ctx.direction, support, trace), CaseTag.NONE


def evaluate_at(
    group_set: GroupSet,
    ctx: QueryContext,
    trace: Optional[EvaluationTrace] = None,
    index: Optional[GroupIndex] = None
) -> Tuple[float, CaseTag]:
    """Evaluate the reconstructed response at ctx.x_app.

    Args:
        group_set: Grouped samples
        ctx: Query context (see make_context)
        trace: Optional branch recorder
        index: Precomputed lookup arrays for group_set

    Returns:
        (response, case tag)

    Raises:
        InterpolationError: Empty group set or unanswerable query
    """
    if not group_set.groups:
        raise InterpolationError("cannot interpolate from an empty group set")
    index = index or GroupIndex(group_set)
    x = ctx.x_app

    hit = index.window_group(x)
    if hit is not None:
        support = group_set.groups[hit].samples
        return _evaluate(x, Branch.GROUP, 0, support, trace), CaseTag.NONE

    if ctx.x_near is None:
        raise InterpolationError(f"no group window or single group answers {x} Hz")
    near = group_set.groups[ctx.x_near]
    if abs(x - near.first.freq) <= group_set.band.tolerance:
        return _evaluate(x, Branch.NODE, 0, (near.first,), trace), CaseTag.NONE
    if near.is_extreme:
        return scenario1(group_set, ctx, trace)
    return scenario2(group_set, ctx, trace)


class CorrectionOutcome(NamedTuple):
    values: List[float]
    corrected: List[int]
    flagged: List[int]


def _neighbor_point(group_set: GroupSet, ctx: QueryContext) -> Optional[Sample]:
    # X_near+1^1 in the positive direction, X_near-1^N in the negative one
    step = 1 if ctx.direction >= 0 else -1
    nb = group_set.neighbor(ctx.x_near, step)
    if nb is None:
        return None
    return nb.first if step > 0 else nb.last


def _corrected_value(
    group_set: GroupSet,
    history: Sequence[QueryRecord],
    values: Sequence[float],
    k: int,
    trace: Optional[EvaluationTrace] = None
) -> Optional[float]:
    """Corrected value of history[k], or None when k needs no (or cannot get a) correction."""
    record = history[k]
    ctx = record.context
    if record.case is CaseTag.NONE or ctx.x_near is None:
        return None
    anchor = group_set.groups[ctx.x_near].first
    nb_point = _neighbor_point(group_set, ctx)
    if nb_point is None:
        return None

    if record.case is CaseTag.CASE2:
        if k + 1 >= len(history) or history[k + 1].branch is not Branch.GROUP:
            return None
        succ = Sample(freq=history[k + 1].context.x_app, value=values[k + 1])
        support = _support(group_set, (anchor, nb_point, succ))
        return _evaluate(ctx.x_app, Branch.CORRECT_CASE2, ctx.direction, support, trace)

    pred = ctx.x_prev
    if ctx.direction >= 0:
        beyond = pred is not None and pred.freq > nb_point.freq
    else:
        beyond = pred is not None and pred.freq < nb_point.freq
    support = _support(group_set, (nb_point, pred) if beyond else (anchor, nb_point))
    return _evaluate(ctx.x_app, Branch.CORRECT_CASE3, ctx.direction, support, trace)


def _needs_flag(group_set: GroupSet, record: QueryRecord) -> bool:
    if record.case is CaseTag.NONE:
        return False
    return record.context.x_near is None or _neighbor_point(group_set, record.context) is None


def correction_pass(history: Sequence[QueryRecord], group_set: GroupSet) -> CorrectionOutcome:
    """Optimize values produced by the tagged adaptive branches.

    A Case2 entry followed by an in-group query is recomputed by the quadratic
    through X_near, the successor and the facing point of the neighbour group.
    A Case3 entry is recomputed by the line through its predecessor and the
    neighbour point when the predecessor lies beyond that point, otherwise by
    the line through X_near and the neighbour point.

    Args:
        history: Query records in increasing frequency
        group_set: Groups the history was evaluated on

    Returns:
        CorrectionOutcome with updated values, corrected indices and flagged indices
    """
    values = [r.value for r in history]
    corrected, flagged = [], []
    for k, record in enumerate(history):
        if _needs_flag(group_set, record):
            flagged.append(k)
            logger.debug(f"Correction skipped at {record.context.x_app:.6g} Hz: neighbour group missing")
            continue
        new_value = _corrected_value(group_set, history, values, k)
        if new_value is not None:
            values[k] = new_value
            corrected.append(k)
    return CorrectionOutcome(values=values, corrected=corrected, flagged=flagged)


class Reconstruction(NamedTuple):
    values: np.ndarray
    history: List[QueryRecord]
    trace: EvaluationTrace
    edge_fallbacks: int
    corrected: int


def reconstruct(group_set: GroupSet, grid: SampleGrid) -> Reconstruction:
    """Sweep the grid left to right and return the corrected response curve.

    Corrections are applied as soon as their trigger is known, so x_app-1
    always carries its most recently corrected value.

    Args:
        group_set: Grouped samples
        grid: Query frequencies (increasing)

    Returns:
        Reconstruction with one value per grid point
    """
    index = GroupIndex(group_set)
    trace = EvaluationTrace()
    values = np.empty(len(grid), dtype=float)
    history: List[QueryRecord] = []
    prev: Optional[Sample] = None
    prev_case = CaseTag.NONE
    corrected = 0

    for k, x in enumerate(grid.points):
        ctx = make_context(group_set, x, prev, prev_case, index)
        value, case = evaluate_at(group_set, ctx, trace, index)
        if not np.isfinite(value):
            raise InterpolationError(f"non-finite reconstruction at {x} Hz")
        history.append(QueryRecord(context=ctx, value=value, case=case, branch=trace.last.branch))
        values[k] = value

        if case is CaseTag.CASE3:
            fixed = _corrected_value(group_set, history, values, k, trace)
            if fixed is not None:
                values[k] = fixed
                corrected += 1
        if k > 0 and history[k].branch is Branch.GROUP and history[k - 1].case is CaseTag.CASE2:
            fixed = _corrected_value(group_set, history, values, k - 1, trace)
            if fixed is not None:
                values[k - 1] = fixed
                corrected += 1

        prev = Sample(freq=x, value=float(values[k]))
        prev_case = case

    fallbacks = trace.count(Branch.EDGE_FALLBACK)
    return Reconstruction(values=values, history=history, trace=trace, edge_fallbacks=fallbacks, corrected=corrected)
