"""Stateful evaluation of a p-value stream against a committed plan.

A monitor consumes one :class:`SignificanceRecord` per decision point, in
order and without gaps (a skipped check must be submitted as p = 1 so the
index arithmetic stays aligned with the a-priori schedule). Threshold
comparisons are inclusive: p equal to its threshold counts as a hit.

The unlimited variant re-qualifies every stored p-value against the current,
tightening threshold by default; this is the conservative reading of the
stopping rule and is strictly harder to satisfy than qualifying hits at
arrival time. The arrival-time reading is available behind
``requalify_hits=False`` for experimentation.
"""

from __future__ import annotations

from bisect import bisect_right, insort
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from .errors import DomainError, SequencingError, StateError
from .plans import PlanVariant, TestPlan, ceil_count, require_valid

__all__ = [
    "Outcome",
    "Decision",
    "SignificanceRecord",
    "MonitorState",
    "init_monitor",
    "update",
    "hit_requirement_remaining",
    "run_monitor",
]


class Outcome(str, Enum):
    CONTINUE = "continue"
    STOP_SUCCESS = "stop_success"
    END_FAILURE = "end_failure"


@dataclass(frozen=True)
class Decision:
    """Monitor verdict after a decision point."""

    outcome: Outcome
    at: int | None = None
    confidence: float | None = None

    @property
    def is_terminal(self) -> bool:
        return self.outcome is not Outcome.CONTINUE

    @classmethod
    def proceed(cls) -> "Decision":
        return cls(outcome=Outcome.CONTINUE)

    @classmethod
    def stop_success(cls, at: int, confidence: float) -> "Decision":
        return cls(outcome=Outcome.STOP_SUCCESS, at=at, confidence=confidence)

    @classmethod
    def end_failure(cls, at: int) -> "Decision":
        return cls(outcome=Outcome.END_FAILURE, at=at)


@dataclass(slots=True)
class SignificanceRecord:
    """P-values observed at one decision point, keyed by criterion id."""

    decision_index: int
    pvalues: Mapping[str, float]


# Shared non-terminal verdict; Decision is immutable so reuse is safe.
_CONTINUE = Decision.proceed()


class MonitorState:
    """Mutable progress of one monitored test; create via :func:`init_monitor`."""

    def __init__(self, plan: TestPlan, requalify_hits: bool = True):
        self.plan = plan
        self.t = 0
        self.decision = _CONTINUE
        self.requalify_hits = requalify_hits
        variant = plan.variant
        if variant in (PlanVariant.FIXED_ONCE, PlanVariant.FIXED_REPEATED):
            self.hits = {s.criterion_id: 0 for s in plan.criteria}
            self._schedules = {
                s.criterion_id: (
                    s.num_decision_points,
                    s.repetitions_required,
                    s.alpha_entries.entries,
                )
                for s in plan.criteria
            }
        elif variant is PlanVariant.UNLIMITED:
            u = plan.unlimited
            self._rate = u.repetition_rate
            self._min_points = u.min_decision_points
            # alpha * u * s / 4; divide by t to get the current threshold
            self._threshold_scale = plan.alpha * u.repetition_rate * u.min_decision_points / 4.0
            self._sorted_pvalues: list[float] = []
            self._arrival_hits = 0
        else:
            self.subtest_hits = {k: 0 for k in range(1, len(plan.subtests) + 1)}

    @property
    def is_terminal(self) -> bool:
        return self.decision.is_terminal

    def unlimited_hits(self) -> int:
        """Hit count at the current decision index under the active mode."""
        if self.plan.variant is not PlanVariant.UNLIMITED:
            raise DomainError("hit counts by threshold only apply to unlimited plans")
        if not self.requalify_hits:
            return self._arrival_hits
        if self.t == 0:
            return 0
        return bisect_right(self._sorted_pvalues, self._threshold_scale / self.t)


def init_monitor(plan: TestPlan, requalify_hits: bool = True) -> MonitorState:
    """Zeroed monitor for a plan; rejects invalid plans with the violations."""
    require_valid(plan)
    return MonitorState(plan, requalify_hits=requalify_hits)


def update(state: MonitorState, record: SignificanceRecord) -> Decision:
    """Consume the next decision point and return the (possibly terminal) verdict."""
    if state.is_terminal:
        raise StateError(
            f"monitor already terminal ({state.decision.outcome.value} at {state.decision.at})"
        )
    t = record.decision_index
    if t != state.t + 1:
        raise SequencingError(
            f"expected decision index {state.t + 1}, got {t}; "
            "submit skipped checks as p = 1"
        )
    state.t = t
    variant = state.plan.variant
    if variant in (PlanVariant.FIXED_ONCE, PlanVariant.FIXED_REPEATED):
        decision = _update_fixed(state, record)
    elif variant is PlanVariant.UNLIMITED:
        decision = _update_unlimited(state, record)
    else:
        decision = _update_subtests(state, record)
    state.decision = decision
    return decision


def _checked_pvalue(record: SignificanceRecord, criterion_id: str) -> float:
    try:
        p = record.pvalues[criterion_id]
    except KeyError:
        raise SequencingError(
            f"record at t={record.decision_index} is missing criterion {criterion_id!r}"
        ) from None
    if not (0.0 <= p <= 1.0):
        raise DomainError(
            f"p-value for {criterion_id!r} at t={record.decision_index} "
            f"must be in [0, 1], got {p}"
        )
    return p


def _update_fixed(state: MonitorState, record: SignificanceRecord) -> Decision:
    t = record.decision_index
    plan = state.plan
    active = {cid for cid, (d, _, _) in state._schedules.items() if t <= d}
    unknown = set(record.pvalues) - active
    if unknown:
        raise SequencingError(
            f"record at t={t} carries criteria with no scheduled decision point: "
            f"{sorted(unknown)}"
        )
    for cid in active:
        d, reps, entries = state._schedules[cid]
        p = _checked_pvalue(record, cid)
        if p <= entries[t - 1] * reps:
            state.hits[cid] += 1
    if all(
        state.hits[cid] >= reps for cid, (_, reps, _) in state._schedules.items()
    ):
        return Decision.stop_success(at=t, confidence=1.0 - plan.alpha)
    # Pigeonhole: a criterion that cannot collect enough hits from the
    # points it has left makes the whole test's failure certain now.
    for cid, (d, reps, _) in state._schedules.items():
        if state.hits[cid] + max(0, d - t) < reps:
            return Decision.end_failure(at=t)
    return _CONTINUE


def _update_unlimited(state: MonitorState, record: SignificanceRecord) -> Decision:
    t = record.decision_index
    plan = state.plan
    p = _checked_pvalue(record, plan.criterion_id)
    if len(record.pvalues) > 1:
        _reject_unknown(record, plan.criterion_id)
    if state.requalify_hits:
        pvalues = state._sorted_pvalues
        insort(pvalues, p)
        if t >= state._min_points:
            hits = bisect_right(pvalues, state._threshold_scale / t)
            if hits >= ceil_count(state._rate * t):
                return Decision.stop_success(at=t, confidence=1.0 - plan.alpha)
        return _CONTINUE
    if p <= state._threshold_scale / t:
        state._arrival_hits += 1
    if t >= state._min_points and state._arrival_hits >= ceil_count(state._rate * t):
        return Decision.stop_success(at=t, confidence=1.0 - plan.alpha)
    return _CONTINUE


def _update_subtests(state: MonitorState, record: SignificanceRecord) -> Decision:
    t = record.decision_index
    plan = state.plan
    p = _checked_pvalue(record, plan.criterion_id)
    if len(record.pvalues) > 1:
        _reject_unknown(record, plan.criterion_id)
    success_k = None
    all_dead = True
    for k, sub in enumerate(plan.subtests, start=1):
        hits = state.subtest_hits[k]
        if sub.covers(t):
            entry = sub.alpha_entries.entries[t - sub.start_index]
            if p <= entry * sub.repetitions_required:
                hits = state.subtest_hits[k] = hits + 1
        if hits >= sub.repetitions_required and success_k is None:
            success_k = k
        remaining = max(0, sub.end_index - max(t, sub.start_index - 1))
        if hits + remaining >= sub.repetitions_required:
            all_dead = False
    if success_k is not None:
        return Decision.stop_success(at=t, confidence=1.0 - plan.alpha)
    if all_dead:
        return Decision.end_failure(at=t)
    return _CONTINUE


def _reject_unknown(record: SignificanceRecord, criterion_id: str) -> None:
    unknown = set(record.pvalues) - {criterion_id}
    if unknown:
        raise SequencingError(
            f"record at t={record.decision_index} carries unknown criteria: "
            f"{sorted(unknown)}"
        )


def hit_requirement_remaining(state: MonitorState) -> dict[str, int]:
    """Hits still needed per criterion, floored at zero.

    For unlimited plans the requirement is evaluated at the later of the
    current index and the minimum run length; for subtest plans the nearest
    still-achievable subtest's shortfall is reported.
    """
    plan = state.plan
    if plan.variant in (PlanVariant.FIXED_ONCE, PlanVariant.FIXED_REPEATED):
        return {
            cid: max(0, reps - state.hits[cid])
            for cid, (_, reps, _) in state._schedules.items()
        }
    if plan.variant is PlanVariant.UNLIMITED:
        t_eff = max(state.t, state._min_points)
        needed = ceil_count(state._rate * t_eff)
        return {plan.criterion_id: max(0, needed - state.unlimited_hits())}
    shortfalls = [
        max(0, sub.repetitions_required - state.subtest_hits[k])
        for k, sub in enumerate(plan.subtests, start=1)
    ]
    return {plan.criterion_id: min(shortfalls)}


def run_monitor(
    plan: TestPlan,
    records: Iterable[SignificanceRecord],
    requalify_hits: bool = True,
) -> tuple[Decision, MonitorState]:
    """Replay records through a fresh monitor, stopping at the first terminal verdict."""
    state = init_monitor(plan, requalify_hits=requalify_hits)
    decision = state.decision
    for record in records:
        decision = update(state, record)
        if decision.is_terminal:
            break
    return decision, state
