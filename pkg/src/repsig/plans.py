"""A-priori test plans: schedules, budgets, and p-value thresholds.

A plan commits, before any data arrives, to the decision-point schedule, the
alpha spending, and the repetition requirements. Four variants cover the
supported designs:

* ``fixed_once`` - bounded schedules, each criterion must hit once.
* ``fixed_repeated`` - bounded schedules with per-criterion repetition counts.
* ``unlimited`` - single criterion, unbounded horizon, fixed repetition rate.
* ``general_subtests`` - single criterion, windowed subtests, each with its
  own budget and repetition count.

Validation returns violations as values so a bad plan can be inspected;
:func:`require_valid` converts them into an exception for call sites that
need a hard gate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .alpha_spend import AlphaPartition, uniform_partition
from .errors import DomainError, PlanInvalidError

__all__ = [
    "PlanVariant",
    "CriterionSchedule",
    "Subtest",
    "UnlimitedPlan",
    "TestPlan",
    "validate_plan",
    "require_valid",
    "threshold",
    "subtest_thresholds",
    "canonical_unlimited_subtests",
    "uniform_fixed_plan",
    "uniform_rate_plan",
    "unlimited_test_plan",
    "subtest_test_plan",
    "ceil_count",
    "WINDOW_MATERIALIZE_LIMIT",
]

# Largest subtest window we will materialize entries for; beyond this the
# canonical waypoint schedule refuses with an error naming the last usable k.
WINDOW_MATERIALIZE_LIMIT = 1 << 22

_BUDGET_TOL = 1e-12


class PlanVariant(str, Enum):
    FIXED_ONCE = "fixed_once"
    FIXED_REPEATED = "fixed_repeated"
    UNLIMITED = "unlimited"
    GENERAL_SUBTESTS = "general_subtests"


@dataclass(frozen=True)
class CriterionSchedule:
    """Per-criterion schedule: d_i decision points, r_i required hits."""

    criterion_id: str
    num_decision_points: int
    repetitions_required: int
    alpha_entries: AlphaPartition


@dataclass(frozen=True)
class Subtest:
    """A windowed sub-plan over decision points start..end inclusive."""

    start_index: int
    end_index: int
    repetitions_required: int
    alpha_entries: AlphaPartition

    @property
    def window(self) -> int:
        return self.end_index - self.start_index + 1

    def covers(self, t: int) -> bool:
        return self.start_index <= t <= self.end_index


@dataclass(frozen=True)
class UnlimitedPlan:
    """Unbounded-horizon design: repetition rate u, minimum run length s."""

    alpha: float
    repetition_rate: float
    min_decision_points: int


@dataclass(frozen=True)
class TestPlan:
    """One committed test design; exactly one schedule family is populated.

    ``criteria`` carries the fixed variants, ``subtests`` the general variant,
    ``unlimited`` the unbounded variant. The single-criterion variants name
    their criterion via ``criterion_id``.
    """

    variant: PlanVariant
    alpha: float
    criteria: tuple[CriterionSchedule, ...] = ()
    subtests: tuple[Subtest, ...] = ()
    unlimited: UnlimitedPlan | None = None
    criterion_id: str | None = None

    def schedule_for(self, criterion_id: str) -> CriterionSchedule:
        for schedule in self.criteria:
            if schedule.criterion_id == criterion_id:
                return schedule
        raise DomainError(f"unknown criterion id {criterion_id!r}")

    def criterion_ids(self) -> tuple[str, ...]:
        if self.variant in (PlanVariant.FIXED_ONCE, PlanVariant.FIXED_REPEATED):
            return tuple(s.criterion_id for s in self.criteria)
        return (self.criterion_id,) if self.criterion_id else ()

    def max_decision_index(self) -> int | None:
        """Last scheduled decision point, or None for unbounded plans."""
        if self.variant is PlanVariant.UNLIMITED:
            return None
        if self.variant is PlanVariant.GENERAL_SUBTESTS:
            return max(s.end_index for s in self.subtests) if self.subtests else 0
        return max((s.num_decision_points for s in self.criteria), default=0)


def validate_plan(plan: TestPlan) -> list[str]:
    """Check every plan invariant; an empty list means the plan is valid."""
    violations: list[str] = []
    if not (0.0 < plan.alpha < 1.0):
        violations.append(f"alpha must be in (0, 1), got {plan.alpha}")
        return violations

    if plan.variant in (PlanVariant.FIXED_ONCE, PlanVariant.FIXED_REPEATED):
        _validate_fixed(plan, violations)
    elif plan.variant is PlanVariant.UNLIMITED:
        _validate_unlimited(plan, violations)
    elif plan.variant is PlanVariant.GENERAL_SUBTESTS:
        _validate_subtests(plan, violations)
    else:
        violations.append(f"unknown plan variant {plan.variant!r}")
    return violations


def require_valid(plan: TestPlan) -> TestPlan:
    """Return the plan unchanged, or raise :class:`PlanInvalidError`."""
    violations = validate_plan(plan)
    if violations:
        raise PlanInvalidError(violations)
    return plan


def _validate_fixed(plan: TestPlan, violations: list[str]) -> None:
    if not plan.criteria:
        violations.append("fixed plan has no criterion schedules")
        return
    if plan.subtests or plan.unlimited is not None or plan.criterion_id is not None:
        violations.append("fixed plan must populate only 'criteria'")
    seen: set[str] = set()
    for sched in plan.criteria:
        name = sched.criterion_id
        if not name:
            violations.append("criterion id must be a non-empty string")
        elif name in seen:
            violations.append(f"duplicate criterion id {name!r}")
        seen.add(name)
        if sched.num_decision_points < 1:
            violations.append(f"criterion {name!r}: needs at least one decision point")
        if not (1 <= sched.repetitions_required <= sched.num_decision_points):
            violations.append(
                f"criterion {name!r}: repetitions {sched.repetitions_required} "
                f"outside 1..{sched.num_decision_points}"
            )
        if plan.variant is PlanVariant.FIXED_ONCE and sched.repetitions_required != 1:
            violations.append(
                f"criterion {name!r}: fixed_once requires exactly one repetition"
            )
        if len(sched.alpha_entries) != sched.num_decision_points:
            violations.append(
                f"criterion {name!r}: {len(sched.alpha_entries)} alpha entries for "
                f"{sched.num_decision_points} decision points"
            )
    _check_budget(
        plan,
        (e for s in plan.criteria for e in s.alpha_entries.entries),
        violations,
        exact=True,
    )


def _validate_unlimited(plan: TestPlan, violations: list[str]) -> None:
    u = plan.unlimited
    if u is None:
        violations.append("unlimited plan is missing its schedule")
        return
    if plan.criteria or plan.subtests:
        violations.append("unlimited plan must populate only 'unlimited'")
    if not plan.criterion_id:
        violations.append("unlimited plan needs a criterion id")
    if not (0.0 < u.repetition_rate < 1.0):
        violations.append(f"repetition rate must be in (0, 1), got {u.repetition_rate}")
    if u.min_decision_points < 1:
        violations.append(f"minimum decision points must be >= 1, got {u.min_decision_points}")
    if not math.isclose(u.alpha, plan.alpha, rel_tol=0.0, abs_tol=_BUDGET_TOL):
        violations.append(
            f"unlimited schedule alpha {u.alpha} differs from plan alpha {plan.alpha}"
        )


def _validate_subtests(plan: TestPlan, violations: list[str]) -> None:
    if not plan.subtests:
        violations.append("general-subtests plan has no subtests")
        return
    if plan.criteria or plan.unlimited is not None:
        violations.append("general-subtests plan must populate only 'subtests'")
    if not plan.criterion_id:
        violations.append("general-subtests plan needs a criterion id")
    for k, sub in enumerate(plan.subtests, start=1):
        if sub.start_index < 1:
            violations.append(f"subtest {k}: start index must be >= 1")
        if sub.end_index < sub.start_index:
            violations.append(
                f"subtest {k}: end index {sub.end_index} before start {sub.start_index}"
            )
            continue
        if not (1 <= sub.repetitions_required <= sub.window):
            violations.append(
                f"subtest {k}: repetitions {sub.repetitions_required} exceed "
                f"window of width {sub.window}"
            )
        if len(sub.alpha_entries) != sub.window:
            violations.append(
                f"subtest {k}: {len(sub.alpha_entries)} alpha entries for a "
                f"window of width {sub.window}"
            )
    # Truncated schedules (e.g. the waypoint sequence) legitimately
    # under-spend, so only the upper bound is enforced here.
    _check_budget(
        plan,
        (e for s in plan.subtests for e in s.alpha_entries.entries),
        violations,
        exact=False,
    )


def _check_budget(
    plan: TestPlan, entries: Iterable[float], violations: list[str], exact: bool
) -> None:
    spent = math.fsum(entries)
    if spent > plan.alpha + _BUDGET_TOL:
        violations.append(f"budget exceeded: entries sum to {spent} > alpha {plan.alpha}")
    elif exact and spent < plan.alpha - _BUDGET_TOL:
        violations.append(f"budget underspent: entries sum to {spent} < alpha {plan.alpha}")


def threshold(plan: TestPlan, criterion_id: str, decision_index: int) -> float:
    """Required p-value for a criterion at one decision point.

    Fixed variants: alpha_it * r_i. Unlimited: alpha * u * s / (4t).
    General subtests: the loosest covering subtest's alpha_kt * r_k (a point
    covered by no window returns 0.0; nothing can register a hit there).
    """
    if decision_index < 1:
        raise DomainError(f"decision index must be >= 1, got {decision_index}")
    if plan.variant in (PlanVariant.FIXED_ONCE, PlanVariant.FIXED_REPEATED):
        sched = plan.schedule_for(criterion_id)
        if decision_index > sched.num_decision_points:
            raise DomainError(
                f"decision index {decision_index} beyond the {sched.num_decision_points} "
                f"scheduled for criterion {criterion_id!r}"
            )
        return sched.alpha_entries.entries[decision_index - 1] * sched.repetitions_required
    if plan.variant is PlanVariant.UNLIMITED:
        _check_single_criterion(plan, criterion_id)
        u = plan.unlimited
        return plan.alpha * u.repetition_rate * u.min_decision_points / (4.0 * decision_index)
    _check_single_criterion(plan, criterion_id)
    last = plan.max_decision_index()
    if decision_index > last:
        raise DomainError(f"decision index {decision_index} beyond the last window end {last}")
    per_subtest = subtest_thresholds(plan, decision_index)
    return max(per_subtest.values(), default=0.0)


def subtest_thresholds(plan: TestPlan, decision_index: int) -> dict[int, float]:
    """Per-subtest required p-values at one decision point (1-based keys).

    Only subtests whose window covers the index appear.
    """
    if plan.variant is not PlanVariant.GENERAL_SUBTESTS:
        raise DomainError("subtest thresholds only apply to general-subtests plans")
    out: dict[int, float] = {}
    for k, sub in enumerate(plan.subtests, start=1):
        if sub.covers(decision_index):
            entry = sub.alpha_entries.entries[decision_index - sub.start_index]
            out[k] = entry * sub.repetitions_required
    return out


def ceil_count(x: float) -> int:
    """Ceiling with a snap for products that are integers in exact arithmetic.

    Fractions like 0.05 * 480 carry float noise of order 1e-14; snapping
    within 1e-9 of an integer keeps repetition counts at their exact-real
    values.
    """
    nearest = round(x)
    if abs(x - nearest) < 1e-9:
        return int(nearest)
    return math.ceil(x)


def canonical_unlimited_subtests(plan: UnlimitedPlan, max_k: int) -> list[Subtest]:
    """The waypoint subtest schedule that realizes an unlimited plan.

    Subtest k spans decision points 1..2^k * s, receives budget alpha * 2^-k
    spread uniformly over its window, and requires ceil(u * 2^k * s / 2)
    hits. Budgets over k = 1..infinity sum to alpha, so any truncation stays
    under budget.
    """
    if max_k < 1:
        raise DomainError(f"max_k must be >= 1, got {max_k}")
    u = plan.repetition_rate
    s = plan.min_decision_points
    if not (0.0 < u < 1.0) or s < 1:
        raise DomainError("unlimited plan fields out of range")
    subtests: list[Subtest] = []
    for k in range(1, max_k + 1):
        window_end = (1 << k) * s
        if window_end > WINDOW_MATERIALIZE_LIMIT:
            usable = max((WINDOW_MATERIALIZE_LIMIT // s).bit_length() - 1, 0)
            raise DomainError(
                f"window 2^{k} * {s} = {window_end} exceeds the materialization "
                f"limit {WINDOW_MATERIALIZE_LIMIT}; the largest usable k is {usable}"
            )
        alpha_k = plan.alpha * 2.0 ** (-k)
        reps = ceil_count(u * window_end / 2.0)
        subtests.append(
            Subtest(
                start_index=1,
                end_index=window_end,
                repetitions_required=reps,
                alpha_entries=uniform_partition(alpha_k, window_end),
            )
        )
    return subtests


def uniform_fixed_plan(
    alpha: float, specs: Sequence[tuple[str, int, int]]
) -> TestPlan:
    """Build a fixed plan with uniform spending from (id, d_i, r_i) triples.

    The budget is split evenly over criteria, then evenly over each
    criterion's decision points.
    """
    if not specs:
        raise DomainError("at least one criterion spec is required")
    share = alpha / len(specs)
    criteria = tuple(
        CriterionSchedule(
            criterion_id=cid,
            num_decision_points=d,
            repetitions_required=r,
            alpha_entries=uniform_partition(share, d),
        )
        for cid, d, r in specs
    )
    variant = (
        PlanVariant.FIXED_ONCE
        if all(s.repetitions_required == 1 for s in criteria)
        else PlanVariant.FIXED_REPEATED
    )
    return TestPlan(variant=variant, alpha=alpha, criteria=criteria)


def uniform_rate_plan(
    alpha: float, num_points: int, rate: float, criterion_id: str = "criterion"
) -> TestPlan:
    """Single-criterion fixed plan requiring a fraction ``rate`` of hits.

    Uses r = ceil(rate * d), so the per-point threshold (alpha/d) * r equals
    rate * alpha whenever rate * d is integral, independent of d.
    """
    if not (0.0 < rate <= 1.0):
        raise DomainError(f"rate must be in (0, 1], got {rate}")
    reps = ceil_count(rate * num_points)
    return uniform_fixed_plan(alpha, [(criterion_id, num_points, reps)])


def unlimited_test_plan(
    alpha: float,
    repetition_rate: float,
    min_decision_points: int,
    criterion_id: str = "criterion",
) -> TestPlan:
    return TestPlan(
        variant=PlanVariant.UNLIMITED,
        alpha=alpha,
        unlimited=UnlimitedPlan(
            alpha=alpha,
            repetition_rate=repetition_rate,
            min_decision_points=min_decision_points,
        ),
        criterion_id=criterion_id,
    )


def subtest_test_plan(
    alpha: float, subtests: Iterable[Subtest], criterion_id: str = "criterion"
) -> TestPlan:
    return TestPlan(
        variant=PlanVariant.GENERAL_SUBTESTS,
        alpha=alpha,
        subtests=tuple(subtests),
        criterion_id=criterion_id,
    )


def _check_single_criterion(plan: TestPlan, criterion_id: str) -> None:
    if criterion_id != plan.criterion_id:
        raise DomainError(
            f"unknown criterion id {criterion_id!r}; this plan tracks {plan.criterion_id!r}"
        )
