"""File formats: JSON plan documents, p-value log CSV, and plan hashing.

Plan documents are strict: unknown fields are rejected so the a-priori
commitment is unambiguous, and numbers round-trip exactly (Python's JSON
float encoding is shortest-repr, which is lossless for doubles). The plan
hash is the SHA-256 of the canonical plan serialization and identifies the
commitment in reports.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .alpha_spend import AlphaPartition
from .errors import DomainError, SchemaError, SequencingError
from .monitor import SignificanceRecord
from .plans import CriterionSchedule, PlanVariant, Subtest, TestPlan, UnlimitedPlan

__all__ = [
    "SCHEMA_VERSION",
    "PlanDocument",
    "plan_to_dict",
    "plan_from_dict",
    "load_plan_document",
    "dump_plan_document",
    "plan_hash",
    "require_keys",
    "PVALUE_LOG_HEADER",
    "load_pvalue_log",
    "dump_pvalue_log",
]

SCHEMA_VERSION = 1

PVALUE_LOG_HEADER = ("t", "criterion_id", "p")


@dataclass(frozen=True)
class PlanDocument:
    """A plan plus free-form metadata (experiment name, author, notes)."""

    plan: TestPlan
    metadata: Mapping[str, object] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "plan": plan_to_dict(self.plan),
            "metadata": dict(self.metadata),
        }


def require_keys(obj: dict, where: str, required: set[str], optional: set[str] = frozenset()):
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object, got {type(obj).__name__}")
    missing = required - obj.keys()
    if missing:
        raise SchemaError(f"{where}: missing fields {sorted(missing)}")
    unknown = obj.keys() - required - optional
    if unknown:
        raise SchemaError(f"{where}: unknown fields {sorted(unknown)}")


def _partition_to_dict(p: AlphaPartition) -> dict:
    return {"entries": list(p.entries), "total": p.total}


def _partition_from_dict(obj: dict, where: str) -> AlphaPartition:
    require_keys(obj, where, {"entries", "total"})
    entries = obj["entries"]
    if not isinstance(entries, list) or not all(
        isinstance(e, (int, float)) for e in entries
    ):
        raise SchemaError(f"{where}: entries must be a list of numbers")
    return AlphaPartition(entries=tuple(float(e) for e in entries), total=float(obj["total"]))


def plan_to_dict(plan: TestPlan) -> dict:
    out: dict = {"variant": plan.variant.value, "alpha": plan.alpha}
    if plan.variant in (PlanVariant.FIXED_ONCE, PlanVariant.FIXED_REPEATED):
        out["criteria"] = [
            {
                "criterion_id": s.criterion_id,
                "num_decision_points": s.num_decision_points,
                "repetitions_required": s.repetitions_required,
                "alpha_entries": _partition_to_dict(s.alpha_entries),
            }
            for s in plan.criteria
        ]
    elif plan.variant is PlanVariant.UNLIMITED:
        u = plan.unlimited
        out["criterion_id"] = plan.criterion_id
        out["unlimited"] = {
            "alpha": u.alpha,
            "repetition_rate": u.repetition_rate,
            "min_decision_points": u.min_decision_points,
        }
    else:
        out["criterion_id"] = plan.criterion_id
        out["subtests"] = [
            {
                "start_index": s.start_index,
                "end_index": s.end_index,
                "repetitions_required": s.repetitions_required,
                "alpha_entries": _partition_to_dict(s.alpha_entries),
            }
            for s in plan.subtests
        ]
    return out


def plan_from_dict(obj: dict) -> TestPlan:
    """Rebuild a plan from its serialized form; shape errors raise SchemaError.

    Plan-level invariants are deliberately not checked here so a structurally
    well-formed but invalid plan can still be loaded and then validated.
    """
    if not isinstance(obj, dict) or "variant" not in obj:
        raise SchemaError("plan: expected an object with a 'variant' field")
    try:
        variant = PlanVariant(obj["variant"])
    except ValueError:
        raise SchemaError(f"plan: unknown variant {obj['variant']!r}") from None
    if variant in (PlanVariant.FIXED_ONCE, PlanVariant.FIXED_REPEATED):
        require_keys(obj, "plan", {"variant", "alpha", "criteria"})
        criteria = []
        for i, c in enumerate(obj["criteria"], start=1):
            where = f"plan.criteria[{i}]"
            require_keys(
                c,
                where,
                {"criterion_id", "num_decision_points", "repetitions_required", "alpha_entries"},
            )
            criteria.append(
                CriterionSchedule(
                    criterion_id=str(c["criterion_id"]),
                    num_decision_points=int(c["num_decision_points"]),
                    repetitions_required=int(c["repetitions_required"]),
                    alpha_entries=_partition_from_dict(c["alpha_entries"], where),
                )
            )
        return TestPlan(variant=variant, alpha=float(obj["alpha"]), criteria=tuple(criteria))
    if variant is PlanVariant.UNLIMITED:
        require_keys(obj, "plan", {"variant", "alpha", "criterion_id", "unlimited"})
        u = obj["unlimited"]
        require_keys(u, "plan.unlimited", {"alpha", "repetition_rate", "min_decision_points"})
        return TestPlan(
            variant=variant,
            alpha=float(obj["alpha"]),
            criterion_id=str(obj["criterion_id"]),
            unlimited=UnlimitedPlan(
                alpha=float(u["alpha"]),
                repetition_rate=float(u["repetition_rate"]),
                min_decision_points=int(u["min_decision_points"]),
            ),
        )
    require_keys(obj, "plan", {"variant", "alpha", "criterion_id", "subtests"})
    subtests = []
    for i, s in enumerate(obj["subtests"], start=1):
        where = f"plan.subtests[{i}]"
        require_keys(
            s, where, {"start_index", "end_index", "repetitions_required", "alpha_entries"}
        )
        subtests.append(
            Subtest(
                start_index=int(s["start_index"]),
                end_index=int(s["end_index"]),
                repetitions_required=int(s["repetitions_required"]),
                alpha_entries=_partition_from_dict(s["alpha_entries"], where),
            )
        )
    return TestPlan(
        variant=variant,
        alpha=float(obj["alpha"]),
        criterion_id=str(obj["criterion_id"]),
        subtests=tuple(subtests),
    )


def load_plan_document(path: str | Path) -> PlanDocument:
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    require_keys(obj, "document", {"schema_version", "plan"}, {"metadata"})
    version = obj["schema_version"]
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version}; this build reads {SCHEMA_VERSION}")
    metadata = obj.get("metadata", {})
    if not isinstance(metadata, dict):
        raise SchemaError("document.metadata must be an object")
    return PlanDocument(plan=plan_from_dict(obj["plan"]), metadata=metadata)


def dump_plan_document(doc: PlanDocument, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(doc.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def plan_hash(plan: TestPlan) -> str:
    """SHA-256 of the canonical plan serialization (audit identifier)."""
    canonical = json.dumps(plan_to_dict(plan), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_pvalue_log(path: str | Path) -> list[SignificanceRecord]:
    """Read a `t,criterion_id,p` CSV into per-decision-point records.

    Enforces the log contract: exact header, t starting at 1 and
    nondecreasing, one row per (t, criterion), and a gap-free index sequence
    for every criterion. Violations name the offending row.
    """
    records: dict[int, dict[str, float]] = {}
    last_seen: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            return []
        if tuple(h.strip() for h in header) != PVALUE_LOG_HEADER:
            raise SchemaError(
                f"{path}: expected header {','.join(PVALUE_LOG_HEADER)!r}, got {','.join(header)!r}"
            )
        prev_t = 0
        for row_num, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise SchemaError(f"{path}: row {row_num}: expected 3 columns, got {len(row)}")
            try:
                t = int(row[0])
                p = float(row[2])
            except ValueError as exc:
                raise SchemaError(f"{path}: row {row_num}: {exc}") from None
            cid = row[1].strip()
            if not cid:
                raise SchemaError(f"{path}: row {row_num}: empty criterion id")
            if t < 1:
                raise SequencingError(f"{path}: row {row_num}: t must start at 1, got {t}")
            if t < prev_t:
                raise SequencingError(
                    f"{path}: row {row_num}: rows must be sorted by t ({t} after {prev_t})"
                )
            prev_t = t
            if not (0.0 <= p <= 1.0):
                raise DomainError(f"{path}: row {row_num}: p must be in [0, 1], got {p}")
            expected = last_seen.get(cid, 0) + 1
            if t != expected:
                raise SequencingError(
                    f"{path}: row {row_num}: criterion {cid!r} jumps from t={expected - 1} "
                    f"to t={t}; submit skipped checks as p = 1"
                )
            last_seen[cid] = t
            records.setdefault(t, {})[cid] = p
    return [SignificanceRecord(t, records[t]) for t in sorted(records)]


def dump_pvalue_log(records: Iterable[SignificanceRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(PVALUE_LOG_HEADER)
        for record in records:
            for cid in record.pvalues:
                writer.writerow([record.decision_index, cid, repr(record.pvalues[cid])])
