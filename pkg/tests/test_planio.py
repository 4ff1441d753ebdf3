import json

import pytest

from repsig.errors import DomainError, SchemaError, SequencingError
from repsig.monitor import SignificanceRecord
from repsig.planio import (
    PlanDocument,
    dump_plan_document,
    dump_pvalue_log,
    load_plan_document,
    load_pvalue_log,
    plan_from_dict,
    plan_hash,
    plan_to_dict,
)
from repsig.plans import (
    UnlimitedPlan,
    canonical_unlimited_subtests,
    subtest_test_plan,
    uniform_fixed_plan,
    unlimited_test_plan,
)


def sample_plans():
    base = UnlimitedPlan(alpha=0.02, repetition_rate=0.1, min_decision_points=8)
    return [
        uniform_fixed_plan(0.05, [("c1", 20, 1)]),
        uniform_fixed_plan(0.05, [("rev", 10, 1), ("ux", 20, 2)]),
        unlimited_test_plan(0.05, 0.05, 100, "metric"),
        subtest_test_plan(0.02, canonical_unlimited_subtests(base, 3), "metric"),
    ]


class TestPlanDocuments:
    @pytest.mark.parametrize("plan", sample_plans(), ids=lambda p: p.variant.value)
    def test_round_trip_is_identity(self, plan, tmp_path):
        path = tmp_path / "plan.json"
        dump_plan_document(PlanDocument(plan=plan, metadata={"name": "demo"}), path)
        loaded = load_plan_document(path)
        assert loaded.plan == plan
        assert loaded.metadata == {"name": "demo"}
        # serialize -> parse -> serialize is stable
        again = tmp_path / "again.json"
        dump_plan_document(loaded, again)
        assert path.read_text() == again.read_text()

    def test_dict_round_trip_preserves_floats_exactly(self):
        plan = uniform_fixed_plan(0.07, [("c1", 13, 2)])
        again = plan_from_dict(json.loads(json.dumps(plan_to_dict(plan))))
        assert again == plan

    def test_unknown_top_level_field_rejected(self, tmp_path):
        plan = uniform_fixed_plan(0.05, [("c1", 2, 1)])
        doc = PlanDocument(plan=plan).to_dict()
        doc["surprise"] = 1
        path = tmp_path / "plan.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError):
            load_plan_document(path)

    def test_unknown_plan_field_rejected(self, tmp_path):
        plan = uniform_fixed_plan(0.05, [("c1", 2, 1)])
        doc = PlanDocument(plan=plan).to_dict()
        doc["plan"]["criteria"][0]["extra"] = True
        path = tmp_path / "plan.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError):
            load_plan_document(path)

    def test_truncated_json_is_a_schema_error(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"schema_version": 1, "plan": {')
        with pytest.raises(SchemaError):
            load_plan_document(path)

    def test_wrong_schema_version(self, tmp_path):
        path = tmp_path / "plan.json"
        path.write_text(json.dumps({"schema_version": 99, "plan": {}}))
        with pytest.raises(SchemaError):
            load_plan_document(path)

    def test_structurally_valid_but_invalid_plan_loads(self, tmp_path):
        # loading must not gate on plan invariants; validation is separate
        plan = uniform_fixed_plan(0.05, [("c1", 5, 1)])
        doc = PlanDocument(plan=plan).to_dict()
        doc["plan"]["criteria"][0]["repetitions_required"] = 9
        path = tmp_path / "plan.json"
        path.write_text(json.dumps(doc))
        loaded = load_plan_document(path)
        assert loaded.plan.criteria[0].repetitions_required == 9


class TestPlanHash:
    def test_stable_across_processes_and_orderings(self):
        plan = uniform_fixed_plan(0.05, [("c1", 20, 1)])
        h = plan_hash(plan)
        assert len(h) == 64
        assert h == plan_hash(plan_from_dict(plan_to_dict(plan)))

    def test_distinguishes_plans(self):
        a = uniform_fixed_plan(0.05, [("c1", 20, 1)])
        b = uniform_fixed_plan(0.05, [("c1", 20, 2)])
        assert plan_hash(a) != plan_hash(b)


class TestPValueLog:
    def write(self, tmp_path, text):
        path = tmp_path / "log.csv"
        path.write_text(text)
        return path

    def test_round_trip(self, tmp_path):
        records = [
            SignificanceRecord(1, {"a": 0.5, "b": 0.25}),
            SignificanceRecord(2, {"a": 0.125, "b": 1.0}),
        ]
        path = tmp_path / "log.csv"
        dump_pvalue_log(records, path)
        loaded = load_pvalue_log(path)
        assert loaded == records

    def test_header_only_is_empty(self, tmp_path):
        path = self.write(tmp_path, "t,criterion_id,p\n")
        assert load_pvalue_log(path) == []

    def test_wrong_header_rejected(self, tmp_path):
        path = self.write(tmp_path, "time,criterion,p\n1,a,0.5\n")
        with pytest.raises(SchemaError):
            load_pvalue_log(path)

    def test_gap_names_the_row(self, tmp_path):
        path = self.write(tmp_path, "t,criterion_id,p\n1,a,0.5\n3,a,0.5\n")
        with pytest.raises(SequencingError) as err:
            load_pvalue_log(path)
        assert "row 3" in str(err.value)

    def test_unsorted_rows_rejected(self, tmp_path):
        path = self.write(tmp_path, "t,criterion_id,p\n2,a,0.5\n1,a,0.5\n")
        with pytest.raises(SequencingError):
            load_pvalue_log(path)

    def test_duplicate_row_rejected(self, tmp_path):
        path = self.write(tmp_path, "t,criterion_id,p\n1,a,0.5\n1,a,0.4\n")
        with pytest.raises(SequencingError):
            load_pvalue_log(path)

    def test_t_must_start_at_one_per_criterion(self, tmp_path):
        path = self.write(tmp_path, "t,criterion_id,p\n1,a,0.5\n2,a,0.5\n2,b,0.5\n")
        with pytest.raises(SequencingError):
            load_pvalue_log(path)

    def test_p_out_of_range_is_a_domain_error(self, tmp_path):
        path = self.write(tmp_path, "t,criterion_id,p\n1,a,1.5\n")
        with pytest.raises(DomainError):
            load_pvalue_log(path)

    def test_non_numeric_cell_is_a_schema_error(self, tmp_path):
        path = self.write(tmp_path, "t,criterion_id,p\n1,a,abc\n")
        with pytest.raises(SchemaError):
            load_pvalue_log(path)

    def test_full_precision_round_trip(self, tmp_path):
        p = 0.1234567890123456789
        path = tmp_path / "log.csv"
        dump_pvalue_log([SignificanceRecord(1, {"a": p})], path)
        assert load_pvalue_log(path)[0].pvalues["a"] == p
