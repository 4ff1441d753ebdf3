import csv
import io
import json

import pytest

from repsig.cli import main
from repsig.monitor import SignificanceRecord
from repsig.planio import PlanDocument, dump_plan_document, dump_pvalue_log, plan_to_dict
from repsig.plans import uniform_fixed_plan, unlimited_test_plan


def write_plan(tmp_path, plan, name="plan.json"):
    path = tmp_path / name
    dump_plan_document(PlanDocument(plan=plan), path)
    return path


def write_sim_config(tmp_path, plan, stream, trials=None, comparator=None, name="sim.json"):
    obj = {"schema_version": 1, "plan": plan_to_dict(plan), "stream": stream}
    if trials is not None:
        obj["trials"] = trials
    if comparator is not None:
        obj["compare_always_valid"] = comparator
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return path


def parse_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


GAUSS_NULL = {
    "distribution": {"kind": "gaussian", "mu": 0.0, "sigma": 1.0},
    "n_max": 400,
    "decision_every": 20,
    "seed": 99,
}


class TestPlanValidate:
    def test_valid_plan_exits_zero(self, tmp_path, capsys):
        path = write_plan(tmp_path, uniform_fixed_plan(0.05, [("c1", 20, 2)]))
        assert main(["plan", "validate", str(path)]) == 0
        assert "ok" in capsys.readouterr().out

    def test_budget_violation_exits_one_and_names_it(self, tmp_path, capsys):
        plan = uniform_fixed_plan(0.05, [("c1", 20, 2)])
        doc = PlanDocument(plan=plan).to_dict()
        doc["plan"]["alpha"] = 0.04  # entries now sum past the budget
        path = tmp_path / "plan.json"
        path.write_text(json.dumps(doc))
        assert main(["plan", "validate", str(path)]) == 1
        assert "budget exceeded" in capsys.readouterr().err

    def test_truncated_json_exits_two(self, tmp_path):
        path = tmp_path / "plan.json"
        path.write_text('{"schema_version": 1,')
        assert main(["plan", "validate", str(path)]) == 2

    def test_missing_file_exits_two(self, tmp_path):
        assert main(["plan", "validate", str(tmp_path / "nope.json")]) == 2

    def test_json_mode_lists_violations(self, tmp_path, capsys):
        plan = uniform_fixed_plan(0.05, [("c1", 5, 9)])
        path = write_plan(tmp_path, plan)
        assert main(["plan", "validate", str(path), "--json"]) == 1
        payload = json.loads(capsys.readouterr().out)
        assert payload["ok"] is False
        assert payload["violations"]


class TestThresholds:
    def test_uniform_plan_table(self, tmp_path, capsys):
        path = write_plan(tmp_path, uniform_fixed_plan(0.05, [("c1", 20, 1)]))
        assert main(["thresholds", str(path)]) == 0
        header, rows = parse_csv(capsys.readouterr().out)
        assert header == ["t", "threshold_p", "required_z"]
        assert len(rows) == 20
        for t, thr, z in rows:
            assert float(thr) == pytest.approx(0.0025, rel=1e-12)
            assert float(z) == pytest.approx(3.02, abs=0.01)

    def test_final_weighted_plan_scores(self, tmp_path, capsys):
        from repsig.alpha_spend import FinalWeightedConfig, final_weighted_partition
        from repsig.plans import CriterionSchedule, PlanVariant, TestPlan as Plan

        part = final_weighted_partition(0.05, FinalWeightedConfig(theta=0.5, d=20))
        plan = Plan(
            variant=PlanVariant.FIXED_ONCE,
            alpha=0.05,
            criteria=(CriterionSchedule("c1", 20, 1, part),),
        )
        path = write_plan(tmp_path, plan)
        assert main(["thresholds", str(path)]) == 0
        _, rows = parse_csv(capsys.readouterr().out)
        assert float(rows[-1][2]) == pytest.approx(2.24, abs=0.01)
        for row in rows[:-1]:
            assert float(row[2]) == pytest.approx(3.21, abs=0.01)

    def test_unlimited_needs_points_and_matches_formula(self, tmp_path, capsys):
        path = write_plan(tmp_path, unlimited_test_plan(0.05, 0.05, 100))
        assert main(["thresholds", str(path)]) == 1
        capsys.readouterr()
        assert main(["thresholds", str(path), "--points", "400..400"]) == 0
        _, rows = parse_csv(capsys.readouterr().out)
        assert float(rows[0][1]) == pytest.approx(1.5625e-4, rel=1e-9)

    def test_unknown_criterion_exits_one(self, tmp_path):
        path = write_plan(tmp_path, uniform_fixed_plan(0.05, [("c1", 20, 1)]))
        assert main(["thresholds", str(path), "--criterion", "nope"]) == 1

    def test_rate_family_is_invariant_across_d(self, tmp_path, capsys):
        from repsig.plans import uniform_rate_plan

        outputs = []
        for d in (20, 480):
            path = write_plan(tmp_path, uniform_rate_plan(0.05, d, 0.05), f"p{d}.json")
            assert main(["thresholds", str(path), "--points", "1..10"]) == 0
            outputs.append(capsys.readouterr().out)
        assert outputs[0] == outputs[1]

    def test_out_file(self, tmp_path):
        path = write_plan(tmp_path, uniform_fixed_plan(0.05, [("c1", 5, 1)]))
        out = tmp_path / "table.csv"
        assert main(["thresholds", str(path), "--out", str(out)]) == 0
        assert out.read_text().startswith("t,threshold_p,required_z")


class TestMonitorCommand:
    def test_single_hit_stops(self, tmp_path, capsys):
        plan_path = write_plan(tmp_path, uniform_fixed_plan(0.05, [("c1", 20, 1)]))
        log_path = tmp_path / "log.csv"
        dump_pvalue_log(
            [SignificanceRecord(1, {"c1": 0.9}), SignificanceRecord(2, {"c1": 0.001})],
            log_path,
        )
        assert main(["monitor", str(plan_path), str(log_path)]) == 0
        assert "stop_success at t=2" in capsys.readouterr().out

    def test_all_ones_log_fails_at_final_point(self, tmp_path, capsys):
        plan_path = write_plan(tmp_path, uniform_fixed_plan(0.05, [("c1", 20, 1)]))
        log_path = tmp_path / "log.csv"
        dump_pvalue_log(
            [SignificanceRecord(t, {"c1": 1.0}) for t in range(1, 21)], log_path
        )
        assert main(["monitor", str(plan_path), str(log_path)]) == 0
        assert "end_failure at t=20" in capsys.readouterr().out

    def test_empty_log_continues_with_full_requirements(self, tmp_path, capsys):
        plan_path = write_plan(tmp_path, uniform_fixed_plan(0.05, [("c1", 20, 2)]))
        log_path = tmp_path / "log.csv"
        log_path.write_text("t,criterion_id,p\n")
        assert main(["monitor", str(plan_path), str(log_path)]) == 0
        out = capsys.readouterr().out
        assert "continue" in out
        assert "c1: 2" in out

    def test_gap_in_log_exits_one_naming_row(self, tmp_path, capsys):
        plan_path = write_plan(tmp_path, uniform_fixed_plan(0.05, [("c1", 20, 1)]))
        log_path = tmp_path / "log.csv"
        log_path.write_text("t,criterion_id,p\n1,c1,0.9\n3,c1,0.9\n")
        assert main(["monitor", str(plan_path), str(log_path)]) == 1
        assert "row 3" in capsys.readouterr().err

    def test_json_output(self, tmp_path, capsys):
        plan_path = write_plan(tmp_path, uniform_fixed_plan(0.05, [("c1", 20, 1)]))
        log_path = tmp_path / "log.csv"
        dump_pvalue_log([SignificanceRecord(1, {"c1": 0.0001})], log_path)
        assert main(["monitor", str(plan_path), str(log_path), "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["decision"]["outcome"] == "stop_success"
        assert payload["decision"]["at"] == 1


class TestCurves:
    def test_fig4_contains_quoted_values(self, capsys):
        assert main(["curves", "fig4"]) == 0
        header, rows = parse_csv(capsys.readouterr().out)
        assert header == ["dm", "z_alpha_0.1", "z_alpha_0.05", "z_alpha_0.01"]
        table = {int(r[0]): [float(x) for x in r[1:]] for r in rows}
        assert table[1][1] == pytest.approx(1.96, abs=0.01)
        assert table[2][1] == pytest.approx(2.24, abs=0.01)
        assert table[20][1] == pytest.approx(3.02, abs=0.01)

    def test_fig5_reference_row_is_one(self, capsys):
        assert main(["curves", "fig5"]) == 0
        header, rows = parse_csv(capsys.readouterr().out)
        assert header == ["p", "z", "size_ratio"]
        by_p = {float(r[0]): float(r[2]) for r in rows}
        assert by_p[0.05] == pytest.approx(1.0, rel=1e-12)

    def test_fig6_no_repetition_baseline(self, capsys):
        assert main(["curves", "fig6"]) == 0
        _, rows = parse_csv(capsys.readouterr().out)
        by_u = {float(r[0]): float(r[2]) for r in rows}
        assert by_u[1.0] == pytest.approx(1.96, abs=0.01)
        assert by_u[0.05] == pytest.approx(3.02, abs=0.01)

    def test_fig7_columns_and_flat_line(self, capsys):
        assert main(["curves", "fig7", "--t-max", "100000", "--rho", "0.009"]) == 0
        captured = capsys.readouterr()
        header, rows = parse_csv(captured.out)
        assert header == ["t", "z_always_valid", "z_repetition"]
        flat = {float(r[2]) for r in rows}
        assert len(flat) == 1
        assert flat.pop() == pytest.approx(3.02, abs=0.01)

    def test_unknown_figure_exits_nonzero(self):
        with pytest.raises(SystemExit):
            main(["curves", "fig9"])

    def test_stable_across_invocations(self, capsys):
        assert main(["curves", "fig6"]) == 0
        first = capsys.readouterr().out
        assert main(["curves", "fig6"]) == 0
        assert capsys.readouterr().out == first

    def test_renders_figure_file(self, tmp_path):
        out = tmp_path / "fig4.csv"
        fig = tmp_path / "fig4.png"
        assert main(["curves", "fig4", "--out", str(out), "--fig", str(fig)]) == 0
        assert out.exists()
        assert fig.stat().st_size > 0


class TestSimulateCommand:
    def test_reports_are_byte_identical(self, tmp_path):
        plan = uniform_fixed_plan(0.05, [("c1", 20, 1)])
        config = write_sim_config(tmp_path, plan, GAUSS_NULL, trials=40)
        out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["simulate", str(config), "--out", str(out_a)]) == 0
        assert main(["simulate", str(config), "--out", str(out_b)]) == 0
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_trials_zero_exits_one(self, tmp_path):
        plan = uniform_fixed_plan(0.05, [("c1", 20, 1)])
        config = write_sim_config(tmp_path, plan, GAUSS_NULL)
        assert main(["simulate", str(config), "--trials", "0"]) == 1

    def test_config_mismatch_exits_one(self, tmp_path):
        plan = uniform_fixed_plan(0.05, [("c1", 200, 1)])
        config = write_sim_config(tmp_path, plan, GAUSS_NULL, trials=5)
        assert main(["simulate", str(config)]) == 1

    def test_env_seed_is_used(self, tmp_path, monkeypatch, capsys):
        plan = uniform_fixed_plan(0.05, [("c1", 20, 1)])
        stream = dict(GAUSS_NULL)
        del stream["seed"]
        config = write_sim_config(tmp_path, plan, stream, trials=10)
        assert main(["simulate", str(config)]) == 1  # no seed anywhere
        capsys.readouterr()
        monkeypatch.setenv("REPSIG_SEED", "4242")
        assert main(["simulate", str(config)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["seed"] == 4242

    def test_histogram_and_figure_outputs(self, tmp_path):
        plan = uniform_fixed_plan(0.05, [("c1", 5, 1)])
        stream = {
            "distribution": {"kind": "gaussian", "mu": 0.5, "sigma": 1.0},
            "n_max": 50,
            "decision_every": 10,
            "seed": 3,
        }
        config = write_sim_config(tmp_path, plan, stream, trials=30)
        hist = tmp_path / "hist.csv"
        fig = tmp_path / "stops.png"
        out = tmp_path / "report.json"
        assert main(
            [
                "simulate",
                str(config),
                "--out",
                str(out),
                "--hist",
                str(hist),
                "--fig",
                str(fig),
            ]
        ) == 0
        header, rows = parse_csv(hist.read_text())
        assert header == ["stop_index", "count"]
        assert sum(int(r[1]) for r in rows) > 0
        assert fig.stat().st_size > 0

    def test_paired_comparison_config(self, tmp_path, capsys):
        plan = uniform_fixed_plan(0.05, [("c1", 20, 1)])
        config = write_sim_config(
            tmp_path,
            plan,
            GAUSS_NULL,
            trials=20,
            comparator={"rho": 0.1, "alpha": 0.05, "min_observations": 40},
        )
        assert main(["simulate", str(config)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload["arms"]) == {"always_valid", "repeated_significance"}
        assert payload["comparator"]["rho"] == 0.1

    def test_unknown_config_field_exits_two(self, tmp_path):
        plan = uniform_fixed_plan(0.05, [("c1", 20, 1)])
        config = write_sim_config(tmp_path, plan, GAUSS_NULL, trials=5)
        obj = json.loads(config.read_text())
        obj["bogus"] = 1
        config.write_text(json.dumps(obj))
        assert main(["simulate", str(config)]) == 2
