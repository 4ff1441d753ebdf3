"""Command-line interface.

Subcommands: ``plan validate``, ``thresholds``, ``monitor``, ``curves``,
``simulate``. Exit codes follow one convention everywhere: 0 success,
1 domain violation, 2 I/O or parse failure. Data outputs are CSV/JSON and
contain no timestamps, so identical invocations produce identical bytes;
figures are an optional extra rendered from the same tables.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import curves as curve_tables
from .errors import (
    ConfigError,
    DomainError,
    PlanInvalidError,
    RepsigError,
    SchemaError,
    SequencingError,
    StateError,
)
from .monitor import Outcome, hit_requirement_remaining, run_monitor
from .planio import (
    SCHEMA_VERSION,
    load_plan_document,
    load_pvalue_log,
    plan_from_dict,
    plan_hash,
    require_keys,
)
from .plans import PlanVariant, require_valid, threshold, validate_plan
from .simulate import (
    BernoulliDiffStream,
    GaussianStream,
    StreamConfig,
    compare_always_valid,
    run_trials,
)
from .stats_core import AlwaysValidParams, z_from_p_two_sided

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_PARSE = 2

SEED_ENV_VAR = "REPSIG_SEED"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (SchemaError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (
        PlanInvalidError,
        DomainError,
        SequencingError,
        StateError,
        ConfigError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except RepsigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repsig",
        description="Sequential test plans with early stopping via repeated significance.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    plan = sub.add_parser("plan", help="plan document operations")
    plan_sub = plan.add_subparsers(dest="plan_command", required=True)
    validate = plan_sub.add_parser("validate", help="check a plan document")
    validate.add_argument("path", help="plan document (JSON)")
    validate.add_argument("--json", action="store_true", help="machine-readable result")
    validate.set_defaults(handler=cmd_plan_validate)

    thresholds = sub.add_parser("thresholds", help="required p/Z per decision point")
    thresholds.add_argument("path", help="plan document (JSON)")
    thresholds.add_argument("--criterion", help="criterion id (default: the only one)")
    thresholds.add_argument(
        "--points", help="decision point range START..END (required for unlimited plans)"
    )
    thresholds.add_argument("--out", help="write CSV here instead of stdout")
    thresholds.set_defaults(handler=cmd_thresholds)

    monitor = sub.add_parser("monitor", help="replay a p-value log against a plan")
    monitor.add_argument("plan_path", help="plan document (JSON)")
    monitor.add_argument("log_path", help="p-value log (CSV: t,criterion_id,p)")
    monitor.add_argument("--json", action="store_true", help="machine-readable result")
    monitor.set_defaults(handler=cmd_monitor)

    curves = sub.add_parser("curves", help="emit required-Z curve data")
    curves.add_argument("which", choices=["fig4", "fig5", "fig6", "fig7"])
    curves.add_argument(
        "--alpha",
        action="append",
        type=float,
        help="alpha line(s); repeatable (default 0.10 0.05 0.01; fig7 default 0.05)",
    )
    curves.add_argument("--dm-max", type=int, default=100, help="fig4: largest dm")
    curves.add_argument("--ref-p", type=float, default=0.05, help="fig5: reference p-value")
    curves.add_argument("--u", type=float, default=0.05, help="fig7: repetition rate")
    curves.add_argument("--rho", type=float, help="fig7: comparator rho (default: grid-searched)")
    curves.add_argument(
        "--t-max", type=int, default=20_000_000, help="fig7: largest observation count"
    )
    curves.add_argument("--out", help="write CSV here instead of stdout")
    curves.add_argument("--fig", help="also render the curve to this image file")
    curves.set_defaults(handler=cmd_curves)

    simulate = sub.add_parser("simulate", help="Monte Carlo stop-rate estimation")
    simulate.add_argument("config_path", help="combined plan + stream config (JSON)")
    simulate.add_argument("--trials", type=int, help="override trial count")
    simulate.add_argument(
        "--seed", type=int, help=f"override master seed (or set {SEED_ENV_VAR})"
    )
    simulate.add_argument("--out", help="write the report JSON here instead of stdout")
    simulate.add_argument("--hist", help="write the stop-time histogram CSV here")
    simulate.add_argument("--fig", help="render the stop-time histogram to this image file")
    simulate.set_defaults(handler=cmd_simulate)
    return parser


def cmd_plan_validate(args) -> int:
    doc = load_plan_document(args.path)
    violations = validate_plan(doc.plan)
    ok = not violations
    if args.json:
        payload = {
            "ok": ok,
            "violations": violations,
            "plan_hash": plan_hash(doc.plan) if ok else None,
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
    elif ok:
        print(f"ok: plan hash {plan_hash(doc.plan)}")
    else:
        for v in violations:
            print(f"violation: {v}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_DOMAIN


def _parse_points(spec: str) -> tuple[int, int]:
    try:
        lo_text, hi_text = spec.split("..", 1)
        lo, hi = int(lo_text), int(hi_text)
    except ValueError:
        raise DomainError(f"--points must look like START..END, got {spec!r}") from None
    if lo < 1 or hi < lo:
        raise DomainError(f"--points range {spec!r} is empty or starts below 1")
    return lo, hi


def cmd_thresholds(args) -> int:
    doc = load_plan_document(args.path)
    plan = require_valid(doc.plan)
    ids = plan.criterion_ids()
    criterion = args.criterion
    if criterion is None:
        if len(ids) != 1:
            raise DomainError(
                f"plan tracks criteria {list(ids)}; choose one with --criterion"
            )
        criterion = ids[0]
    elif criterion not in ids:
        raise DomainError(f"unknown criterion id {criterion!r}; plan tracks {list(ids)}")
    if args.points is not None:
        lo, hi = _parse_points(args.points)
    elif plan.variant is PlanVariant.UNLIMITED:
        raise DomainError("unlimited plans have no final decision point; pass --points")
    else:
        lo, hi = 1, plan.max_decision_index()

    rows = []
    for t in range(lo, hi + 1):
        thr = threshold(plan, criterion, t)
        if thr <= 0.0:
            z = "inf"
        else:
            z = z_from_p_two_sided(min(thr, 1.0))
        rows.append([t, thr, z])
    _write_csv(["t", "threshold_p", "required_z"], rows, args.out)
    return EXIT_OK


def cmd_monitor(args) -> int:
    doc = load_plan_document(args.plan_path)
    plan = require_valid(doc.plan)
    records = load_pvalue_log(args.log_path)
    decision, state = run_monitor(plan, records)
    remaining = hit_requirement_remaining(state)
    if args.json:
        payload = {
            "decision": {
                "outcome": decision.outcome.value,
                "at": decision.at,
                "confidence": decision.confidence,
            },
            "records_consumed": state.t,
            "remaining_hits": remaining,
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
        return EXIT_OK
    if decision.outcome is Outcome.STOP_SUCCESS:
        print(f"stop_success at t={decision.at} (confidence {decision.confidence})")
    elif decision.outcome is Outcome.END_FAILURE:
        print(f"end_failure at t={decision.at}")
    else:
        print("continue")
        print("remaining hits required:")
        for cid, count in sorted(remaining.items()):
            print(f"  {cid}: {count}")
    return EXIT_OK


def cmd_curves(args) -> int:
    alphas = tuple(args.alpha) if args.alpha else curve_tables.DEFAULT_ALPHAS
    if args.which == "fig4":
        header, rows = curve_tables.curve_z_by_dm(alphas=alphas, dm_max=args.dm_max)
    elif args.which == "fig5":
        header, rows = curve_tables.curve_z_and_size_ratio(ref_p=args.ref_p)
    elif args.which == "fig6":
        header, rows = curve_tables.curve_z_by_rate(alphas=alphas)
    else:
        alpha = args.alpha[0] if args.alpha else 0.05
        header, rows, rho = curve_tables.curve_always_valid_comparison(
            alpha=alpha, u=args.u, t_max=args.t_max, rho=args.rho
        )
        print(f"comparator rho = {rho}", file=sys.stderr)
    _write_csv(header, rows, args.out)
    if args.fig:
        from .figures import render_curve_figure

        render_curve_figure(args.which, header, rows, args.fig)
    return EXIT_OK


def load_simulation_config(path: str | Path):
    """Parse the combined plan + stream config used by ``repsig simulate``."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    require_keys(
        obj,
        "config",
        {"schema_version", "plan", "stream"},
        {"trials", "compare_always_valid"},
    )
    if obj["schema_version"] != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported schema_version {obj['schema_version']}; this build reads {SCHEMA_VERSION}"
        )
    plan = plan_from_dict(obj["plan"])
    stream_obj = obj["stream"]
    require_keys(
        stream_obj, "config.stream", {"distribution", "n_max", "decision_every"}, {"seed"}
    )
    dist_obj = stream_obj["distribution"]
    if not isinstance(dist_obj, dict) or "kind" not in dist_obj:
        raise SchemaError("config.stream.distribution needs a 'kind' field")
    if dist_obj["kind"] == "gaussian":
        require_keys(dist_obj, "config.stream.distribution", {"kind", "mu", "sigma"})
        dist = GaussianStream(mu=float(dist_obj["mu"]), sigma=float(dist_obj["sigma"]))
    elif dist_obj["kind"] == "bernoulli_diff":
        require_keys(dist_obj, "config.stream.distribution", {"kind", "q", "baseline"})
        dist = BernoulliDiffStream(
            q=float(dist_obj["q"]), baseline=float(dist_obj["baseline"])
        )
    else:
        raise SchemaError(f"unknown distribution kind {dist_obj['kind']!r}")
    stream = StreamConfig(
        distribution=dist,
        n_max=int(stream_obj["n_max"]),
        decision_every=int(stream_obj["decision_every"]),
        seed=int(stream_obj["seed"]) if stream_obj.get("seed") is not None else None,
    )
    trials = int(obj["trials"]) if "trials" in obj else None
    comparator = None
    if "compare_always_valid" in obj:
        cmp_obj = obj["compare_always_valid"]
        require_keys(
            cmp_obj, "config.compare_always_valid", {"rho", "alpha"}, {"min_observations"}
        )
        comparator = AlwaysValidParams(
            rho=float(cmp_obj["rho"]),
            alpha=float(cmp_obj["alpha"]),
            t=int(cmp_obj.get("min_observations", 1)),
        )
    return plan, stream, trials, comparator


def cmd_simulate(args) -> int:
    plan, stream, config_trials, comparator = load_simulation_config(args.config_path)
    trials = args.trials if args.trials is not None else config_trials
    if trials is None:
        raise ConfigError("no trial count: set 'trials' in the config or pass --trials")
    seed = args.seed
    if seed is None and os.environ.get(SEED_ENV_VAR):
        seed = int(os.environ[SEED_ENV_VAR])

    if comparator is not None:
        report = compare_always_valid(plan, comparator, stream, trials, seed=seed)
        hist_rows = [
            ["repeated_significance", t, c]
            for t, c in sorted(report.repeated.stop_index_counts.items())
        ] + [
            ["always_valid", t, c]
            for t, c in sorted(report.always_valid.stop_index_counts.items())
        ]
        hist_header = ["arm", "stop_index", "count"]
        fig_counts = {
            "repeated_significance": report.repeated.stop_index_counts,
            "always_valid": report.always_valid.stop_index_counts,
        }
    else:
        report = run_trials(plan, stream, trials, seed=seed)
        hist_rows = [[t, c] for t, c in sorted(report.stop_index_counts.items())]
        hist_header = ["stop_index", "count"]
        fig_counts = {"stops": report.stop_index_counts}

    payload = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    if args.hist:
        _write_csv(hist_header, hist_rows, args.hist)
    if args.fig:
        from .figures import render_stop_histogram

        render_stop_histogram(fig_counts, args.fig)
    return EXIT_OK


def _write_csv(header: list[str], rows: list[list], out_path: str | None) -> None:
    def emit(handle):
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)

    if out_path:
        with open(out_path, "w", newline="", encoding="utf-8") as handle:
            emit(handle)
    else:
        emit(sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
