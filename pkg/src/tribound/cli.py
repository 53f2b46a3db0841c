"""Command-line interface.

Six verbs: bounds (closed-form report), conditions (start-time checks),
simulate (run a scenario and monitor it), sensitivity (parameter sweep
against the tabulated reference), counterexample (regenerate a published
failure mode and confirm it), and verify (replay traces against the
ceilings over many seeds).

Exit status: 0 on a clean pass, 2 when a scenario that exists to
demonstrate a violation confirmed that violation, 1 on any unexpected
failure. All output is deterministic: identical invocations produce
byte-identical text and artifacts.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .bounds import (
    REFERENCE_BASE_TOTAL,
    SWEEPABLE,
    elasticity_sweep,
    growth_envelope,
    phi_max,
    total_bound,
)
from .engine import (
    Trace,
    confirm_expectation,
    get_scenario,
    run,
    scenario_names,
    verify,
)
from .errors import TriboundError
from .hebbian import intrinsic_step_bound, rule_from_config
from .model import (
    SystemConfig,
    apply_overrides,
    load_config_path,
    validate_conditions,
)

PASS_EXIT = 0
UNEXPECTED_EXIT = 1
CONFIRMED_EXIT = 2


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if value is None:
        return "-"
    if isinstance(value, float):
        if value != value:
            return "-"
        return f"{value:.10g}"
    return str(value)


def _table(headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    cells = [[_fmt(v) for v in row] for row in rows]
    widths = [
        max(len(h), *(len(r[i]) for r in cells)) if cells else len(h)
        for i, h in enumerate(headers)
    ]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in cells:
        lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(row)).rstrip())
    return "\n".join(lines)


def _parse_overrides(pairs: list[str] | None) -> dict[str, Any]:
    overrides: dict[str, Any] = {}
    for pair in pairs or []:
        key, sep, raw = pair.partition("=")
        if not sep or not key:
            raise TriboundError(f"override {pair!r} is not of the form key=value")
        try:
            overrides[key] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key] = raw
    return overrides


def _build_config(args: argparse.Namespace) -> SystemConfig:
    config = (
        load_config_path(args.config) if args.config is not None else SystemConfig()
    )
    overrides = _parse_overrides(args.set)
    if overrides:
        config = apply_overrides(config, overrides)
    return config


def _write_json(out_dir: str, name: str, payload: Any) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="JSON config file")
    parser.add_argument(
        "--set",
        metavar="KEY=VALUE",
        action="append",
        help="override one config key (repeatable)",
    )
    parser.add_argument("--out", metavar="DIR", help="write machine-readable artifacts")


def _report_dict(report: Any) -> dict[str, Any]:
    return dataclasses.asdict(report)


def cmd_bounds(args: argparse.Namespace) -> int:
    config = _build_config(args)
    report = total_bound(config)
    print("closed-form quantities at the configured operating point")
    print(
        _table(
            ["quantity", "value"],
            [
                ["stationary weight norm", report.w0],
                ["weight norm ceiling", report.w_max],
                ["fast-rate stability threshold", report.eta1_bar],
                ["intrinsic step bound", report.delta1_int],
                ["effective step bound", report.delta1_eff],
                ["ticks per coordination cycle", report.n12],
                ["effective horizon (cycles)", report.h_eff],
                ["per-cycle embedding drift ceiling", report.phi_max],
                ["cascading sensitivity", report.k_cascade],
                ["recommended max fast rate", report.eta1_max_rec],
                ["recommended max meta rate", report.eta3_max_rec],
            ],
        )
    )
    if args.n:
        n_values = [int(part) for part in args.n.split(",") if part.strip()]
    else:
        n_values = [config.n_agents]
    rows = []
    per_n = []
    for n in n_values:
        swept = apply_overrides(config, {"n_agents": n})
        rep = total_bound(swept)
        rows.append(
            [
                n,
                rep.eps_hebb,
                rep.eps_coord,
                rep.eps_meta,
                rep.eps_total,
                100.0 * rep.eps_coord / rep.eps_total,
                rep.j_star,
                100.0 * rep.relative_subopt,
            ]
        )
        per_n.append({"n_agents": n, **_report_dict(rep)})
    print()
    print("suboptimality decomposition by swarm size")
    print(
        _table(
            [
                "n_agents",
                "fast_term",
                "coord_term",
                "meta_term",
                "total",
                "coord_share_pct",
                "ideal_return",
                "rel_subopt_pct",
            ],
            rows,
        )
    )
    if args.out:
        _write_json(
            args.out,
            "bounds.json",
            {"base": _report_dict(report), "per_n": per_n},
        )
    return PASS_EXIT


def cmd_conditions(args: argparse.Namespace) -> int:
    config = _build_config(args)
    report = validate_conditions(config)
    rows = []
    for check in report.checks:
        status = "assumed" if check.passed is None else ("pass" if check.passed else "fail")
        rows.append(
            [check.condition_id, status, check.measured, check.threshold, check.note]
        )
    print("start-time admissibility conditions")
    print(_table(["condition", "status", "measured", "threshold", "note"], rows))
    if args.out:
        _write_json(
            args.out,
            "conditions.json",
            {
                "all_passed": report.all_passed,
                "checks": [_report_dict(c) for c in report.checks],
            },
        )
    return PASS_EXIT if report.all_passed else UNEXPECTED_EXIT


def _print_run_summary(trace: Trace) -> None:
    print(
        _table(
            ["quantity", "value"],
            [
                ["scenario", trace.scenario_name],
                ["seed", trace.seed],
                ["duration (s)", trace.duration],
                ["fast ticks", trace.ticks],
                ["coordination cycles", trace.marl_cycles],
                ["meta cycles", trace.meta_cycles],
                ["contract failures", trace.fail_count],
                ["margin alarms", trace.alarm_count],
                ["final max weight norm", float(np.linalg.norm(trace.final_weights, axis=1).max()) if trace.final_weights.size else 0.0],
                ["halted early", trace.halted],
            ],
        )
    )
    if trace.halt_reason:
        print(f"halt reason: {trace.halt_reason}")
    rows = []
    for cid in ("NP-C1", "NP-C2", "MARL-C1", "GNN-C1", "ML-C1", "ML-C2"):
        verdict = trace.last_verdicts.get(cid)
        if verdict is None:
            rows.append([cid, "never evaluated", None, None, None, None])
            continue
        status = (
            "inconclusive"
            if verdict.passed is None
            else ("pass" if verdict.passed else "fail")
        )
        rows.append(
            [
                cid,
                status,
                verdict.measured,
                verdict.threshold,
                verdict.margin,
                verdict.alarm,
            ]
        )
    print()
    print("latest contract verdicts")
    print(_table(["contract", "status", "measured", "threshold", "margin", "alarm"], rows))


def _print_verification(trace: Trace) -> bool:
    report = verify(trace)
    rows = []
    for check in report.checks:
        status = "skipped" if check.passed is None else ("pass" if check.passed else "fail")
        rows.append([check.check_id, status, check.worst, check.bound, check.note])
    print()
    print("trace replay against the closed-form ceilings")
    print(_table(["check", "status", "worst", "ceiling", "note"], rows))
    return report.all_passed


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _build_config(args)
    scenario = get_scenario(args.scenario)
    trace = run(scenario, config=config, seed=args.seed, duration=args.duration)
    _print_run_summary(trace)
    bounds_ok = _print_verification(trace)
    if args.out:
        trace.save(Path(args.out) / f"trace_{scenario.name}")
    confirmed = confirm_expectation(scenario, trace, base_config=config)
    if scenario.expected == "none":
        if confirmed and bounds_ok:
            print("\nverdict: all contracts held and the trace fits the ceilings")
            return PASS_EXIT
        print("\nverdict: unexpected contract failure or ceiling breach")
        return UNEXPECTED_EXIT
    if confirmed:
        print(f"\nverdict: expected outcome ({scenario.expected}) confirmed")
        return CONFIRMED_EXIT
    print(f"\nverdict: expected outcome ({scenario.expected}) NOT reproduced")
    return UNEXPECTED_EXIT


def cmd_sensitivity(args: argparse.Namespace) -> int:
    config = _build_config(args)
    base_total = total_bound(config).eps_total
    print(
        f"total bound at the operating point: {base_total:.10g} "
        f"(reference about {REFERENCE_BASE_TOTAL})"
    )
    print()
    rows = []
    payload = []
    for parameter in SWEEPABLE:
        for row in elasticity_sweep(config, parameter, [2.0, 0.5]):
            deviation_pct = None if row.deviation is None else 100.0 * row.deviation
            rows.append(
                [
                    row.parameter,
                    row.factor,
                    row.eps_total,
                    row.elasticity,
                    row.reference,
                    deviation_pct,
                ]
            )
            payload.append(_report_dict(row))
    print("exact sweep of the total bound against the tabulated reference")
    print(
        _table(
            ["parameter", "factor", "total", "elasticity", "reference", "deviation_pct"],
            rows,
        )
    )
    if args.out:
        _write_json(
            args.out,
            "sensitivity.json",
            {"base_total": base_total, "rows": payload},
        )
    return PASS_EXIT


def _tick_value(trace: Trace, t: float) -> float:
    index = int(round(t / trace.config.tau1)) - 1
    return float(trace.max_weight_norm[index])


def _counterexample_delta_zero(args: argparse.Namespace, config: SystemConfig) -> tuple[int, dict[str, Any]]:
    scenario = get_scenario("delta_zero")
    trace = run(scenario, config=config, seed=args.seed, duration=args.duration)
    cfg = trace.config
    horizons = [t for t in (100.0, 1000.0, 10000.0) if t <= trace.duration + 1e-9]
    rows = []
    table = []
    for t in horizons:
        envelope = growth_envelope(cfg, t)
        measured = _tick_value(trace, t)
        rows.append({"t": t, "envelope": envelope, "measured": measured})
        table.append([t, envelope, measured])
    print("zero-decay growth: measured max weight norm vs analytic envelope")
    print(_table(["t_seconds", "envelope", "measured"], table))
    _print_verification(trace)
    confirmed = confirm_expectation(scenario, trace, base_config=config)
    payload = {
        "scenario": scenario.name,
        "rows": rows,
        "confirmed": confirmed,
        "fail_count": trace.fail_count,
    }
    print(
        "\nverdict: "
        + (
            "unbounded growth confirmed; no stationary regime exists"
            if confirmed
            else "expected growth NOT reproduced"
        )
    )
    return (CONFIRMED_EXIT if confirmed else UNEXPECTED_EXIT), payload


def _counterexample_no_clamp(args: argparse.Namespace, config: SystemConfig) -> tuple[int, dict[str, Any]]:
    scenario = get_scenario("no_clamp")
    trace = run(scenario, config=config, seed=args.seed, duration=args.duration)
    cfg = trace.config
    clamped_cfg = apply_overrides(cfg, {"enforce_clamp": True})
    phi_off = phi_max(cfg)
    phi_on = phi_max(clamped_cfg)
    ratio = intrinsic_step_bound(rule_from_config(cfg), cfg) / cfg.delta_np
    scaled_total = ratio * total_bound(clamped_cfg).eps_total
    print("per-cycle embedding drift ceiling with the step clamp disabled")
    print(
        _table(
            ["quantity", "value"],
            [
                ["ceiling with clamp", phi_on],
                ["ceiling without clamp", phi_off],
                ["intrinsic-to-cap step ratio", ratio],
                ["reference ratio", "about 21"],
                ["scaled total bound", scaled_total],
                ["reference scaled total", "about 1577"],
                ["per-tick cap failures in run", trace.fail_count],
            ],
        )
    )
    confirmed = confirm_expectation(scenario, trace, base_config=config)
    payload = {
        "scenario": scenario.name,
        "phi_with_clamp": phi_on,
        "phi_without_clamp": phi_off,
        "step_ratio": ratio,
        "scaled_total": scaled_total,
        "fail_count": trace.fail_count,
        "confirmed": confirmed,
    }
    print(
        "\nverdict: "
        + (
            "per-tick cap violated as expected; drift ceiling scales by the step ratio"
            if confirmed
            else "expected cap violation NOT reproduced"
        )
    )
    return (CONFIRMED_EXIT if confirmed else UNEXPECTED_EXIT), payload


def _counterexample_slow_marl(args: argparse.Namespace, config: SystemConfig) -> tuple[int, dict[str, Any]]:
    scenario = get_scenario("slow_marl")
    trace = run(scenario, config=config, seed=args.seed, duration=args.duration)
    cfg = trace.config
    phi_slow = phi_max(cfg)
    phi_base = phi_max(config)
    total_slow = total_bound(cfg).eps_total
    total_base = total_bound(config).eps_total
    print("timescale stretch: drift ceiling and total bound degradation")
    print(
        _table(
            ["quantity", "value"],
            [
                ["ceiling at baseline periods", phi_base],
                ["ceiling at stretched periods", phi_slow],
                ["total bound at baseline periods", total_base],
                ["total bound at stretched periods", total_slow],
                ["degradation factor", total_slow / total_base],
                ["reference factor", "about 10"],
                ["contract failures in run", trace.fail_count],
            ],
        )
    )
    _print_verification(trace)
    confirmed = confirm_expectation(scenario, trace, base_config=config)
    payload = {
        "scenario": scenario.name,
        "phi_base": phi_base,
        "phi_slow": phi_slow,
        "total_base": total_base,
        "total_slow": total_slow,
        "confirmed": confirmed,
    }
    print(
        "\nverdict: "
        + (
            "contracts hold per cycle but the guarantee degrades as expected"
            if confirmed
            else "expected degradation NOT reproduced"
        )
    )
    return (CONFIRMED_EXIT if confirmed else UNEXPECTED_EXIT), payload


def _counterexample_margin_breach(args: argparse.Namespace, config: SystemConfig) -> tuple[int, dict[str, Any]]:
    scenario = get_scenario("crafted_margin_breach")
    trace = run(scenario, config=config, seed=args.seed, duration=args.duration)
    if not trace.meta_records:
        print("no meta boundary reached; lengthen the run")
        return UNEXPECTED_EXIT, {"scenario": scenario.name, "confirmed": False}
    rec = trace.meta_records[0]
    print("gate response to a meta step crafted to reach the box boundary")
    print(
        _table(
            ["quantity", "value"],
            [
                ["candidate step norm", rec["step_norm"]],
                ["smallest margin before", rec["min_margin"]],
                ["margins positive (M1)", rec["m1"]],
                ["step within budget (M2)", rec["m2"]],
                ["step under margin (M3)", rec["m3"]],
                ["step forced through", rec["applied"]],
                ["smallest margin after", min(rec["margins_after"].values())],
                ["margin alarms in run", trace.alarm_count],
            ],
        )
    )
    confirmed = confirm_expectation(scenario, trace, base_config=config)
    payload = {
        "scenario": scenario.name,
        "meta_record": {
            k: v for k, v in rec.items() if k not in ("margins_before", "margins_after")
        },
        "alarm_count": trace.alarm_count,
        "confirmed": confirmed,
    }
    print(
        "\nverdict: "
        + (
            "gate rejected the step and the margin alarm fired as expected"
            if confirmed
            else "expected detection NOT reproduced"
        )
    )
    return (CONFIRMED_EXIT if confirmed else UNEXPECTED_EXIT), payload


_COUNTEREXAMPLES = {
    "delta_zero": _counterexample_delta_zero,
    "no_clamp": _counterexample_no_clamp,
    "slow_marl": _counterexample_slow_marl,
    "crafted_margin_breach": _counterexample_margin_breach,
}


def cmd_counterexample(args: argparse.Namespace) -> int:
    config = _build_config(args)
    if args.name not in _COUNTEREXAMPLES:
        raise TriboundError(
            f"unknown counterexample {args.name!r}; "
            f"available: {', '.join(_COUNTEREXAMPLES)}"
        )
    status, payload = _COUNTEREXAMPLES[args.name](args, config)
    if args.out:
        _write_json(args.out, f"counterexample_{args.name}.json", payload)
    return status


def cmd_verify(args: argparse.Namespace) -> int:
    config = _build_config(args)
    scenario = get_scenario(args.scenario)
    if args.seeds < 1:
        raise TriboundError("--seeds must be at least 1")
    base_seed = 0 if args.seed is None else args.seed
    tallies: dict[str, dict[str, Any]] = {}
    fail_total = 0
    alarm_total = 0
    confirmations = []
    for offset in range(args.seeds):
        trace = run(
            scenario, config=config, seed=base_seed + offset, duration=args.duration
        )
        fail_total += trace.fail_count
        alarm_total += trace.alarm_count
        confirmations.append(confirm_expectation(scenario, trace, base_config=config))
        for check in verify(trace).checks:
            tally = tallies.setdefault(
                check.check_id,
                {"pass": 0, "fail": 0, "skip": 0, "worst": None, "bound": check.bound},
            )
            if check.passed is None:
                tally["skip"] += 1
            elif check.passed:
                tally["pass"] += 1
            else:
                tally["fail"] += 1
            if check.worst == check.worst:
                tally["worst"] = (
                    check.worst
                    if tally["worst"] is None
                    else max(tally["worst"], check.worst)
                )
    rows = [
        [cid, t["pass"], t["fail"], t["skip"], t["worst"], t["bound"]]
        for cid, t in tallies.items()
    ]
    print(
        f"replayed {args.seeds} seeds of scenario {scenario.name!r}; "
        f"{fail_total} contract failures, {alarm_total} margin alarms"
    )
    print(_table(["check", "pass", "fail", "skip", "worst", "ceiling"], rows))
    all_clean = (
        all(t["fail"] == 0 for t in tallies.values())
        and fail_total == 0
        and alarm_total == 0
    )
    if args.out:
        _write_json(
            args.out,
            "verify.json",
            {
                "scenario": scenario.name,
                "seeds": args.seeds,
                "fail_total": fail_total,
                "alarm_total": alarm_total,
                "checks": tallies,
            },
        )
    if scenario.expected == "none":
        if all_clean:
            print("\nverdict: every seed fits the ceilings")
            return PASS_EXIT
        print("\nverdict: at least one seed breached a ceiling or contract")
        return UNEXPECTED_EXIT
    if all(confirmations):
        print(f"\nverdict: expected outcome ({scenario.expected}) confirmed on every seed")
        return CONFIRMED_EXIT
    print(f"\nverdict: expected outcome ({scenario.expected}) NOT reproduced on every seed")
    return UNEXPECTED_EXIT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tribound",
        description=(
            "deterministic simulator and bound calculator for tri-level "
            "coupled learning dynamics"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_bounds = sub.add_parser("bounds", help="closed-form bound report")
    _add_common(p_bounds)
    p_bounds.add_argument(
        "--n", metavar="LIST", help="comma-separated swarm sizes, e.g. 10,30,100"
    )
    p_bounds.set_defaults(func=cmd_bounds)

    p_cond = sub.add_parser("conditions", help="start-time admissibility checks")
    _add_common(p_cond)
    p_cond.set_defaults(func=cmd_conditions)

    p_sim = sub.add_parser("simulate", help="run one scenario under full monitoring")
    _add_common(p_sim)
    p_sim.add_argument(
        "--scenario",
        default="baseline",
        choices=scenario_names(),
        help="scenario name",
    )
    p_sim.add_argument("--seed", type=int, help="master seed override")
    p_sim.add_argument("--duration", type=float, help="run length in seconds")
    p_sim.set_defaults(func=cmd_simulate)

    p_sens = sub.add_parser(
        "sensitivity", help="parameter sweep of the total bound"
    )
    _add_common(p_sens)
    p_sens.set_defaults(func=cmd_sensitivity)

    p_ce = sub.add_parser(
        "counterexample", help="regenerate one published failure mode"
    )
    _add_common(p_ce)
    p_ce.add_argument("name", choices=sorted(_COUNTEREXAMPLES), help="failure mode")
    p_ce.add_argument("--seed", type=int, help="master seed override")
    p_ce.add_argument("--duration", type=float, help="run length in seconds")
    p_ce.set_defaults(func=cmd_counterexample)

    p_ver = sub.add_parser(
        "verify", help="replay traces against the ceilings over many seeds"
    )
    _add_common(p_ver)
    p_ver.add_argument(
        "--scenario",
        default="baseline",
        choices=scenario_names(),
        help="scenario name",
    )
    p_ver.add_argument("--seeds", type=int, default=20, help="number of seeds")
    p_ver.add_argument("--seed", type=int, help="first seed")
    p_ver.add_argument("--duration", type=float, help="run length in seconds")
    p_ver.set_defaults(func=cmd_verify)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TriboundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return UNEXPECTED_EXIT


if __name__ == "__main__":
    sys.exit(main())
