"""Command-line entry point for batch workflows.

Subcommands mirror the experiment pipeline: validate a scenario, provision
it, ingest scanner reports into the interchange format, compare finding sets,
model backend resource usage, and reshape saved comparisons into match-rate
plotting data. Output is deterministic for fixed inputs: no timestamps, stable
ordering, fixed numeric formatting (three decimals for Jaccard values, one
decimal for percentages).

Exit codes: 0 success, 1 validation found error-severity diagnostics,
2 operational failure (bad inputs, driver errors, format errors). Failures
print exactly one machine-parseable line to stderr:
``error: <category>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import dataclass
from pathlib import Path

from . import ingest, repro, resmon
from .errors import (
    CyrangeError,
    DataFileError,
    DriverError,
    EnvironmentMismatchError,
    IngestError,
    InvalidScenarioError,
    PlanExecutionError,
    RollbackError,
    ScenarioSyntaxError,
    SchemaError,
)
from .provision import MockDriver, execute_plan, plan_environment, plan_to_commands
from .scenario import parse_scenario, validate_scenario

_ERROR_CATEGORIES: tuple[tuple[type, str], ...] = (
    (ScenarioSyntaxError, "syntax"),
    (SchemaError, "schema"),
    (InvalidScenarioError, "invalid-scenario"),
    (EnvironmentMismatchError, "same-environment"),
    (IngestError, "bad-report"),
    (RollbackError, "rollback-failure"),
    (PlanExecutionError, "provision-failure"),
    (DriverError, "driver-failure"),
    (DataFileError, "bad-data-file"),
    (CyrangeError, "error"),
)

_CLI_TOOL_TAGS = {"nmap": "nmap", "openvas": "openvas", "zap": "zap", "nikto": "nikto2", "msf": "msf"}


@dataclass
class RunConfig:
    command: str
    inputs: tuple[Path, ...] = ()
    output_format: str = "text"
    output_path: Path | None = None
    backend: str | None = None
    plan_backend: str = "container"
    env_id: str | None = None
    tool: str | None = None
    env: str | None = None
    target: str = "target"
    cwe_map_path: Path | None = None
    mode: str = "both"
    profile_path: Path | None = None
    instances: tuple[int, int] = (1, 10)
    step: int = 1


def _error_line(exc: Exception) -> str:
    category = "error"
    for cls, slug in _ERROR_CATEGORIES:
        if isinstance(exc, cls):
            category = slug
            break
    message = str(exc).replace("\n", "; ")
    return f"error: {category}: {message}"


def _write_output(text: str, config: RunConfig) -> None:
    if config.output_path is not None:
        config.output_path.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _fmt_num(value: float) -> str:
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return repr(value) if isinstance(value, float) else str(value)


# ---------------------------------------------------------------------------
# Report emission

def emit_report(report, fmt: str, mode: str = "both") -> str:
    """Render a ReproReport or ComparisonSummary as json, md, or csv text."""
    if isinstance(report, repro.ReproReport):
        if fmt == "json":
            return _repro_json(report, mode)
        if fmt == "md":
            return _repro_md(report, mode)
        if fmt == "csv":
            return _repro_csv(report)
    elif isinstance(report, resmon.ComparisonSummary):
        if fmt == "json":
            return _comparison_json(report)
        if fmt == "md":
            return _comparison_md(report)
        if fmt == "csv":
            return _comparison_csv(report)
    else:
        raise TypeError(f"cannot emit {type(report).__name__}")
    raise CyrangeError(f"unsupported format: {fmt}")


def _repro_json(report: repro.ReproReport, mode: str) -> str:
    data = repro.report_to_dict(report)
    if mode == "set":
        data.pop("j_multiset", None)
    elif mode == "multiset":
        data.pop("j_set", None)
    return json.dumps(data, indent=2) + "\n"


def _repro_md(report: repro.ReproReport, mode: str) -> str:
    lines = [
        "# Reproducibility report",
        "",
        f"- baseline environment: {report.baseline_env}",
        f"- candidate environment: {report.candidate_env}",
        f"- rows: {len(report.rows)} (matched {report.matched_rows})",
    ]
    if mode in ("both", "set"):
        lines.append(f"- J (set): {report.j_set:.3f}")
    if mode in ("both", "multiset"):
        lines.append(f"- J (multiset): {report.j_multiset:.3f}")
    lines += ["", "| tool | baseline | candidate | J (multiset) |", "| --- | --- | --- | --- |"]
    for tool, sub in report.subtotals.items():
        lines.append(f"| {tool} | {sub.baseline} | {sub.candidate} | {sub.j_multiset:.3f} |")
    lines += [
        "",
        "| CWE | baseline | candidate | match | class | tool | target |",
        "| --- | --- | --- | --- | --- | --- | --- |",
    ]
    for row in report.rows:
        glyph = "○" if row.matched else "✗"  # ○ / ✗
        lines.append(
            f"| {row.cwe} | {row.baseline} | {row.candidate} | {glyph} "
            f"| {row.label} | {row.tool} | {row.target} |"
        )
    lines.append("")
    for note in report.notes:
        lines.append(f"> note: {note}")
    return "".join(line + "\n" for line in lines)


def _repro_csv(report: repro.ReproReport) -> str:
    lines = ["cwe,baseline,candidate,matched"]
    for row in report.rows:
        lines.append(f"{row.cwe},{row.baseline},{row.candidate},{'true' if row.matched else 'false'}")
    return "".join(line + "\n" for line in lines)


def emit_match_rate(report: repro.ReproReport, fmt: str) -> str:
    """Per-tool, per-CWE agreement percentages (plotting data shape)."""
    rates = repro.match_rate(report, per_tool=True)
    sums: dict[tuple[str, str], tuple[int, int]] = {}
    for row in report.rows:
        group = (row.tool, row.cwe)
        baseline, candidate = sums.get(group, (0, 0))
        sums[group] = (baseline + row.baseline, candidate + row.candidate)
    records = [
        {
            "tool": tool, "cwe": cwe,
            "baseline": sums[(tool, cwe)][0], "candidate": sums[(tool, cwe)][1],
            "match_rate": round(rate, 1),
        }
        for (tool, cwe), rate in rates.items()
    ]
    if fmt == "csv":
        lines = ["tool,cwe,baseline,candidate,match_rate"]
        for r in records:
            lines.append(f"{r['tool']},{r['cwe']},{r['baseline']},{r['candidate']},{r['match_rate']:.1f}")
        return "".join(line + "\n" for line in lines)
    if fmt == "json":
        return json.dumps({"match_rate": records}, indent=2) + "\n"
    if fmt == "md":
        lines = [
            "# Match rate by CWE",
            "",
            "| tool | CWE | baseline | candidate | match rate (%) |",
            "| --- | --- | --- | --- | --- |",
        ]
        for r in records:
            lines.append(f"| {r['tool']} | {r['cwe']} | {r['baseline']} | {r['candidate']} | {r['match_rate']:.1f} |")
        return "".join(line + "\n" for line in lines)
    raise CyrangeError(f"unsupported format: {fmt}")


def _comparison_csv(summary: resmon.ComparisonSummary) -> str:
    lines = ["instance_count,vm_mb,ct_mb,ratio"]
    for row in summary.rows:
        ratio = "" if row.memory_ratio is None else _fmt_num(row.memory_ratio)
        lines.append(f"{row.instance_count},{_fmt_num(row.vm_memory_mb)},{_fmt_num(row.ct_memory_mb)},{ratio}")
    return "".join(line + "\n" for line in lines)


def _comparison_json(summary: resmon.ComparisonSummary) -> str:
    data = {
        "rows": [
            {
                "instance_count": row.instance_count,
                "vm_memory_mb": row.vm_memory_mb, "ct_memory_mb": row.ct_memory_mb,
                "memory_ratio": row.memory_ratio,
                "vm_storage_mb": row.vm_storage_mb, "ct_storage_mb": row.ct_storage_mb,
                "storage_ratio": row.storage_ratio,
                "vm_cpu_pct": row.vm_cpu_pct, "ct_cpu_pct": row.ct_cpu_pct,
                "cpu_ratio": row.cpu_ratio,
            }
            for row in summary.rows
        ],
        "fits": {
            name: {"slope": fit.slope, "intercept": fit.intercept}
            for name, fit in sorted(summary.fits.items())
        },
    }
    return json.dumps(data, indent=2) + "\n"


def _comparison_md(summary: resmon.ComparisonSummary) -> str:
    lines = [
        "# Backend resource comparison",
        "",
        "| instances | vm memory (MB) | container memory (MB) | ratio |",
        "| --- | --- | --- | --- |",
    ]
    for row in summary.rows:
        ratio = "-" if row.memory_ratio is None else _fmt_num(row.memory_ratio)
        lines.append(
            f"| {row.instance_count} | {_fmt_num(row.vm_memory_mb)} | {_fmt_num(row.ct_memory_mb)} | {ratio} |"
        )
    lines.append("")
    for name, fit in sorted(summary.fits.items()):
        lines.append(f"- fit {name}: slope {_fmt_num(fit.slope)}, intercept {_fmt_num(fit.intercept)}")
    return "".join(line + "\n" for line in lines)


# ---------------------------------------------------------------------------
# Command handlers

def _cmd_validate(config: RunConfig) -> int:
    text = config.inputs[0].read_text(encoding="utf-8")
    try:
        scenario = parse_scenario(text)
    except (ScenarioSyntaxError, SchemaError) as exc:
        print(_error_line(exc), file=sys.stderr)
        return 1
    diagnostics = validate_scenario(scenario)
    if config.output_format == "json":
        payload = {"diagnostics": [
            {"severity": d.severity, "subject": d.subject, "message": d.message}
            for d in diagnostics
        ]}
        _write_output(json.dumps(payload, indent=2) + "\n", config)
    else:
        _write_output("".join(d.render() + "\n" for d in diagnostics), config)
    return 1 if any(d.severity == "error" for d in diagnostics) else 0


def _cmd_provision(config: RunConfig) -> int:
    scenario = parse_scenario(config.inputs[0].read_text(encoding="utf-8"))
    plan = plan_environment(scenario, config.plan_backend, environment_id=config.env_id)
    if config.backend == "container-plan":
        _write_output(plan_to_commands(plan), config)
        return 0
    state = execute_plan(plan, MockDriver())
    payload = {
        "environment_id": state.environment_id,
        "networks": list(state.networks),
        "instances": {name: state.instances[name] for name in sorted(state.instances)},
    }
    _write_output(json.dumps(payload, indent=2) + "\n", config)
    return 0


def _cmd_ingest(config: RunConfig) -> int:
    report_text = config.inputs[0].read_text(encoding="utf-8")
    cwe_map = None
    if config.cwe_map_path is not None:
        cwe_map = ingest.CweMap.from_json(config.cwe_map_path.read_text(encoding="utf-8"))
    tool = _CLI_TOOL_TAGS[config.tool]
    if tool == "nmap":
        findings = ingest.parse_nmap(report_text, config.env, cwe_map)
    elif tool == "openvas":
        findings = ingest.parse_openvas(report_text, config.env, cwe_map)
    elif tool == "zap":
        findings = ingest.parse_zap(report_text, config.env)
    elif tool == "nikto2":
        findings = ingest.parse_nikto(report_text, config.env, cwe_map)
    else:
        findings = ingest.parse_msf_log(report_text, config.env, target=config.target, cwe_map=cwe_map)
    _write_output(ingest.write_jsonl(findings), config)
    return 0


def _cmd_compare(config: RunConfig) -> int:
    baseline = ingest.read_jsonl(config.inputs[0].read_text(encoding="utf-8"))
    candidate = ingest.read_jsonl(config.inputs[1].read_text(encoding="utf-8"))
    report = repro.diff(baseline, candidate)
    _write_output(emit_report(report, config.output_format, config.mode), config)
    return 0


def _cmd_monitor(config: RunConfig) -> int:
    if config.profile_path is not None:
        profiles = resmon.load_profiles(config.profile_path.read_text(encoding="utf-8"))
    else:
        profiles = resmon.bundled_profiles()
    for backend in ("vm", "container"):
        if backend not in profiles:
            raise DataFileError(f"profile file lacks a {backend} record")
    low, high = config.instances
    counts = range(low, high + 1, config.step)
    vm_series = [resmon.simulate_usage(profiles["vm"], n) for n in counts]
    ct_series = [resmon.simulate_usage(profiles["container"], n) for n in counts]
    summary = resmon.compare_backends(vm_series, ct_series)
    _write_output(emit_report(summary, config.output_format), config)
    return 0


def _cmd_report(config: RunConfig) -> int:
    try:
        data = json.loads(config.inputs[0].read_text(encoding="utf-8"))
        report = repro.report_from_dict(data)
    except (json.JSONDecodeError, ValueError) as exc:
        raise IngestError(f"cannot load report: {exc}") from exc
    _write_output(emit_match_rate(report, config.output_format), config)
    return 0


_HANDLERS = {
    "validate": _cmd_validate,
    "provision": _cmd_provision,
    "ingest": _cmd_ingest,
    "compare": _cmd_compare,
    "monitor": _cmd_monitor,
    "report": _cmd_report,
}


def run(config: RunConfig) -> int:
    try:
        return _HANDLERS[config.command](config)
    except OSError as exc:
        print(f"error: unreadable-input: {exc}", file=sys.stderr)
        return 2
    except CyrangeError as exc:
        print(_error_line(exc), file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: invalid-input: {exc}", file=sys.stderr)
        return 2


# ---------------------------------------------------------------------------
# Argument parsing

def _parse_instance_range(text: str) -> tuple[int, int]:
    match = re.fullmatch(r"(\d+)\.\.(\d+)", text)
    if not match:
        raise argparse.ArgumentTypeError("expected a range like 1..100")
    low, high = int(match.group(1)), int(match.group(2))
    if high < low:
        raise argparse.ArgumentTypeError("range end must not be below range start")
    return low, high


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cyrange", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario document")
    p.add_argument("scenario", type=Path)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("-o", "--output", type=Path, default=None)

    p = sub.add_parser("provision", help="plan (and mock-execute) an environment")
    p.add_argument("scenario", type=Path)
    p.add_argument("--backend", choices=("mock", "container-plan"), required=True)
    p.add_argument("--plan-backend", choices=("vm", "container"), default="container",
                   help="which node backend kind the plan targets")
    p.add_argument("--env-id", default=None)
    p.add_argument("-o", "--output", type=Path, default=None)

    p = sub.add_parser("ingest", help="normalize a scanner report to JSON lines")
    p.add_argument("report", type=Path)
    p.add_argument("--tool", choices=sorted(_CLI_TOOL_TAGS), required=True)
    p.add_argument("--env", choices=("vm", "container", "real"), required=True)
    p.add_argument("--target", default="target", help="target label for run logs without one")
    p.add_argument("--cwe-map", type=Path, default=None, dest="cwe_map")
    p.add_argument("-o", "--output", type=Path, default=None)

    p = sub.add_parser("compare", help="diff two finding sets")
    p.add_argument("--baseline", type=Path, required=True)
    p.add_argument("--candidate", type=Path, required=True)
    p.add_argument("--mode", choices=("set", "multiset", "both"), default="both")
    p.add_argument("--format", choices=("json", "md", "csv"), default="md")
    p.add_argument("-o", "--output", type=Path, default=None)

    p = sub.add_parser("monitor", help="model resource usage across instance counts")
    p.add_argument("--profile", type=Path, default=None)
    p.add_argument("--instances", type=_parse_instance_range, default=(1, 10),
                   help="instance count range, e.g. 1..100")
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--format", choices=("json", "md", "csv"), default="csv")
    p.add_argument("-o", "--output", type=Path, default=None)

    p = sub.add_parser("report", help="match-rate plotting data from a saved comparison")
    p.add_argument("input", type=Path)
    p.add_argument("--format", choices=("json", "md", "csv"), default="csv")
    p.add_argument("-o", "--output", type=Path, default=None)

    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    config = RunConfig(command=args.command)
    config.output_path = getattr(args, "output", None)
    if args.command == "validate":
        config.inputs = (args.scenario,)
        config.output_format = args.format
    elif args.command == "provision":
        config.inputs = (args.scenario,)
        config.backend = args.backend
        config.plan_backend = args.plan_backend
        config.env_id = args.env_id
    elif args.command == "ingest":
        config.inputs = (args.report,)
        config.tool = args.tool
        config.env = args.env
        config.target = args.target
        config.cwe_map_path = args.cwe_map
    elif args.command == "compare":
        config.inputs = (args.baseline, args.candidate)
        config.mode = args.mode
        config.output_format = args.format
    elif args.command == "monitor":
        config.profile_path = args.profile
        config.instances = args.instances
        config.step = args.step
        config.output_format = args.format
    elif args.command == "report":
        config.inputs = (args.input,)
        config.output_format = args.format
    return config


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return run(config_from_args(args))


if __name__ == "__main__":
    sys.exit(main())
