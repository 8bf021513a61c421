"""Command line entry point.

Reads a JSON experiment configuration, runs the requested analysis locally
(or on an isolab service with --server) and writes <analysis>.json and
<analysis>.csv into the output directory.  Exit codes: 0 success, 1 parse or
validation error, 2 numerical failure, 3 balance condition not met.

Expressions use the variable r (u for surface profiles), the constants pi and
e, + - * / ^, and sin cos tan sinh cosh tanh exp log sqrt atan abs.  log is
the natural logarithm.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

from pydantic import ValidationError

from .examples import example_configs
from .runner import EXIT_INPUT, EXIT_NUMERICAL, format_cell, run_config
from .schemas import AnalysisReport, CsvTable, ExperimentConfig, RunResponse

SUBCOMMANDS = {
    "check-isoperimetry": "isoperimetry",
    "exit-time": "exit-time",
    "capacity": "capacity",
    "parabolicity": "parabolicity",
    "surface-verify": "isoperimetry",
    "balance": "balance",
    "volume": "volume",
    "run": None,
}


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def report_json(report: AnalysisReport) -> str:
    return json.dumps(report.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def table_csv(table: CsvTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.header)
    for row in table.rows:
        writer.writerow([format_cell(v) for v in row])
    return buf.getvalue()


def emit(resp: RunResponse, out: Path) -> list[Path]:
    written = []
    for name, report in resp.reports.items():
        for path, text in ((out / f"{name}.json", report_json(report)), (out / f"{name}.csv", table_csv(resp.tables[name]))):
            atomic_write(path, text)
            written.append(path)
    return written


def render(resp: RunResponse) -> str:
    lines = []
    for name, report in resp.reports.items():
        lines.append(f"== {name} ({report.mode})")
        for key, value in report.result.items():
            if key == "verdicts":
                for v in value:
                    lines.append(f"  {v['test']:<18} {v['verdict']}")
            elif isinstance(value, (int, float, str, bool)) or value is None:
                lines.append(f"  {key:<28} {format_cell(value) if isinstance(value, float) else value}")
    return "\n".join(lines)


def _load_config(args) -> dict:
    if args.config is not None:
        return json.loads(Path(args.config).read_text())
    if args.command == "surface-verify" and args.surface is not None:
        return {"mode": "surface", "surface": args.surface, "analyses": ["isoperimetry"]}
    raise ValueError("--config is required for this command")


def build_config(args) -> ExperimentConfig:
    """Merge config file and flag overrides, then validate."""
    data = _load_config(args)
    numerics = dict(data.get("numerics") or {})
    for flag in ("tol", "horizon", "grid"):
        value = getattr(args, flag)
        if value is not None:
            numerics[flag] = value
    data["numerics"] = numerics
    if args.v0 is not None:
        data["output"] = {**(data.get("output") or {}), "v0": args.v0}
    for flag in ("m", "R", "b", "C", "surface"):
        value = getattr(args, flag, None)
        if value is not None:
            data[flag] = value
    kind = SUBCOMMANDS.get(args.command)
    analyses = list(data.get("analyses") or [])
    if kind is not None:
        matching = [a for a in analyses if (a if isinstance(a, str) else a.get("kind")) == kind]
        spec = matching[0] if matching else {"kind": kind}
        spec = {"kind": spec} if isinstance(spec, str) else dict(spec)
        if kind == "capacity" and args.rho is not None:
            spec["rho"] = args.rho
        if kind == "parabolicity" and args.tests:
            spec["tests"] = args.tests.split(",")
        data["analyses"] = [spec]
    if args.command == "surface-verify" and data.get("mode") != "surface":
        raise ValueError("surface-verify needs a surface configuration")
    return ExperimentConfig.model_validate(data)


def _remote(server: str, cfg: ExperimentConfig) -> RunResponse:
    import httpx

    try:
        r = httpx.post(server.rstrip("/") + "/run", json={"config": cfg.model_dump(mode="json")}, timeout=600.0)
    except httpx.HTTPError as exc:
        return RunResponse(exit_code=EXIT_NUMERICAL, error=f"service unreachable: {exc}")
    if r.status_code == 422 and "exit_code" not in r.json():
        return RunResponse(exit_code=EXIT_INPUT, error=json.dumps(r.json().get("detail")))
    return RunResponse.model_validate(r.json())


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isolab", description="Comparison bounds for extrinsic balls and parabolicity tests.",
                                epilog="log is the natural logarithm in all expressions.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name, help=f"run the {SUBCOMMANDS[name] or 'configured'} analysis"
                           if name != "run" else "run every analysis in the config")
        s.add_argument("--config", help="JSON experiment configuration")
        s.add_argument("--out", default="isolab_out", help="output directory (default: isolab_out)")
        s.add_argument("--tol", type=float, help="construction tolerance")
        s.add_argument("--horizon", type=float, help="first horizon multiplier for improper integrals")
        s.add_argument("--grid", type=int, help="grid size for profiles and checks")
        s.add_argument("--v0", dest="v0", action="store_true", default=None,
                       help="multiply volumes by the unit sphere volume (default)")
        s.add_argument("--no-v0", dest="v0", action="store_false", help="report volumes without the unit sphere factor")
        s.add_argument("--m", type=int, help="override dimension")
        s.add_argument("--R", type=float, help="override extrinsic radius")
        s.add_argument("--b", type=float, help="override space form curvature")
        s.add_argument("--C", type=float, help="override convexity bound")
        s.add_argument("--surface", help="catalog surface name")
        s.add_argument("--server", help="base URL of an isolab service; run remotely")
        if name == "capacity":
            s.add_argument("--rho", type=float, help="inner radius of the annulus")
        else:
            s.set_defaults(rho=None)
        if name == "parabolicity":
            s.add_argument("--tests", help="comma separated tests (sphere,ball,log-ball,threshold or "
                                           "milnor,ichihara,tangency)")
        else:
            s.set_defaults(tests=None)
    e = sub.add_parser("examples", help="write the five catalog surface configurations")
    e.add_argument("--out", default="isolab_examples", help="directory for the configs")
    sub.add_parser("schema", help="print the JSON schemas of configs and reports")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "examples":
        out = Path(args.out)
        for name, cfg in example_configs().items():
            atomic_write(out / f"{name}.json", json.dumps(cfg.model_dump(mode="json", exclude_defaults=True),
                                                          indent=2, sort_keys=True) + "\n")
            print(out / f"{name}.json")
        return 0
    if args.command == "schema":
        schemas = {"config": ExperimentConfig.model_json_schema(), "report": AnalysisReport.model_json_schema()}
        print(json.dumps(schemas, indent=2, sort_keys=True))
        return 0
    try:
        cfg = build_config(args)
    except ValidationError as exc:
        print(f"error: invalid configuration\n{exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    resp = _remote(args.server, cfg) if args.server else run_config(cfg)
    emit(resp, Path(args.out))
    if resp.reports:
        print(render(resp))
    if resp.exit_code != 0:
        print(f"error: {resp.error}", file=sys.stderr)
    return resp.exit_code


if __name__ == "__main__":
    sys.exit(main())
