"""Execute an experiment configuration and collect reports and grid tables."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import analysis as an
from . import parabolicity as pb
from . import surfaces as sf
from .constellation import Constellation, build, check_balance
from .model_space import space_form_warp
from .radial_fn import ImproperPolicy
from .schemas import (FIELD_TESTS, SURFACE_TESTS, AnalysisReport, AnalysisSpec, CsvTable, ExperimentConfig,
                      RunResponse)

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_BALANCE = 0, 1, 2, 3
SIG_DIGITS = 12


class ConfigError(ValueError):
    """Configuration is well formed but asks for something this mode cannot do."""


def round_sig(x: float) -> float | None:
    if not math.isfinite(x):
        return None
    return float(format(x, f".{SIG_DIGITS}g"))


def clean(obj):
    """JSON-ready copy with floats at 12 significant digits and non-finite values as null."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return round_sig(float(obj))
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    return obj


def format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), f".{SIG_DIGITS}g")
    return str(v)


def field_data(cfg: ExperimentConfig) -> tuple[str, str, str]:
    """(w, g, h) texts for constellation and space-form modes."""
    if cfg.mode == "constellation":
        return cfg.w, cfg.g, cfg.h
    h = cfg.h if cfg.h is not None else repr(float(cfg.C if cfg.C is not None else 0.0))
    return space_form_warp(cfg.b).source, cfg.g or "1", h


def policy_of(cfg: ExperimentConfig) -> ImproperPolicy:
    n = cfg.numerics
    return ImproperPolicy(initial_horizon=n.horizon, doublings=n.doublings, decay_ratio=n.decay_ratio)


def surface_of(cfg: ExperimentConfig) -> sf.RevolutionSurface:
    if cfg.surface is not None:
        s = sf.by_name(cfg.surface, cfg.theta, cfg.alpha)
        if cfg.u_max is not None and cfg.surface != "sphere":
            s = sf.RevolutionSurface(s.x, s.z, s.a, cfg.u_max, s.name, s.two_sided)
        return s
    return sf.make_surface(cfg.x, cfg.z, cfg.a, cfg.u_max or 30.0, name="custom")


def _grid(c: Constellation, n: int) -> np.ndarray:
    return np.linspace(c.R / n, c.R, n)


def _verdict_rows(verdicts) -> list[list]:
    rows = []
    for v in verdicts:
        ev = v.evidence
        trace = ev.partial_values if hasattr(ev, "partial_values") else ev.get("trace", [])
        if isinstance(trace, dict):
            trace = trace["partial_values"]
        for pos, val in trace:
            rows.append([v.test, pos, val])
    return rows


def _field_analysis(cfg: ExperimentConfig, spec: AnalysisSpec, cache: dict) -> tuple[dict, CsvTable]:
    n = cfg.numerics
    w, g, h = field_data(cfg)
    if spec.kind == "parabolicity":
        return _field_parabolicity(cfg, spec, (w, g, h))
    if "c" not in cache:
        cache["c"] = build(w, g, h, cfg.m, cfg.R, n.tol, n_nodes=n.n_nodes)
    c = cache["c"]
    v0 = cfg.output.v0
    if spec.kind == "isoperimetry":
        rep = an.isoperimetric_bound(c, n.grid)
        rows = [list(t) for t in an.isoperimetric_profile(c, _grid(c, n.grid))]
        return rep.to_dict(), CsvTable(header=["r", "model_quotient", "closed_form"], rows=rows)
    if spec.kind == "volume":
        r = _grid(c, n.grid)
        rows = [[float(x), an.volume_upper_bound(c, float(x), v0), an.boundary_gradient_bound(c, float(x), v0)]
                for x in r]
        result = {"volume_bound_at_R": rows[-1][1], "boundary_gradient_bound_at_R": rows[-1][2],
                  "unit_sphere_factor": v0}
        return result, CsvTable(header=["r", "volume_bound", "boundary_gradient_bound"], rows=rows)
    if spec.kind == "exit-time":
        prof = an.exit_time_profile(c, n.grid + 1)
        result = prof.to_dict()
        if cfg.mode == "space-form" and g == "1" and (cfg.C in (None, 0.0)) and cfg.h is None:
            tau = cfg.m * (cfg.m - 1) * cfg.b
            result["small_radius_expansion"] = an.gray_pinsky_expansion(cfg.m, tau, cfg.R)
        return result, CsvTable(header=["r", "psi"], rows=[list(p) for p in prof.samples])
    if spec.kind == "capacity":
        if not spec.rho < cfg.R:
            raise ConfigError(f"capacity needs rho < R, got rho={spec.rho}, R={cfg.R}")
        by_r, by_s = an.capacity_forms(c, spec.rho)
        cap = an.capacity_upper_bound(c, spec.rho, v0)
        rhos = np.linspace(spec.rho, cfg.R, n.grid, endpoint=False)
        rows = [[float(x), an.capacity_upper_bound(c, float(x), v0)] for x in rhos]
        result = {"rho": spec.rho, "capacity_bound": cap, "integral_by_r": by_r, "integral_by_s": by_s,
                  "unit_sphere_factor": v0}
        return result, CsvTable(header=["rho", "capacity"], rows=rows)
    rep = check_balance(c, n.grid)
    rows = [[a, b, s] for a, b, s in zip(rep.grid, rep.margin_weak, rep.margin_strong)]
    return rep.to_dict(), CsvTable(header=["r", "margin_weak", "margin_strong"], rows=rows)


def _field_parabolicity(cfg: ExperimentConfig, spec: AnalysisSpec, whg) -> tuple[dict, CsvTable]:
    n = cfg.numerics
    policy = policy_of(cfg)
    tests = spec.tests
    if tests is None:
        tests = ["sphere", "ball", "log-ball"]
        if cfg.mode == "space-form" and cfg.C is not None and cfg.b <= 0.0:
            tests.append("threshold")
    data = pb.UnboundedConstellation(*whg, cfg.m, n_nodes=n.n_nodes, tol=n.tol)
    verdicts = []
    for t in tests:
        if t == "sphere":
            verdicts.append(pb.test_sphere_condition(data, policy))
        elif t == "ball":
            verdicts.append(pb.test_ball_condition(data, policy))
        elif t == "log-ball":
            verdicts.append(pb.test_log_ball_condition(data, policy))
        else:
            if cfg.mode != "space-form" or cfg.C is None or cfg.b > 0.0:
                raise ConfigError("the threshold test needs space-form mode with b <= 0 and a convexity bound C")
            if cfg.b < 0.0:
                tdata = pb.space_form_threshold_data(cfg.m, cfg.b, cfg.C)
            else:
                tdata = pb.UnboundedConstellation("r", pb.EUCLIDEAN_THRESHOLD_TEXT, "0", cfg.m, tail_start=2.0)
            v = pb.test_sphere_condition(tdata, policy)
            verdicts.append(pb.ParabolicityVerdict(pb.TANGENCY, v.verdict, v.evidence,
                                                   "sphere condition with g equal to the tangency threshold; "
                                                   + v.notes))
    result = {"verdicts": [v.to_dict() for v in verdicts]}
    return result, CsvTable(header=["test", "position", "value"], rows=_verdict_rows(verdicts))


def _surface_analysis(cfg: ExperimentConfig, spec: AnalysisSpec) -> tuple[dict, CsvTable]:
    s = surface_of(cfg)
    if spec.kind == "isoperimetry":
        reports = sf.isoperimetric_check(s, sf.default_grid(s, cfg.numerics.grid))
        rows = [[r.c, r.area, r.length, r.quotient, r.upper_bound, r.inequality_holds] for r in reports]
        finite = [r.upper_bound - r.quotient for r in reports if math.isfinite(r.upper_bound)]
        result = {"surface": s.name, "all_hold": all(r.inequality_holds for r in reports), "n_points": len(reports),
                  "min_slack": min(finite) if finite else None,
                  "notes": sorted({r.note for r in reports if r.note})}
        return result, CsvTable(header=["c", "area", "length", "quotient", "upper_bound", "holds"], rows=rows)
    tests = spec.tests or list(SURFACE_TESTS)
    run = {"milnor": pb.milnor_test_surface, "ichihara": pb.ichihara_test, "tangency": pb.tangency_route}
    verdicts = [run[t](s) for t in tests]
    result = {"surface": s.name, "verdicts": [v.to_dict() for v in verdicts]}
    return result, CsvTable(header=["test", "position", "value"], rows=_verdict_rows(verdicts))


def _one(cfg: ExperimentConfig, spec: AnalysisSpec, cache: dict) -> tuple[dict, CsvTable]:
    if cfg.mode == "surface":
        return _surface_analysis(cfg, spec)
    if spec.tests and any(t in SURFACE_TESTS for t in spec.tests):
        raise ConfigError(f"surface tests need surface mode; field tests are {list(FIELD_TESTS)}")
    return _field_analysis(cfg, spec, cache)


def analysis_names(specs) -> list[str]:
    """Analysis kinds, suffixed with -2, -3, ... when a kind repeats."""
    seen: dict[str, int] = {}
    names = []
    for spec in specs:
        seen[spec.kind] = seen.get(spec.kind, 0) + 1
        names.append(spec.kind if seen[spec.kind] == 1 else f"{spec.kind}-{seen[spec.kind]}")
    return names


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, an.NotBalancedError):
        return EXIT_BALANCE
    if isinstance(exc, ArithmeticError):
        return EXIT_NUMERICAL
    return EXIT_INPUT


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("ISOLAB_THREADS", "1")))
    except ValueError:
        return 1


def run_config(cfg: ExperimentConfig, only: str | None = None) -> RunResponse:
    """Run the requested analyses (or just the one named ``only``) and gather reports and tables."""
    specs = [s for s in cfg.analyses if only is None or s.kind == only]
    if only is not None and not specs:
        specs = [AnalysisSpec(kind=only)]
    echo = cfg.model_dump(mode="json", exclude={"numerics", "analyses"})
    cache: dict = {}
    if cfg.mode != "surface" and any(s.kind != "parabolicity" for s in specs):
        try:
            w, g, h = field_data(cfg)
            cache["c"] = build(w, g, h, cfg.m, cfg.R, cfg.numerics.tol, n_nodes=cfg.numerics.n_nodes)
        except (ArithmeticError, ValueError) as exc:
            return RunResponse(exit_code=exit_code_for(exc), error=f"{type(exc).__name__}: {exc}")

    def task(spec):
        try:
            return spec, _one(cfg, spec, cache), None
        except (ArithmeticError, ValueError) as exc:
            return spec, None, exc

    with ThreadPoolExecutor(max_workers=min(_threads(), len(specs))) as pool:
        outcomes = list(pool.map(task, specs))
    reports, tables = {}, {}
    for name, (spec, out, exc) in zip(analysis_names(specs), outcomes):
        if exc is not None:
            return RunResponse(exit_code=exit_code_for(exc), error=f"{name}: {type(exc).__name__}: {exc}",
                               reports=reports, tables=tables)
        result, table = out
        reports[name] = AnalysisReport(analysis=name, mode=cfg.mode, config=echo, numerics=cfg.numerics,
                                       result=clean({**result, "analysis_options": spec.model_dump(mode="json")}))
        tables[name] = table
    return RunResponse(exit_code=EXIT_OK, reports=reports, tables=tables)
