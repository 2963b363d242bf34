"""Scenario runner: declarative JSON experiments to CSV series, a JSON report,
and optional SVG line plots.

Usage:
    leafavg run <scenario.json> --out <dir> [--svg] [--threads N]
    leafavg catalog

Exit codes: 0 success, 2 scenario error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import averages, constructions, flows, iet, sections
from .errors import LeafavgError, NumericsError, ScenarioError
from .geometry import OBSERVABLES, Point, get_observable
from .running import ReportPolicy, convergence_report

KINDS = ("flow_average", "return_study", "omega_classify", "iet_study",
         "band_study", "koch_study", "suspension_study")

_TOP_KEYS = {"id", "kind", "system", "observables", "initial_conditions", "starts",
             "horizons", "tolerances", "outputs", "section"}
_SYSTEM_KEYS = {"catalog", "parameters", "lengths", "permutation", "map", "base"}
_HORIZON_KEYS = {"time", "arclength", "iterations", "blocks", "returns", "keane_depth"}
_TOLERANCE_KEYS = {"integrator", "report", "keane", "diagnostic"}
_OUTPUT_KEYS = {"svg"}
_SECTION_KEYS = {"a", "b", "orientation", "kind", "axis", "value"}


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where} must be an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioError(f"unknown keys {sorted(unknown)} in {where}")


def load_scenario(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
    _check_keys(raw, _TOP_KEYS, "scenario")
    for key in ("id", "kind"):
        if key not in raw:
            raise ScenarioError(f"scenario missing required key {key!r}")
    if raw["kind"] not in KINDS:
        raise ScenarioError(f"unknown kind {raw['kind']!r}; known: {KINDS}")
    for key, allowed in (("system", _SYSTEM_KEYS), ("horizons", _HORIZON_KEYS),
                         ("tolerances", _TOLERANCE_KEYS), ("outputs", _OUTPUT_KEYS),
                         ("section", _SECTION_KEYS)):
        if key in raw:
            _check_keys(raw[key], allowed, key)
    for name in raw.get("observables", []):
        if name not in OBSERVABLES:
            raise ScenarioError(f"unknown observable {name!r}")
    return raw


def _build_field(system):
    catalog = system.get("catalog")
    if catalog is None:
        raise ScenarioError("flow scenarios need system.catalog")
    try:
        return flows.make_field(catalog, system.get("parameters"))
    except (KeyError, ValueError) as exc:
        raise ScenarioError(str(exc)) from exc


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _write_csv(path: Path, samples):
    lines = ["parameter,average"]
    lines.extend(f"{_fmt(p)},{_fmt(a)}" for p, a in samples)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _svg_plot(path: Path, samples, title: str):
    """Minimal self-contained running-average line plot."""
    w, h, m = 640, 400, 54
    xs = [math.log10(p) if p > 0 else 0.0 for p, _ in samples]
    ys = [a for _, a in samples]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 - x0 < 1e-12:
        x1 = x0 + 1.0
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def sx(v):
        return m + (v - x0) / (x1 - x0) * (w - 2 * m)

    def sy(v):
        return h - m - (v - y0) / (y1 - y0) * (h - 2 * m)

    pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(xs, ys))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<line x1="{m}" y1="{h - m}" x2="{w - m}" y2="{h - m}" stroke="black"/>',
        f'<line x1="{m}" y1="{m}" x2="{m}" y2="{h - m}" stroke="black"/>',
        f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="1.5"/>',
        f'<text x="{w // 2}" y="{m // 2}" text-anchor="middle" font-size="13">{title}</text>',
        f'<text x="{w // 2}" y="{h - m // 4}" text-anchor="middle" font-size="11">'
        f'log10(parameter): {_fmt(x0)} .. {_fmt(x1)}</text>',
        f'<text x="{m}" y="{m - 6}" font-size="11">{_fmt(y1)}</text>',
        f'<text x="{m}" y="{h - m + 14}" font-size="11">{_fmt(y0)}</text>',
        "</svg>",
    ]
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")


def _report_entry(avg, policy):
    try:
        rep = convergence_report(avg, policy)
        return {"verdict": rep.verdict, "estimate": rep.estimate,
                "limsup_hat": rep.limsup_hat, "liminf_hat": rep.liminf_hat,
                "window_policy": rep.window_policy, "termination": avg.termination,
                "n_samples": len(avg.samples)}
    except ValueError as exc:
        return {"verdict": "undecided", "error": str(exc),
                "termination": avg.termination, "n_samples": len(avg.samples)}


def _flow_average_runs(sc, policy, tol):
    fld = _build_field(sc.get("system", {}))
    hz = sc.get("horizons", {})
    t_max = hz.get("time")
    s_max = hz.get("arclength")
    if t_max is None and s_max is None:
        raise ScenarioError("flow_average needs horizons.time and/or horizons.arclength")
    runs = []
    for ic_idx, ic in enumerate(sc.get("initial_conditions", [])):
        for obs_name in sc.get("observables", ["one"]):
            obs = get_observable(obs_name)
            if t_max is not None:
                runs.append((f"ic{ic_idx}_{obs_name}_time",
                             lambda f=fld, p=tuple(ic), o=obs: averages.time_average(f, p, o, float(t_max), tol=tol)))
            if s_max is not None:
                runs.append((f"ic{ic_idx}_{obs_name}_length",
                             lambda f=fld, p=tuple(ic), o=obs: averages.length_average_forward(f, p, o, float(s_max), tol=tol)))
    return runs


def _build_section(spec, fld):
    if spec.get("kind") == "torus_circle":
        return sections.CrossSection.torus_circle(axis=int(spec.get("axis", 0)),
                                                  value=float(spec.get("value", 0.0)))
    try:
        a, b = spec["a"], spec["b"]
    except KeyError as exc:
        raise ScenarioError("section needs endpoints 'a' and 'b'") from exc
    sec = sections.CrossSection.segment(tuple(a), tuple(b),
                                        orientation=int(spec.get("orientation", 1)))
    sec.validate_transversal(fld)
    return sec


def run_scenario(path, out_dir, svg: bool = False, threads: int = 1) -> int:
    """Execute one scenario file; writes CSV series and <id>_report.json."""
    sc = load_scenario(path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tols = sc.get("tolerances", {})
    tol = float(tols.get("integrator", 1e-9))
    policy = ReportPolicy(tolerance=float(tols.get("report", 1e-2)))
    sid = sc["id"]
    kind = sc["kind"]
    t_start = time.perf_counter()
    report = {"scenario": {"id": sid, "kind": kind}, "runs": [], "stats": {}}
    entries = []

    def emit(name, avg, extra=None):
        entry = {"run": name, "observable": avg.observable_id,
                 "parameter_kind": avg.parameter_kind}
        entry.update(_report_entry(avg, policy))
        if extra:
            entry.update(extra)
        _write_csv(out / f"{sid}_{name}.csv", avg.samples)
        if svg:
            _svg_plot(out / f"{sid}_{name}.svg", avg.samples, f"{sid} {name}")
        entries.append(entry)

    if kind == "flow_average":
        runs = _flow_average_runs(sc, policy, tol)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(lambda item: (item[0], item[1]()), runs))
        else:
            results = [(name, fn()) for name, fn in runs]
        for name, avg in results:
            emit(name, avg)

    elif kind == "return_study":
        fld = _build_field(sc.get("system", {}))
        sec = _build_section(sc.get("section", {}), fld)
        n = int(sc.get("horizons", {}).get("returns", 8))
        obs = [get_observable(o) for o in sc.get("observables", ["one"])]
        for ic_idx, ic in enumerate(sc.get("initial_conditions", [])):
            try:
                recs = sections.return_sequence(fld, sec, tuple(ic), n, observables=obs, tol=tol)
            except NumericsError as exc:
                entries.append({"run": f"ic{ic_idx}", "status": "failed", "error": str(exc)})
                continue
            _write_csv(out / f"{sid}_ic{ic_idx}_times.csv",
                       [(k + 1.0, r.return_time) for k, r in enumerate(recs)])
            _write_csv(out / f"{sid}_ic{ic_idx}_arcs.csv",
                       [(k + 1.0, r.return_arc_length) for k, r in enumerate(recs)])
            entries.append({"run": f"ic{ic_idx}", "status": "ok", "n_returns": len(recs),
                            "first_return_time": recs[0].return_time,
                            "last_return_time": recs[-1].return_time,
                            "last_arc_length": recs[-1].return_arc_length})

    elif kind == "omega_classify":
        fld = _build_field(sc.get("system", {}))
        for ic_idx, ic in enumerate(sc.get("initial_conditions", [])):
            verdict = sections.classify_omega_limit(fld, tuple(ic))
            ev = {k: v for k, v in verdict.evidence.items()
                  if isinstance(v, (int, float, str, bool))}
            entries.append({"run": f"ic{ic_idx}", "verdict": verdict.verdict, "evidence": ev})

    elif kind == "iet_study":
        system = sc.get("system", {})
        try:
            E = iet.make_iet(system["lengths"], system["permutation"])
        except KeyError as exc:
            raise ScenarioError("iet_study needs system.lengths and system.permutation") from exc
        hz = sc.get("horizons", {})
        n_max = int(hz.get("iterations", 100_000))
        depth = int(hz.get("keane_depth", 10_000))
        keane = iet.keane_check(E, depth, tol=float(tols.get("keane", 1e-12)))
        report["stats"]["keane"] = {"verdict": keane.verdict, "depth": keane.depth,
                                    "min_distance": keane.min_distance}
        starts = [float(s) for s in sc.get("starts", [0.0])]
        obs_names = sc.get("observables", ["cos_2pi_x"])
        for s_idx, start in enumerate(starts):
            for name in obs_names:
                avg = iet.birkhoff_average(E, start, get_observable(name), n_max)
                emit(f"start{s_idx}_{name}", avg)
        if len(starts) >= 2:
            diag = iet.unique_ergodicity_diagnostic(
                E, [get_observable(n) for n in obs_names], starts, n_max,
                threshold=float(tols.get("diagnostic", 1e-2)))
            report["stats"]["unique_ergodicity"] = {
                "spread": diag.spread, "consistent": diag.consistent,
                "threshold": diag.threshold, "n": diag.n}

    elif kind == "band_study":
        base = int(sc.get("system", {}).get("base", 3))
        n_blocks = int(sc.get("horizons", {}).get("blocks", 3 ** 8))
        band = constructions.BandFunction(base=base)
        emit("band", constructions.band_running_average(band, n_blocks))

    elif kind == "koch_study":
        base = int(sc.get("system", {}).get("base", 3))
        n_blocks = int(sc.get("horizons", {}).get("blocks", 12))
        leaf, obs = constructions.koch_leaf(n_blocks, base=base)
        from .geometry import curve_running_average

        avg = curve_running_average(leaf.curve, obs, leaf.block_boundaries(), resolution=1)
        oracle = leaf.oracle_running_average()
        max_diff = max(abs(a - o) for (_, a), (_, o) in zip(avg.samples, oracle))
        emit("koch", avg, extra={"oracle_max_diff": max_diff,
                                 "block_lengths_ok": bool(
                                     max(abs(b.length - 1.0) for b in leaf.blocks) < 1e-9)})

    elif kind == "suspension_study":
        system = sc.get("system", {})
        try:
            cmap = constructions.make_circle_map(system["map"], system.get("parameters"))
        except KeyError as exc:
            raise ScenarioError("suspension_study needs system.map") from exc
        n_max = int(sc.get("horizons", {}).get("iterations", 10_000))
        obs_names = sc.get("observables", ["cos_2pi_x"])
        for s_idx, start in enumerate(sc.get("starts", [0.2])):
            for name in obs_names:
                obs = get_observable(name)
                sysm = constructions.SuspensionSystem(
                    circle_map=cmap,
                    fiber_observable=(name, lambda t, o=obs: o.fn(Point(t, 0.0, 0.0))),
                    source=cmap.repelling_fixed_point)
                emit(f"start{s_idx}_{name}",
                     constructions.suspension_length_average(sysm, float(start), n_max))

    report["runs"] = entries
    report["stats"]["n_runs"] = len(entries)
    wall = time.perf_counter() - t_start
    report_path = out / f"{sid}_report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                           encoding="utf-8")
    print(f"{sid}: {len(entries)} runs in {wall:.2f}s -> {report_path}", file=sys.stderr)
    return 0


def catalog_text() -> str:
    lines = ["vector fields:"]
    for cid, (_, required, optional) in sorted(flows.CATALOG.items()):
        sig = ", ".join(list(required) + [f"[{o}]" for o in optional]) or "(no parameters)"
        lines.append(f"  {cid}: {sig}")
    lines.append("circle maps:")
    lines.append("  rotation: rho")
    lines.append("  north_south: kappa")
    lines.append("interval exchange stanza (iet_study): system.lengths = [l1..lN], "
                 "system.permutation = [p1..pN]")
    lines.append("observables:")
    seen = set()
    for name, obs in sorted(OBSERVABLES.items()):
        if id(obs) in seen:
            continue
        seen.add(id(obs))
        lines.append(f"  {name}: {obs.description}")
    lines.append("scenario kinds: " + ", ".join(KINDS))
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="leafavg",
                                     description="length-average laboratory scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a scenario file")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--svg", action="store_true", help="also write SVG line plots")
    p_run.add_argument("--threads", type=int, default=1)
    sub.add_parser("catalog", help="list catalog ids and parameter schemas")
    args = parser.parse_args(argv)

    if args.command == "catalog":
        print(catalog_text())
        return 0
    try:
        return run_scenario(args.scenario, args.out, svg=args.svg, threads=args.threads)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except (LeafavgError, FloatingPointError, OverflowError, ZeroDivisionError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
