"""Command-line experiment runner.

Every subcommand writes its outputs plus a ``manifest.json`` into
``--output``. A manifest's ``config`` block is a complete set of parameters:
passing the manifest back through ``--config`` regenerates the outputs
bit-exactly. Exit status is 0 on success, 1 on a validation error and 2 when
an evolution hit its step cap without concentrating.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import time
from importlib import metadata
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError, NotConverged, RefGamesError, SchemaMismatch
from .geometry import extract_pareto_boundary, resolve_domain
from .measure import (
    CdfGrid,
    GridMeasure,
    b_eps,
    iterate_cdf,
    iterate_cdf_until,
    pareto_band_mass,
    parse_cdf_map,
)
from .solution import (
    DEFAULT_EPS_SCHEDULE,
    axiom_report,
    concentration_point,
    evolve_tracked,
    ref_solution,
    schedule_level,
    ternary_alternating_fixed_point,
    ternary_random_limit,
)
from .tree import AssignmentModel, GameSpec, ValueSampleSet, ks_statistic, simulate

COMMANDS = ("simulate", "iterate-cdf", "evolve", "solve", "ref", "axioms", "ternary", "compare")

COMMON_DEFAULTS = {
    "domain": "triangle",
    "resolution": None,
    "steps": None,
    "seed": 0,
    "format": "csv",
    "threads": None,
    "plot": False,
}

DEFAULTS = {
    "simulate": {"domain": "segment", "assignment": "alternating", "eps": None, "depth": 20, "branching": 2,
                 "replicates": 100_000},
    "iterate-cdf": {"map": "phi", "eps": None, "p": None, "branching": 2, "resolution": 4096, "steps": 30},
    "evolve": {"schedule": "random", "eps": None, "branching": 2, "resolution": 512, "steps": 200,
               "band": 0.05},
    "solve": {"schedule": "alternating", "eps": None, "resolution": 512, "steps": None},
    "ref": {"eps_schedule": list(DEFAULT_EPS_SCHEDULE), "resolution": 512, "steps": None, "random_steps": 200},
    "axioms": {"eps_schedule": list(DEFAULT_EPS_SCHEDULE), "resolution": 512, "steps": None, "random_steps": 200},
    "ternary": {"resolution": 512, "steps": 200, "cdf_points": 4096},
    "compare": {"samples": None, "analytic": None, "coordinate": 1, "centers": None, "half_width": 0.05},
}

# keys that name files and are resolved relative to the config file
PATH_KEYS = ("samples", "analytic")


# -- argument parsing --------------------------------------------------------


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("common options")
    g.add_argument("--config", help="JSON config or a previous manifest.json; flags override it")
    g.add_argument("--domain", help="builtin name, JSON file or inline JSON feasible set")
    g.add_argument("--resolution", type=int, help="grid cells per axis (1D: CDF intervals)")
    g.add_argument("--steps", type=int, help="evolution steps / levels (simulate: tree depth)")
    g.add_argument("--seed", type=int, help="64-bit seed")
    g.add_argument("--output", default=".", help="output directory (default: current directory)")
    g.add_argument("--format", choices=("csv", "json"), help="format of tabular outputs")
    g.add_argument("--threads", type=int, help="worker threads (fallback: REFGAMES_THREADS, then 1)")
    g.add_argument("--plot", action="store_true", default=None, help="also write PNG figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="refgames", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("simulate", help="Monte Carlo SPE values by streaming backward induction")
    p.add_argument("--assignment", help="alternating | random | hybrid:EPS | P_ODD,P_EVEN")
    p.add_argument("--eps", type=float, help="eps for --assignment hybrid")
    p.add_argument("--depth", type=int, help="tree depth (default 20)")
    p.add_argument("--branching", type=int)
    p.add_argument("--replicates", type=int)

    p = sub.add_parser("iterate-cdf", help="1D CDF iteration of the zero-sum value")
    p.add_argument("--map", help="phi | phi_eps | raw_pair | ternary")
    p.add_argument("--eps", type=float)
    p.add_argument("--p", type=float, help="max probability for raw_pair")
    p.add_argument("--branching", type=int)

    p = sub.add_parser("evolve", help="2D grid-measure evolution with quantile tracks")
    p.add_argument("--schedule", help="alternating | random | hybrid:EPS | P_ODD,P_EVEN")
    p.add_argument("--eps", type=float)
    p.add_argument("--branching", type=int)
    p.add_argument("--band", type=float, help="Pareto band half-width for the summary")

    p = sub.add_parser("solve", help="concentration point of an alternating or hybrid schedule")
    p.add_argument("--schedule", help="alternating | hybrid:EPS")
    p.add_argument("--eps", type=float)

    for name, text in (("ref", "REF bargaining solution"), ("axioms", "standard-solution axiom checks")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--eps-schedule", dest="eps_schedule", type=_float_list, help="e.g. 0.2,0.1,0.05,0.025")
        p.add_argument("--random-steps", dest="random_steps", type=int)

    p = sub.add_parser("ternary", help="ternary-tree fixed point and random-controller limit")
    p.add_argument("--cdf-points", dest="cdf_points", type=int)

    p = sub.add_parser("compare", help="KS and box-mass comparison of samples with an analytic CDF")
    p.add_argument("--samples", help="sample CSV/JSON from simulate")
    p.add_argument("--analytic", help="CDF CSV (x,F) from iterate-cdf, or a second sample file")
    p.add_argument("--coordinate", type=int, choices=(1, 2))
    p.add_argument("--centers", type=_float_list, help="box centres, e.g. 0.618,0.5")
    p.add_argument("--half-width", dest="half_width", type=float)

    for p in sub.choices.values():
        _common(p)
    return parser


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _load_config(path: str) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", "config") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}", "config") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object", "config")
    if isinstance(doc.get("config"), dict):  # a manifest
        doc = doc["config"]
    out = {k.replace("-", "_"): v for k, v in doc.items()}
    for key in PATH_KEYS:
        if isinstance(out.get(key), str) and not Path(out[key]).is_absolute():
            out[key] = str((p.parent / out[key]).resolve())
    return out


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    command = args.command
    cfg: dict[str, Any] = dict(COMMON_DEFAULTS)
    cfg.update(DEFAULTS[command])
    if args.config:
        loaded = _load_config(args.config)
        if loaded.get("command", command) != command:
            raise ConfigError(f"config is for {loaded['command']!r}, not {command!r}", "command")
        loaded.pop("command", None)
        unknown = sorted(set(loaded) - set(cfg))
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}", unknown[0])
        cfg.update(loaded)
    for key, value in vars(args).items():
        if key in ("command", "config", "output") or value is None:
            continue
        cfg[key] = value
    if command == "simulate" and args.steps is not None and args.depth is None:
        cfg["depth"] = args.steps
    if cfg.get("threads") is None:
        env = os.environ.get("REFGAMES_THREADS")
        try:
            cfg["threads"] = int(env) if env else 1
        except ValueError as exc:
            raise ConfigError(f"REFGAMES_THREADS must be an integer, got {env!r}", "threads") from exc
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    def positive(key):
        v = cfg.get(key)
        if v is not None and (not isinstance(v, int) or isinstance(v, bool) or v < 1):
            raise ConfigError(f"{key} must be a positive integer, got {v!r}", key)

    for key in ("resolution", "steps", "depth", "replicates", "threads", "random_steps", "cdf_points"):
        positive(key)
    if cfg.get("branching") is not None and cfg["branching"] < 2:
        raise ConfigError("branching must be >= 2", "branching")
    if cfg.get("format") not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg.get('format')!r}", "format")
    seed = cfg.get("seed")
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"seed must be an integer in [0, 2^64), got {seed!r}", "seed")
    for key in ("eps", "p", "half_width", "band"):
        v = cfg.get(key)
        if v is not None and not (isinstance(v, (int, float)) and math.isfinite(v)):
            raise ConfigError(f"{key} must be a finite number", key)


def _assignment(cfg: dict, key: str) -> AssignmentModel:
    try:
        return AssignmentModel.parse(str(cfg[key]), cfg.get("eps"))
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc), key) from exc


# -- subcommands -------------------------------------------------------------


class Run:
    """Collects output files and summary values for one invocation."""

    def __init__(self, cfg: dict, outdir: Path):
        self.cfg = cfg
        self.outdir = outdir
        self.files: list[str] = []
        self.summary: dict[str, Any] = {}

    def write(self, name: str, text: str) -> Path:
        path = self.outdir / name
        path.write_text(text)
        self.files.append(name)
        return path

    def table(self, stem: str, csv_text: str, json_text: str) -> Path:
        if self.cfg["format"] == "json":
            return self.write(f"{stem}.json", json_text)
        return self.write(f"{stem}.csv", csv_text)

    def figure(self, name: str, fn, *args, **kwargs) -> None:
        if self.cfg.get("plot"):
            fn(*args, self.outdir / name, **kwargs)
            self.files.append(name)


def cmd_simulate(run: Run) -> None:
    cfg = run.cfg
    domain = resolve_domain(cfg["domain"])
    spec = GameSpec(domain, _assignment(cfg, "assignment"), cfg["depth"], cfg["branching"])
    samples = simulate(spec, cfg["replicates"], cfg["seed"], cfg["threads"])
    run.table("samples", samples.to_csv(), samples.to_json())
    run.summary.update(
        replicates=len(samples),
        depth=spec.depth,
        levels=spec.depth,
        mean=samples.samples.mean(axis=0).tolist(),
        median=np.median(samples.samples, axis=0).tolist(),
        sampling_time=samples.wall_time,
    )
    from . import plotting

    run.figure("samples.png", plotting.plot_samples, samples.samples, domain)


def cmd_iterate_cdf(run: Run) -> None:
    cfg = run.cfg
    cdf_map = parse_cdf_map(cfg["map"], cfg.get("eps"), cfg.get("p"), cfg["branching"])
    grid = iterate_cdf(CdfGrid.uniform(cfg["resolution"]), cfg["steps"], cdf_map)
    run.table("cdf", grid.to_csv(), grid.to_json())
    run.summary.update(steps=cfg["steps"], levels=cfg["steps"] * cdf_map.levels, map=type(cdf_map).__name__)
    marks = []
    if cfg["map"] == "phi" and cfg["branching"] == 2:
        b = b_eps(0.5).value
        marks = [b]
        run.summary.update(b=b, F_b_minus_0_05=float(grid(b - 0.05)), F_b_plus_0_05=float(grid(b + 0.05)))
    run.summary["median"] = grid.quantile(0.5)
    from . import plotting

    run.figure("cdf.png", plotting.plot_cdf, grid.xs, grid.F, marks=marks)


def cmd_evolve(run: Run) -> None:
    cfg = run.cfg
    domain = resolve_domain(cfg["domain"])
    assignment = _assignment(cfg, "schedule")
    measure = GridMeasure.from_domain(domain, cfg["resolution"])
    level = schedule_level(assignment)
    track, measure = evolve_tracked(measure, assignment, cfg["steps"], level, cfg["branching"])
    run.table("measure", measure.to_csv(), measure.to_json())
    run.write("track.csv", track.to_csv())
    run.summary.update(levels=cfg["steps"], level=level, total_mass=measure.total, limit=list(track.limit()))
    if not domain.is_segment:
        boundary = extract_pareto_boundary(domain)
        run.summary["pareto_band_mass"] = pareto_band_mass(measure, boundary, cfg["band"])
    from . import plotting

    run.figure("measure.png", plotting.plot_measure, measure, domain=domain)
    run.figure("track.png", plotting.plot_track, track)


def cmd_solve(run: Run) -> None:
    cfg = run.cfg
    domain = resolve_domain(cfg["domain"])
    assignment = _assignment(cfg, "schedule")
    try:
        report = concentration_point(domain, assignment, cfg["steps"], cfg["resolution"])
    except NotConverged as exc:
        if exc.report is not None:
            _write_solution(run, exc.report, domain)
        raise
    _write_solution(run, report, domain)


def _write_solution(run: Run, report, domain) -> None:
    run.write("solution.json", report.to_json())
    if report.track is not None:
        run.table("track", report.track.to_csv(), json.dumps(report.track.to_dict()))
    run.summary.update(point=list(report.point), pareto_gap=report.pareto_gap, accepted=report.accepted,
                       levels=report.diagnostics.get("levels"))
    from . import plotting

    if report.track is not None:
        run.figure("track.png", plotting.plot_track, report.track)
    if isinstance(report.measure, GridMeasure):
        run.figure("measure.png", plotting.plot_measure, report.measure, point=report.point, domain=domain)


def _ref_kwargs(cfg: dict) -> dict:
    return {"eps_schedule": cfg["eps_schedule"], "steps": cfg["steps"], "resolution": cfg["resolution"],
            "random_steps": cfg["random_steps"]}


def cmd_ref(run: Run) -> None:
    cfg = run.cfg
    domain = resolve_domain(cfg["domain"])
    report = ref_solution(domain, **_ref_kwargs(cfg))
    run.write("ref.json", report.to_json())
    d = report.diagnostics
    run.summary.update(point=list(report.point), pareto_gap=report.pareto_gap,
                       cross_route_discrepancy=d.get("cross_route_discrepancy"), cauchy=d.get("cauchy"))
    from . import plotting

    if "points" in d:
        run.figure("ref.png", plotting.plot_ref, np.asarray(d["points"]), d["eps_schedule"], report.point,
                   d["random_median_limit"], domain=domain)


def cmd_axioms(run: Run) -> None:
    cfg = run.cfg
    domain = resolve_domain(cfg["domain"])
    report = axiom_report(domain, **_ref_kwargs(cfg))
    run.write("axioms.json", report.to_json())
    run.summary.update({k: v for k, v in report.to_dict().items() if k != "details"})


def cmd_ternary(run: Run) -> None:
    cfg = run.cfg
    domain = resolve_domain(cfg["domain"])
    root = ternary_alternating_fixed_point()
    grid, levels, converged = iterate_cdf_until(CdfGrid.uniform(cfg["cdf_points"]), parse_cdf_map("ternary"))
    doc = {
        "alternating_fixed_point": root.to_dict(),
        "alternating_cdf": {"concentration": grid.quantile(root.value), "steps": levels, "converged": converged,
                            "cell": grid.cell},
    }
    if not domain.is_segment:
        cells = ternary_random_limit(domain, cfg["steps"], cfg["resolution"])
        doc["random_limit"] = {"steps": cfg["steps"], "resolution": cfg["resolution"],
                               "top_cells": [{"point": list(p), "mass": m} for p, m in cells]}
    run.write("ternary.json", json.dumps(doc, indent=2))
    run.summary.update(root=root.value, cdf_concentration=doc["alternating_cdf"]["concentration"])
    if "random_limit" in doc:
        run.summary["top_cells"] = doc["random_limit"]["top_cells"]


def _sibling_manifest(path: Path) -> dict:
    m = path.parent / "manifest.json"
    if not m.exists():
        return {}
    try:
        return json.loads(m.read_text())
    except json.JSONDecodeError:
        return {}


def _levels_of(path: Path) -> int | None:
    return _sibling_manifest(path).get("summary", {}).get("levels")


def _load_reference(path: Path):
    """Either a CDF grid (``x,F``) or another sample set."""
    text = path.read_text()
    head = text.lstrip()[:200]
    if path.suffix == ".json":
        doc = json.loads(text)
        if "F" in doc:
            return CdfGrid(doc["x"], doc["F"])
        return ValueSampleSet.from_json(text)
    first = head.splitlines()[0].replace(" ", "") if head else ""
    if first == "x,F":
        return CdfGrid.from_csv(text)
    if first == "replicate,payoff1,payoff2":
        return ValueSampleSet.from_csv(text)
    raise SchemaMismatch(f"{path}: expected an x,F CDF or a replicate,payoff1,payoff2 sample file")


def cmd_compare(run: Run) -> None:
    cfg = run.cfg
    if not cfg.get("samples") or not cfg.get("analytic"):
        raise ConfigError("compare needs --samples and --analytic", "samples" if not cfg.get("samples") else "analytic")
    spath, apath = Path(cfg["samples"]), Path(cfg["analytic"])
    samples = ValueSampleSet.load(spath)
    col = cfg["coordinate"] - 1
    values = np.sort(samples.samples[:, col])
    ref = _load_reference(apath)
    n = len(values)
    if isinstance(ref, CdfGrid):
        ks = ks_statistic(values, ref)
        ref_cdf = ref
        kind = "one-sample"
        n_eff = n
    else:
        other = np.sort(ref.samples[:, col])
        grid = np.concatenate([values, other])
        ks = float(np.max(np.abs(np.searchsorted(values, grid, "right") / n
                                 - np.searchsorted(other, grid, "right") / len(other))))
        kind = "two-sample"
        n_eff = n * len(other) / (n + len(other))

        def ref_cdf(x):
            return np.searchsorted(other, x, "right") / len(other)
    crit = 1.36 / math.sqrt(n_eff)
    ls, la = _levels_of(spath), _levels_of(apath)
    header = {"samples": str(spath), "analytic": str(apath), "kind": kind, "coordinate": cfg["coordinate"],
              "sample_levels": ls, "analytic_levels": la,
              "depth_mismatch": bool(ls is not None and la is not None and ls != la)}
    boxes = []
    centers = cfg.get("centers")
    if centers is None:
        centers = [b_eps(0.5).value]
    hw = cfg["half_width"]
    for c in centers:
        emp = float(np.mean(np.abs(values - c) <= hw))
        ana = float(ref_cdf(c + hw) - ref_cdf(c - hw))
        sd = math.sqrt(max(ana * (1 - ana), 1e-300) / n)
        boxes.append({"center": c, "half_width": hw, "empirical": emp, "analytic": ana,
                      "binomial_sd": sd, "z": (emp - ana) / sd if sd > 0 else 0.0})
    doc = {"header": header, "n": n, "ks": ks, "ks_critical_95": crit, "ks_ratio": ks / crit, "box_mass": boxes}
    run.write("compare.json", json.dumps(doc, indent=2))
    run.summary.update(ks=ks, ks_critical_95=crit, depth_mismatch=header["depth_mismatch"])


HANDLERS = {
    "simulate": cmd_simulate,
    "iterate-cdf": cmd_iterate_cdf,
    "evolve": cmd_evolve,
    "solve": cmd_solve,
    "ref": cmd_ref,
    "axioms": cmd_axioms,
    "ternary": cmd_ternary,
    "compare": cmd_compare,
}


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for dist in ("artifact", "numpy", "numba", "shapely", "matplotlib"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = None
    return out


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj).__name__)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    status = 0
    try:
        cfg = resolve_config(args)
        outdir = Path(args.output)
        outdir.mkdir(parents=True, exist_ok=True)
        run = Run(cfg, outdir)
        try:
            HANDLERS[args.command](run)
        except NotConverged as exc:
            status = 2
            run.summary["error"] = str(exc)
            print(f"refgames: not converged: {exc}", file=sys.stderr)
    except ConfigError as exc:
        print(f"refgames: config error: {exc}", file=sys.stderr)
        return 1
    except (RefGamesError, ValueError, OSError) as exc:
        print(f"refgames: error: {exc}", file=sys.stderr)
        return 1
    manifest = {
        "command": args.command,
        "config": dict(cfg, command=args.command),
        "seed": cfg["seed"],
        "status": status,
        "outputs": run.files,
        "summary": run.summary,
        "versions": _versions(),
        "wall_time": time.perf_counter() - t0,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_jsonable))
    print(json.dumps({"command": args.command, "status": status, **run.summary}, default=_jsonable))
    return status


if __name__ == "__main__":
    sys.exit(main())
