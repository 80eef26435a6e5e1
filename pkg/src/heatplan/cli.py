"""Command-line entry point.

Subcommands: gen-map, plan, bench, render, fields.  Exit status 0 on
success, 1 when a plan fails, 2 on usage or input errors.  All randomness
comes from explicit --seed flags; no environment variables are read.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench as bench_mod
from . import gridmap, heatfield, render
from .errors import HeatplanError
from .planner import PlannerConfig, plan, result_to_json

_PLANNER_FLAGS = {
    "steps": "T",
    "anneal": "K",
    "beta": "beta",
    "d_safe": "d_safe",
    "d_margin": "d_margin",
    "step_ratio": "step_ratio",
    "sigma_min": "sigma_min",
    "sigma_max": "sigma_max",
    "time_limit": "time_limit",
    "goal_tol": "goal_tol",
}


def _add_planner_flags(p: argparse.ArgumentParser):
    p.add_argument("--steps", type=int, help="diffusion steps T (default 20)")
    p.add_argument("--anneal", type=int, help="annealing steps K per diffusion step (default 10)")
    p.add_argument("--beta", type=float, help="inter-robot guidance strength")
    p.add_argument("--d-safe", dest="d_safe", type=float, help="hard minimum robot separation, units")
    p.add_argument("--d-margin", dest="d_margin", type=float, help="soft repulsion threshold, units")
    p.add_argument("--step-ratio", dest="step_ratio", type=float, help="alpha_t / sigma_t")
    p.add_argument("--sigma-min", dest="sigma_min", type=float)
    p.add_argument("--sigma-max", dest="sigma_max", type=float)
    p.add_argument("--time-limit", dest="time_limit", type=float, help="seconds before abort")
    p.add_argument("--goal-tol", dest="goal_tol", type=float, help="goal membership tolerance, units")


def _planner_overrides(args) -> dict:
    overrides = {}
    for flag, field in _PLANNER_FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            overrides[field] = val
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heatplan")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-map", help="generate a family map and write its JSON file")
    g.add_argument("--family", required=True, choices=gridmap.FAMILIES)
    g.add_argument("--seed", required=True, type=int)
    g.add_argument("--grid", type=int, default=128, help="cells per side")
    g.add_argument("--labels", type=int, default=4, help="number of labeled regions")
    g.add_argument("--ood", action="store_true", help="seal a duplicate of the first label")
    g.add_argument("--out", help="output path (default stdout)")

    p = sub.add_parser("plan", help="plan a scenario file and write the result JSON")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--out", help="result path (default stdout)")
    p.add_argument("--svg", help="also render trajectories to this SVG path")
    p.add_argument("--micro-steps", action="store_true", help="include micro steps in the JSON")
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock fields (determinism checks)")
    _add_planner_flags(p)

    b = sub.add_parser("bench", help="expand a suite, run it, write report and records")
    b.add_argument("--families", default=",".join(gridmap.FAMILIES), help="comma-separated families")
    b.add_argument("--robots", default="3,6,9", help="comma-separated robot counts")
    b.add_argument("--n", type=int, default=30, help="scenarios per (family, robot count)")
    b.add_argument("--variants", type=int, default=6, help="map variants per family")
    b.add_argument("--grid", type=int, default=128, help="map cells per side")
    b.add_argument("--base-seed", type=int, default=0)
    b.add_argument("--ood", action="store_true", help="seal one duplicate goal instance per map")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--format", choices=("csv", "json"), default="csv")
    b.add_argument("--out", help="report path (default stdout)")
    b.add_argument("--records", help="per-scenario JSON-lines path")
    b.add_argument("--no-timing", action="store_true", help="omit wall-clock fields")
    _add_planner_flags(b)

    r = sub.add_parser("render", help="render a map (and optional plan) to SVG")
    r.add_argument("--map", help="map JSON path")
    r.add_argument("--scenario", help="scenario JSON path (alternative to --map)")
    r.add_argument("--plan", dest="plan_path", help="plan result JSON with waypoints")
    r.add_argument("--layers", default="occupancy,regions", help="comma-separated layer names")
    r.add_argument("--stride", type=int, default=4, help="arrow subsampling stride")
    r.add_argument("--canvas", type=int, default=640)
    r.add_argument("--label", help="goal label for heat/field layers (solves on the fly)")
    r.add_argument("--t", type=int, default=20, help="diffusion step for heat/field layers")
    r.add_argument("--field-dump", dest="field_dump", help="load field_arrows from a fields dump instead of solving")
    r.add_argument("--out", help="SVG path (default stdout)")
    _add_planner_flags(r)

    f = sub.add_parser("fields", help="solve score fields for one label and dump them")
    f.add_argument("--map", required=True)
    f.add_argument("--label", required=True)
    f.add_argument("--t", help="diffusion step, or 'all'", default="all")
    f.add_argument("--format", choices=("bin", "json"), default="bin")
    f.add_argument("--out", required=True, help="output file (single t) or directory (all)")
    _add_planner_flags(f)

    return parser


def _write_out(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _cmd_gen_map(args) -> int:
    params = gridmap.GeneratorParams(cells=args.grid, n_labels=args.labels, seal_duplicate=args.ood)
    worldmap = gridmap.generate_map(args.family, args.seed, params)
    _write_out(gridmap.encode_map(worldmap), args.out)
    return 0


def _load_scenario_with_overrides(args):
    scenario = gridmap.load_scenario(args.scenario)
    config = PlannerConfig().with_overrides(scenario.config)
    overrides = _planner_overrides(args)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return scenario, config.with_overrides(overrides)


def _cmd_plan(args) -> int:
    scenario, config = _load_scenario_with_overrides(args)
    result = plan(scenario, config, use_scenario_config=False)
    _write_out(
        result_to_json(result, include_timing=not args.no_timing, include_micro=args.micro_steps),
        args.out,
    )
    if args.svg:
        spec = render.RenderSpec(layers=("occupancy", "regions", "trajectories", "starts", "goals"))
        svg = render.render_svg(
            scenario.map, spec, trajectories=result.trajectories, scenario=scenario
        )
        Path(args.svg).write_text(svg, encoding="utf-8")
    return 0 if result.success else 1


def _cmd_bench(args) -> int:
    spec = bench_mod.SuiteSpec(
        families=tuple(s for s in args.families.split(",") if s),
        robot_counts=tuple(int(v) for v in args.robots.split(",") if v),
        scenarios_per_config=args.n,
        map_variants=args.variants,
        base_seed=args.base_seed,
        ood=args.ood,
        map_params={"cells": args.grid},
    )
    config = PlannerConfig().with_overrides(_planner_overrides(args))
    scenarios = bench_mod.generate_suite(spec)
    report = bench_mod.run_suite(scenarios, config, workers=args.workers)
    _write_out(bench_mod.write_report(report, args.format, include_timing=not args.no_timing), args.out)
    if args.records:
        Path(args.records).write_text(
            bench_mod.write_records(report.records, include_timing=not args.no_timing),
            encoding="utf-8",
        )
    return 0


def _cmd_render(args) -> int:
    import json

    scenario = None
    if args.scenario:
        scenario = gridmap.load_scenario(args.scenario)
        worldmap = scenario.map
    elif args.map:
        worldmap = gridmap.load_map(args.map)
    else:
        raise HeatplanError("render needs --map or --scenario")
    layers = tuple(s for s in args.layers.split(",") if s)
    spec = render.RenderSpec(layers=layers, stride=args.stride, canvas=(args.canvas, args.canvas))

    heat_state = score_field = None
    if args.field_dump:
        data = Path(args.field_dump).read_bytes()
        score_field = heatfield.load_field_bytes(data, worldmap)
    elif "heat" in layers or "field_arrows" in layers:
        if not args.label:
            raise HeatplanError("heat/field layers need --label (or --field-dump)")
        config = PlannerConfig().with_overrides(_planner_overrides(args))
        schedule = config.schedule()
        regions = gridmap.resolve_goal_regions(args.label, worldmap)
        states = heatfield.solve_to_times(heatfield.SourceSpec(regions), worldmap, schedule)
        if not (1 <= args.t <= schedule.T):
            raise HeatplanError(f"--t must be in 1..{schedule.T}")
        heat_state = states[args.t - 1]
        score_field = heatfield.build_score_field(heat_state, config.log_floor, t=args.t)
    if "heat" in layers and heat_state is None:
        raise HeatplanError("heat layer needs --label (dumps carry vectors only)")

    trajectories = None
    if args.plan_path:
        doc = json.loads(Path(args.plan_path).read_text(encoding="utf-8"))
        import numpy as np

        from .planner import Trajectory

        trajectories = tuple(
            Trajectory(
                robot_id=entry["id"],
                waypoints=np.asarray(entry["waypoints"], dtype=float),
                micro_steps=np.asarray(entry.get("micro_steps", []), dtype=float).reshape(-1, 2),
            )
            for entry in doc["robots"]
        )
    svg = render.render_svg(
        worldmap, spec, heat=heat_state, score_field=score_field,
        trajectories=trajectories, scenario=scenario,
    )
    _write_out(svg, args.out)
    return 0


def _cmd_fields(args) -> int:
    worldmap = gridmap.load_map(args.map)
    config = PlannerConfig().with_overrides(_planner_overrides(args))
    schedule = config.schedule()
    regions = gridmap.resolve_goal_regions(args.label, worldmap)
    ladder = heatfield.score_fields(worldmap, regions, schedule, config.log_floor)
    if args.t == "all":
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        ext = "hpsf" if args.format == "bin" else "json"
        for t, field in sorted(ladder.items()):
            heatfield.save_field(field, outdir / f"{args.label}.t{t:02d}.{ext}", schedule, args.format)
        return 0
    t = int(args.t)
    if t not in ladder:
        raise HeatplanError(f"--t must be in 1..{schedule.T} or 'all'")
    heatfield.save_field(ladder[t], Path(args.out), schedule, args.format)
    return 0


_COMMANDS = {
    "gen-map": _cmd_gen_map,
    "plan": _cmd_plan,
    "bench": _cmd_bench,
    "render": _cmd_render,
    "fields": _cmd_fields,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return _COMMANDS[args.command](args)
    except (HeatplanError, FileNotFoundError, ValueError) as exc:
        print(f"heatplan: error: {exc}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"heatplan: error: missing field {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
