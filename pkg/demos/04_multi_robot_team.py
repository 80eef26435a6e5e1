#!/usr/bin/env python3
"""Six robots with distinct goals on a conveyor map, validated end to end."""

from pathlib import Path

import numpy as np

import heatplan as hp

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

spec = hp.SuiteSpec(
    families=("conveyor",),
    robot_counts=(6,),
    scenarios_per_config=1,
    map_variants=1,
    base_seed=20,
)
scenario = hp.generate_suite(spec)[0]
print(f"map {scenario.map.name}, {len(scenario.robots)} robots:")
for r in scenario.robots:
    print(f"  {r.id}: {r.instruction!r} from {np.round(r.start, 2).tolist()}")

result = hp.plan(scenario)
print(f"\nsuccess: {result.success}  time: {result.planning_time_s:.2f}s")
print(f"goals reached: {sum(result.goal_reached)}/{len(result.goal_reached)}")

micro = np.stack([tr.micro_steps for tr in result.trajectories])
n = len(micro)
dmin = min(
    float(np.sqrt(((micro[i] - micro[j]) ** 2).sum(axis=1)).min())
    for i in range(n)
    for j in range(i + 1, n)
)
print(f"closest approach between any two robots: {dmin:.3f} units (d_safe = 0.10)")

layers = ("occupancy", "regions", "trajectories", "starts", "goals")
render_spec = hp.RenderSpec(layers=layers)
name = hp.figure_name(f"{scenario.map.name}-s{scenario.seed}", layers)
(OUT / name).write_text(
    hp.render_svg(scenario.map, render_spec, trajectories=result.trajectories, scenario=scenario)
)
print(f"wrote {name}")
