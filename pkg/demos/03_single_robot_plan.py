#!/usr/bin/env python3
"""Plan one robot through a shelf map from a language instruction."""

from pathlib import Path

import numpy as np

import heatplan as hp

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

m = hp.generate_map("shelf", seed=11, cells=128, n_labels=3)
label = m.labels()[0]
instruction = f"Move to the {label.capitalize()}"

# put the start in the goal's connected component, far corner-ish
mask = hp.flood_fill(m, m.regions_with_label(label)[0].cells[0])
rows, cols = np.nonzero(mask)
i = int(np.argmax(rows + cols))
start = ((cols[i] + 0.5) * m.cell_size[0], (rows[i] + 0.5) * m.cell_size[1])

scenario = hp.Scenario(m, (hp.RobotSpec("r0", instruction, start),), seed=5)
result = hp.plan(scenario)

tr = result.trajectories[0]
print(f"instruction: {instruction!r}")
print(f"success: {result.success}  planning time: {result.planning_time_s:.2f}s")
print(f"waypoints: {len(tr.waypoints)}  micro steps: {len(tr.micro_steps)}")
print(f"path length: {np.linalg.norm(np.diff(tr.waypoints, axis=0), axis=1).sum():.2f} units")

spec = hp.RenderSpec(layers=("occupancy", "regions", "trajectories", "starts", "goals"))
(OUT / "single_robot.svg").write_text(
    hp.render_svg(m, spec, trajectories=result.trajectories, scenario=scenario)
)
print("wrote single_robot.svg")
