"""Annealed Langevin planning over heat score fields with inter-robot guidance.

Each outer step t = T..1 interpolates every robot's score field at its current
position and runs K annealing updates

    x <- x + 0.5 * alpha_t^2 * (s + beta * g) + alpha_t * eps

where g is the repulsive direction of the pairwise proximity cost (active
below d_margin) and eps is a per-robot seeded Gaussian.  The sampled
distribution is zero inside obstacles and on configurations closer than
d_safe, so proposals that leave free space or breach the hard separation are
rejected (the mover keeps its previous position); a separate validator, not
the sampler, is the arbiter of success.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, fields as dataclass_fields, replace
from typing import Optional

import numpy as np

from .errors import ParameterError, SingularConfigurationError
from .gridmap import Scenario, WorldMap, resolve_goal_regions
from .heatfield import (
    DEFAULT_LOG_FLOOR,
    DEFAULT_SIGMA_MAX,
    DEFAULT_SIGMA_MIN,
    DEFAULT_STEP_RATIO,
    FieldCache,
    NoiseSchedule,
    build_schedule,
    interpolate,
)

SEGMENT_SAMPLES = 9  # 8 interior points plus the segment endpoint


@dataclass(frozen=True)
class PlannerConfig:
    T: int = 20
    K: int = 16
    beta: float = 2.0
    d_safe: float = 0.10
    d_margin: float = 0.12
    step_ratio: float = DEFAULT_STEP_RATIO
    sigma_min: float = DEFAULT_SIGMA_MIN
    sigma_max: float = DEFAULT_SIGMA_MAX
    seed: Optional[int] = None
    time_limit: float = 180.0
    final_step_noiseless: bool = True
    goal_tol: float = 0.05
    log_floor: float = DEFAULT_LOG_FLOOR

    def __post_init__(self):
        if self.T < 2:
            raise ParameterError("T must be >= 2")
        if self.K < 1:
            raise ParameterError("K must be >= 1")
        if self.beta < 0:
            raise ParameterError("beta must be >= 0")
        if not (0 < self.d_safe < self.d_margin):
            raise ParameterError("need 0 < d_safe < d_margin")
        if not (0 < self.sigma_min < self.sigma_max):
            raise ParameterError("need 0 < sigma_min < sigma_max")
        if self.step_ratio <= 0:
            raise ParameterError("step_ratio must be positive")
        if self.time_limit <= 0:
            raise ParameterError("time_limit must be positive")
        if self.goal_tol < 0:
            raise ParameterError("goal_tol must be >= 0")
        if not (0 < self.log_floor < 1):
            raise ParameterError("log_floor must be in (0, 1)")
        if self.seed is not None and int(self.seed) < 0:
            raise ParameterError("seed must be unsigned")

    def schedule(self) -> NoiseSchedule:
        return build_schedule(self.T, self.sigma_min, self.sigma_max, self.step_ratio)

    def with_overrides(self, overrides: dict) -> "PlannerConfig":
        """Apply a scenario/CLI override dict; unknown keys are rejected."""
        if not overrides:
            return self
        known = {f.name: f.type for f in dataclass_fields(self)}
        bad = [k for k in overrides if k not in known]
        if bad:
            raise ParameterError(f"unknown planner parameter(s): {', '.join(sorted(bad))}")
        coerced = {}
        for key, val in overrides.items():
            if key in ("T", "K"):
                coerced[key] = int(val)
            elif key == "seed":
                coerced[key] = None if val is None else int(val)
            elif key == "final_step_noiseless":
                coerced[key] = bool(val)
            else:
                coerced[key] = float(val)
        return replace(self, **coerced)


@dataclass(frozen=True, eq=False)
class JointState:
    positions: np.ndarray  # (N, 2) units
    t: int


@dataclass(frozen=True, eq=False)
class Trajectory:
    robot_id: str
    waypoints: np.ndarray    # (T+1, 2): initial position plus one per outer step
    micro_steps: np.ndarray  # (T*K, 2): every Langevin iterate


@dataclass(eq=False)
class PlanResult:
    scenario: Scenario
    trajectories: tuple
    goal_reached: tuple
    static_violations: list
    inter_robot_violations: list
    planning_time_s: float
    seed: int
    timed_out: bool = False

    @property
    def success(self) -> bool:
        return (
            not self.timed_out
            and all(self.goal_reached)
            and not self.static_violations
            and not self.inter_robot_violations
        )


# ---------------------------------------------------------------------------
# pairwise cost and guidance


def _pairwise(positions):
    pos = np.asarray(positions, dtype=np.float64)
    if pos.ndim != 2 or pos.shape[1] != 2 or len(pos) < 1:
        raise ParameterError("positions must be an (N, 2) array with N >= 1")
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    off = ~np.eye(len(pos), dtype=bool)
    if len(pos) > 1 and np.any(dist[off] == 0.0):
        raise SingularConfigurationError("two robots occupy the same point")
    return pos, diff, dist


def interrobot_cost(positions, d_margin: float) -> float:
    """Sum over pairs of max(0, -log(d / d_margin))."""
    _, _, dist = _pairwise(positions)
    n = dist.shape[0]
    if n < 2:
        return 0.0
    iu = np.triu_indices(n, 1)
    d = dist[iu]
    below = d < d_margin
    if not below.any():
        return 0.0
    return float(np.sum(-np.log(d[below] / d_margin)))


def interrobot_guidance(positions, d_margin: float) -> np.ndarray:
    """Repulsive direction, the negative gradient of the proximity cost.

    Pairs with d < d_margin contribute (x_i - x_j) / d^2 to robot i.
    """
    pos, diff, dist = _pairwise(positions)
    n = len(pos)
    if n < 2:
        return np.zeros_like(pos)
    np.fill_diagonal(dist, np.inf)
    w = np.where(dist < d_margin, 1.0 / (dist * dist), 0.0)
    return (w[:, :, None] * diff).sum(axis=1)


# ---------------------------------------------------------------------------
# feasibility checks shared by the sampler and the validator


def _points_free(worldmap: WorldMap, pts: np.ndarray) -> np.ndarray:
    """Vectorized is_free over an (M, 2) array; out-of-domain counts as not free."""
    w, h = worldmap.world_size
    x, y = pts[..., 0], pts[..., 1]
    inside = (x >= 0) & (x < w) & (y >= 0) & (y < h)
    cols = np.clip((x / worldmap.cell_size[0]).astype(np.int64), 0, worldmap.width_cells - 1)
    rows = np.clip((y / worldmap.cell_size[1]).astype(np.int64), 0, worldmap.height_cells - 1)
    return inside & ~worldmap.occupancy[rows, cols]


_SEG_FRACTIONS = np.arange(1, SEGMENT_SAMPLES + 1, dtype=np.float64) / SEGMENT_SAMPLES


def _segment_free(worldmap: WorldMap, a: np.ndarray, b: np.ndarray) -> bool:
    """Validator's rule: endpoint plus 8 evenly spaced interior points free."""
    pts = a[None, :] + _SEG_FRACTIONS[:, None] * (b - a)[None, :]
    return bool(_points_free(worldmap, pts).all())


def _clamp_to_free(worldmap: WorldMap, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Walk the exact grid supercover from ``a`` toward ``b``; stop just short
    of the first obstacle cell.  The realized move therefore never crosses a
    wall, however long the proposal, and a blocked robot slides up to the
    boundary instead of freezing.
    """
    hx, hy = worldmap.cell_size
    W, H = worldmap.width_cells, worldmap.height_cells
    occ = worldmap.occupancy
    dx, dy = float(b[0] - a[0]), float(b[1] - a[1])
    col = min(int(a[0] / hx), W - 1)
    row = min(int(a[1] / hy), H - 1)
    step_c = 1 if dx > 0 else -1
    step_r = 1 if dy > 0 else -1
    # parametric t at which the ray crosses the next cell boundary per axis
    tx = ((col + (step_c > 0)) * hx - a[0]) / dx if dx != 0 else np.inf
    ty = ((row + (step_r > 0)) * hy - a[1]) / dy if dy != 0 else np.inf
    dtx = abs(hx / dx) if dx != 0 else np.inf
    dty = abs(hy / dy) if dy != 0 else np.inf

    def stop_at(t):
        t = max(0.0, t - 1e-9)
        p = np.array([a[0] + t * dx, a[1] + t * dy])
        c = min(int(p[0] / hx), W - 1)
        r = min(int(p[1] / hy), H - 1)
        return p if not occ[r, c] else np.array(a, dtype=float)

    while True:
        if tx < ty - 1e-15:
            t, col = tx, col + step_c
            if t >= 1.0 or not (0 <= col < W):
                return np.array(b, dtype=float)
            if occ[row, col]:
                return stop_at(t)
            tx += dtx
        elif ty < tx - 1e-15:
            t, row = ty, row + step_r
            if t >= 1.0 or not (0 <= row < H):
                return np.array(b, dtype=float)
            if occ[row, col]:
                return stop_at(t)
            ty += dty
        else:
            # exact corner crossing: conservative, both side cells must be free
            t = tx
            if t >= 1.0:
                return np.array(b, dtype=float)
            nc, nr = col + step_c, row + step_r
            if not (0 <= nc < W and 0 <= nr < H):
                return np.array(b, dtype=float)
            if occ[row, nc] or occ[nr, col] or occ[nr, nc]:
                return stop_at(t)
            col, row = nc, nr
            tx += dtx
            ty += dty


def _effective_level(ladder: dict, t: int, cell, t_max: int):
    """Smallest level >= t whose field support covers the cell.

    Fine-t fields cover only the heat's reach; a robot outside follows the
    coarsest-necessary field (and its step size) until it catches up.  In a
    sealed component no level is supported and the robot keeps level t with
    a zero score.
    """
    col, row = cell
    for tt in range(t, t_max + 1):
        f = ladder[tt]
        if f.supported is None or f.supported[row, col]:
            return tt, f
    return t, ladder[t]


def langevin_step(
    state: JointState,
    fields,
    schedule: NoiseSchedule,
    config: PlannerConfig,
    rngs,
    noiseless: bool = False,
    ladders=None,
) -> JointState:
    """One synchronous annealing update of all robots from a common snapshot.

    With ``ladders`` (per-robot {t: ScoreField}), a robot outside its level's
    field support escalates to the smallest covering level and uses that
    level's alpha; otherwise the update is the plain level-t rule.
    """
    t = state.t
    for f in fields:
        if f.t != t:
            raise ParameterError(f"field t={f.t} does not match state t={t}")
    worldmap = fields[0].map
    pos = state.positions
    n = len(pos)
    hx, hy = worldmap.cell_size

    s = np.empty_like(pos)
    alpha = np.empty((n, 1))
    for i in range(n):
        field = fields[i]
        t_eff = t
        if ladders is not None:
            cell = (
                min(int(pos[i, 0] / hx), worldmap.width_cells - 1),
                min(int(pos[i, 1] / hy), worldmap.height_cells - 1),
            )
            t_eff, field = _effective_level(ladders[i], t, cell, schedule.T)
        s[i] = interpolate(field, pos[i])
        alpha[i, 0] = schedule.alpha_at(t_eff)

    if n > 1 and config.beta > 0:
        drift = s + config.beta * interrobot_guidance(pos, config.d_margin)
    else:
        drift = s
    prop = pos + 0.5 * alpha * alpha * drift
    if not noiseless:
        eps = np.empty_like(pos)
        for i in range(n):
            eps[i] = rngs[i].standard_normal(2)
        prop = prop + alpha * eps
    w, h = worldmap.world_size
    np.clip(prop[:, 0], 0.0, w * (1 - 1e-12), out=prop[:, 0])
    np.clip(prop[:, 1], 0.0, h * (1 - 1e-12), out=prop[:, 1])

    # zero-density regions are never entered: advance each robot along its
    # proposal until the exact cell walk meets an obstacle
    new = prop.copy()
    for i in range(n):
        if new[i, 0] != pos[i, 0] or new[i, 1] != pos[i, 1]:
            new[i] = _clamp_to_free(worldmap, pos[i], prop[i])
    # reject moves that breach the hard pairwise separation; symmetric in the
    # pair, so the update stays permutation-equivariant
    for _round in range(n + 1):
        if n < 2:
            break
        diff = new[:, None, :] - new[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=-1))
        np.fill_diagonal(dist, np.inf)
        bad = dist <= config.d_safe
        if not bad.any():
            break
        moved = np.any(new != pos, axis=1)
        revert = bad.any(axis=1) & moved
        if not revert.any():
            break
        new[revert] = pos[revert]
    return JointState(positions=new, t=t)


# ---------------------------------------------------------------------------
# full plan


def _robot_rng(seed: int, robot_id: str) -> np.random.Generator:
    digest = hashlib.sha256(robot_id.encode("utf-8")).digest()
    rid = int.from_bytes(digest[:8], "big")
    return np.random.default_rng(np.random.SeedSequence([int(seed), rid]))


def _instruction_label(instruction: str, worldmap: WorldMap) -> str:
    return resolve_goal_regions(instruction, worldmap)[0].label


def _sample_free_start(worldmap: WorldMap, rng: np.random.Generator) -> np.ndarray:
    rows, cols = np.nonzero(worldmap.free)
    idx = int(rng.integers(len(rows)))
    jx, jy = rng.random(2)
    hx, hy = worldmap.cell_size
    return np.array([(cols[idx] + jx) * hx, (rows[idx] + jy) * hy])


def plan(
    scenario: Scenario,
    config: PlannerConfig | None = None,
    cache: FieldCache | None = None,
    use_scenario_config: bool = True,
) -> PlanResult:
    """Run the full annealed inference loop for every robot in the scenario."""
    t_start = time.perf_counter()
    base = config if config is not None else PlannerConfig()
    cfg = base.with_overrides(scenario.config) if use_scenario_config else base
    worldmap = scenario.map
    if cache is None:
        cache = FieldCache()
    schedule = cfg.schedule()
    seed = cfg.seed if cfg.seed is not None else scenario.seed

    # canonical id order makes the float accumulation order, and therefore the
    # trajectories, independent of how the scenario lists its robots
    order = sorted(range(len(scenario.robots)), key=lambda i: scenario.robots[i].id)
    robots = [scenario.robots[i] for i in order]
    n = len(robots)

    ladders = [
        cache.fields(worldmap, _instruction_label(r.instruction, worldmap), schedule, cfg.log_floor)
        for r in robots
    ]
    rngs = [_robot_rng(seed, r.id) for r in robots]

    positions = np.empty((n, 2), dtype=np.float64)
    for i, robot in enumerate(robots):
        if robot.start is not None:
            positions[i] = robot.start
        else:
            positions[i] = _sample_free_start(worldmap, rngs[i])

    waypoints = [positions.copy()]
    micro = []
    timed_out = False
    for t in range(cfg.T, 0, -1):
        if time.perf_counter() - t_start > cfg.time_limit:
            timed_out = True
            break
        state = JointState(positions=positions, t=t)
        fields_t = [ladders[i][t] for i in range(n)]
        for k in range(1, cfg.K + 1):
            noiseless = cfg.final_step_noiseless and t == 1 and k == cfg.K
            state = langevin_step(
                state, fields_t, schedule, cfg, rngs, noiseless=noiseless, ladders=ladders
            )
            micro.append(state.positions.copy())
        positions = state.positions
        waypoints.append(positions.copy())

    wp = np.asarray(waypoints)                        # (steps+1, N, 2)
    ms = np.asarray(micro) if micro else np.empty((0, n, 2))
    trajectories = tuple(
        Trajectory(robot_id=robots[i].id, waypoints=wp[:, i, :].copy(), micro_steps=ms[:, i, :].copy())
        for i in range(n)
    )

    if timed_out:
        static_v, inter_v, goals = [], [], tuple(False for _ in robots)
    else:
        static_v, inter_v, goals = validate_plan(trajectories, scenario, cfg)

    # restore the scenario's robot order
    inv = {robots[i].id: i for i in range(n)}
    ordered_traj = tuple(trajectories[inv[r.id]] for r in scenario.robots)
    ordered_goals = tuple(goals[inv[r.id]] for r in scenario.robots)

    return PlanResult(
        scenario=scenario,
        trajectories=ordered_traj,
        goal_reached=ordered_goals,
        static_violations=static_v,
        inter_robot_violations=inter_v,
        planning_time_s=time.perf_counter() - t_start,
        seed=int(seed),
        timed_out=timed_out,
    )


# ---------------------------------------------------------------------------
# validation


def _point_to_region_distance(p, region, worldmap: WorldMap) -> float:
    hx, hy = worldmap.cell_size
    cells = np.asarray(region.cells, dtype=np.float64)  # (M, 2) as (col, row)
    x0 = cells[:, 0] * hx
    y0 = cells[:, 1] * hy
    dx = np.maximum(np.maximum(x0 - p[0], p[0] - (x0 + hx)), 0.0)
    dy = np.maximum(np.maximum(y0 - p[1], p[1] - (y0 + hy)), 0.0)
    return float(np.min(np.hypot(dx, dy)))


def validate_plan(trajectories, scenario: Scenario, config: PlannerConfig):
    """Check static freedom, pairwise separation and goal membership.

    Returns (static_violations, inter_robot_violations, goal_reached).
    Static: every micro-step position plus 8 evenly spaced points between
    consecutive micro-steps must be free.  Inter-robot: pairwise distance at
    every micro-step index must exceed d_safe.  Goal: the final position lies
    inside a resolved region or within goal_tol of its nearest cell.
    """
    if not trajectories:
        raise ParameterError("no trajectories to validate")
    counts = {len(tr.micro_steps) for tr in trajectories}
    if len(counts) != 1:
        raise ParameterError("trajectories have mismatched micro-step counts")
    worldmap = scenario.map
    n_micro = counts.pop()

    static_violations = []
    for tr in trajectories:
        path = np.vstack([tr.waypoints[0:1], tr.micro_steps])  # (n_micro+1, 2)
        if n_micro == 0:
            continue
        a, b = path[:-1], path[1:]
        # (SEGMENT_SAMPLES, n_micro, 2): interior samples then the endpoint
        pts = a[None, :, :] + _SEG_FRACTIONS[:, None, None] * (b - a)[None, :, :]
        ok = _points_free(worldmap, pts.reshape(-1, 2)).reshape(SEGMENT_SAMPLES, n_micro)
        bad_steps = np.nonzero(~ok.all(axis=0))[0]
        for step in bad_steps:
            first_bad = int(np.nonzero(~ok[:, step])[0][0])
            where = pts[first_bad, step]
            static_violations.append(
                {"robot": tr.robot_id, "step": int(step), "position": [float(where[0]), float(where[1])]}
            )

    inter_violations = []
    if len(trajectories) > 1 and n_micro > 0:
        stacked = np.stack([tr.micro_steps for tr in trajectories])  # (N, n_micro, 2)
        ids = [tr.robot_id for tr in trajectories]
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                d = np.sqrt(((stacked[i] - stacked[j]) ** 2).sum(axis=1))
                for step in np.nonzero(d <= config.d_safe)[0]:
                    inter_violations.append(
                        {
                            "robots": [ids[i], ids[j]],
                            "step": int(step),
                            "positions": [
                                [float(v) for v in stacked[i, step]],
                                [float(v) for v in stacked[j, step]],
                            ],
                            "distance": float(d[step]),
                        }
                    )
        inter_violations.sort(key=lambda v: (v["step"], v["robots"]))

    by_id = {r.id: r for r in scenario.robots}
    goal_reached = []
    for tr in trajectories:
        robot = by_id[tr.robot_id]
        regions = resolve_goal_regions(robot.instruction, worldmap)
        final = tr.micro_steps[-1] if n_micro else tr.waypoints[-1]
        dist = min(_point_to_region_distance(final, reg, worldmap) for reg in regions)
        goal_reached.append(dist <= config.goal_tol)
    return static_violations, inter_violations, tuple(goal_reached)


# ---------------------------------------------------------------------------
# serialization


def result_to_dict(result: PlanResult, include_timing: bool = True, include_micro: bool = False) -> dict:
    scenario = result.scenario
    doc = {
        "scenario": {
            "map_name": scenario.map.name,
            "map_hash": scenario.map.content_hash(),
            "seed": int(scenario.seed),
            "robots": [
                {
                    "id": r.id,
                    "instruction": r.instruction,
                    "start": None if r.start is None else [float(r.start[0]), float(r.start[1])],
                }
                for r in scenario.robots
            ],
        },
        "seed": result.seed,
        "success": result.success,
        "timed_out": result.timed_out,
        "robots": [],
        "violations": {
            "static": result.static_violations,
            "inter_robot": result.inter_robot_violations,
        },
    }
    if include_timing:
        doc["planning_time_s"] = float(result.planning_time_s)
    for tr, reached in zip(result.trajectories, result.goal_reached):
        entry = {
            "id": tr.robot_id,
            "goal_reached": bool(reached),
            "waypoints": [[float(x), float(y)] for x, y in tr.waypoints],
        }
        if include_micro:
            entry["micro_steps"] = [[float(x), float(y)] for x, y in tr.micro_steps]
        doc["robots"].append(entry)
    return doc


def result_to_json(result: PlanResult, include_timing: bool = True, include_micro: bool = False) -> str:
    return json.dumps(result_to_dict(result, include_timing, include_micro), separators=(",", ":")) + "\n"
