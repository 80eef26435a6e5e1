"""Obstacle-insulated heat solver and log-gradient score fields.

The forward process perturbs goal mass by diffusion through free space only:
obstacle cells have zero conductivity, obstacle and border faces carry zero
flux, so total mass is conserved and obstacles hold exactly zero heat at all
times.  The per-step score is the finite-difference gradient of ``log u_t``,
queried at continuous positions by bilinear interpolation.

The scheme is explicit and conservative: pairwise fluxes

    du_i = dt * K_pair * c_pair * (u_j - u_i) / h^2

with u holding per-cell mass (sum u = 1) and K_pair = 0 whenever an obstacle
is involved.  On square cells the stencil couples faces (c = 2/3) and
corners (c = 1/6, active only when the whole 2x2 corner block is free, so
nothing leaks across corner-pinched walls); this isotropic form cancels its
leading spatial error against the forward-Euler time error at the
integrator's step dt = h^2/6, leaving the far Gaussian tail accurate to a
fraction of a percent.  Single steps accept any dt up to the advertised
stability bound 0.25 h^2; every admissible update has nonnegative weights,
so u stays nonnegative.  Non-square cells fall back to the plain face
stencil.
"""

from __future__ import annotations

import base64
import json
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    DegenerateFieldError,
    DomainError,
    ParameterError,
    PlacementError,
)
from .gridmap import SemanticRegion, WorldMap

DEFAULT_SIGMA_MIN = 0.01
DEFAULT_SIGMA_MAX = 1.0
DEFAULT_STEP_RATIO = 0.30
DEFAULT_LOG_FLOOR = 1e-300

# Physical scores inside the explicit scheme's support never exceed ~3/h
# (support spreads one cell per step, so d/(2t) <= (6t/h)/(2t)); anything
# larger is the log-floor cliff at the support edge and is clipped to this
# scale, preserving direction.
SCORE_CAP_CELLS = 3.0


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Geometric noise ladder with derived step sizes and heat times.

    sigma[i] is the noise scale of diffusion step t = i + 1 (t runs 1..T);
    heat_time = sigma^2 / 2 (free-space Gaussian correspondence) and
    alpha = step_ratio * sigma.
    """

    T: int
    sigma: np.ndarray
    alpha: np.ndarray
    heat_time: np.ndarray

    def sigma_at(self, t: int) -> float:
        return float(self.sigma[t - 1])

    def alpha_at(self, t: int) -> float:
        return float(self.alpha[t - 1])

    def heat_time_at(self, t: int) -> float:
        return float(self.heat_time[t - 1])

    def key(self) -> tuple:
        return (self.T, float(self.sigma[0]), float(self.sigma[-1]), float(self.alpha[0] / self.sigma[0]))


def build_schedule(
    T: int = 20,
    sigma_min: float = DEFAULT_SIGMA_MIN,
    sigma_max: float = DEFAULT_SIGMA_MAX,
    step_ratio: float = DEFAULT_STEP_RATIO,
) -> NoiseSchedule:
    if T < 2:
        raise ParameterError("T must be >= 2")
    if not (0 < sigma_min < sigma_max):
        raise ParameterError("need 0 < sigma_min < sigma_max")
    if step_ratio <= 0:
        raise ParameterError("step_ratio must be positive")
    t = np.arange(T, dtype=np.float64)
    sigma = sigma_min * (sigma_max / sigma_min) ** (t / (T - 1))
    return NoiseSchedule(T=T, sigma=sigma, alpha=step_ratio * sigma, heat_time=sigma**2 / 2.0)


@dataclass(frozen=True)
class SourceSpec:
    """Heat sources: one or more goal region instances, equal mass each."""

    regions: tuple

    def __init__(self, regions):
        regions = tuple(regions)
        if not regions:
            raise ParameterError("SourceSpec needs at least one region")
        object.__setattr__(self, "regions", regions)

    @property
    def instance_mass(self) -> float:
        return 1.0 / len(self.regions)


@dataclass(frozen=True, eq=False)
class HeatState:
    u: np.ndarray          # (H, W) per-cell mass, exactly 0 on obstacles
    time: float
    map: WorldMap


@dataclass(frozen=True, eq=False)
class ScoreField:
    """Grid of grad log u_t vectors at cell centers; zero on obstacle cells.

    ``supported`` marks cells the heat actually reached (u above the log
    floor): outside it the log is flat and the vectors are zero.  Explicit
    integration spreads mass one cell per step, so small-t fields have small
    supports; samplers can fall back to a coarser level outside.
    """

    t: int
    vectors: np.ndarray    # (H, W, 2) float64, [..., 0] = d/dx, [..., 1] = d/dy
    map: WorldMap
    supported: Optional[np.ndarray] = None  # (H, W) bool


class _Solver:
    """Precomputed pair conductivities for one map."""

    def __init__(self, worldmap: WorldMap):
        self.map = worldmap
        free = worldmap.free
        hx, hy = worldmap.cell_size
        self.inv_hx2 = 1.0 / (hx * hx)
        self.inv_hy2 = 1.0 / (hy * hy)
        self.stability = 0.5 / (self.inv_hx2 + self.inv_hy2)
        self.isotropic = abs(hx - hy) <= 1e-12 * max(hx, hy)
        c_face = 2.0 / 3.0 if self.isotropic else 1.0
        self.kx = (free[:, 1:] & free[:, :-1]).astype(np.float64) * (c_face * self.inv_hx2)
        self.ky = (free[1:, :] & free[:-1, :]).astype(np.float64) * (c_face * self.inv_hy2)
        if self.isotropic:
            block = free[:-1, :-1] & free[:-1, 1:] & free[1:, :-1] & free[1:, 1:]
            self.kd = block.astype(np.float64) * (self.inv_hx2 / 6.0)
        else:
            self.kd = None

    @property
    def nonneg_limit(self) -> float:
        """Largest dt keeping every update weight nonnegative."""
        if self.isotropic:
            return 0.3 / self.inv_hx2  # self-weight 1 - (10/3) dt / h^2 >= 0
        return self.stability

    @property
    def internal_dt(self) -> float:
        if self.isotropic:
            return (1.0 / 6.0) / self.inv_hx2  # h^2 / 6, cancels the h^2 error
        return 0.8 * self.stability

    @property
    def internal_dt_smooth(self) -> float:
        """Coarser step for late times: high-frequency content has decayed,
        so accuracy no longer needs the error-canceling dt, only stability
        and nonnegativity."""
        if self.isotropic:
            return 0.29 / self.inv_hx2
        return 0.8 * self.stability

    def step_inplace(self, u: np.ndarray, dt: float) -> None:
        self.run_steps(u, 1, dt)

    def run_steps(self, u: np.ndarray, n_steps: int, dt: float) -> None:
        """Advance ``u`` (shape (..., H, W); leading axes = batched solves)."""
        kx = self.kx * dt
        ky = self.ky * dt
        lead = u.shape[:-2]
        fx = np.empty(lead + kx.shape)
        fy = np.empty(lead + ky.shape)
        if self.kd is not None:
            kd = self.kd * dt
            f1 = np.empty(lead + kd.shape)
            f2 = np.empty(lead + kd.shape)
        for _ in range(n_steps):
            np.subtract(u[..., :, 1:], u[..., :, :-1], out=fx)
            fx *= kx
            np.subtract(u[..., 1:, :], u[..., :-1, :], out=fy)
            fy *= ky
            if self.kd is not None:
                np.subtract(u[..., 1:, 1:], u[..., :-1, :-1], out=f1)
                f1 *= kd
                np.subtract(u[..., 1:, :-1], u[..., :-1, 1:], out=f2)
                f2 *= kd
            u[..., :, :-1] += fx
            u[..., :, 1:] -= fx
            u[..., :-1, :] += fy
            u[..., 1:, :] -= fy
            if self.kd is not None:
                u[..., :-1, :-1] += f1
                u[..., 1:, 1:] -= f1
                u[..., :-1, 1:] += f2
                u[..., 1:, :-1] -= f2


_solver_cache: dict = {}
_solver_lock = threading.Lock()


def _solver_for(worldmap: WorldMap) -> _Solver:
    key = id(worldmap)
    ops = _solver_cache.get(key)
    if ops is None or ops.map is not worldmap:
        ops = _Solver(worldmap)
        with _solver_lock:
            if len(_solver_cache) > 64:
                _solver_cache.clear()
            _solver_cache[key] = ops
    return ops


def stability_limit(worldmap: WorldMap) -> float:
    """Largest admissible explicit step, 0.25 h^2 for square cells."""
    ops = _solver_for(worldmap)
    return min(ops.stability, ops.nonneg_limit)


def _smooth_switch_time(worldmap: WorldMap) -> float:
    """Heat time after which cell-scale transients have decayed and the
    integrator may coarsen its step; 0.05 on the default 2x2 world."""
    return 0.0125 * worldmap.world_size[0] * worldmap.world_size[1]


def internal_dt(worldmap: WorldMap) -> float:
    """The integrator's fixed step: h^2/6 on square cells (the error-canceling
    choice for the isotropic stencil), 0.2 h^2 otherwise."""
    return _solver_for(worldmap).internal_dt


def init_heat(sources: SourceSpec, worldmap: WorldMap) -> HeatState:
    """Unit mass split equally across instances, uniform within each."""
    u = np.zeros((worldmap.height_cells, worldmap.width_cells), dtype=np.float64)
    share = sources.instance_mass
    for reg in sources.regions:
        per_cell = share / len(reg.cells)
        for col, row in reg.cells:
            if worldmap.occupancy[row, col]:
                raise PlacementError(
                    f"source cell ({col},{row}) of region {reg.label!r} is an obstacle"
                )
            u[row, col] += per_cell
    return HeatState(u=u, time=0.0, map=worldmap)


def heat_step(state: HeatState, dt: float) -> HeatState:
    """One explicit conservative update by ``dt``; returns a new state."""
    ops = _solver_for(state.map)
    if dt <= 0:
        raise ParameterError("dt must be positive")
    limit = min(ops.stability, ops.nonneg_limit)
    if dt > limit * (1 + 1e-12):
        raise ParameterError(f"dt={dt:g} above the stability bound {limit:g}")
    u = state.u.copy()
    ops.step_inplace(u, dt)
    return HeatState(u=u, time=state.time + dt, map=state.map)


def solve_to_times(sources: SourceSpec, worldmap: WorldMap, schedule: NoiseSchedule):
    """Integrate from time 0, snapshotting exactly at each schedule heat time.

    Runs fixed steps (h^2/6 early, then a coarser but still stable and
    nonnegativity-preserving step once cell-scale transients have decayed)
    plus one shorter landing step per snapshot, so snapshot times equal
    schedule.heat_time to float precision.
    """
    return solve_many_to_times([sources], worldmap, schedule)[0]


def solve_many_to_times(sources_list, worldmap: WorldMap, schedule: NoiseSchedule):
    """Batched solve_to_times: one integration pass for several source specs.

    Returns one snapshot list per source spec; numerically identical to
    solving each spec alone (the update is linear and per-solve independent).
    """
    ops = _solver_for(worldmap)
    switch = _smooth_switch_time(worldmap)
    u = np.stack([init_heat(src, worldmap).u for src in sources_list])
    now = 0.0
    snapshots = [[] for _ in sources_list]
    for target in schedule.heat_time:
        target = float(target)
        if target < now - 1e-15:
            raise ParameterError("schedule heat times must be nondecreasing")
        for bound, dt in ((min(target, switch), ops.internal_dt),
                          (target, ops.internal_dt_smooth)):
            whole = int((bound * (1 - 1e-12) - now) / dt)
            if whole > 0:
                ops.run_steps(u, whole, dt)
                now += whole * dt
        rem = target - now
        if rem > 1e-18:
            ops.run_steps(u, 1, rem)
        now = target
        for i in range(len(sources_list)):
            snapshots[i].append(HeatState(u=u[i].copy(), time=target, map=worldmap))
    return snapshots


def build_score_field(state: HeatState, log_floor: float = DEFAULT_LOG_FLOOR, t: int = 0) -> ScoreField:
    """Finite-difference gradient of log u on free cells.

    Central differences where both axis neighbors are free, one-sided where
    exactly one is, zero where neither.  Obstacle-cell u (exactly zero) is
    never read; obstacle cells get the zero vector.
    """
    worldmap = state.map
    u = state.u
    peak = float(u.max())
    if peak <= 0.0:
        raise DegenerateFieldError("heat state carries no mass")
    free = worldmap.free
    floor = log_floor * peak
    lu = np.log(np.maximum(u, floor))
    hx, hy = worldmap.cell_size
    H, W = u.shape

    # pad the free mask so out-of-bounds counts as not-free
    fpad = np.zeros((H + 2, W + 2), dtype=bool)
    fpad[1:-1, 1:-1] = free
    lpad = np.zeros((H + 2, W + 2), dtype=np.float64)
    lpad[1:-1, 1:-1] = lu

    def axis_grad(shift_plus, shift_minus, h):
        plus_free, minus_free = shift_plus[0], shift_minus[0]
        plus_val, minus_val = shift_plus[1], shift_minus[1]
        g = np.zeros((H, W), dtype=np.float64)
        both = plus_free & minus_free
        only_p = plus_free & ~minus_free
        only_m = minus_free & ~plus_free
        g[both] = (plus_val[both] - minus_val[both]) / (2 * h)
        g[only_p] = (plus_val[only_p] - lu[only_p]) / h
        g[only_m] = (lu[only_m] - minus_val[only_m]) / h
        return g

    east = (fpad[1:-1, 2:], lpad[1:-1, 2:])
    west = (fpad[1:-1, :-2], lpad[1:-1, :-2])
    north = (fpad[2:, 1:-1], lpad[2:, 1:-1])
    south = (fpad[:-2, 1:-1], lpad[:-2, 1:-1])
    gx = axis_grad(east, west, hx)
    gy = axis_grad(north, south, hy)
    vectors = np.zeros((H, W, 2), dtype=np.float64)
    vectors[..., 0] = np.where(free, gx, 0.0)
    vectors[..., 1] = np.where(free, gy, 0.0)
    cap = SCORE_CAP_CELLS / min(hx, hy)
    norm = np.sqrt((vectors**2).sum(axis=-1))
    over = norm > cap
    if over.any():
        vectors[over] *= (cap / norm[over])[:, None]
    supported = free & (u > floor)
    return ScoreField(t=t, vectors=vectors, map=worldmap, supported=supported)


def interpolate(field: ScoreField, p) -> np.ndarray:
    """Bilinear interpolation of the vector grid at a continuous point.

    Queries outside the cell-center lattice hull (but inside the map) clamp
    to the hull; queries outside the map raise DomainError.
    """
    return interpolate_many(field, np.asarray(p, dtype=np.float64).reshape(1, 2))[0]


def interpolate_many(field: ScoreField, pts: np.ndarray) -> np.ndarray:
    worldmap = field.map
    w, h = worldmap.world_size
    pts = np.asarray(pts, dtype=np.float64)
    if np.any(pts[:, 0] < 0) or np.any(pts[:, 0] >= w) or np.any(pts[:, 1] < 0) or np.any(pts[:, 1] >= h):
        raise DomainError("interpolation point outside the world rectangle")
    hx, hy = worldmap.cell_size
    W, H = worldmap.width_cells, worldmap.height_cells
    gx = np.clip(pts[:, 0] / hx - 0.5, 0.0, W - 1.0)
    gy = np.clip(pts[:, 1] / hy - 0.5, 0.0, H - 1.0)
    i0 = np.minimum(gx.astype(np.int64), W - 2) if W > 1 else np.zeros(len(pts), np.int64)
    j0 = np.minimum(gy.astype(np.int64), H - 2) if H > 1 else np.zeros(len(pts), np.int64)
    fx = (gx - i0)[:, None]
    fy = (gy - j0)[:, None]
    v = field.vectors
    v00 = v[j0, i0]
    v01 = v[j0, i0 + 1] if W > 1 else v00
    v10 = v[j0 + 1, i0] if H > 1 else v00
    v11 = v[j0 + 1, i0 + 1] if W > 1 and H > 1 else v00
    return (
        v00 * (1 - fx) * (1 - fy)
        + v01 * fx * (1 - fy)
        + v10 * (1 - fx) * fy
        + v11 * fx * fy
    )


def sample_heat(state: HeatState, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw points from the heat distribution: categorical over cells by mass,
    then uniform jitter within the chosen cell.  Obstacle cells hold zero mass
    and are never drawn."""
    u = state.u
    total = float(u.sum())
    if total <= 0.0:
        raise DegenerateFieldError("cannot sample from a zero-mass heat state")
    p = (u / total).ravel()
    idx = rng.choice(p.size, size=int(n), p=p)
    W = state.map.width_cells
    cols = idx % W
    rows = idx // W
    hx, hy = state.map.cell_size
    xs = (cols + rng.random(int(n))) * hx
    ys = (rows + rng.random(int(n))) * hy
    return np.column_stack([xs, ys])


# ---------------------------------------------------------------------------
# per-label field ladders and the cache


def score_fields(
    worldmap: WorldMap,
    regions,
    schedule: NoiseSchedule,
    log_floor: float = DEFAULT_LOG_FLOOR,
) -> dict:
    """Solve one heat ladder for the given source regions; {t: ScoreField}."""
    states = solve_to_times(SourceSpec(regions), worldmap, schedule)
    return {
        t: build_score_field(states[t - 1], log_floor, t=t)
        for t in range(1, schedule.T + 1)
    }


def score_fields_batch(worldmap: WorldMap, labels, schedule: NoiseSchedule,
                       log_floor: float = DEFAULT_LOG_FLOOR) -> dict:
    """One batched integration for several labels; {label: {t: ScoreField}}."""
    from .gridmap import resolve_goal_regions

    labels = list(dict.fromkeys(labels))
    sources = [SourceSpec(resolve_goal_regions(lbl, worldmap)) for lbl in labels]
    per_label = solve_many_to_times(sources, worldmap, schedule)
    out = {}
    for label, states in zip(labels, per_label):
        out[label] = {
            t: build_score_field(states[t - 1], log_floor, t=t)
            for t in range(1, schedule.T + 1)
        }
    return out


class FieldCache:
    """Score-field ladders keyed by (map hash, label, schedule, floor).

    Reads are lock-free once inserted; inserts take a lock, so concurrent
    readers with a single writer are safe.
    """

    def __init__(self):
        self._store = {}
        self._lock = threading.Lock()

    def fields(self, worldmap: WorldMap, label: str, schedule: NoiseSchedule,
               log_floor: float = DEFAULT_LOG_FLOOR) -> dict:
        from .gridmap import resolve_goal_regions

        key = (worldmap.content_hash(), label, schedule.key(), float(log_floor))
        hit = self._store.get(key)
        if hit is not None:
            return hit
        regions = resolve_goal_regions(label, worldmap)
        ladder = score_fields(worldmap, regions, schedule, log_floor)
        with self._lock:
            self._store.setdefault(key, ladder)
        return self._store[key]

    def __len__(self):
        return len(self._store)


# ---------------------------------------------------------------------------
# discrete reachability by annealed score ascent


def score_ascent_reaches(fields: dict, worldmap: WorldMap, start_cell, region: SemanticRegion,
                         max_steps_per_level: int | None = None) -> bool:
    """Follow score vectors cell-to-cell from coarse t to fine t.

    At each level, repeatedly step to the 8-neighbor best aligned with the
    local vector until the field goes flat (floored region / local peak).
    Reaching any region cell at any point counts as success; a start in a
    component the heat never enters stalls on the floor plateau and fails.
    """
    target = set(region.cells)
    occ = worldmap.occupancy
    H, W = occ.shape
    hx, hy = worldmap.cell_size
    if max_steps_per_level is None:
        max_steps_per_level = H * W
    moves = [(dc, dr) for dc in (-1, 0, 1) for dr in (-1, 0, 1) if (dc, dr) != (0, 0)]
    norms = {m: float(np.hypot(m[0] * hx, m[1] * hy)) for m in moves}
    col, row = int(start_cell[0]), int(start_cell[1])
    if occ[row, col]:
        raise ParameterError("ascent start cell is an obstacle")
    for t in sorted(fields.keys(), reverse=True):
        vecs = fields[t].vectors
        visited = set()
        for _ in range(max_steps_per_level):
            if (col, row) in target:
                return True
            visited.add((col, row))
            vx, vy = vecs[row, col]
            if vx * vx + vy * vy < 1e-24:
                break
            best, best_dot = None, 0.0
            for dc, dr in moves:
                nc, nr = col + dc, row + dr
                if not (0 <= nc < W and 0 <= nr < H) or occ[nr, nc]:
                    continue
                dot = (vx * dc * hx + vy * dr * hy) / norms[(dc, dr)]
                if dot > best_dot:
                    best, best_dot = (nc, nr), dot
            if best is None or best in visited:
                break
            col, row = best
    return (col, row) in target


# ---------------------------------------------------------------------------
# field dumps (external interface; little-endian float32, row-major, row 0 =
# bottom, component order (d/dx, d/dy))

_FIELD_MAGIC = b"HPSF"


def _field_header(field: ScoreField, schedule: NoiseSchedule | None) -> dict:
    header = {
        "map_hash": field.map.content_hash(),
        "t": field.t,
        "shape": [field.map.height_cells, field.map.width_cells, 2],
        "dtype": "<f4",
        "order": "row-major, row 0 = bottom, components (ddx, ddy)",
    }
    if schedule is not None:
        header["schedule"] = {
            "T": schedule.T,
            "sigma": [float(s) for s in schedule.sigma],
            "heat_time": [float(h) for h in schedule.heat_time],
        }
    return header


def dump_field_bytes(field: ScoreField, schedule: NoiseSchedule | None = None) -> bytes:
    """Binary dump: magic, uint32 header length, JSON header, float32 payload."""
    header = json.dumps(_field_header(field, schedule), separators=(",", ":")).encode("utf-8")
    payload = field.vectors.astype("<f4").tobytes(order="C")
    return _FIELD_MAGIC + struct.pack("<I", len(header)) + header + payload


def load_field_bytes(data: bytes, worldmap: WorldMap) -> ScoreField:
    if data[:4] != _FIELD_MAGIC:
        raise ParameterError("not a field dump (bad magic)")
    (hlen,) = struct.unpack("<I", data[4:8])
    header = json.loads(data[8:8 + hlen].decode("utf-8"))
    shape = tuple(header["shape"])
    vec = np.frombuffer(data[8 + hlen:], dtype="<f4").reshape(shape).astype(np.float64)
    return ScoreField(t=int(header["t"]), vectors=vec, map=worldmap)


def dump_field_json(field: ScoreField, schedule: NoiseSchedule | None = None) -> str:
    doc = _field_header(field, schedule)
    doc["data_b64"] = base64.b64encode(field.vectors.astype("<f4").tobytes(order="C")).decode("ascii")
    return json.dumps(doc, separators=(",", ":")) + "\n"


def save_field(field: ScoreField, path, schedule: NoiseSchedule | None = None, fmt: str = "bin") -> None:
    path = Path(path)
    if fmt == "bin":
        path.write_bytes(dump_field_bytes(field, schedule))
    elif fmt == "json":
        path.write_text(dump_field_json(field, schedule), encoding="utf-8")
    else:
        raise ParameterError(f"unknown field dump format {fmt!r}")
