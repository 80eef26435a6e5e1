import json
from collections import deque

import numpy as np
import pytest

import heatplan as hp
from heatplan import bench
from heatplan.errors import GenerationError, ParameterError
from heatplan.planner import PlannerConfig


def small_config():
    return PlannerConfig(T=10, K=6)


# ---------------------------------------------------------------------------
# flood fill / BFS


def test_flood_fill_empty_map_all_free():
    m = hp.empty_map(cells=16)
    mask = bench.flood_fill(m, (3, 3))
    assert mask.sum() == 256


def test_flood_fill_excludes_sealed_pocket():
    occ = np.zeros((16, 16), dtype=bool)
    occ[4:9, 4:9] = True
    occ[5:8, 5:8] = False
    m = hp.WorldMap("p", occ)
    mask = bench.flood_fill(m, (0, 0))
    assert not mask[5:8, 5:8].any()
    inner = bench.flood_fill(m, (6, 6))
    assert inner.sum() == 9


def test_flood_fill_obstacle_seed_rejected():
    occ = np.zeros((8, 8), dtype=bool)
    occ[2, 2] = True
    m = hp.WorldMap("x", occ)
    with pytest.raises(ParameterError):
        bench.flood_fill(m, (2, 2))


def _reference_bfs(occ, seed):
    """Independent deque BFS used as the second-implementation oracle."""
    h, w = occ.shape
    mask = np.zeros_like(occ)
    if occ[seed[1], seed[0]]:
        return mask
    mask[seed[1], seed[0]] = True
    q = deque([seed])
    while q:
        c, r = q.popleft()
        for dc, dr in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nc, nr = c + dc, r + dr
            if 0 <= nc < w and 0 <= nr < h and not occ[nr, nc] and not mask[nr, nc]:
                mask[nr, nc] = True
                q.append((nc, nr))
    return mask


@pytest.mark.parametrize("seed", range(20))
def test_flood_fill_matches_reference_bfs(seed):
    fam = hp.FAMILIES[seed % 4]
    m = hp.generate_map(fam, seed, cells=48)
    cell = m.regions[0].cells[0]
    assert np.array_equal(bench.flood_fill(m, cell), _reference_bfs(m.occupancy, cell))


def test_bfs_length_trivial_cases():
    m = hp.empty_map(cells=16)
    assert bench.bfs_path_length(m, (3, 3), (3, 3)) == 0
    assert bench.bfs_path_length(m, (3, 3), (4, 3)) == 1


def test_bfs_length_unreachable_is_none():
    occ = np.zeros((16, 16), dtype=bool)
    occ[4:9, 4:9] = True
    occ[5:8, 5:8] = False
    m = hp.WorldMap("p", occ)
    assert bench.bfs_path_length(m, (0, 0), (6, 6)) is None


def test_bfs_length_matches_dijkstra():
    from scipy.sparse import lil_matrix
    from scipy.sparse.csgraph import dijkstra

    rng = np.random.default_rng(5)
    m = hp.generate_map("room", 3, cells=32)
    free = m.free
    idx = -np.ones(free.shape, dtype=int)
    rows, cols = np.nonzero(free)
    idx[rows, cols] = np.arange(len(rows))
    n = len(rows)
    g = lil_matrix((n, n))
    for r, c in zip(rows, cols):
        for dr, dc in ((0, 1), (1, 0)):
            nr, nc = r + dr, c + dc
            if nr < 32 and nc < 32 and free[nr, nc]:
                g[idx[r, c], idx[nr, nc]] = 1
                g[idx[nr, nc], idx[r, c]] = 1
    dist = dijkstra(g.tocsr(), unweighted=True)
    for _ in range(20):
        i, j = rng.integers(0, n, 2)
        a = (int(cols[i]), int(rows[i]))
        b = (int(cols[j]), int(rows[j]))
        got = bench.bfs_path_length(m, a, b)
        ref = dist[i, j]
        if np.isinf(ref):
            assert got is None
        else:
            assert got == int(ref)


def test_bfs_endpoint_on_obstacle_rejected():
    occ = np.zeros((8, 8), dtype=bool)
    occ[2, 2] = True
    m = hp.WorldMap("x", occ)
    with pytest.raises(ParameterError):
        bench.bfs_path_length(m, (2, 2), (0, 0))


# ---------------------------------------------------------------------------
# suite generation


def test_generate_suite_deterministic():
    spec = hp.SuiteSpec(families=("room",), robot_counts=(3,), scenarios_per_config=4,
                        map_variants=2, base_seed=9, map_params={"cells": 48})
    a = hp.generate_suite(spec)
    b = hp.generate_suite(spec)
    assert len(a) == 4
    for sa, sb in zip(a, b):
        assert hp.encode_scenario(sa) == hp.encode_scenario(sb)


def test_generate_suite_starts_reachable_and_separated():
    spec = hp.SuiteSpec(families=("shelf", "conveyor"), robot_counts=(3,), scenarios_per_config=6,
                        map_variants=2, base_seed=1, map_params={"cells": 64})
    for sc in hp.generate_suite(spec):
        starts = np.array([r.start for r in sc.robots])
        for i in range(len(starts)):
            for j in range(i + 1, len(starts)):
                assert np.linalg.norm(starts[i] - starts[j]) >= spec.start_separation
        for robot in sc.robots:
            cell = hp.world_to_cell(robot.start, sc.map)
            mask = bench.flood_fill(sc.map, cell)
            regions = hp.resolve_goal_regions(robot.instruction, sc.map)
            assert any(mask[r, c] for reg in regions for c, r in reg.cells)


def test_generate_suite_distinct_labels_per_robot():
    spec = hp.SuiteSpec(families=("drop_region",), robot_counts=(4,), scenarios_per_config=4,
                        map_variants=2, base_seed=3, map_params={"cells": 64})
    for sc in hp.generate_suite(spec):
        labels = [hp.resolve_goal_regions(r.instruction, sc.map)[0].label for r in sc.robots]
        assert len(set(labels)) == len(labels)


def test_generate_suite_ood_seals_one_of_two():
    spec = hp.SuiteSpec(families=("drop_region",), robot_counts=(1,), scenarios_per_config=4,
                        map_variants=2, base_seed=2, ood=True, map_params={"cells": 64})
    for sc in hp.generate_suite(spec):
        regions = hp.resolve_goal_regions(sc.robots[0].instruction, sc.map)
        assert len(regions) == 2
        mask = bench.flood_fill(sc.map, hp.world_to_cell(sc.robots[0].start, sc.map))
        reach = [all(mask[r, c] for c, r in reg.cells) for reg in regions]
        assert sorted(reach) == [False, True]


def test_suite_spec_validation():
    with pytest.raises(ParameterError):
        hp.SuiteSpec(families=("castle",))
    with pytest.raises(ParameterError):
        hp.SuiteSpec(robot_counts=())
    with pytest.raises(ParameterError):
        hp.SuiteSpec(scenarios_per_config=0)


# ---------------------------------------------------------------------------
# suite execution and reports


@pytest.fixture(scope="module")
def small_suite_report():
    spec = hp.SuiteSpec(families=("drop_region",), robot_counts=(2,), scenarios_per_config=4,
                        map_variants=2, base_seed=4, map_params={"cells": 64})
    scenarios = hp.generate_suite(spec)
    return hp.run_suite(scenarios, small_config())


def test_run_suite_aggregates(small_suite_report):
    rows = small_suite_report.rows
    assert len(rows) == 1
    row = rows[0]
    assert row["family"] == "drop_region" and row["n"] == 2
    assert 0.0 <= row["success_rate"] <= 1.0
    assert row["scenarios"] == 4
    assert row["timeouts"] == 0


def test_report_soundness(small_suite_report):
    # success_rate equals recomputation from the raw records
    rows = bench.aggregate_records(small_suite_report.records)
    recs = small_suite_report.records
    expect = sum(1 for r in recs if r["success"]) / len(recs)
    assert rows[0]["success_rate"] == expect
    assert rows == small_suite_report.rows


def test_csv_header_order(small_suite_report):
    text = hp.write_report(small_suite_report, "csv")
    header = text.splitlines()[0]
    assert header == "family,n,success_rate,mean_time_s,median_time_s,mean_path_len,min_clearance,timeouts"


def test_json_report_roundtrip(small_suite_report):
    text = hp.write_report(small_suite_report, "json")
    rows = bench.read_report_json(text)
    for got, row in zip(rows, small_suite_report.rows):
        for col in bench.REPORT_COLUMNS:
            assert got[col] == row[col]
    with pytest.raises(ParameterError):
        hp.write_report(small_suite_report, "yaml")


def test_records_jsonl(small_suite_report):
    text = hp.write_records(small_suite_report.records)
    lines = text.strip().split("\n")
    assert len(lines) == 4
    rec = json.loads(lines[0])
    assert {"family", "n", "map", "success", "planning_time_s", "path_lengths"} <= set(rec)
    no_t = json.loads(hp.write_records(small_suite_report.records, include_timing=False).strip().split("\n")[0])
    assert "planning_time_s" not in no_t


def test_worker_count_invariance():
    spec = hp.SuiteSpec(families=("room",), robot_counts=(2,), scenarios_per_config=4,
                        map_variants=2, base_seed=6, map_params={"cells": 48})
    scenarios = hp.generate_suite(spec)
    cfg = small_config()
    r1 = hp.run_suite(scenarios, cfg, workers=1)
    r8 = hp.run_suite(scenarios, cfg, workers=8)
    assert hp.write_report(r1, "csv", include_timing=False) == hp.write_report(r8, "csv", include_timing=False)
    assert hp.write_records(r1.records, include_timing=False) == hp.write_records(r8.records, include_timing=False)


def test_already_solved_fixture_rate_one():
    # easy scenarios at full default sampling budget; the sampler forgets the
    # start by design, so a capable config is part of the fixture
    reg = hp.SemanticRegion("apple", ((31, 31), (32, 31), (31, 32), (32, 32)))
    m = hp.empty_map(cells=64, regions=[reg])
    scenarios = [
        hp.Scenario(m, (hp.RobotSpec("r0", "apple", (1.0, 1.0)),), seed=s) for s in range(3)
    ]
    report = hp.run_suite(scenarios, PlannerConfig())
    assert report.rows[0]["success_rate"] == 1.0


def test_run_suite_empty_rejected():
    with pytest.raises(ParameterError):
        hp.run_suite([], small_config())
