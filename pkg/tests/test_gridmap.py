import json

import numpy as np
import pytest

import heatplan as hp
from heatplan import gridmap
from heatplan.errors import (
    DomainError,
    GenerationError,
    MapFormatError,
    ParameterError,
    UnknownLabelError,
)


def test_world_to_cell_origin_and_midpoint():
    m = hp.empty_map(cells=128)
    assert hp.world_to_cell((0.0, 0.0), m) == (0, 0)
    assert hp.world_to_cell((1.0, 1.0), m) == (64, 64)


def test_world_to_cell_out_of_domain():
    m = hp.empty_map(cells=16)
    for p in ((-0.01, 0.5), (2.0, 0.5), (0.5, 2.0), (0.5, -1e-9)):
        with pytest.raises(DomainError):
            hp.world_to_cell(p, m)


def test_cell_center_roundtrip_within_half_cell():
    m = hp.empty_map(cells=128)
    rng = np.random.default_rng(0)
    half = np.hypot(m.cell_size[0] / 2, m.cell_size[1] / 2)
    for _ in range(1000):
        p = rng.random(2) * 2.0
        c = hp.world_to_cell(p, m)
        center = np.array(hp.cell_center(c, m))
        assert np.linalg.norm(center - p) <= half + 1e-12


def test_is_free_matches_direct_lookup():
    m = hp.generate_map("drop_region", 11, cells=64)
    rng = np.random.default_rng(1)
    for _ in range(1000):
        p = rng.random(2) * 2.0
        col, row = hp.world_to_cell(p, m)
        assert hp.is_free(p, m) == (not m.occupancy[row, col])


def test_is_free_outside_domain_is_false():
    m = hp.empty_map(cells=16)
    assert not hp.is_free((2.5, 0.5), m)
    assert not hp.is_free((-0.1, 0.5), m)


def test_is_free_inside_obstacle_false_and_empty_map_true():
    occ = np.zeros((32, 32), dtype=bool)
    occ[10:20, 10:20] = True
    m = hp.WorldMap("blk", occ)
    assert not hp.is_free((0.95, 0.95), m)  # inside the block
    assert hp.is_free((0.1, 0.1), hp.empty_map(cells=32))


# ---------------------------------------------------------------------------
# generators


@pytest.mark.parametrize("family", gridmap.FAMILIES)
def test_generate_deterministic(family):
    a = hp.generate_map(family, 7, cells=64)
    b = hp.generate_map(family, 7, cells=64)
    assert hp.encode_map(a) == hp.encode_map(b)


@pytest.mark.parametrize("family", gridmap.FAMILIES)
@pytest.mark.parametrize("seed", range(20))
def test_generated_regions_free_and_in_bounds(family, seed):
    m = hp.generate_map(family, seed, cells=64)
    for reg in m.regions:
        for col, row in reg.cells:
            assert 0 <= col < m.width_cells and 0 <= row < m.height_cells
            assert not m.occupancy[row, col]


def test_drop_region_fill_within_params_range(subtests=None):
    params = gridmap.GeneratorParams(cells=64)
    for seed in range(10):
        m = hp.generate_map("drop_region", seed, params)
        frac = m.occupancy.mean()
        assert params.fill_range[0] <= frac <= params.fill_range[1]


def test_shelf_aisles_at_least_min_aisle():
    params = gridmap.GeneratorParams(cells=64, min_aisle=4)
    for seed in range(10):
        m = hp.generate_map("shelf", seed, params)
        occ = m.occupancy
        # every maximal free run in each column (between obstacles/borders)
        for col in range(1, m.width_cells - 1):
            column = occ[1:-1, col]
            run = 0
            for v in column:
                if v:
                    if run:
                        assert run >= params.min_aisle
                    run = 0
                else:
                    run += 1
            if run:
                assert run >= params.min_aisle


def test_conveyor_has_gaps_through_every_belt():
    # all free cells reachable from any free cell => gaps exist
    from heatplan.bench import flood_fill

    for seed in range(5):
        m = hp.generate_map("conveyor", seed, cells=64)
        seed_cell = m.regions[0].cells[0]
        mask = flood_fill(m, seed_cell)
        # the main component holds the overwhelming share of free space
        assert mask.sum() >= 0.95 * m.free.sum()


def test_generate_unknown_family_rejected():
    with pytest.raises(ParameterError):
        hp.generate_map("maze", 0)


def test_ood_map_seals_exactly_one_duplicate():
    from heatplan.bench import flood_fill

    params = gridmap.GeneratorParams(cells=64, seal_duplicate=True)
    m = hp.generate_map("drop_region", 3, params)
    dup = m.regions[0].label
    instances = m.regions_with_label(dup)
    assert len(instances) == 2
    mask = flood_fill(m, instances[0].cells[0])
    reach = [all(mask[r, c] for c, r in reg.cells) for reg in instances]
    assert reach.count(True) == 1 and reach.count(False) == 1


# ---------------------------------------------------------------------------
# instruction resolution


def _map_with_labels():
    regs = [
        gridmap.SemanticRegion("apple", ((2, 2), (3, 2))),
        gridmap.SemanticRegion("basketball", ((10, 10),)),
        gridmap.SemanticRegion("apple", ((20, 20),)),
    ]
    return hp.empty_map(cells=32, regions=regs)


def test_resolve_template_and_case():
    m = _map_with_labels()
    got = hp.resolve_goal_regions("Move to the Apple", m)
    assert [r.label for r in got] == ["apple", "apple"]


def test_resolve_bare_label_multi_instance():
    m = _map_with_labels()
    assert len(hp.resolve_goal_regions("apple", m)) == 2
    assert len(hp.resolve_goal_regions("basketball", m)) == 1


def test_resolve_unknown_label_lists_available():
    m = _map_with_labels()
    with pytest.raises(UnknownLabelError) as ei:
        hp.resolve_goal_regions("move to the pear", m)
    assert "apple" in str(ei.value) and "basketball" in str(ei.value)


# ---------------------------------------------------------------------------
# codecs


@pytest.mark.parametrize("family", gridmap.FAMILIES)
@pytest.mark.parametrize("seed", range(5))
def test_map_codec_roundtrip(family, seed):
    m = hp.generate_map(family, seed, cells=64)
    doc = hp.encode_map(m)
    m2 = hp.decode_map(doc)
    assert hp.encode_map(m2) == doc
    assert np.array_equal(m.occupancy, m2.occupancy)
    assert m.regions == m2.regions


def test_map_codec_wrong_row_length():
    m = hp.empty_map(cells=8)
    doc = json.loads(hp.encode_map(m))
    doc["occupancy"][3] = "000"
    with pytest.raises(MapFormatError) as ei:
        hp.decode_map(json.dumps(doc))
    assert "occupancy[3]" in str(ei.value)


def test_map_codec_bad_version():
    m = hp.empty_map(cells=8)
    doc = json.loads(hp.encode_map(m))
    doc["version"] = 2
    with pytest.raises(MapFormatError) as ei:
        hp.decode_map(json.dumps(doc))
    assert "version" in str(ei.value)


def test_map_codec_unknown_field_rejected():
    m = hp.empty_map(cells=8)
    doc = json.loads(hp.encode_map(m))
    doc["colour"] = "red"
    with pytest.raises(MapFormatError) as ei:
        hp.decode_map(json.dumps(doc))
    assert "colour" in str(ei.value)


def test_map_codec_region_on_obstacle():
    occ = np.zeros((8, 8), dtype=bool)
    occ[4, 4] = True
    m = hp.WorldMap("x", occ)
    doc = json.loads(hp.encode_map(m))
    doc["regions"] = [{"label": "apple", "cells": [[4, 4]]}]
    with pytest.raises(MapFormatError) as ei:
        hp.decode_map(json.dumps(doc))
    assert "regions[0].cells[0]" in str(ei.value)


def test_scenario_codec_roundtrip_inline(tmp_path):
    m = _map_with_labels()
    sc = hp.Scenario(
        m,
        (
            gridmap.RobotSpec("r0", "move to the apple", (0.5, 0.5)),
            gridmap.RobotSpec("r1", "basketball", None),
        ),
        seed=5,
        config={"beta": 1.5},
    )
    doc = hp.encode_scenario(sc)
    sc2 = hp.decode_scenario(doc)
    assert hp.encode_scenario(sc2) == doc
    assert sc2.robots == sc.robots
    assert sc2.config == {"beta": 1.5}


def test_scenario_codec_map_path(tmp_path):
    m = _map_with_labels()
    hp.save_map(m, tmp_path / "m.json")
    sc = hp.Scenario(m, (gridmap.RobotSpec("r0", "apple", None),), seed=1)
    hp.save_scenario(sc, tmp_path / "s.json", map_path="m.json")
    sc2 = hp.load_scenario(tmp_path / "s.json")
    assert sc2.map.name == m.name
    assert sc2.robots[0].instruction == "apple"


def test_scenario_codec_bad_start_named():
    m = _map_with_labels()
    doc = json.loads(hp.encode_scenario(hp.Scenario(m, (gridmap.RobotSpec("r0", "apple", None),), 0)))
    doc["robots"][0]["start"] = [5.0, 5.0]
    with pytest.raises(MapFormatError) as ei:
        hp.decode_scenario(json.dumps(doc))
    assert "robots[0].start" in str(ei.value)


def test_scenario_codec_unknown_label_named():
    m = _map_with_labels()
    doc = json.loads(hp.encode_scenario(hp.Scenario(m, (gridmap.RobotSpec("r0", "apple", None),), 0)))
    doc["robots"][0]["instruction"] = "move to the pear"
    with pytest.raises(MapFormatError) as ei:
        hp.decode_scenario(json.dumps(doc))
    assert "robots[0].instruction" in str(ei.value)


def test_scenario_duplicate_robot_ids_rejected():
    m = _map_with_labels()
    with pytest.raises(ParameterError):
        hp.Scenario(m, (gridmap.RobotSpec("r0", "apple", None), gridmap.RobotSpec("r0", "apple", None)), 0)


def test_worldmap_invariants():
    with pytest.raises(ParameterError):
        hp.WorldMap("full", np.ones((4, 4), dtype=bool))  # no free cell
    with pytest.raises(ParameterError):
        gridmap.SemanticRegion("apple", ())  # empty region
    with pytest.raises(ParameterError):
        gridmap.SemanticRegion("apple", ((0, 0), (2, 2)))  # not 4-connected
