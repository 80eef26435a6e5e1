import xml.etree.ElementTree as ET

import numpy as np
import pytest

import heatplan as hp
from heatplan import heatfield as hf
from heatplan.errors import RenderError
from heatplan.render import RenderSpec, canvas_transform, render_svg

SVG_NS = "{http://www.w3.org/2000/svg}"


def demo_scene():
    reg = hp.SemanticRegion("apple", ((40, 40), (41, 40), (40, 41), (41, 41)))
    m = hp.empty_map(cells=64, regions=[reg])
    sc = hp.Scenario(m, (hp.RobotSpec("r0", "apple", (0.2, 0.2)),), seed=1)
    res = hp.plan(sc, hp.PlannerConfig(T=6, K=4))
    return m, sc, res


def test_empty_map_occupancy_only():
    m = hp.empty_map(cells=32)
    svg = render_svg(m, RenderSpec(layers=("occupancy",)))
    root = ET.fromstring(svg)
    rects = root.findall(f".//{SVG_NS}rect")
    assert len(rects) == 1  # background only, no obstacle runs
    assert not root.findall(f".//{SVG_NS}polyline")


def test_identical_inputs_identical_bytes():
    m = hp.generate_map("room", 2, cells=48)
    spec = RenderSpec(layers=("occupancy", "regions"))
    assert render_svg(m, spec) == render_svg(m, spec)


def test_polyline_point_counts_match_waypoints():
    m, sc, res = demo_scene()
    spec = RenderSpec(layers=("occupancy", "trajectories", "starts"))
    svg = render_svg(m, spec, trajectories=res.trajectories)
    root = ET.fromstring(svg)
    polys = root.findall(f".//{SVG_NS}polyline")
    assert len(polys) == 1
    pts = polys[0].attrib["points"].split()
    assert len(pts) == len(res.trajectories[0].waypoints)
    assert len(root.findall(f".//{SVG_NS}circle")) == 1


def test_coordinate_fidelity_roundtrip():
    m, sc, res = demo_scene()
    spec = RenderSpec(layers=("trajectories",))
    svg = render_svg(m, spec, trajectories=res.trajectories)
    root = ET.fromstring(svg)
    pts = root.find(f".//{SVG_NS}polyline").attrib["points"].split()
    _, from_px = canvas_transform(m, spec)
    for token, wp in zip(pts, res.trajectories[0].waypoints):
        px, py = (float(v) for v in token.split(","))
        x, y = from_px(px, py)
        assert abs(x - wp[0]) <= 1e-6 and abs(y - wp[1]) <= 1e-6


def test_all_layers_render_wellformed():
    m, sc, res = demo_scene()
    sched = hp.build_schedule(6)
    label = m.labels()[0]
    states = hf.solve_to_times(hf.SourceSpec(m.regions_with_label(label)), m, sched)
    field = hf.build_score_field(states[-1], t=6)
    spec = RenderSpec(layers=("occupancy", "heat", "regions", "field_arrows", "trajectories", "starts", "goals"))
    svg = render_svg(m, spec, heat=states[-1], score_field=field, trajectories=res.trajectories, scenario=sc)
    root = ET.fromstring(svg)  # parses => well-formed XML
    assert root.tag == f"{SVG_NS}svg"
    assert root.attrib["version"] == "1.1"


def test_missing_layer_data_named():
    m = hp.empty_map(cells=16)
    with pytest.raises(RenderError) as ei:
        render_svg(m, RenderSpec(layers=("heat",)))
    assert "heat" in str(ei.value)
    with pytest.raises(RenderError) as ei:
        render_svg(m, RenderSpec(layers=("trajectories",)))
    assert "trajectories" in str(ei.value)
    with pytest.raises(RenderError):
        RenderSpec(layers=("volumetric",))


def test_arrow_stride_subsamples():
    m = hp.empty_map(cells=64)
    reg = hp.SemanticRegion("apple", ((32, 32),))
    states = hf.solve_to_times(hf.SourceSpec([reg]), hp.empty_map(cells=64), hp.build_schedule(3))
    field = hf.build_score_field(states[-1], t=3)
    svg2 = render_svg(m, RenderSpec(layers=("field_arrows",), stride=2), score_field=field)
    svg8 = render_svg(m, RenderSpec(layers=("field_arrows",), stride=8), score_field=field)
    n2 = len(ET.fromstring(svg2).findall(f".//{SVG_NS}line"))
    n8 = len(ET.fromstring(svg8).findall(f".//{SVG_NS}line"))
    assert n2 > n8 > 0


def test_figure_name_convention():
    from heatplan.render import figure_name

    assert figure_name("room-7-s3", ("occupancy", "trajectories")) == "room-7-s3.occupancy-trajectories.svg"
