from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings

from perchloc.branches import Branch, extract_branches
from perchloc.graph import (
    ENDPOINT,
    INTERSECTION,
    DroneSpec,
    Edge,
    Node,
    TreeGraph,
    TreeStats,
    branch_weight,
    build_graph,
    make_weigher,
    merge_degree2_nodes,
    prune_graph,
    weigh_graph,
)
from perchloc.mask_io import BinaryMask, PixelCalibration
from perchloc.morphology import Skeleton, classify_pixels, intersection_pixels, medial_axis_transform, thin_redundant

from conftest import chebyshev_steps, draw_polyline
from test_morphology import blob_masks

CAL = PixelCalibration.explicit(10.0)  # graspable widths 6..22 px


def _graph_of(img):
    img = thin_redundant(np.asarray(img, bool))
    sk = Skeleton(img, np.where(img, 1.0, 0.0))
    inter = intersection_pixels(classify_pixels(sk))
    return build_graph(extract_branches(sk, inter), inter, sk)


def _kinds(g):
    return sorted(n.kind for n in g.nodes.values())


def test_straight_line_graph():
    g = _graph_of(draw_polyline((20, 30), [(10, 3), (10, 25)]))
    assert _kinds(g) == [ENDPOINT, ENDPOINT]
    (e,) = g.edges.values()
    assert g.nodes[e.u].coord == (10, 3) and g.nodes[e.v].coord == (10, 25)


def test_t_graph():
    img = draw_polyline((21, 21), [(3, 10), (14, 10)]) | draw_polyline((21, 21), [(15, 3), (15, 17)])
    g = _graph_of(img)
    assert _kinds(g) == [ENDPOINT] * 3 + [INTERSECTION]
    assert len(g.edges) == 3
    hub = next(n.id for n in g.nodes.values() if n.kind == INTERSECTION)
    assert g.degree(hub) == 3
    assert all(g.degree(n) == 1 for n in g.nodes if n != hub)


def test_x_graph():
    img = draw_polyline((21, 21), [(2, 2), (18, 18)]) | draw_polyline((21, 21), [(2, 18), (18, 2)])
    g = _graph_of(img)
    assert _kinds(g) == [ENDPOINT] * 4 + [INTERSECTION]
    assert len(g.edges) == 4
    hub = next(n for n in g.nodes.values() if n.kind == INTERSECTION)
    assert hub.coord == (10, 10)


def test_closed_ring_is_a_self_loop():
    img = np.zeros((20, 20), bool)
    img[3, 3:12] = img[12, 3:12] = True
    img[3:13, 3] = img[3:13, 11] = True
    g = _graph_of(img)
    (e,) = g.edges.values()
    assert e.is_loop and len(g.nodes) == 1 and g.degree(e.u) == 2


def test_jsonl_dump():
    g = _graph_of(draw_polyline((20, 30), [(10, 3), (10, 25)]))
    g = weigh_graph(g, lambda b: 0.5)
    lines = g.to_jsonl().strip().splitlines()
    assert len(lines) == 3
    assert '"type": "edge"' in lines[-1] and '"weight": 0.5' in lines[-1]


def _branch(label, n, widths):
    return Branch(label, [(0, c) for c in range(n)], widths)


def test_weight_maximal_case():
    spec = DroneSpec()
    b = _branch(1, 20, [15.0] * 20)
    assert branch_weight(b, TreeStats(20, 15.0), spec, CAL) == pytest.approx(1.0, rel=1e-12)


def test_weight_all_out_of_spec():
    spec = DroneSpec()
    b = _branch(1, 7, [30.0] * 7)
    w = branch_weight(b, TreeStats(20, 40.0), spec, CAL)
    assert w == pytest.approx(spec.alpha * 7 / 20, rel=1e-12)


def test_weight_hand_case_038():
    spec = DroneSpec(alpha=0.6)
    widths = [10.0] * 5 + [2.0] * 5  # in-spec fraction 0.5, mean 6
    b = _branch(1, 10, widths)
    w = branch_weight(b, TreeStats(20, 15.0), spec, CAL)
    assert w == pytest.approx(0.38, rel=1e-12)


def test_weight_bounds_and_stats_errors():
    with pytest.raises(ValueError):
        TreeStats(0, 1)
    spec = DroneSpec(alpha=0.0)
    b = _branch(1, 50, [40.0] * 50)  # longer and wider than the stats claim
    assert 0.0 <= branch_weight(b, TreeStats(20, 10.0), spec, CAL) <= 1.0


@pytest.mark.parametrize(
    "kwargs",
    [dict(alpha=1.5), dict(lambda_angle=0.5), dict(claw_min_radius_mm=120),
     dict(prune_threshold=-0.1), dict(window_mm=0)],
)
def test_drone_spec_validation(kwargs):
    with pytest.raises(ValueError):
        DroneSpec(**kwargs)


def test_with_lambda_angle():
    s = DroneSpec().with_lambda_angle(1.0)
    assert s.lambda_angle == 1.0 and s.lambda_width == 0.0


def _path_graph():
    """a --(ab)-- b --(bc)-- c, with b a one-pixel cluster."""
    ab = Branch(2, [(5, c) for c in range(0, 5)], [8.0] * 5)
    bc = Branch(4, [(5, c) for c in range(6, 12)], [9.0] * 6)
    nodes = {
        0: Node(0, (5, 0), ENDPOINT),
        1: Node(1, (5, 5), INTERSECTION, ((5, 5),), (7.0,)),
        2: Node(2, (5, 11), ENDPOINT),
    }
    edges = {2: Edge(2, 0, 1, ab, 0.5), 4: Edge(4, 1, 2, bc, 0.5)}
    return TreeGraph(nodes, edges)


def test_merge_path():
    g = merge_degree2_nodes(_path_graph(), weigh=lambda b: 0.7)
    assert set(g.nodes) == {0, 2}
    (e,) = g.edges.values()
    assert e.label == 2 and {e.u, e.v} == {0, 2}
    assert e.branch.length_px == 5 + 6 + 1
    assert np.all(chebyshev_steps(e.branch.pixels) == 1)
    assert e.branch.widths_px[5] == 7.0
    assert e.weight == 0.7


def test_merge_handles_reversed_edges():
    g = _path_graph()
    g.edges[4] = Edge(4, 2, 1, g.edges[4].branch.reversed(), 0.5)
    merged = merge_degree2_nodes(g).edges[2].branch
    assert merged.pixel_list() == [(5, c) for c in range(12)]


def _star():
    nodes = {0: Node(0, (10, 10), INTERSECTION, ((10, 10),), (5.0,))}
    edges = {}
    for k, (dr, dc) in enumerate([(-1, 0), (0, 1), (1, 0)], start=1):
        pix = [(10 + dr * i, 10 + dc * i) for i in range(1, 6)]
        nodes[k] = Node(k, pix[-1], ENDPOINT)
        edges[k] = Edge(k, 0, k, Branch(k, pix, [5.0] * 5), 0.5)
    return TreeGraph(nodes, edges)


def test_merge_leaves_star_alone():
    g = _star()
    out = merge_degree2_nodes(g)
    assert out.signature() == g.signature()


def test_merge_leaves_self_loop_alone():
    pix = [(2, 2), (2, 3), (3, 3), (3, 2)]
    g = TreeGraph({0: Node(0, (2, 2), ENDPOINT)}, {1: Edge(1, 0, 0, Branch(1, pix, [2.0] * 4), 1.0)})
    assert merge_degree2_nodes(g).signature() == g.signature()


def test_prune_nothing_below_threshold():
    g = _star()
    out, passes = prune_graph(g, 0.1, lambda b: 0.5)
    assert passes == 1
    assert out.signature() == g.signature()


def test_prune_twig_then_merge():
    # trunk a--j--b (0.9 each) with a light twig j--t
    g = _star()
    g = weigh_graph(g, lambda b: 0.9)
    g.edges[3] = Edge(3, 0, 3, g.edges[3].branch, 0.05)
    out, passes = prune_graph(g, 0.1, lambda b: 0.9)
    assert 3 not in out.edges
    assert len(out.edges) == 1 and len(out.nodes) == 2
    (e,) = out.edges.values()
    assert e.branch.length_px == 5 + 1 + 5
    assert passes == 2


def test_prune_single_edge_survives():
    g = _graph_of(draw_polyline((20, 30), [(10, 3), (10, 25)]))
    g = weigh_graph(g, lambda b: 0.01)
    out, _ = prune_graph(g, 0.1, lambda b: 0.01)
    assert out.signature() == g.signature()


def _real_graph(data):
    sk = medial_axis_transform(BinaryMask(data))
    inter = intersection_pixels(classify_pixels(sk))
    g = build_graph(extract_branches(sk, inter), inter, sk)
    weigh = make_weigher(TreeStats.from_graph(g), DroneSpec(), PixelCalibration.explicit(20.0))
    return weigh_graph(g, weigh), weigh


def _pixel_total(g):
    return sum(e.branch.length_px for e in g.edges.values()) + sum(
        len(n.pixels) for n in g.nodes.values()
    )


@settings(max_examples=40, deadline=None)
@given(blob_masks())
def test_graph_properties_on_random_skeletons(data):
    g, weigh = _real_graph(data)
    for e in g.edges.values():
        assert 0.0 <= e.weight <= 1.0
        assert e.u in g.nodes and e.v in g.nodes

    merged = merge_degree2_nodes(g, weigh)
    assert _pixel_total(merged) == _pixel_total(g)

    # one pass never touches an edge whose nodes both have degree >= 2
    deg = g.degrees()
    interior = [e for e in g.edges.values() if deg[e.u] >= 2 and deg[e.v] >= 2]
    one, _ = prune_graph(g, 0.5, weigh, max_iter=1)
    kept = {tuple(p) for e in one.edges.values() for p in e.branch.pixels.tolist()}
    for e in interior:
        assert {tuple(p) for p in e.branch.pixels.tolist()} <= kept

    pruned, _ = prune_graph(g, DroneSpec().prune_threshold, weigh)
    again, passes = prune_graph(pruned, DroneSpec().prune_threshold, weigh)
    assert again.signature() == pruned.signature() and passes == 1
    heaviest = min(g.edges.values(), key=lambda e: (-e.weight, e.label))
    survivors = {tuple(p) for e in pruned.edges.values() for p in e.branch.pixels.tolist()}
    assert {tuple(p) for p in heaviest.branch.pixels.tolist()} <= survivors
    assert not math.isnan(sum(e.weight for e in pruned.edges.values()))
