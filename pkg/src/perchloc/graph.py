"""Node/edge abstraction of the skeleton, branch weighting and pruning."""

from __future__ import annotations

import itertools
import json
import logging
import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage as ndi

from .branches import Branch
from .mask_io import EIGHT_CONNECTED, PixelCalibration
from .morphology import Pixel, Skeleton, neighbour_counts

log = logging.getLogger(__name__)

INTERSECTION = "intersection"
ENDPOINT = "endpoint"


@dataclass(frozen=True)
class DroneSpec:
    """Claw geometry, airframe mass and decision weights.

    The claw radius range is read as branch *radius*; pixel width limits
    are the corresponding diameters. ``window_mm`` is the span profiled per
    sliding window (roughly the drone's width) and ``claw_width_mm`` the
    central stretch the claw actually closes on.
    """

    claw_min_radius_mm: float = 30.0
    claw_max_radius_mm: float = 110.0
    claw_width_mm: float = 120.0
    window_mm: float = 250.0
    drone_mass_kg: float = 1.5
    alpha: float = 0.6
    lambda_angle: float = 0.8
    lambda_width: float = 0.2
    prune_threshold: float = 0.1

    def __post_init__(self):
        if not 0 < self.claw_min_radius_mm < self.claw_max_radius_mm:
            raise ValueError("need 0 < claw_min_radius_mm < claw_max_radius_mm")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.lambda_angle < 0 or self.lambda_width < 0:
            raise ValueError("lambda weights must be non-negative")
        if not math.isclose(self.lambda_angle + self.lambda_width, 1.0, abs_tol=1e-9):
            raise ValueError("lambda_angle + lambda_width must equal 1")
        if not 0.0 <= self.prune_threshold <= 1.0:
            raise ValueError("prune_threshold must lie in [0, 1]")
        if self.claw_width_mm <= 0 or self.window_mm <= 0 or self.drone_mass_kg < 0:
            raise ValueError("claw width, window span and mass must be positive")

    def with_lambda_angle(self, lambda_angle: float) -> "DroneSpec":
        return replace(self, lambda_angle=lambda_angle, lambda_width=round(1.0 - lambda_angle, 12))

    def width_limits_px(self, cal: PixelCalibration) -> tuple[float, float]:
        """Graspable branch diameters in pixels."""
        return (
            2.0 * self.claw_min_radius_mm / cal.mm_per_px,
            2.0 * self.claw_max_radius_mm / cal.mm_per_px,
        )


@dataclass(frozen=True)
class TreeStats:
    L_max: float
    W_max: float

    def __post_init__(self):
        if not (self.L_max > 0 and self.W_max > 0):
            raise ValueError("tree extrema must be positive")

    @classmethod
    def from_graph(cls, graph: "TreeGraph") -> "TreeStats":
        lengths = [e.branch.length_px for e in graph.edges.values()]
        widths = [float(e.branch.widths_px.max()) for e in graph.edges.values()]
        widths += [max(n.widths) for n in graph.nodes.values() if n.widths]
        if not lengths:
            raise ValueError("graph has no edges")
        return cls(float(max(lengths)), float(max(widths)))


@dataclass(frozen=True)
class Node:
    id: int
    coord: Pixel
    kind: str
    pixels: tuple[Pixel, ...] = ()
    widths: tuple[float, ...] = ()


@dataclass(frozen=True)
class Edge:
    """One branch between nodes ``u`` (at its first pixel) and ``v`` (at its last)."""

    label: int
    u: int
    v: int
    branch: Branch
    weight: float = float("nan")

    @property
    def is_loop(self) -> bool:
        return self.u == self.v


@dataclass(eq=False)
class TreeGraph:
    """Undirected multigraph keyed by node id and branch label."""

    nodes: dict[int, Node]
    edges: dict[int, Edge]

    def copy(self) -> "TreeGraph":
        return TreeGraph(dict(self.nodes), dict(self.edges))

    def degree(self, node_id: int) -> int:
        return sum((e.u == node_id) + (e.v == node_id) for e in self.edges.values())

    def degrees(self) -> dict[int, int]:
        deg = dict.fromkeys(self.nodes, 0)
        for e in self.edges.values():
            deg[e.u] += 1
            deg[e.v] += 1
        return deg

    def incident(self, node_id: int) -> list[Edge]:
        return [e for _, e in sorted(self.edges.items()) if node_id in (e.u, e.v)]

    @property
    def branches(self) -> list[Branch]:
        return [self.edges[k].branch for k in sorted(self.edges)]

    def signature(self) -> tuple:
        """Hashable summary for structural comparison, labels included."""
        nodes = tuple(sorted((n.coord, n.kind) for n in self.nodes.values()))
        edges = tuple(
            sorted(
                (
                    e.label,
                    tuple(sorted((self.nodes[e.u].coord, self.nodes[e.v].coord))),
                    e.branch.length_px,
                    round(e.weight, 12),
                )
                for e in self.edges.values()
            )
        )
        return nodes, edges

    def to_jsonl(self) -> str:
        lines = []
        for nid in sorted(self.nodes):
            n = self.nodes[nid]
            lines.append(json.dumps({"type": "node", "id": nid, "row": n.coord[0],
                                     "col": n.coord[1], "kind": n.kind}))
        for label in sorted(self.edges):
            e = self.edges[label]
            lines.append(json.dumps({"type": "edge", "u": e.u, "v": e.v, "label": label,
                                     "weight": e.weight, "length": e.branch.length_px}))
        return "\n".join(lines) + "\n"


def _chebyshev_to(px: Pixel, pixels: Iterable[Pixel]) -> int:
    return min(max(abs(px[0] - r), abs(px[1] - c)) for r, c in pixels)


def build_graph(
    branches: Iterable[Branch], intersections: Iterable[Pixel], skeleton: Skeleton
) -> TreeGraph:
    """Turn intersection clusters into nodes and branches into edges.

    A branch end attaches to a cluster when it lies inside the 4x4 window
    anchored at (row - 1, col - 1) of any cluster pixel. Ends that are
    skeleton endpoints, or that touch no cluster, get their own endpoint
    node.
    """
    branches = sorted(branches, key=lambda b: b.label)
    inter_img = np.zeros(skeleton.image.shape, dtype=bool)
    for px in intersections:
        inter_img[px] = True
    clusters_img, n_clusters = ndi.label(inter_img, structure=EIGHT_CONNECTED)

    coords = np.argwhere(clusters_img)
    grouped: dict[int, list[Pixel]] = {i: [] for i in range(1, n_clusters + 1)}
    for (r, c), cid in zip(coords.tolist(), clusters_img[coords[:, 0], coords[:, 1]].tolist()):
        grouped[cid].append((r, c))

    nodes: dict[int, Node] = {}
    cover: dict[Pixel, list[int]] = {}
    for cid in range(1, n_clusters + 1):
        pix = grouped[cid]
        cen = np.asarray(pix, dtype=float).mean(axis=0)
        coord = (int(math.floor(cen[0] + 0.5)), int(math.floor(cen[1] + 0.5)))
        widths = tuple(2.0 * float(skeleton.distance[p]) for p in pix)
        nodes[cid - 1] = Node(cid - 1, coord, INTERSECTION, tuple(pix), widths)
        for r, c in pix:
            for dr, dc in itertools.product(range(-1, 3), repeat=2):
                cover.setdefault((r + dr, c + dc), []).append(cid - 1)

    counts = neighbour_counts(skeleton.image)
    next_id = n_clusters

    def candidates(px: Pixel, allow_tip: bool = False) -> list[int]:
        if counts[px] <= 1 and not allow_tip:
            return []
        ids = sorted(set(cover.get(px, ())))
        return sorted(ids, key=lambda i: (_chebyshev_to(px, nodes[i].pixels), i))

    def new_endpoint(px: Pixel) -> int:
        nonlocal next_id
        nid = next_id
        next_id += 1
        nodes[nid] = Node(nid, px, ENDPOINT)
        return nid

    edges: dict[int, Edge] = {}
    for b in branches:
        first, last = b.endpoints
        single = b.length_px == 1
        cf, cl = candidates(first, single), candidates(last, single)
        u = cf[0] if cf else None
        if single:
            rest = [i for i in cl if i != u]
            v = rest[0] if rest and counts[last] >= 2 else None
        else:
            v = cl[0] if cl else None
        closed = (
            b.length_px >= 3
            and u is None and v is None
            and max(abs(first[0] - last[0]), abs(first[1] - last[1])) == 1
            and counts[first] >= 2 and counts[last] >= 2
        )
        if u is None:
            u = new_endpoint(first)
        if v is None:
            v = u if closed else new_endpoint(last)
        edges[b.label] = Edge(b.label, u, v, b)
    if not edges:
        raise ValueError("no branches to build a graph from")
    return TreeGraph(nodes, edges)


def branch_weight(
    branch: Branch, stats: TreeStats, spec: DroneSpec, cal: PixelCalibration
) -> float:
    """Length/width score in [0, 1] used to decide which twigs to prune.

    ``alpha * l/L_max + (1 - alpha) * in_spec_fraction * mean_width/W_max``.
    Ratios are capped at 1 so branches grown by merging stay in range.
    """
    if stats.L_max <= 0 or stats.W_max <= 0:
        raise ValueError("L_max and W_max must be positive")
    wmin, wmax = spec.width_limits_px(cal)
    w = branch.widths_px
    in_spec = float(np.mean((w >= wmin) & (w <= wmax)))
    length_ratio = min(1.0, branch.length_px / stats.L_max)
    width_ratio = min(1.0, float(w.mean()) / stats.W_max)
    return spec.alpha * length_ratio + (1.0 - spec.alpha) * in_spec * width_ratio


def make_weigher(
    stats: TreeStats, spec: DroneSpec, cal: PixelCalibration
) -> Callable[[Branch], float]:
    return lambda b: branch_weight(b, stats, spec, cal)


def weigh_graph(graph: TreeGraph, weigh: Callable[[Branch], float]) -> TreeGraph:
    out = graph.copy()
    for label, e in graph.edges.items():
        out.edges[label] = replace(e, weight=weigh(e.branch))
    return out


def _order_cluster(cluster: list[Pixel], entry: Pixel | None, exit_: Pixel | None) -> list[Pixel]:
    """Order node pixels so the merged branch stays 8-adjacent where possible."""
    if len(cluster) <= 1:
        return list(cluster)

    def cheb(a, b):
        return max(abs(a[0] - b[0]), abs(a[1] - b[1]))

    start_opts = sorted(cluster, key=lambda p: (cheb(p, entry) if entry else 0, p))
    if len(cluster) <= 7:
        adj = {p: [q for q in cluster if q != p and cheb(p, q) == 1] for p in cluster}
        best = None
        for s in start_opts:
            stack = [(s, [s])]
            while stack:
                cur, path = stack.pop()
                if len(path) == len(cluster):
                    score = (cheb(path[0], entry) if entry else 0) + (
                        cheb(path[-1], exit_) if exit_ else 0)
                    if best is None or score < best[0]:
                        best = (score, path)
                    continue
                for q in sorted(adj[cur], reverse=True):
                    if q not in path:
                        stack.append((q, path + [q]))
            if best is not None and best[0] <= 2:
                return best[1]
        if best is not None:
            return best[1]
    # greedy nearest-neighbour walk
    remaining = set(cluster)
    cur = start_opts[0]
    path = [cur]
    remaining.discard(cur)
    while remaining:
        cur = min(remaining, key=lambda q: (cheb(cur, q), q))
        path.append(cur)
        remaining.discard(cur)
    return path


def merge_degree2_nodes(
    graph: TreeGraph, weigh: Callable[[Branch], float] | None = None
) -> TreeGraph:
    """Fuse every degree-2 node whose two incident edges are distinct.

    The merged branch is the first branch, the node's pixels, then the
    second branch, and keeps the smaller of the two labels.
    """
    g = graph.copy()
    while True:
        deg = g.degrees()
        target = None
        for nid in sorted(g.nodes):
            if deg[nid] != 2:
                continue
            inc = g.incident(nid)
            if len(inc) == 2 and not inc[0].is_loop and not inc[1].is_loop:
                target = (nid, inc[0], inc[1])
                break
        if target is None:
            return g
        nid, e1, e2 = target
        node = g.nodes[nid]
        b1 = e1.branch if e1.v == nid else e1.branch.reversed()
        x = e1.u if e1.v == nid else e1.v
        b2 = e2.branch if e2.u == nid else e2.branch.reversed()
        y = e2.v if e2.u == nid else e2.u
        mid = _order_cluster(list(node.pixels), b1.endpoints[1], b2.endpoints[0])
        width_of = dict(zip(node.pixels, node.widths))
        pixels = np.concatenate(
            [b1.pixels, np.asarray(mid, dtype=np.int64).reshape(-1, 2), b2.pixels]
        )
        widths = np.concatenate([b1.widths_px, [width_of[p] for p in mid], b2.widths_px])
        label = min(e1.label, e2.label)
        merged = Branch(label, pixels, widths)
        weight = weigh(merged) if weigh is not None else float("nan")
        del g.edges[e1.label], g.edges[e2.label], g.nodes[nid]
        g.edges[label] = Edge(label, x, y, merged, weight)


def prune_graph(
    graph: TreeGraph,
    threshold: float,
    weigh: Callable[[Branch], float],
    max_iter: int = 1000,
) -> tuple[TreeGraph, int]:
    """Strip low-weight leaf edges and merge degree-2 nodes until nothing changes.

    An edge goes only if its weight is below ``threshold`` and one of its
    nodes has degree 1. The heaviest edge is never removed. Returns the
    pruned graph and the number of passes run.
    """
    g = graph.copy()
    for it in range(1, max_iter + 1):
        before = g.signature()
        if g.edges:
            keep = min(g.edges.values(), key=lambda e: (-e.weight, e.label)).label
        deg = g.degrees()
        doomed = [
            e.label
            for e in g.edges.values()
            if e.label != keep
            and e.weight < threshold
            and (deg[e.u] == 1 or deg[e.v] == 1)
        ]
        for label in doomed:
            del g.edges[label]
        deg = g.degrees()
        for nid in [n for n, d in deg.items() if d == 0]:
            del g.nodes[nid]
        g = merge_degree2_nodes(g, weigh)
        if g.signature() == before:
            log.debug("pruning reached a fixpoint after %d passes", it)
            return g, it
    log.warning("pruning stopped at max_iter=%d without a fixpoint", max_iter)
    return g, max_iter
