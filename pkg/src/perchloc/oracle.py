"""Procedural tree masks with exact ground truth, and corpus scoring.

Each tree is a vertical trunk too thick to grasp with 3-7 straight child
branches rendered as round-capped strokes. Exactly one child (the "ideal"
branch) sits at least 20% inside every viability limit; every other stroke
breaks at least one limit by 20% or more.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .graph import DroneSpec
from .mask_io import BinaryMask, PixelCalibration, load_mask, save_mask
from .ranking import Status
from .windows import ViabilityThresholds, window_geometry

ORACLE_MM_PER_PX = 10.0
ORACLE_SHAPE = (400, 360)
MARGIN = 0.2
_GAP_PX = 10
_EDGE_PX = 4


@dataclass(frozen=True)
class TruthBranch:
    start: tuple[float, float]
    end: tuple[float, float]
    width_px: int
    theta_deg: float
    in_spec: bool
    role: str = "child"

    @property
    def centerline(self) -> np.ndarray:
        return np.array([self.start, self.end], dtype=float)


@dataclass(frozen=True, eq=False)
class SyntheticTree:
    mask: BinaryMask
    branches_truth: tuple[TruthBranch, ...]
    ideal_branch_index: int | None
    seed: int
    mm_per_px: float

    @property
    def ideal(self) -> TruthBranch | None:
        if self.ideal_branch_index is None:
            return None
        return self.branches_truth[self.ideal_branch_index]

    def truth_dict(self) -> dict:
        return {
            "seed": self.seed,
            "mm_per_px": self.mm_per_px,
            "shape": list(self.mask.data.shape),
            "ideal_branch_index": self.ideal_branch_index,
            "branches": [
                {**asdict(b), "start": list(b.start), "end": list(b.end)}
                for b in self.branches_truth
            ],
        }


def _segment_distance(rr, cc, p0, p1):
    p0 = np.asarray(p0, dtype=float)
    d = np.asarray(p1, dtype=float) - p0
    denom = float(d @ d)
    if denom == 0:
        return np.hypot(rr - p0[0], cc - p0[1])
    t = np.clip(((rr - p0[0]) * d[0] + (cc - p0[1]) * d[1]) / denom, 0.0, 1.0)
    return np.hypot(rr - (p0[0] + t * d[0]), cc - (p0[1] + t * d[1]))


def stroke(shape: tuple[int, int], p0, p1, width: float, pad: float = 0.0) -> np.ndarray:
    """Round-capped stroke: pixel centres within ``width / 2 + pad`` of the segment."""
    reach = width / 2.0 + pad
    out = np.zeros(shape, dtype=bool)
    r_lo = max(0, math.floor(min(p0[0], p1[0]) - reach))
    r_hi = min(shape[0], math.ceil(max(p0[0], p1[0]) + reach) + 1)
    c_lo = max(0, math.floor(min(p0[1], p1[1]) - reach))
    c_hi = min(shape[1], math.ceil(max(p0[1], p1[1]) + reach) + 1)
    if r_lo >= r_hi or c_lo >= c_hi:
        return out
    rr, cc = np.mgrid[r_lo:r_hi, c_lo:c_hi]
    out[r_lo:r_hi, c_lo:c_hi] = _segment_distance(rr, cc, p0, p1) <= reach
    return out


def point_segment_distance(point, p0, p1) -> float:
    return float(_segment_distance(np.float64(point[0]), np.float64(point[1]), p0, p1))


def _odd_between(rng, lo: float, hi: float) -> int:
    choices = [w for w in range(math.ceil(lo), math.floor(hi) + 1) if w % 2 == 1]
    if not choices:
        raise ValueError(f"no odd width in [{lo}, {hi}]")
    return int(rng.choice(choices))


def _fold(theta: float) -> float:
    theta = abs(theta) % 180.0
    return 180.0 - theta if theta > 90.0 else theta


def generate_tree(
    seed: int,
    spec: DroneSpec | None = None,
    cal: PixelCalibration | None = None,
    *,
    include_ideal: bool = True,
    n_children: int | None = None,
    shape: tuple[int, int] = ORACLE_SHAPE,
) -> SyntheticTree:
    """Deterministic synthetic tree for ``seed``.

    ``include_ideal=False`` gives a tree with nothing graspable, and
    ``n_children=0`` a bare trunk; both should be rejected by the pipeline.
    """
    spec = spec or DroneSpec()
    cal = cal or PixelCalibration.explicit(ORACLE_MM_PER_PX)
    th = ViabilityThresholds.from_spec(spec, cal)
    window_px, _, _ = window_geometry(spec, cal)
    rng = np.random.default_rng(int(seed) & (2**64 - 1))
    h, w = shape

    trunk_w = _odd_between(rng, (1 + MARGIN) * th.w_spec_max_px + 2,
                           (1 + MARGIN) * th.w_spec_max_px + 12)
    x0 = w / 2.0 + rng.uniform(-15, 15)
    top = float(rng.uniform(40, 70))
    bottom = float(h - 8 - trunk_w / 2)
    trunk = TruthBranch((top, x0), (bottom, x0), trunk_w, 90.0, False, "trunk")
    mask = stroke(shape, trunk.start, trunk.end, trunk_w)
    keep_out = stroke(shape, trunk.start, trunk.end, trunk_w, pad=4)
    occupied = np.zeros(shape, dtype=bool)

    total = int(rng.integers(3, 8)) if n_children is None else int(n_children)
    children: list[TruthBranch] = []

    def place(make) -> TruthBranch | None:
        nonlocal mask, occupied
        for _ in range(200):
            tb = make()
            r1, c1 = tb.end
            lo = tb.width_px / 2 + _EDGE_PX
            if not (lo <= r1 <= h - lo and lo <= c1 <= w - lo):
                continue
            body = stroke(shape, tb.start, tb.end, tb.width_px) & ~keep_out
            halo = stroke(shape, tb.start, tb.end, tb.width_px, pad=_GAP_PX) & ~keep_out
            if (halo & occupied).any():
                continue
            mask |= stroke(shape, tb.start, tb.end, tb.width_px)
            occupied |= body
            return tb
        return None

    def attach_row(reach_up: float) -> float:
        return float(rng.uniform(top + 25 + reach_up, bottom - 50))

    def make_ideal() -> TruthBranch:
        width = _odd_between(rng, (1 + MARGIN) * th.w_spec_min_px + 1,
                             (1 - MARGIN) * th.w_spec_max_px - 1)
        ang = float(rng.uniform(-15.0, 15.0))
        length = float(rng.uniform(4.5, 6.0) * window_px)
        side = 1 if rng.random() < 0.5 else -1
        r0 = attach_row(max(0.0, length * math.sin(math.radians(ang))))
        start = (r0, x0)
        end = (r0 - length * math.sin(math.radians(ang)),
               x0 + side * length * math.cos(math.radians(ang)))
        return TruthBranch(start, end, width, _fold(ang), True)

    def make_other() -> TruthBranch:
        side = 1 if rng.random() < 0.5 else -1
        if rng.random() < 0.3:
            # near-level but too thick to grasp
            width = _odd_between(rng, (1 + MARGIN) * th.w_spec_max_px + 1,
                                 (1 + MARGIN) * th.w_spec_max_px + 8)
            ang = float(rng.uniform(0.0, 20.0))
            length = float(rng.uniform(2.0, 4.0) * window_px)
        else:
            # too steep, any width
            width = _odd_between(rng, 5, (1 + MARGIN) * th.w_spec_max_px + 6)
            ang = float(rng.uniform(max(48.0, (1 + MARGIN) * th.max_theta_deg + 10), 78.0))
            length = float(rng.uniform(2.0, 5.0) * window_px)
        r0 = attach_row(length * math.sin(math.radians(ang)))
        start = (r0, x0)
        end = (r0 - length * math.sin(math.radians(ang)),
               x0 + side * length * math.cos(math.radians(ang)))
        return TruthBranch(start, end, width, _fold(ang), False)

    ideal_index = None
    if include_ideal and total > 0:
        tb = place(make_ideal)
        if tb is None:
            raise RuntimeError(f"seed {seed}: could not place the ideal branch")
        children.append(tb)
        ideal_index = 1
    while len(children) < total:
        tb = place(make_other)
        if tb is None:
            break
        children.append(tb)

    return SyntheticTree(
        mask=BinaryMask(mask),
        branches_truth=(trunk, *children),
        ideal_branch_index=ideal_index,
        seed=int(seed),
        mm_per_px=cal.mm_per_px,
    )


def write_tree(tree: SyntheticTree, directory: str | Path, stem: str | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or f"tree_{tree.seed:06d}"
    save_mask(tree.mask, directory / f"{stem}.png")
    truth = tree.truth_dict()
    truth["mask"] = f"{stem}.png"
    path = directory / f"{stem}.json"
    path.write_text(json.dumps(truth, indent=2) + "\n")
    return path


def read_tree(truth_path: str | Path) -> SyntheticTree:
    truth_path = Path(truth_path)
    truth = json.loads(truth_path.read_text())
    mask = load_mask(truth_path.parent / truth["mask"])
    branches = tuple(
        TruthBranch(tuple(b["start"]), tuple(b["end"]), int(b["width_px"]),
                    float(b["theta_deg"]), bool(b["in_spec"]), b.get("role", "child"))
        for b in truth["branches"]
    )
    return SyntheticTree(mask, branches, truth["ideal_branch_index"],
                         int(truth["seed"]), float(truth["mm_per_px"]))


@dataclass(frozen=True)
class TreeOutcome:
    seed: int
    status: str
    midpoint_px: tuple[int, int] | None
    has_ideal: bool
    distance_px: float | None
    window_px: int
    success: bool


@dataclass
class CorpusEvaluation:
    outcomes: list[TreeOutcome] = field(default_factory=list)

    @property
    def n_trees(self) -> int:
        return len(self.outcomes)

    @property
    def success_rate(self) -> float:
        if not self.outcomes:
            return 0.0
        return sum(o.success for o in self.outcomes) / len(self.outcomes)

    @property
    def hits(self) -> int:
        return sum(o.success for o in self.outcomes if o.has_ideal)

    @property
    def correct_rejections(self) -> int:
        return sum(o.success for o in self.outcomes if not o.has_ideal)

    def write_csv(self, path: str | Path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["seed", "status", "row", "col", "has_ideal", "distance_px",
                         "window_px", "success"])
            for o in self.outcomes:
                row, col = o.midpoint_px if o.midpoint_px else ("", "")
                dist = "" if o.distance_px is None else f"{o.distance_px:.3f}"
                wr.writerow([o.seed, o.status, row, col, int(o.has_ideal), dist,
                             o.window_px, int(o.success)])


def score_tree(tree: SyntheticTree, run) -> TreeOutcome:
    """Judge one pipeline run against the tree's ground truth.

    A tree with an ideal branch succeeds when the perch lies within one
    window length of that branch's centreline; a tree without one succeeds
    when the pipeline finds nothing.
    """
    res = run.result
    ideal = tree.ideal
    dist = None
    if res.found and ideal is not None:
        dist = point_segment_distance(res.midpoint_px, ideal.start, ideal.end)
    if ideal is None:
        ok = res.status is Status.NO_VIABLE_BRANCH
    else:
        ok = res.found and dist <= run.window_px
    return TreeOutcome(tree.seed, res.status.value, res.midpoint_px, ideal is not None,
                       dist, run.window_px, bool(ok))


def evaluate_trees(trees, spec: DroneSpec | None = None, **config_overrides) -> CorpusEvaluation:
    from .pipeline import PipelineConfig, run_pipeline

    spec = spec or DroneSpec()
    ev = CorpusEvaluation()
    for tree in trees:
        cfg = PipelineConfig(spec=spec, mm_per_px=tree.mm_per_px, **config_overrides)
        ev.outcomes.append(score_tree(tree, run_pipeline(cfg, mask=tree.mask)))
    return ev


def evaluate_corpus(
    n_trees: int,
    spec: DroneSpec | None = None,
    *,
    seed_base: int = 0,
    include_ideal: bool = True,
    n_children: int | None = None,
    **config_overrides,
) -> CorpusEvaluation:
    """Generate ``n_trees`` seeded trees and score the pipeline on them."""
    if n_trees < 1:
        raise ValueError("n_trees must be at least 1")
    spec = spec or DroneSpec()
    trees = (
        generate_tree(seed_base + i, spec, include_ideal=include_ideal, n_children=n_children)
        for i in range(n_trees)
    )
    return evaluate_trees(trees, spec, **config_overrides)


def evaluate_dir(directory: str | Path, spec: DroneSpec | None = None, **config_overrides):
    paths = sorted(Path(directory).glob("*.json"))
    return evaluate_trees((read_tree(p) for p in paths), spec, **config_overrides)
