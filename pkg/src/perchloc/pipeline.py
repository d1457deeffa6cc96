"""End-to-end perch location pipeline, report, overlay and profiling."""

from __future__ import annotations

import csv
import json
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from . import mechanics
from .branches import Branch, DegenerateTreeError, attach_widths, order_branch_pixels, section_branches
from .graph import DroneSpec, TreeGraph, TreeStats, build_graph, make_weigher, prune_graph, weigh_graph
from .mask_io import (
    DEFAULT_TREE_HEIGHT_M,
    BinaryMask,
    PixelCalibration,
    compute_calibration,
    keep_largest_component,
    load_mask,
    resample_nearest,
)
from .morphology import Skeleton, classify_pixels, export_distance_pgm, intersection_pixels, medial_axis_transform
from .ranking import PerchCandidate, PerchResult, Status, rank_candidates, select_perch
from .windows import (
    DEFAULT_SMOOTHING_PX,
    ViabilityThresholds,
    WindowProfile,
    profile_branches,
    window_geometry,
)

log = logging.getLogger(__name__)

REPORT_SCHEMA = "pli-report/1"
STAGES = ("load", "mat", "classify", "section", "order", "graph", "weight",
          "prune", "windows", "rank")

# Overlay palette (RGB).
COLOR_BACKGROUND = (0, 0, 0)
COLOR_MASK = (80, 80, 80)
COLOR_SKELETON = (200, 200, 255)
COLOR_VIABLE = (0, 220, 0)
COLOR_REJECTED = (255, 150, 0)
COLOR_MARKER = (255, 0, 0)
MARKER_RADIUS = 4


class PipelineError(RuntimeError):
    """A stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    mask_path: str | None = None
    image_path: str | None = None
    scale: float = 1.0
    spec: DroneSpec = field(default_factory=DroneSpec)
    max_theta_deg: float = 30.0
    reference_curvature_per_px: float = 0.05
    smoothing_window_px: int = DEFAULT_SMOOTHING_PX
    assumed_tree_height_m: float = DEFAULT_TREE_HEIGHT_M
    mm_per_px: float | None = None
    out_json: str | None = None
    overlay: str | None = None
    graph_dump: str | None = None
    skeleton_pgm: str | None = None
    skip_prune: bool = False
    stress_check: bool = False
    lever_m: float = mechanics.DEFAULT_LEVER_M
    mor_mpa: float = mechanics.DEFAULT_MOR_MPA
    safety_factor: float = mechanics.DEFAULT_SAFETY_FACTOR
    verbose_candidates: bool = False

    def __post_init__(self):
        if not 0 < self.scale <= 1:
            raise ValueError(f"scale must lie in (0, 1], got {self.scale}")
        if self.mm_per_px is not None and not self.mm_per_px > 0:
            raise ValueError("mm_per_px must be positive")
        if not self.assumed_tree_height_m > 0:
            raise ValueError("assumed tree height must be positive")
        if self.stress_check and self.lever_m < 0:
            raise ValueError("lever arm must be non-negative")


@dataclass
class StageTimings:
    """Wall-clock seconds per stage of one run."""

    scale: float = 1.0
    load: float = 0.0
    mat: float = 0.0
    classify: float = 0.0
    section: float = 0.0
    order: float = 0.0
    graph: float = 0.0
    weight: float = 0.0
    prune: float = 0.0
    windows: float = 0.0
    rank: float = 0.0
    total: float = 0.0

    def stage_items(self) -> dict[str, float]:
        return {s: getattr(self, s) for s in STAGES}

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class PipelineRun:
    """Everything one run produced; ``result`` and ``timings`` are the headline."""

    result: PerchResult
    timings: StageTimings
    mask: BinaryMask | None = None
    calibration: PixelCalibration | None = None
    skeleton: Skeleton | None = None
    graph: TreeGraph | None = None
    pruned: TreeGraph | None = None
    thresholds: ViabilityThresholds | None = None
    profiles: list[WindowProfile] = field(default_factory=list)
    window_px: int = 0
    stress: dict[tuple, tuple[float, bool]] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return {Status.FOUND: 0, Status.NO_VIABLE_BRANCH: 2, Status.DEGENERATE_TREE: 3}[
            self.result.status
        ]


class _Clock:
    def __init__(self, timings: StageTimings):
        self.t = timings

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        except (DegenerateTreeError, PipelineError):
            raise
        except Exception as exc:
            raise PipelineError(name, exc) from exc
        finally:
            setattr(self.t, name, getattr(self.t, name) + time.perf_counter() - t0)


def run_pipeline(config: PipelineConfig, mask: BinaryMask | None = None) -> PipelineRun:
    """Run load through rank on ``config.mask_path`` (or a ready ``mask``).

    A tree that sections into nothing comes back as ``DegenerateTree``
    rather than raising; any other stage failure raises
    :class:`PipelineError`.
    """
    timings = StageTimings(scale=config.scale)
    clock = _Clock(timings)
    spec = config.spec
    t_start = time.perf_counter()
    run = PipelineRun(PerchResult(Status.DEGENERATE_TREE), timings)
    try:
        with clock.stage("load"):
            if mask is None:
                if config.mask_path is None:
                    raise ValueError("no mask given")
                mask = load_mask(config.mask_path, config.scale)
            elif config.scale != 1.0:
                mask = BinaryMask(resample_nearest(mask.data, config.scale), config.scale)
            mask = keep_largest_component(mask)
            if config.mm_per_px is not None:
                cal = PixelCalibration.explicit(config.mm_per_px * (1.0 / config.scale))
            else:
                cal = compute_calibration(mask, config.assumed_tree_height_m)
            thresholds = ViabilityThresholds.from_spec(
                spec,
                cal,
                max_theta_deg=config.max_theta_deg,
                reference_curvature_per_px=config.reference_curvature_per_px,
                smoothing_window_px=config.smoothing_window_px,
            )
        run.mask, run.calibration, run.thresholds = mask, cal, thresholds

        with clock.stage("mat"):
            skel = medial_axis_transform(mask)
        run.skeleton = skel
        with clock.stage("classify"):
            inter = intersection_pixels(classify_pixels(skel))
        with clock.stage("section"):
            groups = section_branches(skel, inter)
        with clock.stage("order"):
            branches = [
                attach_widths(Branch(label, order_branch_pixels(groups[label])), skel)
                for label in sorted(groups)
            ]
        with clock.stage("graph"):
            graph = build_graph(branches, inter, skel)
        with clock.stage("weight"):
            stats = TreeStats.from_graph(graph)
            weigh = make_weigher(stats, spec, cal)
            graph = weigh_graph(graph, weigh)
        run.graph = graph
        with clock.stage("prune"):
            if config.skip_prune:
                pruned = graph
            else:
                pruned, _ = prune_graph(graph, spec.prune_threshold, weigh)
        run.pruned = pruned

        with clock.stage("windows"):
            window_px, stride_px, claw_px = window_geometry(spec, cal)
            rings = frozenset(e.label for e in pruned.edges.values() if e.is_loop)
            profiles = profile_branches(
                pruned.branches, window_px, stride_px, claw_px,
                thresholds.smoothing_window_px, rings,
            )
            viable = [p for p in profiles if all(p.checks(thresholds).values())]
        run.profiles, run.window_px = profiles, window_px

        with clock.stage("rank"):
            ranked = rank_candidates(viable, thresholds, spec)
            if config.stress_check:
                ranked = _apply_stress(run, ranked, config, cal)
            run.result = select_perch(ranked, spec, cal, mask.height)
    except DegenerateTreeError as exc:
        log.info("degenerate tree: %s", exc)
        run.result = PerchResult(
            Status.DEGENERATE_TREE,
            lambdas={"angle": spec.lambda_angle, "width": spec.lambda_width},
        )
    timings.total = time.perf_counter() - t_start
    return run


def _apply_stress(run, ranked, config, cal) -> list[PerchCandidate]:
    keep = []
    for cand in ranked:
        radius_m = cand.profile.width_avg_central_px / 2.0 * cal.mm_per_px / 1000.0
        sigma = mechanics.bending_stress(config.spec.drone_mass_kg, config.lever_m, radius_m)
        ok = mechanics.stress_check(sigma, config.mor_mpa, config.safety_factor)
        run.stress[_key(cand.profile)] = (sigma, ok)
        if ok:
            keep.append(cand)
    return keep


def _key(p: WindowProfile) -> tuple:
    return (p.branch_label, p.start_index)


def _candidate_dict(run: PipelineRun, cand: PerchCandidate) -> dict:
    d = cand.profile.to_dict()
    d["penalty"] = cand.penalty
    if run.stress:
        sigma, ok = run.stress[_key(cand.profile)]
        d["sigma_mpa"] = sigma
        d["stress_ok"] = ok
    return d


def build_report(run: PipelineRun, *, verbose: bool = False, timings: bool = True) -> dict:
    """JSON-ready report in the ``pli-report/1`` layout."""
    res = run.result
    cal = run.calibration
    report: dict = {"schema": REPORT_SCHEMA, "status": res.status.value}
    if res.found:
        report["midpoint_px"] = list(res.midpoint_px)
        report["midpoint_mm"] = list(res.midpoint_mm)
        report["penalty"] = res.chosen.penalty
        report["theta_deg"] = res.chosen.profile.theta_deg
        report["width_avg_mm"] = res.chosen.profile.width_avg_central_px * cal.mm_per_px
    else:
        report.update(midpoint_px=None, midpoint_mm=None, penalty=None,
                      theta_deg=None, width_avg_mm=None)
    report["lambdas"] = dict(res.lambdas)
    report["calibration"] = (
        {"mm_per_px": cal.mm_per_px, "method": cal.method,
         "assumed_tree_height_m": cal.assumed_tree_height_m}
        if cal is not None else None
    )
    if run.thresholds is not None:
        t = run.thresholds
        report["thresholds"] = {
            "max_theta_deg": t.max_theta_deg,
            "max_abs_curvature_per_px": t.max_abs_curvature_per_px,
            "w_spec_min_px": t.w_spec_min_px,
            "w_spec_max_px": t.w_spec_max_px,
            "smoothing_window_px": t.smoothing_window_px,
            "window_px": run.window_px,
        }
    report["candidates"] = [_candidate_dict(run, c) for c in res.ranked]
    if run.stress:
        report["stress_rejected"] = sum(not ok for _, ok in run.stress.values())
    if verbose and run.thresholds is not None:
        report["windows"] = [
            {**p.to_dict(), "checks": p.checks(run.thresholds)} for p in run.profiles
        ]
    if timings:
        report["timings"] = run.timings.as_dict()
    return report


def write_report(run: PipelineRun, path: str | Path, *, verbose: bool = False) -> None:
    Path(path).write_text(json.dumps(build_report(run, verbose=verbose), indent=2) + "\n")


def _window_pixels(run: PipelineRun, profile: WindowProfile) -> np.ndarray:
    branch = run.pruned.edges[profile.branch_label].branch
    return branch.pixels[profile.start_index:profile.end_index + 1]


def render_overlay(
    run: PipelineRun,
    path: str | Path,
    *,
    image_path: str | None = None,
    verbose: bool = False,
) -> None:
    """PNG of the skeleton, viable windows and the chosen perch marker.

    With ``verbose`` the rejected windows are drawn too, in their own colour.
    """
    if run.mask is None:
        raise ValueError("run has no mask to draw on")
    h, w = run.mask.height, run.mask.width
    if image_path is not None:
        with Image.open(image_path) as im:
            canvas = np.asarray(im.convert("RGB").resize((w, h), Image.NEAREST)).copy()
    else:
        canvas = np.zeros((h, w, 3), dtype=np.uint8)
        canvas[:] = COLOR_BACKGROUND
        canvas[run.mask.data] = COLOR_MASK
    if run.skeleton is not None:
        canvas[run.skeleton.image] = COLOR_SKELETON
    if run.thresholds is not None and run.pruned is not None:
        for p in run.profiles:
            ok = all(p.checks(run.thresholds).values())
            if not ok and not verbose:
                continue
            pix = _window_pixels(run, p)
            canvas[pix[:, 0], pix[:, 1]] = COLOR_VIABLE if ok else COLOR_REJECTED
    img = Image.fromarray(canvas, mode="RGB")
    if run.result.found:
        r, c = run.result.midpoint_px
        ImageDraw.Draw(img).ellipse(
            (c - MARKER_RADIUS, r - MARKER_RADIUS, c + MARKER_RADIUS, r + MARKER_RADIUS),
            fill=COLOR_MARKER,
        )
    try:
        img.save(path, format="PNG")
    except OSError as exc:
        raise PipelineError("overlay", exc) from exc


def write_outputs(run: PipelineRun, config: PipelineConfig) -> None:
    """Write every artifact requested in ``config``."""
    if config.out_json:
        write_report(run, config.out_json, verbose=config.verbose_candidates)
    if config.overlay:
        render_overlay(run, config.overlay, image_path=config.image_path,
                       verbose=config.verbose_candidates)
    if config.graph_dump and run.graph is not None:
        Path(config.graph_dump).write_text(run.pruned.to_jsonl())
    if config.skeleton_pgm and run.skeleton is not None:
        export_distance_pgm(run.skeleton, config.skeleton_pgm)


PROFILE_COLUMNS = ("scale",) + STAGES + ("total",)


def profile(config: PipelineConfig, scales, mask: BinaryMask | None = None) -> list[StageTimings]:
    """Time one run per scale, largest scale first."""
    rows = []
    for s in sorted(scales, reverse=True):
        if not 0 < s <= 1:
            raise ValueError(f"scale must lie in (0, 1], got {s}")
        cfg = PipelineConfig(**{**config.__dict__, "scale": s})
        rows.append(run_pipeline(cfg, mask=mask).timings)
    return rows


def write_profile_csv(rows: list[StageTimings], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PROFILE_COLUMNS)
        for row in rows:
            d = row.as_dict()
            writer.writerow([f"{d[c]:.6f}" if c != "scale" else f"{d[c]:g}" for c in PROFILE_COLUMNS])
