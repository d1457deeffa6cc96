"""Penalty ranking of viable windows and selection of the perch point."""

from __future__ import annotations

import enum
from collections.abc import Iterable
from dataclasses import dataclass, field

from .graph import DroneSpec
from .mask_io import PixelCalibration
from .windows import ViabilityThresholds, WindowProfile


class Status(str, enum.Enum):
    FOUND = "Found"
    NO_VIABLE_BRANCH = "NoViableBranch"
    DEGENERATE_TREE = "DegenerateTree"


@dataclass(frozen=True)
class PerchCandidate:
    profile: WindowProfile
    penalty: float
    width_deviation_px: float

    def sort_key(self) -> tuple:
        return (
            self.penalty,
            self.profile.theta_deg,
            self.width_deviation_px,
            self.profile.midpoint,
        )


@dataclass(frozen=True)
class PerchResult:
    status: Status
    chosen: PerchCandidate | None = None
    midpoint_px: tuple[int, int] | None = None
    midpoint_mm: tuple[float, float] | None = None
    ranked: tuple[PerchCandidate, ...] = ()
    lambdas: dict[str, float] = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.status is Status.FOUND


def penalty(
    profile: WindowProfile, thresholds: ViabilityThresholds, spec: DroneSpec
) -> float:
    """Weighted, range-normalised distance from a level branch of minimum graspable width.

    Curvature only gates viability and takes no part here.
    """
    if thresholds.max_theta_deg <= 0:
        raise ValueError("degenerate angle range")
    span = thresholds.w_spec_max_px - thresholds.w_spec_min_px
    if span <= 0:
        raise ValueError("degenerate width range")
    angle_term = abs(profile.theta_deg) / thresholds.max_theta_deg
    width_term = abs(profile.width_avg_central_px - thresholds.w_spec_min_px) / span
    p = spec.lambda_angle * angle_term + spec.lambda_width * width_term
    return min(1.0, max(0.0, p))


def rank_candidates(
    viable: Iterable[WindowProfile], thresholds: ViabilityThresholds, spec: DroneSpec
) -> list[PerchCandidate]:
    """Score viable windows and sort them best first.

    Ties on penalty fall back to smaller angle, then width closer to the
    minimum, then the smaller midpoint (row, col).
    """
    cands = [
        PerchCandidate(
            p,
            penalty(p, thresholds, spec),
            abs(p.width_avg_central_px - thresholds.w_spec_min_px),
        )
        for p in viable
    ]
    return sorted(cands, key=PerchCandidate.sort_key)


def midpoint_mm(
    midpoint: tuple[int, int], cal: PixelCalibration, height: int
) -> tuple[float, float]:
    """Pixel centre to millimetres, x to the right and y up from the bottom row."""
    row, col = midpoint
    return (col * cal.mm_per_px, (height - 1 - row) * cal.mm_per_px)


def select_perch(
    candidates: Iterable[PerchCandidate],
    spec: DroneSpec,
    cal: PixelCalibration | None = None,
    height: int | None = None,
) -> PerchResult:
    ranked = tuple(sorted(candidates, key=PerchCandidate.sort_key))
    lambdas = {"angle": spec.lambda_angle, "width": spec.lambda_width}
    if not ranked:
        return PerchResult(Status.NO_VIABLE_BRANCH, lambdas=lambdas)
    best = ranked[0]
    mid = best.profile.midpoint
    mm = midpoint_mm(mid, cal, height) if cal is not None and height is not None else None
    return PerchResult(Status.FOUND, best, mid, mm, ranked, lambdas)
