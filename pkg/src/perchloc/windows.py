"""Sliding-window branch profiling and the viability filter."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter1d

from .branches import Branch
from .mask_io import PixelCalibration

REFERENCE_MM_PER_PX = 10.0
# Smoothed curvature of straight digital lines stays below this at the
# default smoothing; finer thresholds cannot be resolved from pixels.
CURVATURE_NOISE_FLOOR = 0.05
DEFAULT_SMOOTHING_PX = 13
MONOTONIC_EPS = 1e-6


@dataclass(frozen=True)
class ViabilityThresholds:
    """Lenient per-window limits a perch candidate must satisfy.

    ``max_abs_curvature_per_px`` is already expressed at the working scale;
    use :meth:`from_spec` to derive it from the reference value.
    """

    w_spec_min_px: float
    w_spec_max_px: float
    max_theta_deg: float = 30.0
    max_abs_curvature_per_px: float = 0.05
    smoothing_window_px: int = DEFAULT_SMOOTHING_PX

    def __post_init__(self):
        for name in ("w_spec_min_px", "w_spec_max_px", "max_theta_deg",
                     "max_abs_curvature_per_px"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.w_spec_max_px <= self.w_spec_min_px:
            raise ValueError("w_spec_max_px must exceed w_spec_min_px")
        s = self.smoothing_window_px
        if s < 3 or s % 2 == 0:
            raise ValueError(f"smoothing window must be odd and >= 3, got {s}")

    @classmethod
    def from_spec(
        cls,
        spec,
        cal: PixelCalibration,
        *,
        max_theta_deg: float = 30.0,
        reference_curvature_per_px: float = 0.05,
        smoothing_window_px: int = DEFAULT_SMOOTHING_PX,
        curvature_floor_per_px: float = CURVATURE_NOISE_FLOOR,
    ) -> "ViabilityThresholds":
        """Convert a :class:`~perchloc.graph.DroneSpec` to pixel thresholds.

        The curvature limit is given at 10 mm/px and rescaled so that the
        physical bend radius it admits does not depend on resolution, but
        never below the digital noise floor.
        """
        wmin, wmax = spec.width_limits_px(cal)
        kappa = reference_curvature_per_px * cal.mm_per_px / REFERENCE_MM_PER_PX
        return cls(
            w_spec_min_px=wmin,
            w_spec_max_px=wmax,
            max_theta_deg=max_theta_deg,
            max_abs_curvature_per_px=max(kappa, curvature_floor_per_px),
            smoothing_window_px=smoothing_window_px,
        )


@dataclass(frozen=True, eq=False)
class WindowProfile:
    branch_label: int
    start_index: int
    end_index: int
    midpoint: tuple[int, int]
    theta_deg: float
    curvature: np.ndarray = field(repr=False)
    max_abs_curvature: float
    width_min_px: float
    width_max_px: float
    width_avg_central_px: float
    monotonic: bool

    @property
    def length(self) -> int:
        return self.end_index - self.start_index + 1

    def checks(self, thresholds: ViabilityThresholds) -> dict[str, bool]:
        """Pass/fail for each viability criterion."""
        return {
            "angle": self.theta_deg <= thresholds.max_theta_deg,
            "curvature": self.max_abs_curvature <= thresholds.max_abs_curvature_per_px,
            "width": thresholds.w_spec_min_px
            <= self.width_avg_central_px
            <= thresholds.w_spec_max_px,
            "monotonic": self.monotonic,
        }

    def to_dict(self) -> dict:
        return {
            "branch_label": self.branch_label,
            "start_index": self.start_index,
            "end_index": self.end_index,
            "midpoint_px": list(self.midpoint),
            "theta_deg": self.theta_deg,
            "max_abs_curvature": self.max_abs_curvature,
            "width_min_px": self.width_min_px,
            "width_max_px": self.width_max_px,
            "width_avg_central_px": self.width_avg_central_px,
            "monotonic": self.monotonic,
        }


def window_geometry(spec, cal: PixelCalibration) -> tuple[int, int, int]:
    """Window length, stride and claw span in pixels for a drone at ``cal``."""
    window_px = max(5, int(round(spec.window_mm / cal.mm_per_px)))
    stride_px = max(1, window_px // 4)
    claw_px = max(1, int(round(spec.claw_width_mm / cal.mm_per_px)))
    return window_px, stride_px, claw_px


def slide_windows(length: int, window_px: int, stride_px: int) -> list[tuple[int, int]]:
    """Inclusive (start, end) index pairs for every full window along a branch."""
    if window_px < 3:
        raise ValueError("window_px must be at least 3")
    if stride_px < 1:
        raise ValueError("stride_px must be at least 1")
    return [
        (s, s + window_px - 1) for s in range(0, length - window_px + 1, stride_px)
    ]


def to_math_xy(pixels: np.ndarray, height: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Image (row, col) to math (x, y) with y pointing up.

    ``y = (height - 1) - row``. With no height the offset is dropped, which
    changes nothing that depends only on differences.
    """
    pix = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    x = pix[:, 1]
    y = -pix[:, 0] if height is None else (height - 1) - pix[:, 0]
    return x, y


def window_angle(pixels) -> float:
    """Unsigned slope of the end-to-end chord, folded into [0, 90] degrees."""
    x, y = to_math_xy(pixels)
    if x.shape[0] < 2:
        raise ValueError("angle needs at least two pixels")
    dx, dy = x[-1] - x[0], y[-1] - y[0]
    if dx == 0 and dy == 0:
        raise ValueError("coincident window endpoints")
    theta = abs(math.degrees(math.atan2(dy, dx)))
    return 180.0 - theta if theta > 90.0 else theta


def _moving_average(values: np.ndarray, size: int) -> np.ndarray:
    return uniform_filter1d(np.asarray(values, dtype=np.float64), size, mode="nearest")


def _periodic_gradient(v: np.ndarray) -> np.ndarray:
    return (np.roll(v, -1) - np.roll(v, 1)) / 2.0


def curvature_series(
    pixels, smoothing_window_px: int = DEFAULT_SMOOTHING_PX, *, closed: bool = False
) -> np.ndarray:
    """Signed curvature per pixel after a centred moving average.

    Derivatives are central differences over the traversal index, one-sided
    at the ends of an open curve. ``closed`` treats the last pixel as
    adjacent to the first, so a ring has no ends at all.
    """
    x, y = to_math_xy(pixels)
    if x.shape[0] < 5:
        raise ValueError("curvature needs at least five pixels")
    grad = _periodic_gradient if closed else np.gradient
    dx, dy = grad(x), grad(y)
    ddx, ddy = grad(dx), grad(dy)
    speed = (dx * dx + dy * dy) ** 1.5
    kappa = np.divide(dx * ddy - dy * ddx, speed, out=np.zeros_like(speed), where=speed > 0)
    mode = "wrap" if closed else "nearest"
    return uniform_filter1d(kappa, smoothing_window_px, mode=mode)


def window_curvature(
    pixels, smoothing_window_px: int = DEFAULT_SMOOTHING_PX, *, closed: bool = False
) -> tuple[np.ndarray, float]:
    """Smoothed curvature of a standalone window and its largest magnitude."""
    smooth = curvature_series(pixels, smoothing_window_px, closed=closed)
    return smooth, float(np.abs(smooth).max())


def window_width_stats(widths, claw_width_px: int) -> tuple[float, float, float]:
    """(min, max, mean over the centred claw-length sub-range)."""
    w = np.asarray(widths, dtype=np.float64)
    if w.size == 0:
        raise ValueError("empty widths")
    if claw_width_px < 1:
        raise ValueError("claw_width_px must be at least 1")
    span = min(int(claw_width_px), w.size)
    lo = (w.size - span) // 2
    return float(w.min()), float(w.max()), float(w[lo:lo + span].mean())


def monotonicity_check(pixels, smoothing_window_px: int = DEFAULT_SMOOTHING_PX) -> bool:
    """False when the smoothed vertical steps change sign along the window."""
    _, y = to_math_xy(pixels)
    if y.shape[0] < 3:
        raise ValueError("monotonicity needs at least three pixels")
    steps = _moving_average(np.diff(y), min(smoothing_window_px, y.shape[0] - 1) | 1)
    return not (bool((steps > MONOTONIC_EPS).any()) and bool((steps < -MONOTONIC_EPS).any()))


def profile_window(
    branch: Branch,
    start: int,
    end: int,
    claw_width_px: int,
    smoothing_window_px: int = DEFAULT_SMOOTHING_PX,
    branch_curvature: np.ndarray | None = None,
) -> WindowProfile:
    """Angle, curvature, width and monotonicity of one window.

    Curvature is sliced from ``branch_curvature`` (the whole-branch series)
    when given, so window ends carry no smoothing edge effects.
    """
    pix = branch.pixels[start:end + 1]
    widths = branch.widths_px[start:end + 1]
    if branch_curvature is None:
        curv, kmax = window_curvature(pix, smoothing_window_px)
    else:
        curv = np.array(branch_curvature[start:end + 1])
        kmax = float(np.abs(curv).max())
    wmin, wmax, wavg = window_width_stats(widths, claw_width_px)
    mid = pix[(len(pix) - 1) // 2]
    return WindowProfile(
        branch_label=branch.label,
        start_index=start,
        end_index=end,
        midpoint=(int(mid[0]), int(mid[1])),
        theta_deg=window_angle(pix),
        curvature=curv,
        max_abs_curvature=kmax,
        width_min_px=wmin,
        width_max_px=wmax,
        width_avg_central_px=wavg,
        monotonic=monotonicity_check(pix, smoothing_window_px),
    )


def profile_branches(
    branches,
    window_px: int,
    stride_px: int,
    claw_width_px: int,
    smoothing_window_px: int = DEFAULT_SMOOTHING_PX,
    closed_labels=frozenset(),
) -> list[WindowProfile]:
    """Profiles of every full window on every branch, in label order.

    Branches whose label is in ``closed_labels`` are rings; their curvature
    is computed periodically.
    """
    out = []
    for branch in sorted(branches, key=lambda b: b.label):
        spans = slide_windows(branch.length_px, window_px, stride_px)
        if not spans:
            continue
        kappa = curvature_series(
            branch.pixels, smoothing_window_px, closed=branch.label in closed_labels
        )
        for s, e in spans:
            out.append(
                profile_window(branch, s, e, claw_width_px, smoothing_window_px, kappa)
            )
    return out


def viability_filter(profiles, thresholds: ViabilityThresholds) -> list[WindowProfile]:
    """Profiles passing every criterion. An empty list means the tree is unsuitable."""
    return [p for p in profiles if all(p.checks(thresholds).values())]
