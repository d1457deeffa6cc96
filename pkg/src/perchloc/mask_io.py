"""Loading, cleaning and calibrating binary tree masks."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage as ndi

MIN_DIM = 16
DEFAULT_TREE_HEIGHT_M = 8.0
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class MaskError(ValueError):
    """Raised for masks that cannot enter the pipeline."""


@dataclass(frozen=True)
class BinaryMask:
    """Boolean tree raster, row-major with the origin at the top-left."""

    data: np.ndarray
    source_scale: float = 1.0

    def __post_init__(self):
        arr = np.array(self.data, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise MaskError(f"mask must be 2-D, got shape {arr.shape}")
        if min(arr.shape) < MIN_DIM:
            raise MaskError(
                f"mask {arr.shape[1]}x{arr.shape[0]} is below the {MIN_DIM}px minimum"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def foreground_count(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True)
class PixelCalibration:
    mm_per_px: float
    assumed_tree_height_m: float | None = None
    method: str = "explicit"  # "whole-tree-height" | "explicit"

    def __post_init__(self):
        if not self.mm_per_px > 0:
            raise ValueError(f"mm_per_px must be positive, got {self.mm_per_px}")
        if self.method not in ("whole-tree-height", "explicit"):
            raise ValueError(f"unknown calibration method {self.method!r}")

    @classmethod
    def explicit(cls, mm_per_px: float) -> "PixelCalibration":
        return cls(float(mm_per_px), None, "explicit")

    def mm_to_px(self, mm: float) -> float:
        return mm / self.mm_per_px

    def px_to_mm(self, px: float) -> float:
        return px * self.mm_per_px


def _to_gray(img: Image.Image, threshold: int) -> np.ndarray:
    if img.mode in ("RGB", "RGBA", "P"):
        rgb = np.asarray(img.convert("RGB"))
        return (rgb > 0).any(axis=2)
    if img.mode == "1":
        return np.asarray(img, dtype=bool)
    if img.mode in ("L", "LA"):
        return np.asarray(img.convert("L")) > threshold
    # 16-bit and float modes: rescale the threshold to the data range
    arr = np.asarray(img).astype(np.float64)
    top = arr.max() if arr.size else 0.0
    if top <= 255:
        return arr > threshold
    return arr > threshold * (65535.0 / 255.0)


def resample_nearest(data: np.ndarray, scale: float) -> np.ndarray:
    """Nearest-neighbour resize of a boolean raster by ``scale``.

    Output pixel ``i`` samples input ``floor((i + 0.5) / scale)``, which is
    the identity at ``scale == 1``.
    """
    if not 0 < scale <= 1:
        raise ValueError(f"scale must lie in (0, 1], got {scale}")
    if scale == 1.0:
        return np.array(data, dtype=bool)
    h, w = data.shape
    nh, nw = max(1, int(round(h * scale))), max(1, int(round(w * scale)))
    rows = np.minimum((np.arange(nh) + 0.5) / scale, h - 1).astype(int)
    cols = np.minimum((np.arange(nw) + 0.5) / scale, w - 1).astype(int)
    return np.asarray(data, dtype=bool)[np.ix_(rows, cols)]


def mask_from_array(
    arr: np.ndarray, scale: float = 1.0, threshold: int = 127
) -> BinaryMask:
    """Binarize an in-memory raster exactly as :func:`load_mask` would."""
    arr = np.asarray(arr)
    if arr.dtype == bool:
        fg = arr
    elif arr.ndim == 3:
        fg = (arr > 0).any(axis=2)
    else:
        fg = arr > threshold
    fg = resample_nearest(fg, scale)
    if not fg.any():
        raise MaskError("empty foreground")
    return BinaryMask(fg, source_scale=scale)


def load_mask(path: str | Path, scale: float = 1.0, threshold: int = 127) -> BinaryMask:
    """Read a PNG/PGM mask, binarize it and downsample by ``scale``.

    Grayscale pixels above ``threshold`` are foreground; RGB inputs count
    any nonzero channel as foreground.
    """
    if not 0 < scale <= 1:
        raise ValueError(f"scale must lie in (0, 1], got {scale}")
    try:
        with Image.open(path) as img:
            img.load()
            fg = _to_gray(img, threshold)
    except (OSError, SyntaxError) as exc:
        raise MaskError(f"cannot read mask {path}: {exc}") from exc
    return mask_from_array(fg, scale=scale)


def save_mask(mask: BinaryMask | np.ndarray, path: str | Path) -> None:
    data = mask.data if isinstance(mask, BinaryMask) else np.asarray(mask, dtype=bool)
    Image.fromarray(data.astype(np.uint8) * 255, mode="L").save(path)


def keep_largest_component(mask: BinaryMask) -> BinaryMask:
    """Keep only the largest 8-connected blob.

    Equal-sized blobs are split by the top-left corner of their bounding
    box, row first.
    """
    labels, n = ndi.label(mask.data, structure=EIGHT_CONNECTED)
    if n == 0:
        raise MaskError("empty foreground")
    if n == 1:
        return mask
    sizes = np.bincount(labels.ravel())[1:]
    slices = ndi.find_objects(labels)
    best = min(
        range(n),
        key=lambda i: (-sizes[i], slices[i][0].start, slices[i][1].start),
    )
    return BinaryMask(labels == best + 1, source_scale=mask.source_scale)


def foreground_bbox(mask: BinaryMask) -> tuple[int, int, int, int]:
    """Return (row_min, col_min, row_max, col_max), inclusive."""
    rows = np.flatnonzero(mask.data.any(axis=1))
    cols = np.flatnonzero(mask.data.any(axis=0))
    if rows.size == 0:
        raise MaskError("empty foreground")
    return int(rows[0]), int(cols[0]), int(rows[-1]), int(cols[-1])


def compute_calibration(
    mask: BinaryMask, assumed_tree_height_m: float = DEFAULT_TREE_HEIGHT_M
) -> PixelCalibration:
    """Millimetres per pixel from the assumption that the whole tree is in frame."""
    if not assumed_tree_height_m > 0:
        raise ValueError(
            f"assumed tree height must be positive, got {assumed_tree_height_m}"
        )
    r0, _, r1, _ = foreground_bbox(mask)
    bbox_h = r1 - r0 + 1
    if bbox_h <= 0:
        raise MaskError("zero bounding-box height")
    return PixelCalibration(
        mm_per_px=assumed_tree_height_m * 1000.0 / bbox_h,
        assumed_tree_height_m=assumed_tree_height_m,
        method="whole-tree-height",
    )
