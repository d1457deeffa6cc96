"""Medial axis skeletonization and 3x3 neighbourhood classification."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import ndimage as ndi
from skimage.morphology import medial_axis

from .mask_io import BinaryMask, MaskError

Pixel = tuple[int, int]

# Clockwise from north, (drow, dcol); bit k of a neighbourhood code is OFFSETS[k].
OFFSETS: tuple[Pixel, ...] = (
    (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1),
)
_CODE_KERNEL = np.zeros((3, 3), dtype=np.int32)
for _bit, (_dr, _dc) in enumerate(OFFSETS):
    _CODE_KERNEL[1 + _dr, 1 + _dc] = 1 << _bit
_COUNT_KERNEL = np.ones((3, 3), dtype=np.int32)
_COUNT_KERNEL[1, 1] = 0


class PixelKind(enum.Enum):
    END = "EndPoint"
    BODY = "BodyPoint"
    T_JUNCTION = "TJunction"
    BLOCK = "Block"


@dataclass(frozen=True)
class PixelClass:
    kind: PixelKind
    neighbour_count: int

    @classmethod
    def from_count(cls, count: int) -> "PixelClass":
        if count <= 1:
            kind = PixelKind.END
        elif count == 2:
            kind = PixelKind.BODY
        elif count == 3:
            kind = PixelKind.T_JUNCTION
        else:
            kind = PixelKind.BLOCK
        return cls(kind, int(count))

    @property
    def is_intersection(self) -> bool:
        return self.kind in (PixelKind.T_JUNCTION, PixelKind.BLOCK)


@dataclass(frozen=True, eq=False)
class Skeleton:
    """One-pixel-wide medial axis plus the distance transform of its mask.

    ``distance`` covers the whole raster; only its values on ``image`` are
    meaningful skeleton radii. The local width at a pixel is twice its
    distance.
    """

    image: np.ndarray
    distance: np.ndarray

    @property
    def parent_dims(self) -> tuple[int, int]:
        return self.image.shape

    @cached_property
    def pixels(self) -> frozenset[Pixel]:
        return frozenset(map(tuple, np.argwhere(self.image).tolist()))

    def distance_at(self, px: Pixel) -> float:
        if not self.image[px]:
            raise KeyError(f"{px} is not a skeleton pixel")
        return float(self.distance[px])

    def width_at(self, px: Pixel) -> float:
        return 2.0 * self.distance_at(px)

    def __len__(self) -> int:
        return int(self.image.sum())


def _build_simple_lut() -> np.ndarray:
    """Simple-point table over 8-bit neighbourhood codes.

    A pixel is simple when its 8-neighbour foreground forms exactly one
    8-component and exactly one background 4-component touches it.
    """
    lut = np.zeros(256, dtype=bool)
    ring = list(range(8))
    for code in range(256):
        fg = [(code >> k) & 1 for k in ring]
        if sum(fg) in (0, 8):
            continue
        # foreground components around the ring, 8-adjacency
        seen, comps = set(), 0
        for k in ring:
            if not fg[k] or k in seen:
                continue
            comps += 1
            stack = [k]
            while stack:
                cur = stack.pop()
                if cur in seen:
                    continue
                seen.add(cur)
                cr, cc = OFFSETS[cur]
                for j in ring:
                    if fg[j] and j not in seen:
                        jr, jc = OFFSETS[j]
                        if max(abs(jr - cr), abs(jc - cc)) == 1:
                            stack.append(j)
        # background 4-components that are 4-adjacent to the centre
        seen, bg_comps = set(), 0
        for k in (0, 2, 4, 6):
            if fg[k] or k in seen:
                continue
            bg_comps += 1
            stack = [k]
            while stack:
                cur = stack.pop()
                if cur in seen:
                    continue
                seen.add(cur)
                cr, cc = OFFSETS[cur]
                for j in ring:
                    if not fg[j] and j not in seen:
                        jr, jc = OFFSETS[j]
                        if abs(jr - cr) + abs(jc - cc) == 1:
                            stack.append(j)
        lut[code] = comps == 1 and bg_comps == 1
    return lut


SIMPLE_LUT = _build_simple_lut()


def neighbour_codes(image: np.ndarray) -> np.ndarray:
    return ndi.correlate(image.astype(np.int32), _CODE_KERNEL, mode="constant")


def neighbour_counts(image: np.ndarray) -> np.ndarray:
    """Count of 8-connected foreground neighbours at every pixel."""
    return ndi.correlate(image.astype(np.int32), _COUNT_KERNEL, mode="constant")


def _code_at(image: np.ndarray, r: int, c: int) -> int:
    h, w = image.shape
    code = 0
    for k, (dr, dc) in enumerate(OFFSETS):
        rr, cc = r + dr, c + dc
        if 0 <= rr < h and 0 <= cc < w and image[rr, cc]:
            code |= 1 << k
    return code


def thin_redundant(image: np.ndarray) -> np.ndarray:
    """Remove simple non-endpoint pixels until none remain.

    Leaves an irreducible 8-connected curve set: no 2x2 blocks and no
    staircase corners that would read as false junctions.
    """
    out = np.array(image, dtype=bool, copy=True)
    while True:
        codes = neighbour_codes(out)
        counts = neighbour_counts(out)
        cand = out & SIMPLE_LUT[codes] & (counts >= 2)
        if not cand.any():
            return out
        changed = False
        for r, c in np.argwhere(cand):
            code = _code_at(out, r, c)
            if SIMPLE_LUT[code] and bin(code).count("1") >= 2:
                out[r, c] = False
                changed = True
        if not changed:
            return out


def medial_axis_transform(mask: BinaryMask) -> Skeleton:
    """Skeletonize ``mask`` and record the Euclidean distance at every pixel.

    The frame around the image counts as background, so masks touching
    the border still get finite distances.
    """
    data = mask.data if isinstance(mask, BinaryMask) else np.asarray(mask, dtype=bool)
    if not data.any():
        raise MaskError("empty mask")
    padded = np.pad(data, 1)
    dist = ndi.distance_transform_edt(padded)[1:-1, 1:-1]
    skel = medial_axis(padded, rng=0)[1:-1, 1:-1]
    skel = thin_redundant(skel)
    skel.setflags(write=False)
    dist.setflags(write=False)
    return Skeleton(skel, dist)


def classify_pixels(skeleton: Skeleton) -> dict[Pixel, PixelClass]:
    counts = neighbour_counts(skeleton.image)
    return {
        (int(r), int(c)): PixelClass.from_count(int(counts[r, c]))
        for r, c in np.argwhere(skeleton.image)
    }


def intersection_pixels(classes: dict[Pixel, PixelClass]) -> frozenset[Pixel]:
    return frozenset(p for p, cls in classes.items() if cls.is_intersection)


def endpoint_pixels(classes: dict[Pixel, PixelClass]) -> frozenset[Pixel]:
    return frozenset(p for p, cls in classes.items() if cls.kind is PixelKind.END)


def export_distance_pgm(skeleton: Skeleton, path: str | Path) -> None:
    """Write skeleton radii as a 16-bit PGM, value = distance x 100 (saturating)."""
    vals = np.where(skeleton.image, np.round(skeleton.distance * 100.0), 0)
    vals = np.clip(vals, 0, 65535).astype(">u2")
    h, w = vals.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(vals.tobytes())
