"""Sectioning a skeleton into branches and ordering their pixels."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .mask_io import EIGHT_CONNECTED
from .morphology import OFFSETS, Pixel, Skeleton

_OFFSET_INDEX = {off: k for k, off in enumerate(OFFSETS)}


class DegenerateTreeError(ValueError):
    """The skeleton has no junction-free pixels left to form branches."""


class UnsectionedBranchError(ValueError):
    """A pixel set handed to the orderer still contains a junction."""


@dataclass(frozen=True, eq=False)
class Branch:
    """Junction-free skeleton run, pixels in traversal order.

    ``pixels`` is an ``(n, 2)`` int array of (row, col); ``widths_px`` holds
    twice the skeleton distance at each pixel once widths are attached.
    """

    label: int
    pixels: np.ndarray
    widths_px: np.ndarray | None = None

    def __post_init__(self):
        pix = np.asarray(self.pixels, dtype=np.int64).reshape(-1, 2)
        pix.setflags(write=False)
        object.__setattr__(self, "pixels", pix)
        if self.widths_px is not None:
            w = np.asarray(self.widths_px, dtype=np.float64).reshape(-1)
            if w.shape[0] != pix.shape[0]:
                raise ValueError("widths_px and pixels differ in length")
            w.setflags(write=False)
            object.__setattr__(self, "widths_px", w)

    @property
    def length_px(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def endpoints(self) -> tuple[Pixel, Pixel]:
        first, last = self.pixels[0], self.pixels[-1]
        return (int(first[0]), int(first[1])), (int(last[0]), int(last[1]))

    @property
    def mean_width(self) -> float:
        return float(self.widths_px.mean())

    def reversed(self) -> "Branch":
        widths = None if self.widths_px is None else self.widths_px[::-1]
        return Branch(self.label, self.pixels[::-1], widths)

    def pixel_list(self) -> list[Pixel]:
        return [(int(r), int(c)) for r, c in self.pixels]

    def __repr__(self) -> str:
        return f"Branch(label={self.label}, length_px={self.length_px}, ends={self.endpoints})"


def section_branches(
    skeleton: Skeleton, intersections: Iterable[Pixel]
) -> dict[int, frozenset[Pixel]]:
    """Label ``skeleton`` minus ``intersections`` under 8-connectivity.

    Labels run 1..n in raster order of each component's first pixel and
    are kept for the rest of the pipeline.
    """
    residual = np.array(skeleton.image, dtype=bool, copy=True)
    for px in intersections:
        if not skeleton.image[px]:
            raise ValueError(f"intersection {px} is not a skeleton pixel")
        residual[px] = False
    labels, n = ndi.label(residual, structure=EIGHT_CONNECTED)
    if n == 0:
        raise DegenerateTreeError("skeleton has no pixels outside intersections")
    coords = np.argwhere(labels)
    ids = labels[coords[:, 0], coords[:, 1]]
    groups: dict[int, list[Pixel]] = {i: [] for i in range(1, n + 1)}
    for (r, c), i in zip(coords.tolist(), ids.tolist()):
        groups[i].append((r, c))
    return {i: frozenset(px) for i, px in groups.items()}


def _neighbours_in(px: Pixel, pixels: frozenset[Pixel] | set[Pixel]) -> list[int]:
    r, c = px
    return [k for k, (dr, dc) in enumerate(OFFSETS) if (r + dr, c + dc) in pixels]


def _moore_trace(pixels: frozenset[Pixel], start: Pixel, back: int) -> list[Pixel]:
    """Moore-neighbour boundary walk from ``start``, stopping on its second visit.

    ``back`` is the ring index of a background neighbour of ``start``. On a
    one-pixel-wide curve the walk runs out to the far end and back again.
    """
    walk = [start]
    p, kb = start, back
    limit = 8 * len(pixels) + 8
    for _ in range(limit):
        found = None
        for i in range(1, 8):
            k = (kb + i) % 8
            dr, dc = OFFSETS[k]
            q = (p[0] + dr, p[1] + dc)
            if q in pixels:
                found = k
                break
        if found is None:
            return walk
        dr, dc = OFFSETS[found]
        q = (p[0] + dr, p[1] + dc)
        br, bc = OFFSETS[(found - 1) % 8]
        kb = _OFFSET_INDEX[(p[0] + br - q[0], p[1] + bc - q[1])]
        p = q
        if p == start:
            return walk
        walk.append(p)
    raise RuntimeError("contour trace did not return to its start pixel")


def order_branch_pixels(pixels: Iterable[Pixel]) -> list[Pixel]:
    """Order an unsorted 1-px curve from one end to the other.

    Open curves start at the endpoint with the smallest (row, col). Closed
    loops start at the topmost-leftmost pixel and run clockwise.
    """
    pset = frozenset((int(r), int(c)) for r, c in pixels)
    if not pset:
        raise ValueError("empty pixel set")
    if len(pset) == 1:
        return list(pset)
    nbrs = {p: _neighbours_in(p, pset) for p in pset}
    if any(len(v) >= 3 for v in nbrs.values()):
        raise UnsectionedBranchError("unsectioned branch: pixel set contains a junction")
    ends = sorted(p for p, v in nbrs.items() if len(v) == 1)
    if ends:
        start = ends[0]
        back = (nbrs[start][0] + 4) % 8
    else:
        start = min(pset)
        back = _OFFSET_INDEX[(0, -1)]
    walk = _moore_trace(pset, start, back)
    ordered = list(dict.fromkeys(walk))
    if len(ordered) != len(pset):
        raise UnsectionedBranchError(
            f"pixel set is not a single curve ({len(ordered)} of {len(pset)} reached)"
        )
    return ordered


def attach_widths(branch: Branch, skeleton: Skeleton) -> Branch:
    """Return ``branch`` with ``widths_px[i] = 2 * distance(pixels[i])``."""
    rows, cols = branch.pixels[:, 0], branch.pixels[:, 1]
    if not skeleton.image[rows, cols].all():
        raise KeyError(f"branch {branch.label} has pixels outside the skeleton")
    widths = 2.0 * skeleton.distance[rows, cols]
    if not (widths > 0).all():
        raise ValueError(f"branch {branch.label} has a zero-distance pixel")
    return Branch(branch.label, branch.pixels, widths)


def extract_branches(skeleton: Skeleton, intersections: Iterable[Pixel]) -> list[Branch]:
    """Section, order and measure every branch, sorted by label."""
    groups = section_branches(skeleton, intersections)
    out = []
    for label in sorted(groups):
        ordered = order_branch_pixels(groups[label])
        out.append(attach_widths(Branch(label, ordered), skeleton))
    return out
