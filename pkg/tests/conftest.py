"""Independent reference implementations used as test oracles.

Each is deliberately naive: exhaustive search over pixels rather than the
library routines the package relies on.
"""

from __future__ import annotations

from collections import deque

import numpy as np
import pytest

NEIGHBOURS_8 = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]


def brute_force_edt(mask: np.ndarray) -> np.ndarray:
    """Distance from each foreground pixel centre to the nearest background
    pixel centre, with the frame outside the image counting as background."""
    padded = np.pad(np.asarray(mask, dtype=bool), 1)
    bg = np.argwhere(~padded).astype(float)
    out = np.zeros(padded.shape)
    for r, c in np.argwhere(padded):
        out[r, c] = np.sqrt(((bg - (r, c)) ** 2).sum(axis=1).min())
    return out[1:-1, 1:-1]


def brute_force_distance_at(mask: np.ndarray, point) -> float:
    """Same distance as :func:`brute_force_edt`, for one pixel only."""
    padded = np.pad(np.asarray(mask, dtype=bool), 1)
    bg = np.argwhere(~padded).astype(float)
    r, c = point[0] + 1, point[1] + 1
    return float(np.sqrt(((bg - (r, c)) ** 2).sum(axis=1).min()))


def flood_fill_components(mask: np.ndarray) -> list[set[tuple[int, int]]]:
    """8-connected components by breadth-first flood fill, in raster order of first pixel."""
    mask = np.asarray(mask, dtype=bool)
    seen = np.zeros_like(mask)
    comps = []
    h, w = mask.shape
    for r0 in range(h):
        for c0 in range(w):
            if not mask[r0, c0] or seen[r0, c0]:
                continue
            comp = set()
            queue = deque([(r0, c0)])
            seen[r0, c0] = True
            while queue:
                r, c = queue.popleft()
                comp.add((r, c))
                for dr, dc in NEIGHBOURS_8:
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < h and 0 <= cc < w and mask[rr, cc] and not seen[rr, cc]:
                        seen[rr, cc] = True
                        queue.append((rr, cc))
            comps.append(comp)
    return comps


def pixel_set_components(pixels) -> list[set[tuple[int, int]]]:
    pixels = set(pixels)
    if not pixels:
        return []
    rows = [p[0] for p in pixels]
    cols = [p[1] for p in pixels]
    r0, c0 = min(rows), min(cols)
    img = np.zeros((max(rows) - r0 + 1, max(cols) - c0 + 1), dtype=bool)
    for r, c in pixels:
        img[r - r0, c - c0] = True
    return [{(r + r0, c + c0) for r, c in comp} for comp in flood_fill_components(img)]


def hamiltonian_paths(pixels) -> list[list[tuple[int, int]]]:
    """Every Hamiltonian path of the 8-adjacency graph of ``pixels`` (exhaustive DFS)."""
    pixels = list(pixels)
    pset = set(pixels)
    adj = {
        p: [(p[0] + dr, p[1] + dc) for dr, dc in NEIGHBOURS_8 if (p[0] + dr, p[1] + dc) in pset]
        for p in pixels
    }
    found = []

    def dfs(path, visited):
        if len(path) == len(pixels):
            found.append(list(path))
            return
        for q in adj[path[-1]]:
            if q not in visited:
                visited.add(q)
                path.append(q)
                dfs(path, visited)
                path.pop()
                visited.remove(q)

    for start in pixels:
        dfs([start], {start})
    return found


def chebyshev_steps(pixels) -> np.ndarray:
    pix = np.asarray(pixels)
    return np.abs(np.diff(pix, axis=0)).max(axis=1)


def draw_polyline(shape, points) -> np.ndarray:
    """1-px 8-connected polyline through integer (row, col) vertices."""
    img = np.zeros(shape, dtype=bool)
    for (r0, c0), (r1, c1) in zip(points[:-1], points[1:]):
        n = max(abs(r1 - r0), abs(c1 - c0))
        for t in range(n + 1):
            img[round(r0 + (r1 - r0) * t / n), round(c0 + (c1 - c0) * t / n)] = True
    return img


@pytest.fixture(scope="session")
def oracle_tree0():
    from perchloc.oracle import generate_tree

    return generate_tree(0)
