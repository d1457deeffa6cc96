from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perchloc.branches import (
    Branch,
    UnsectionedBranchError,
    attach_widths,
    extract_branches,
    order_branch_pixels,
    section_branches,
)
from perchloc.mask_io import BinaryMask
from perchloc.morphology import Skeleton, classify_pixels, intersection_pixels, medial_axis_transform, thin_redundant

from conftest import chebyshev_steps, draw_polyline, hamiltonian_paths, pixel_set_components
from test_morphology import blob_masks


def _skel(img):
    img = np.asarray(img, bool)
    return Skeleton(img, np.where(img, 1.0, 0.0))


def _sections(img):
    sk = _skel(img)
    inter = intersection_pixels(classify_pixels(sk))
    return sk, inter, section_branches(sk, inter)


def test_straight_line_is_one_branch():
    img = draw_polyline((20, 30), [(10, 3), (10, 25)])
    _, inter, groups = _sections(img)
    assert not inter
    assert list(groups) == [1]
    assert groups[1] == set(map(tuple, np.argwhere(img).tolist()))


def test_t_shape_splits_into_three():
    img = draw_polyline((21, 21), [(3, 10), (14, 10)]) | draw_polyline((21, 21), [(15, 3), (15, 17)])
    img = thin_redundant(img)
    sk, inter, groups = _sections(img)
    assert len(inter) == 1
    rest = set(map(tuple, np.argwhere(img).tolist())) - set(inter)
    oracle = pixel_set_components(rest)
    assert len(groups) == len(oracle) == 3
    assert sorted(map(frozenset, oracle), key=min) == sorted(groups.values(), key=min)


def test_x_shape_splits_into_four():
    img = draw_polyline((21, 21), [(2, 2), (18, 18)]) | draw_polyline((21, 21), [(2, 18), (18, 2)])
    _, inter, groups = _sections(img)
    assert inter == {(10, 10)}
    rest = set(map(tuple, np.argwhere(img).tolist())) - {(10, 10)}
    assert len(groups) == len(pixel_set_components(rest)) == 4


def test_labels_follow_raster_order():
    img = draw_polyline((21, 21), [(2, 2), (18, 18)]) | draw_polyline((21, 21), [(2, 18), (18, 2)])
    _, _, groups = _sections(img)
    firsts = [min(groups[k]) for k in sorted(groups)]
    assert firsts == sorted(firsts)


def test_shuffled_horizontal_run():
    pix = [(5, c) for c in range(1, 10)]
    rng = np.random.default_rng(0)
    shuffled = [pix[i] for i in rng.permutation(len(pix))]
    out = order_branch_pixels(shuffled)
    assert out in (pix, pix[::-1])
    assert out[0] == (5, 1)


def test_single_pixel():
    assert order_branch_pixels([(3, 4)]) == [(3, 4)]


def test_empty_set_rejected():
    with pytest.raises(ValueError):
        order_branch_pixels([])


def test_s_curve_against_hamiltonian_search():
    # rises, then falls back: a y-sort would interleave the two arms
    img = draw_polyline((30, 30), [(20, 2), (8, 8), (8, 14), (20, 20), (20, 24), (10, 27)])
    img = thin_redundant(img)
    pixels = set(map(tuple, np.argwhere(img).tolist()))
    out = order_branch_pixels(pixels)
    assert set(out) == pixels and len(out) == len(pixels)
    assert np.all(chebyshev_steps(out) == 1)
    paths = hamiltonian_paths(pixels)
    assert paths
    ends = {frozenset((p[0], p[-1])) for p in paths}
    assert frozenset((out[0], out[-1])) in ends
    rows = [r for r, _ in out]
    assert np.any(np.diff(rows) > 0) and np.any(np.diff(rows) < 0)


def test_closed_loop_orders_clockwise_from_top_left():
    img = np.zeros((12, 12), bool)
    img[2, 2:8] = img[7, 2:8] = True
    img[2:8, 2] = img[2:8, 7] = True
    img = thin_redundant(img)
    pixels = set(map(tuple, np.argwhere(img).tolist()))
    out = order_branch_pixels(pixels)
    assert set(out) == pixels and len(out) == len(pixels)
    assert out[0] == min(pixels)
    assert out[1][0] == out[0][0]  # first step runs along the top edge (clockwise)
    assert np.all(chebyshev_steps(out + [out[0]]) == 1)


def test_junction_inside_set_raises():
    img = draw_polyline((21, 21), [(2, 2), (18, 18)]) | draw_polyline((21, 21), [(2, 18), (18, 2)])
    with pytest.raises(UnsectionedBranchError):
        order_branch_pixels(set(map(tuple, np.argwhere(img).tolist())))


def test_attach_widths_on_rectangle_midline():
    data = np.zeros((41, 100), bool)
    data[10:31, 10:90] = True
    sk = medial_axis_transform(BinaryMask(data))
    branches = extract_branches(sk, intersection_pixels(classify_pixels(sk)))
    longest = max(branches, key=lambda b: b.length_px)
    mid = longest.widths_px[longest.pixels[:, 0] == 20]
    assert mid.size > 40
    assert np.all(np.abs(mid - 21) <= 2)


def test_attach_widths_one_px_line():
    img = draw_polyline((20, 30), [(10, 3), (10, 25)])
    sk = medial_axis_transform(BinaryMask(img))
    (b,) = extract_branches(sk, [])
    assert np.all(b.widths_px == 2.0)


def test_attach_widths_length_one():
    img = np.zeros((20, 20), bool)
    img[5, 5] = True
    sk = Skeleton(img, np.where(img, 3.0, 0.0))
    b = attach_widths(Branch(7, [(5, 5)]), sk)
    assert b.widths_px.tolist() == [6.0]


def test_attach_widths_rejects_foreign_pixels():
    img = np.zeros((20, 20), bool)
    img[5, 5] = True
    with pytest.raises(KeyError):
        attach_widths(Branch(1, [(6, 6)]), Skeleton(img, img.astype(float)))


def test_branch_reversal_and_validation():
    b = Branch(3, [(0, 0), (0, 1), (1, 2)], [2.0, 3.0, 4.0])
    r = b.reversed()
    assert r.pixel_list() == [(1, 2), (0, 1), (0, 0)]
    assert r.widths_px.tolist() == [4.0, 3.0, 2.0]
    assert b.endpoints == ((0, 0), (1, 2))
    with pytest.raises(ValueError):
        Branch(1, [(0, 0), (0, 1)], [1.0])


@settings(max_examples=40, deadline=None)
@given(blob_masks())
def test_partition_and_ordering_on_random_skeletons(data):
    sk = medial_axis_transform(BinaryMask(data))
    inter = intersection_pixels(classify_pixels(sk))
    groups = section_branches(sk, inter)
    seen = set(inter)
    for pixels in groups.values():
        assert not (pixels & seen)
        seen |= pixels
    assert seen == sk.pixels
    for label, pixels in groups.items():
        out = order_branch_pixels(pixels)
        assert set(out) == pixels and len(out) == len(pixels)
        if len(out) > 1:
            assert np.all(chebyshev_steps(out) == 1)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from([(0, 1), (1, 1), (1, 0), (-1, 1)]), min_size=1, max_size=25))
def test_ordering_unique_up_to_reversal_on_walks(steps):
    # monotone-in-column walks are simple curves; thinning removes corner redundancy
    pix = [(30, 0)]
    for dr, dc in steps:
        pix.append((pix[-1][0] + dr, pix[-1][1] + dc))
    img = np.zeros((70, 40), bool)
    for r, c in pix:
        img[r, c] = True
    img = thin_redundant(img)
    pixels = set(map(tuple, np.argwhere(img).tolist()))
    out = order_branch_pixels(pixels)
    paths = hamiltonian_paths(pixels) if len(pixels) <= 14 else [out]
    assert any(p == out or p == out[::-1] for p in paths)
    assert order_branch_pixels(out[::-1]) == out
