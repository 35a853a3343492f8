"""J / F metric tests with pixel-count and all-pairs boundary oracles."""

import numpy as np
import pytest

from refvos.errors import InputError
from refvos.metrics import (
    ClipMetrics,
    boundary_accuracy_f,
    boundary_pixels,
    default_tolerance,
    format_report,
    jf_score,
    region_similarity_j,
    summarize,
)

RNG = np.random.default_rng(77)


def iou_oracle(pred, gt):
    """Pixel-count oracle via explicit loops."""
    inter = union = 0
    for i in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            p, g = bool(pred[i, j]), bool(gt[i, j])
            inter += p and g
            union += p or g
    return 1.0 if union == 0 else inter / union


def boundary_oracle(mask):
    """4-neighbor boundary with the border treated as background."""
    h, w = mask.shape
    out = np.zeros_like(mask, dtype=bool)
    for i in range(h):
        for j in range(w):
            if not mask[i, j]:
                continue
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ni, nj = i + di, j + dj
                if not (0 <= ni < h and 0 <= nj < w) or not mask[ni, nj]:
                    out[i, j] = True
                    break
    return out


def f_oracle(pred, gt, tol):
    """All-pairs bipartite-distance oracle for the boundary measure."""
    pb = np.argwhere(boundary_oracle(pred))
    gb = np.argwhere(boundary_oracle(gt))
    if len(pb) == 0 and len(gb) == 0:
        return 1.0
    if len(pb) == 0 or len(gb) == 0:
        return 0.0

    def matched(points, targets):
        hits = 0
        for p in points:
            dmin = min(np.hypot(p[0] - t[0], p[1] - t[1]) for t in targets)
            hits += dmin <= tol
        return hits / len(points)

    precision = matched(pb, gb)
    recall = matched(gb, pb)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def random_mask(rng, size):
    kind = rng.integers(0, 3)
    mask = np.zeros((size, size), dtype=bool)
    if kind == 0:
        mask = rng.random((size, size)) < rng.uniform(0.05, 0.6)
    elif kind == 1:
        r0, c0 = rng.integers(0, size, 2)
        r1, c1 = rng.integers(0, size, 2)
        mask[min(r0, r1):max(r0, r1) + 1, min(c0, c1):max(c0, c1) + 1] = True
    # kind == 2 stays empty sometimes
    return mask


# ---------------------------------------------------------------------
# J
# ---------------------------------------------------------------------

def test_j_identical_nonempty():
    m = np.zeros((8, 8), dtype=bool)
    m[2:5, 3:7] = True
    assert region_similarity_j(m, m) == 1.0


def test_j_disjoint():
    a = np.zeros((8, 8), dtype=bool)
    b = np.zeros((8, 8), dtype=bool)
    a[:2, :2] = True
    b[5:, 5:] = True
    assert region_similarity_j(a, b) == 0.0


def test_j_one_third_overlap():
    a = np.array([[1, 1], [0, 0]], dtype=bool)
    b = np.array([[1, 0], [1, 0]], dtype=bool)
    assert region_similarity_j(a, b) == pytest.approx(1.0 / 3.0)


def test_j_empty_union_is_one():
    e = np.zeros((4, 4), dtype=bool)
    assert region_similarity_j(e, e) == 1.0


def test_j_shape_mismatch():
    with pytest.raises(InputError):
        region_similarity_j(np.zeros((3, 3)), np.zeros((4, 4)))


def test_j_matches_pixel_count_oracle_exactly():
    for _ in range(200):
        size = int(RNG.integers(2, 17))
        a = random_mask(RNG, size)
        b = random_mask(RNG, size)
        assert region_similarity_j(a, b) == iou_oracle(a, b)


def test_j_symmetric_and_monotone_under_noise():
    gt = np.zeros((12, 12), dtype=bool)
    gt[3:9, 3:9] = True
    pred = gt.copy()
    assert region_similarity_j(pred, gt) == region_similarity_j(gt, pred)
    last = region_similarity_j(pred, gt)
    for (i, j) in [(0, 0), (0, 11), (11, 0), (11, 11)]:
        pred[i, j] = True  # disjoint noise pixels
        cur = region_similarity_j(pred, gt)
        assert cur <= last
        last = cur


# ---------------------------------------------------------------------
# F
# ---------------------------------------------------------------------

def test_f_identical_masks():
    m = np.zeros((10, 10), dtype=bool)
    m[2:7, 2:7] = True
    assert boundary_accuracy_f(m, m, tolerance=1) == 1.0


def test_f_far_apart_boundaries():
    a = np.zeros((16, 16), dtype=bool)
    b = np.zeros((16, 16), dtype=bool)
    a[0:2, 0:2] = True
    b[13:15, 13:15] = True
    assert boundary_accuracy_f(a, b, tolerance=1) == 0.0


def test_f_one_pixel_shift_with_unit_tolerance():
    a = np.zeros((12, 12), dtype=bool)
    a[3:8, 3:8] = True
    b = np.roll(a, 1, axis=1)
    got = boundary_accuracy_f(a, b, tolerance=1)
    want = f_oracle(a, b, 1)
    assert got == pytest.approx(want)


def test_f_empty_cases():
    e = np.zeros((6, 6), dtype=bool)
    m = np.zeros((6, 6), dtype=bool)
    m[2:4, 2:4] = True
    assert boundary_accuracy_f(e, e, tolerance=1) == 1.0
    assert boundary_accuracy_f(e, m, tolerance=1) == 0.0
    assert boundary_accuracy_f(m, e, tolerance=1) == 0.0


def test_f_symmetry():
    a = random_mask(np.random.default_rng(3), 12)
    b = random_mask(np.random.default_rng(4), 12)
    assert boundary_accuracy_f(a, b, tolerance=2) == pytest.approx(
        boundary_accuracy_f(b, a, tolerance=2))


def test_boundary_extraction_matches_oracle():
    for _ in range(100):
        size = int(RNG.integers(2, 17))
        m = random_mask(RNG, size)
        assert np.array_equal(boundary_pixels(m), boundary_oracle(m))


def test_f_matches_all_pairs_oracle_small_masks():
    # exhaustive random suite on masks up to 16x16
    rng = np.random.default_rng(123)
    for i in range(1000):
        size = int(rng.integers(2, 17))
        a = random_mask(rng, size)
        b = random_mask(rng, size)
        tol = int(rng.integers(0, 4))
        got = boundary_accuracy_f(a, b, tolerance=tol)
        want = f_oracle(a, b, tol)
        assert got == pytest.approx(want, abs=1e-12), f"case {i} size {size} tol {tol}"


def test_default_tolerance_convention():
    assert default_tolerance((64, 64)) == 1
    assert default_tolerance((480, 854)) == 8


# ---------------------------------------------------------------------
# J&F and report
# ---------------------------------------------------------------------

def test_jf_trivial():
    assert jf_score([1.0], [1.0]) == (1.0, 1.0, 1.0)


def test_jf_arithmetic():
    mean_j, mean_f, jf = jf_score([0.6, 0.8], [0.7, 0.9])
    assert (mean_j, mean_f, jf) == (pytest.approx(0.7), pytest.approx(0.8), pytest.approx(0.75))


def test_jf_constant_scores():
    mean_j, mean_f, jf = jf_score([0.4, 0.4, 0.4], [0.4, 0.4])
    assert jf == pytest.approx(0.4)


def test_jf_empty_rejected():
    with pytest.raises(InputError):
        jf_score([], [])


def test_report_stable_and_parsable():
    clips = [
        ClipMetrics(clip_id=3, query="red_small_square_moving_left",
                    frame_j=[0.5, 0.75], frame_f=[0.25, 1.0]),
        ClipMetrics(clip_id=4, query="blue_large_disc_moving_still",
                    frame_j=[1.0], frame_f=[1.0]),
    ]
    r1 = format_report(clips)
    r2 = format_report(clips)
    assert r1 == r2
    assert "record clip=0003 frame=00 j=0.500000000 f=0.250000000" in r1
    assert "aggregate clip=0004" in r1
    assert r1.strip().endswith("jf=0.812500000")
    mean_j, mean_f, jf = summarize(clips)
    assert jf == pytest.approx(0.8125)


def test_report_empty_rejected():
    with pytest.raises(InputError):
        format_report([])
