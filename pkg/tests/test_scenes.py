"""Synthetic clip generator tests: determinism, geometry, query template."""

import numpy as np
import pytest
from dataclasses import replace

from refvos.errors import GenerationError
from refvos.pgm import read_pgm, write_mask_pgm, write_pgm
from refvos.scenes import (
    HALF_EXTENT,
    MIN_VISIBLE_PIXELS,
    TOKEN_IDS,
    VOCAB_SIZE,
    VOCABULARY,
    ClipBatch,
    ObjectSpec,
    SceneSpec,
    build_dataset,
    generate_clip,
    generate_query,
    manifest_lines,
    sample_scene,
    shape_mask,
)


def still_scene(shape="square", color="red", size="large", referent=0):
    objects = (
        ObjectSpec(shape=shape, color=color, size=size, motion="still", row=20, col=20),
        ObjectSpec(shape=shape, color=color, size=size, motion="right", row=44, col=16),
    )
    return SceneSpec(seed=0, frames=5, canvas=64, objects=objects, referent=referent)


def test_vocabulary_is_stable_and_sized():
    assert len(VOCABULARY) == VOCAB_SIZE
    assert len(set(VOCABULARY)) == VOCAB_SIZE
    assert TOKEN_IDS["red"] == 0


def test_query_template_and_length():
    spec = still_scene()
    tokens = generate_query(spec)
    assert len(tokens) == 5
    words = [VOCABULARY[t] for t in tokens]
    assert words == ["red", "large", "square", "moving", "still"]


def test_query_differs_in_exactly_one_token_for_color_change():
    a = still_scene(color="red")
    b_objects = (replace(a.objects[0], color="blue"),) + a.objects[1:]
    b = replace(a, objects=b_objects)
    qa, qb = generate_query(a), generate_query(b)
    assert sum(x != y for x, y in zip(qa, qb)) == 1


def test_still_object_identical_masks():
    clip = generate_clip(still_scene())
    for t in range(1, clip.spec.frames):
        assert np.array_equal(clip.masks[t], clip.masks[0])


def test_same_seed_bit_identical_clips():
    specs1 = sample_scene(42, frames=5, canvas=64)
    specs2 = sample_scene(42, frames=5, canvas=64)
    c1 = generate_clip(specs1[0])
    c2 = generate_clip(specs2[0])
    assert specs1 == specs2
    assert np.array_equal(c1.frames_hi, c2.frames_hi)
    assert np.array_equal(c1.frames_lo, c2.frames_lo)
    assert np.array_equal(c1.masks, c2.masks)
    assert c1.tokens == c2.tokens


def test_moving_square_centroid_steps_right_by_speed():
    objects = (
        ObjectSpec(shape="square", color="green", size="large", motion="right",
                   row=32, col=12),
        ObjectSpec(shape="disc", color="green", size="small", motion="still",
                   row=12, col=50),
    )
    spec = SceneSpec(seed=1, frames=5, canvas=64, objects=objects, referent=0)
    clip = generate_clip(spec)
    xs = []
    for t in range(5):
        cols = np.argwhere(clip.masks[t])[:, 1]
        xs.append(cols.mean())
    for t in range(1, 5):
        assert xs[t] - xs[t - 1] == pytest.approx(2.0)


def test_gt_matches_geometry_exactly():
    spec = still_scene()
    clip = generate_clip(spec)
    obj = spec.objects[0]
    expected = shape_mask(obj.shape, obj.row, obj.col, HALF_EXTENT[obj.size], 64)
    # referent 0 may be occluded by object 1; subtract its footprint
    occ = shape_mask("square", 44, 16, HALF_EXTENT["large"], 64)
    assert np.array_equal(clip.masks[0], expected & ~occ)


def test_occlusion_later_object_wins():
    objects = (
        ObjectSpec(shape="square", color="red", size="large", motion="still",
                   row=30, col=30),
        ObjectSpec(shape="square", color="blue", size="small", motion="still",
                   row=30, col=30),
    )
    spec = SceneSpec(seed=0, frames=2, canvas=64, objects=objects, referent=0)
    clip = generate_clip(spec)
    inner = shape_mask("square", 30, 30, HALF_EXTENT["small"], 64)
    assert not clip.masks[0][inner].any()
    # and the pixels render in the occluder's color
    assert np.allclose(clip.frames_hi[0][30, 30], [0.12, 0.20, 0.90])


def test_ambiguous_query_rejected():
    objects = (
        ObjectSpec(shape="square", color="red", size="large", motion="still",
                   row=16, col=16),
        ObjectSpec(shape="square", color="red", size="large", motion="still",
                   row=48, col=48),
    )
    spec = SceneSpec(seed=0, frames=2, canvas=64, objects=objects, referent=0)
    with pytest.raises(GenerationError):
        generate_clip(spec)


def test_objects_stay_inside_canvas():
    for seed in range(20):
        spec = sample_scene(seed, frames=6, canvas=64)[0]
        clip = generate_clip(spec)
        for t in range(spec.frames):
            # object pixels never touch the outermost row/column
            full = np.zeros((64, 64), dtype=bool)
            for obj in spec.objects:
                vr, vc = {"left": (0, -2), "right": (0, 2), "up": (-2, 0),
                          "down": (2, 0), "still": (0, 0)}[obj.motion]
                full |= shape_mask(obj.shape, obj.row + vr * t, obj.col + vc * t,
                                   HALF_EXTENT[obj.size], 64)
            assert not full[0].any() and not full[-1].any()
            assert not full[:, 0].any() and not full[:, -1].any()


def test_sampled_scene_attribute_constraints():
    for seed in range(30):
        spec = sample_scene(seed)[0]
        tuples = [o.attributes for o in spec.objects]
        ref = tuples[spec.referent]
        assert tuples.count(ref) == 1
        for i, t in enumerate(tuples):
            if i == spec.referent:
                continue
            assert sum(a == b for a, b in zip(t, ref)) >= 1


def test_referent_visible_every_frame():
    for seed in range(15):
        spec = sample_scene(seed)[0]
        clip = generate_clip(spec)
        assert all(clip.masks[t].sum() >= MIN_VISIBLE_PIXELS
                   for t in range(spec.frames))


def test_build_dataset_pairs_scenes_with_two_referents():
    items = build_dataset(seed=7, n_items=6, frames=3)
    assert len(items) == 6
    assert [it.clip_id for it in items] == list(range(6))
    # paired items share the video but not the mask
    pairs = [(items[i], items[i + 1]) for i in (0, 2, 4)
             if items[i].spec.objects == items[i + 1].spec.objects]
    assert pairs, "expected at least one scene reused with a second query"
    a, b = pairs[0]
    assert np.array_equal(a.frames_hi, b.frames_hi)
    assert not np.array_equal(a.masks, b.masks)
    assert a.tokens != b.tokens


def test_build_dataset_deterministic():
    a = build_dataset(seed=3, n_items=4, frames=3)
    b = build_dataset(seed=3, n_items=4, frames=3)
    for x, y in zip(a, b):
        assert np.array_equal(x.frames_hi, y.frames_hi)
        assert np.array_equal(x.masks, y.masks)
        assert x.tokens == y.tokens
    assert manifest_lines(a) == manifest_lines(b)


def test_lowres_frames_are_block_means():
    clip = generate_clip(still_scene())
    hi, lo = clip.frames_hi, clip.frames_lo
    assert lo.shape == (5, 32, 32, 3)
    assert np.allclose(lo[0, 0, 0], hi[0, :2, :2].mean(axis=(0, 1)))


def test_manifest_mentions_all_fields():
    items = build_dataset(seed=9, n_items=2, frames=3)
    lines = manifest_lines(items)
    assert len(lines) == 2
    assert "clip=0000" in lines[0]
    assert "query=" in lines[0] and "objects=" in lines[0]


def test_pgm_roundtrip(tmp_path):
    mask = np.zeros((8, 8), dtype=bool)
    mask[2:5, 3:6] = True
    path = tmp_path / "m.pgm"
    write_mask_pgm(path, mask)
    back = read_pgm(path)
    assert np.array_equal(back == 255, mask)
    write_pgm(tmp_path / "p.pgm", np.linspace(0, 1, 64).reshape(8, 8))
    vals = read_pgm(tmp_path / "p.pgm")
    assert vals[0, 0] == 0 and vals[-1, -1] == 255
