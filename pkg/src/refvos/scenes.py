"""Deterministic synthetic clips: moving colored shapes with queries.

Each scene holds 2 to 4 hard-edged objects (square / disc / triangle in
four colors, two size classes, five motions). The referring query is
the fixed five-word template ``<color> <size> <shape> moving <motion>``
and matches exactly one object. Distractors always share at least one
attribute with the referent so the query stays load-bearing. Ground
truth is the referent's visible pixels: later-indexed objects occlude
earlier ones, and masks come from the same geometry as the rendering.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import GenerationError, InputError

COLORS = ("red", "green", "blue", "yellow")
SIZES = ("small", "large")
SHAPES = ("square", "disc", "triangle")
MOTIONS = ("left", "right", "up", "down", "still")

_WORDS = COLORS + SIZES + SHAPES + ("moving",) + MOTIONS
VOCAB_SIZE = 64
VOCABULARY = _WORDS + tuple(f"filler{i:02d}" for i in range(VOCAB_SIZE - len(_WORDS)))
TOKEN_IDS = {w: i for i, w in enumerate(VOCABULARY)}

COLOR_RGB = {
    "red": (0.90, 0.10, 0.10),
    "green": (0.10, 0.80, 0.15),
    "blue": (0.12, 0.20, 0.90),
    "yellow": (0.90, 0.90, 0.10),
}
BACKGROUND = 0.15
HALF_EXTENT = {"small": 4, "large": 8}
SPEED = 2  # pixels per frame
VELOCITY = {
    "left": (0, -SPEED),
    "right": (0, SPEED),
    "up": (-SPEED, 0),
    "down": (SPEED, 0),
    "still": (0, 0),
}
MIN_VISIBLE_PIXELS = 12


@dataclass(frozen=True)
class ObjectSpec:
    shape: str
    color: str
    size: str
    motion: str
    row: int
    col: int

    @property
    def attributes(self) -> tuple[str, str, str, str]:
        return (self.color, self.size, self.shape, self.motion)


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    frames: int
    canvas: int
    objects: tuple[ObjectSpec, ...]
    referent: int


@dataclass
class ClipBatch:
    """One rendered clip paired with one query."""

    clip_id: int
    spec: SceneSpec
    frames_hi: np.ndarray  # [T, H, W, 3] in [0, 1]
    frames_lo: np.ndarray  # [T, H/2, W/2, 3]
    tokens: list[int]
    masks: np.ndarray      # [T, H, W] bool, visible referent pixels
    query: str


def shape_mask(shape: str, cy: int, cx: int, half: int, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    dy, dx = yy - cy, xx - cx
    if shape == "square":
        return (np.abs(dy) <= half) & (np.abs(dx) <= half)
    if shape == "disc":
        return dy * dy + dx * dx <= half * half
    if shape == "triangle":
        return (dy >= -half) & (dy <= half) & (np.abs(dx) * 2 <= dy + half)
    raise InputError(f"unknown shape {shape!r}")


def _object_center(obj: ObjectSpec, t: int) -> tuple[int, int]:
    vr, vc = VELOCITY[obj.motion]
    return obj.row + vr * t, obj.col + vc * t


def _visible_masks(spec: SceneSpec, t: int) -> list[np.ndarray]:
    """Per-object visible pixels at frame t (later objects occlude)."""
    size = spec.canvas
    raw = []
    for obj in spec.objects:
        cy, cx = _object_center(obj, t)
        raw.append(shape_mask(obj.shape, cy, cx, HALF_EXTENT[obj.size], size))
    visible = []
    for i, m in enumerate(raw):
        occluders = raw[i + 1:]
        vis = m.copy()
        for occ in occluders:
            vis &= ~occ
        visible.append(vis)
    return visible


def _matching_objects(spec: SceneSpec) -> list[int]:
    ref = spec.objects[spec.referent].attributes
    return [i for i, o in enumerate(spec.objects) if o.attributes == ref]


def generate_query(spec: SceneSpec) -> list[int]:
    """Token ids for ``<color> <size> <shape> moving <motion>`` (L=5)."""
    obj = spec.objects[spec.referent]
    words = [obj.color, obj.size, obj.shape, "moving", obj.motion]
    return [TOKEN_IDS[w] for w in words]


def query_words(spec: SceneSpec) -> str:
    obj = spec.objects[spec.referent]
    return "_".join([obj.color, obj.size, obj.shape, "moving", obj.motion])


def generate_clip(spec: SceneSpec, clip_id: int = 0) -> ClipBatch:
    """Render a scene specification into frames, masks, and tokens.

    Deterministic: the spec fully fixes the geometry, so equal specs
    produce bit-identical clips.
    """
    if len(_matching_objects(spec)) != 1:
        raise GenerationError(
            f"query matches {len(_matching_objects(spec))} objects, need exactly 1")
    size = spec.canvas
    frames = np.empty((spec.frames, size, size, 3))
    masks = np.empty((spec.frames, size, size), dtype=bool)
    for t in range(spec.frames):
        img = np.full((size, size, 3), BACKGROUND)
        for obj in spec.objects:  # painter's order: later objects on top
            cy, cx = _object_center(obj, t)
            m = shape_mask(obj.shape, cy, cx, HALF_EXTENT[obj.size], size)
            img[m] = COLOR_RGB[obj.color]
        frames[t] = img
        masks[t] = _visible_masks(spec, t)[spec.referent]
    lo = frames.reshape(spec.frames, size // 2, 2, size // 2, 2, 3).mean(axis=(2, 4))
    return ClipBatch(
        clip_id=clip_id,
        spec=spec,
        frames_hi=frames,
        frames_lo=lo,
        tokens=generate_query(spec),
        masks=masks,
        query=query_words(spec),
    )


def _attributes_ok(tuples: list[tuple]) -> bool:
    for i in range(len(tuples)):
        for j in range(i + 1, len(tuples)):
            shared = sum(a == b for a, b in zip(tuples[i], tuples[j]))
            if shared == 0 or shared == 4:
                return False
    return True


def _place(rng: np.random.Generator, motion: str, half: int, frames: int,
           canvas: int) -> tuple[int, int]:
    vr, vc = VELOCITY[motion]

    def start_range(v):
        lo = 1 + half - min(0, v * (frames - 1))
        hi = canvas - 2 - half - max(0, v * (frames - 1))
        if hi < lo:
            raise GenerationError(
                f"no valid placement for motion {motion} on canvas {canvas}")
        return lo, hi

    rlo, rhi = start_range(vr)
    clo, chi = start_range(vc)
    return int(rng.integers(rlo, rhi + 1)), int(rng.integers(clo, chi + 1))


def sample_scene(seed: int, frames: int = 5, canvas: int = 64,
                 n_referents: int = 1, n_objects: int | None = None) -> list[SceneSpec]:
    """Sample a valid scene; returns one spec per distinct referent.

    All object attribute tuples are pairwise distinct and share at
    least one attribute, so any object is a legal referent; referents
    are chosen among objects that keep >= MIN_VISIBLE_PIXELS visible in
    every frame. Deterministic given (seed, frames, canvas).
    """
    rng = np.random.default_rng(seed)
    if n_objects is None:
        n_objects = int(rng.integers(2, 5))
    for _ in range(500):
        tuples = [
            (str(rng.choice(COLORS)), str(rng.choice(SIZES)),
             str(rng.choice(SHAPES)), str(rng.choice(MOTIONS)))
            for _ in range(n_objects)
        ]
        if not _attributes_ok(tuples):
            continue
        try:
            objects = []
            for (col, sz, shp, mot) in tuples:
                row, column = _place(rng, mot, HALF_EXTENT[sz], frames, canvas)
                objects.append(ObjectSpec(shape=shp, color=col, size=sz,
                                          motion=mot, row=row, col=column))
            objects = tuple(objects)
        except GenerationError:
            continue
        base = SceneSpec(seed=seed, frames=frames, canvas=canvas,
                         objects=objects, referent=0)
        eligible = []
        for r in range(n_objects):
            cand = replace(base, referent=r)
            ok = all(
                _visible_masks(cand, t)[r].sum() >= MIN_VISIBLE_PIXELS
                for t in range(frames)
            )
            if ok:
                eligible.append(r)
        if len(eligible) >= n_referents:
            chosen = [int(eligible[i]) for i in
                      rng.permutation(len(eligible))[:n_referents]]
            return [replace(base, referent=r) for r in chosen]
    raise GenerationError(f"could not sample a valid scene from seed {seed}")


def build_dataset(seed: int, n_items: int, frames: int = 5, canvas: int = 64,
                  queries_per_scene: int = 2) -> list[ClipBatch]:
    """n_items (clip, query) pairs; scenes are reused across queries so
    the referent is identifiable only through the text."""
    rng = np.random.default_rng(seed)
    items: list[ClipBatch] = []
    while len(items) < n_items:
        scene_seed = int(rng.integers(0, 2 ** 31 - 1))
        want = min(queries_per_scene, n_items - len(items))
        try:
            specs = sample_scene(scene_seed, frames, canvas, n_referents=want)
        except GenerationError:
            continue
        for spec in specs:
            items.append(generate_clip(spec, clip_id=len(items)))
    return items


def manifest_lines(items: list[ClipBatch]) -> list[str]:
    """Stable plain-text rows describing a dataset."""
    lines = []
    for item in items:
        objs = ";".join(
            f"{o.shape}:{o.color}:{o.size}:{o.motion}:{o.row}:{o.col}"
            for o in item.spec.objects
        )
        lines.append(
            f"item clip={item.clip_id:04d} seed={item.spec.seed}"
            f" frames={item.spec.frames} canvas={item.spec.canvas}"
            f" referent={item.spec.referent} query={item.query} objects={objs}")
    return lines
