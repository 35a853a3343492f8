"""Joint visual-text encoder producing aligned per-frame embeddings.

Each frame is patchified and projected, prefixed with a learned class
seed, and given learned positional embeddings; the tokenized query gets
its own class/end markers and positional embeddings. The concatenated
sequence passes through shared self-attention blocks whose feed-forward
stage is routed by modality (visual positions through one FFN, text
positions through another). Frames are encoded independently; the
outputs split into class tokens, patch embeddings, and text embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, concat, stack
from .blocks import Ffn, LayerNorm, MultiHeadAttention, ParamStore, residual_block
from .errors import ConfigError, InputError


@dataclass(frozen=True)
class EncoderConfig:
    image_size: int = 32
    patch: int = 8
    dim: int = 64
    depth: int = 2
    vocab_size: int = 64
    max_words: int = 6
    heads: int = 4

    def __post_init__(self):
        if self.image_size % self.patch != 0:
            raise ConfigError(
                f"image size {self.image_size} not divisible by patch {self.patch}")

    @property
    def n_patches(self) -> int:
        return (self.image_size // self.patch) ** 2

    @property
    def grid(self) -> int:
        return self.image_size // self.patch


@dataclass
class JointEmbeddings:
    """Per-frame encoder outputs, stacked over frames."""

    class_tokens: Tensor  # [T, 1, D]
    patch_tokens: Tensor  # [T, N_v, D]
    text_tokens: Tensor   # [T, N_l, D]


class JointEncoder:
    def __init__(self, store: ParamStore, cfg: EncoderConfig, name: str = "encoder"):
        self.cfg = cfg
        d = cfg.dim
        patch_dim = cfg.patch * cfg.patch * 3
        self.patch_proj_w = store.param(f"{name}.patch_proj.weight", (patch_dim, d))
        self.patch_proj_b = store.param(f"{name}.patch_proj.bias", (d,), init="zeros")
        self.cls_seed = store.param(f"{name}.cls_seed", (1, d), fan_in=d)
        self.visual_pos = store.param(f"{name}.visual_pos", (cfg.n_patches + 1, d), fan_in=d)
        self.token_table = store.param(f"{name}.token_table", (cfg.vocab_size, d), fan_in=d)
        self.text_cls = store.param(f"{name}.text_cls", (1, d), fan_in=d)
        self.text_end = store.param(f"{name}.text_end", (1, d), fan_in=d)
        self.text_pos = store.param(f"{name}.text_pos", (cfg.max_words + 2, d), fan_in=d)
        self.blocks = []
        for i in range(cfg.depth):
            self.blocks.append({
                "attn": MultiHeadAttention(store, f"{name}.block{i}.attn", d, cfg.heads),
                "norm1": LayerNorm(store, f"{name}.block{i}.norm1", d),
                "ffn_visual": Ffn(store, f"{name}.block{i}.ffn_visual", d),
                "ffn_text": Ffn(store, f"{name}.block{i}.ffn_text", d),
                "norm2": LayerNorm(store, f"{name}.block{i}.norm2", d),
            })

    # -- sequence assembly --------------------------------------------
    def patchify(self, frame) -> Tensor:
        """[H, W, 3] image -> [N_v, patch*patch*3] rows, row-major patches."""
        cfg = self.cfg
        x = frame if isinstance(frame, Tensor) else Tensor(np.asarray(frame))
        g, p = cfg.grid, cfg.patch
        x = x.reshape((g, p, g, p, 3))
        x = x.transpose((0, 2, 1, 3, 4))
        return x.reshape((cfg.n_patches, p * p * 3))

    def build_joint_sequence(self, frame, tokens) -> Tensor:
        """Visual [cls; patches] + positions, then text [cls; tokens; end]
        + positions, concatenated into one [N_v + N_l + 1, D] sequence."""
        cfg = self.cfg
        tokens = list(tokens)
        if len(tokens) > cfg.max_words:
            raise InputError(f"query has {len(tokens)} words, limit {cfg.max_words}")
        for t in tokens:
            if not (0 <= int(t) < cfg.vocab_size):
                raise InputError(f"token id {t} outside vocabulary of {cfg.vocab_size}")
        patches = self.patchify(frame) @ self.patch_proj_w + self.patch_proj_b
        visual = concat([self.cls_seed, patches], axis=0) + self.visual_pos
        ids = np.asarray(tokens, dtype=int)
        word_rows = self.token_table[ids]
        text = concat([self.text_cls, word_rows, self.text_end], axis=0)
        text = text + self.text_pos[: len(tokens) + 2]
        return concat([visual, text], axis=0)

    # -- transformer body ----------------------------------------------
    def encode_joint(self, seq: Tensor) -> Tensor:
        """Shared attention plus modality-routed feed-forward, depth times."""
        split = self.cfg.n_patches + 1
        x = seq
        for blk in self.blocks:
            x = residual_block(x, blk["attn"](x, x, x), blk["norm1"])
            routed = concat([
                blk["ffn_visual"](x[:split]),
                blk["ffn_text"](x[split:]),
            ], axis=0)
            x = residual_block(x, routed, blk["norm2"])
        return x

    def encode_clip(self, frames, tokens) -> JointEmbeddings:
        """Encode T frames independently against one query."""
        per_frame = [self.encode_joint(self.build_joint_sequence(f, tokens))
                     for f in frames]
        return self.split_embeddings(per_frame)

    def split_embeddings(self, encoded: list[Tensor]) -> JointEmbeddings:
        """Partition each frame's sequence into class / patch / text parts."""
        n_v = self.cfg.n_patches
        cls_rows = stack([seq[0:1] for seq in encoded])
        patch_rows = stack([seq[1:n_v + 1] for seq in encoded])
        text_rows = stack([seq[n_v + 1:] for seq in encoded])
        return JointEmbeddings(class_tokens=cls_rows, patch_tokens=patch_rows,
                               text_tokens=text_rows)
