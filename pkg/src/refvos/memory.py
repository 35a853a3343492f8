"""Bounded FIFO store of past mask features and mask tokens.

Capacities follow the segmentation scaffold's memory configuration:
up to 7 per-frame mask features and 16 mask tokens. Entries are
detached on push: stored history provides values to later frames but no
gradient path, keeping per-clip training on a single tape feasible.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor
from .errors import ContractError


class MemorySnapshot:
    """Immutable stacked view of a bank, oldest entry first."""

    def __init__(self, features: Tensor, tokens: Tensor):
        self.features = features  # [k, n_positions, channels]
        self.tokens = tokens      # [m, channels]

    @property
    def n_features(self) -> int:
        return self.features.shape[0]

    @property
    def n_tokens(self) -> int:
        return self.tokens.shape[0]


class MemoryBank:
    """FIFO lists of per-frame mask features [n_positions, channels] and
    mask tokens [1, channels]; oldest entries are evicted past capacity."""

    def __init__(self, feature_shape, token_shape,
                 feature_capacity: int = 7, token_capacity: int = 16):
        self.feature_shape = tuple(feature_shape)
        self.token_shape = tuple(token_shape)
        self.feature_capacity = feature_capacity
        self.token_capacity = token_capacity
        self._features: list[Tensor] = []
        self._tokens: list[Tensor] = []

    def __len__(self) -> int:
        return len(self._features)

    @property
    def n_features(self) -> int:
        return len(self._features)

    @property
    def n_tokens(self) -> int:
        return len(self._tokens)

    def push(self, mask_feature: Tensor, mask_token: Tensor) -> None:
        """Append one frame's outputs, evicting the oldest past capacity."""
        if mask_feature.shape != self.feature_shape:
            raise ContractError(
                f"mask feature shape {mask_feature.shape} != bank shape {self.feature_shape}")
        if mask_token.shape != self.token_shape:
            raise ContractError(
                f"mask token shape {mask_token.shape} != bank shape {self.token_shape}")
        self._features.append(mask_feature.detach())
        self._tokens.append(mask_token.detach())
        if len(self._features) > self.feature_capacity:
            del self._features[0]
        if len(self._tokens) > self.token_capacity:
            del self._tokens[0]

    def snapshot(self) -> MemorySnapshot:
        """Stacked read-only copies in age order; never mutates the bank."""
        if self._features:
            feats = np.stack([t.data for t in self._features])
        else:
            feats = np.zeros((0,) + self.feature_shape)
        if self._tokens:
            toks = np.concatenate([t.data for t in self._tokens], axis=0)
        else:
            toks = np.zeros((0, self.token_shape[-1]))
        return MemorySnapshot(Tensor(feats.copy()), Tensor(toks.copy()))

    def reset(self) -> None:
        """Clear all history (called between clips)."""
        self._features.clear()
        self._tokens.clear()
