"""Attention, feed-forward, and normalization blocks.

All pipeline stages are assembled from these pieces. Parameters are
created through a :class:`ParamStore`, which fixes initialization
(uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] for weights, zeros for
biases, ones for norm gains) and gives every tensor a stable dotted
name for checkpoints, the optimizer, and gradient-check sampling.
"""

from __future__ import annotations

import math

import numpy as np

from .autodiff import Tensor, concat, gelu, layer_norm, matmul, reshape, softmax_lastdim, transpose
from .errors import ConfigError


class ParamStore:
    """Named parameter registry with deterministic initialization."""

    def __init__(self, rng: np.random.Generator):
        self._rng = rng
        self._params: dict[str, Tensor] = {}

    def param(self, name: str, shape, init: str = "fan_in", fan_in: int | None = None) -> Tensor:
        if name in self._params:
            raise ConfigError(f"duplicate parameter name: {name}")
        shape = tuple(shape)
        if init == "fan_in":
            if fan_in is None:
                fan_in = shape[0] if len(shape) > 1 else shape[-1]
            bound = 1.0 / math.sqrt(fan_in)
            data = self._rng.uniform(-bound, bound, shape)
        elif init == "zeros":
            data = np.zeros(shape)
        elif init == "ones":
            data = np.ones(shape)
        else:
            raise ConfigError(f"unknown init kind: {init}")
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        return t

    def items(self):
        return self._params.items()

    def names(self):
        return list(self._params.keys())

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __len__(self):
        return len(self._params)

    def as_dict(self) -> dict[str, Tensor]:
        return dict(self._params)


class Linear:
    """Affine map ``x @ w + b`` on the last dimension."""

    def __init__(self, store: ParamStore, name: str, d_in: int, d_out: int):
        self.w = store.param(f"{name}.weight", (d_in, d_out))
        self.b = store.param(f"{name}.bias", (d_out,), init="zeros")

    def __call__(self, x: Tensor) -> Tensor:
        return matmul(x, self.w) + self.b


class Mlp:
    """Two linear layers with a GELU between them."""

    def __init__(self, store: ParamStore, name: str, d_in: int, d_hidden: int, d_out: int):
        self.fc1 = Linear(store, f"{name}.fc1", d_in, d_hidden)
        self.fc2 = Linear(store, f"{name}.fc2", d_hidden, d_out)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(gelu(self.fc1(x)))


class Ffn:
    """Shape-preserving feed-forward block, hidden width = mult * dim."""

    def __init__(self, store: ParamStore, name: str, dim: int, mult: int = 4):
        self.mlp = Mlp(store, name, dim, mult * dim, dim)

    def __call__(self, x: Tensor) -> Tensor:
        return self.mlp(x)


class LayerNorm:
    """Learned affine layer normalization over the last dimension."""

    def __init__(self, store: ParamStore, name: str, dim: int, eps: float = 1e-5):
        self.gain = store.param(f"{name}.gain", (dim,), init="ones")
        self.bias = store.param(f"{name}.bias", (dim,), init="zeros")
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.bias, eps=self.eps)


def residual_block(x: Tensor, sublayer_out: Tensor, norm: LayerNorm) -> Tensor:
    """Post-norm residual: layer_norm(x + sublayer_out)."""
    return norm(x + sublayer_out)


class MultiHeadAttention:
    """Scaled dot-product attention over 2-D token matrices.

    Queries/keys/values are [n, dim] rows; scores are scaled by
    1/sqrt(dim/heads). Self-attention is ``attn(x, x, x)``.
    """

    def __init__(self, store: ParamStore, name: str, dim: int, heads: int):
        if dim % heads != 0:
            raise ConfigError(f"dim {dim} not divisible by heads {heads}")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.scale = 1.0 / math.sqrt(self.head_dim)
        self.q = Linear(store, f"{name}.q", dim, dim)
        self.k = Linear(store, f"{name}.k", dim, dim)
        self.v = Linear(store, f"{name}.v", dim, dim)
        self.out = Linear(store, f"{name}.out", dim, dim)

    def _split(self, x: Tensor, n: int) -> Tensor:
        # [n, dim] -> [heads, n, head_dim]
        return transpose(reshape(x, (n, self.heads, self.head_dim)), (1, 0, 2))

    def __call__(self, q: Tensor, k: Tensor, v: Tensor) -> Tensor:
        if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
            raise ConfigError("attention expects 2-D [tokens, dim] inputs")
        n_q, n_k = q.shape[0], k.shape[0]
        qh = self._split(self.q(q), n_q)
        kh = self._split(self.k(k), n_k)
        vh = self._split(self.v(v), n_k)
        scores = matmul(qh, transpose(kh, (0, 2, 1))) * self.scale
        mixed = matmul(softmax_lastdim(scores), vh)
        merged = reshape(transpose(mixed, (1, 0, 2)), (n_q, self.dim))
        return self.out(merged)


def attention_reference(q, k, v, attn: MultiHeadAttention) -> np.ndarray:
    """Plain-numpy oracle for MultiHeadAttention with the same weights."""
    q, k, v = np.asarray(q), np.asarray(k), np.asarray(v)
    h, dh = attn.heads, attn.head_dim
    qp = q @ attn.q.w.data + attn.q.b.data
    kp = k @ attn.k.w.data + attn.k.b.data
    vp = v @ attn.v.w.data + attn.v.b.data
    outs = []
    for i in range(h):
        sl = slice(i * dh, (i + 1) * dh)
        s = qp[:, sl] @ kp[:, sl].T / math.sqrt(dh)
        s = s - s.max(axis=-1, keepdims=True)
        e = np.exp(s)
        a = e / e.sum(axis=-1, keepdims=True)
        outs.append(a @ vp[:, sl])
    return np.concatenate(outs, axis=1) @ attn.out.w.data + attn.out.b.data
