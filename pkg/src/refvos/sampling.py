"""Fixed resampling operators expressed as interpolation matrices.

Bilinear resizing and average pooling are separable linear maps, so a
2-D resample is ``rows @ image @ cols.T`` with constant matrices. Going
through matmul keeps both differentiable for free and makes the convex
combination property explicit: every row of a bilinear matrix is
nonnegative and sums to one.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, matmul, transpose
from .errors import ConfigError

_cache: dict[tuple, Tensor] = {}


def bilinear_matrix(n_out: int, n_in: int) -> np.ndarray:
    """[n_out, n_in] interpolation weights with half-pixel centers."""
    m = np.zeros((n_out, n_in))
    for i in range(n_out):
        src = (i + 0.5) * n_in / n_out - 0.5
        lo = int(np.floor(src))
        w = src - lo
        lo_c = min(max(lo, 0), n_in - 1)
        hi_c = min(max(lo + 1, 0), n_in - 1)
        m[i, lo_c] += 1.0 - w
        m[i, hi_c] += w
    return m


def avgpool_matrix(n_out: int, n_in: int) -> np.ndarray:
    """[n_out, n_in] block-mean weights; n_in must divide evenly."""
    if n_in % n_out != 0:
        raise ConfigError(f"pooling {n_in} -> {n_out} is not an integer reduction")
    k = n_in // n_out
    m = np.zeros((n_out, n_in))
    for i in range(n_out):
        m[i, i * k:(i + 1) * k] = 1.0 / k
    return m


def _const(kind: str, n_out: int, n_in: int) -> Tensor:
    key = (kind, n_out, n_in)
    if key not in _cache:
        build = bilinear_matrix if kind == "bilinear" else avgpool_matrix
        _cache[key] = Tensor(build(n_out, n_in))
    return _cache[key]


def resize_bilinear(x: Tensor, out_hw: tuple[int, int]) -> Tensor:
    """Bilinearly resize the trailing two dimensions of ``x``."""
    h, w = x.shape[-2], x.shape[-1]
    rows = _const("bilinear", out_hw[0], h)
    cols = _const("bilinear", out_hw[1], w)
    return _separable(x, rows, cols)


def avg_pool(x: Tensor, out_hw: tuple[int, int]) -> Tensor:
    """Block-average the trailing two dimensions of ``x`` down to out_hw."""
    h, w = x.shape[-2], x.shape[-1]
    rows = _const("avgpool", out_hw[0], h)
    cols = _const("avgpool", out_hw[1], w)
    return _separable(x, rows, cols)


def _separable(x: Tensor, rows: Tensor, cols: Tensor) -> Tensor:
    # rows @ x: numpy matmul broadcasts [H,h] @ [..., h, w] -> [..., H, w]
    y = matmul(rows, x)
    ndim = y.ndim
    swap = tuple(range(ndim - 2)) + (ndim - 1, ndim - 2)
    return transpose(matmul(cols, transpose(y, swap)), swap)
