"""Binary portable graymap / pixmap writers for masks, priors, frames."""

from __future__ import annotations

import numpy as np


def write_pgm(path, values) -> None:
    """P5 graymap from values in [0, 1], maxval 255."""
    arr = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    data = np.round(arr * 255.0).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def write_mask_pgm(path, mask) -> None:
    """P5 graymap holding a binary mask as 0/255."""
    data = (np.asarray(mask, dtype=bool).astype(np.uint8)) * 255
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def write_ppm(path, rgb) -> None:
    """P6 pixmap from an [H, W, 3] array in [0, 1]."""
    arr = np.clip(np.asarray(rgb, dtype=float), 0.0, 1.0)
    data = np.round(arr * 255.0).astype(np.uint8)
    h, w, _ = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary P5 graymap back as a uint8 array (for tests)."""
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        assert magic == b"P5", f"not a binary graymap: {magic!r}"
        dims = fh.readline().split()
        w, h = int(dims[0]), int(dims[1])
        maxval = int(fh.readline())
        assert maxval == 255
        data = np.frombuffer(fh.read(w * h), dtype=np.uint8)
    return data.reshape(h, w)
