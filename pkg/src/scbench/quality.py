"""Scalar distortion measures for [0,1]-range images."""

from __future__ import annotations

import numpy as np

from .images import Image

PSNR_CAP_DB = 100.0


def _as_array(x: Image | np.ndarray) -> np.ndarray:
    return x.data if isinstance(x, Image) else np.asarray(x, dtype=np.float64)


def mse(a: Image | np.ndarray, b: Image | np.ndarray) -> float:
    """Mean squared error over all K·H·W entries."""
    a, b = _as_array(a), _as_array(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.mean(diff * diff))


def psnr(a: Image | np.ndarray, b: Image | np.ndarray,
         cap: float = PSNR_CAP_DB) -> float:
    """−10·log10(MSE) in dB for unit-range images, capped for lossless pairs."""
    err = mse(a, b)
    if err <= 0.0:
        return cap
    return float(min(-10.0 * np.log10(err), cap))
