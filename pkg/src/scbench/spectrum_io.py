"""Spectrum export formats: PFM, CSV, and log-scaled PNG renderings."""

from __future__ import annotations

import os
from pathlib import Path

import cv2
import numpy as np
from matplotlib import colormaps

from .spectral import Spectrum, centered_frequencies

RENDER_COLORMAP = "viridis"


def write_pfm(spectrum: Spectrum, path: str | os.PathLike) -> None:
    """Grayscale PFM, little-endian (scale −1.0), rows bottom-to-top."""
    values = spectrum.values.astype("<f4")
    header = f"Pf\n{spectrum.w} {spectrum.h}\n-1.0\n".encode("ascii")
    Path(path).write_bytes(header + values[::-1].tobytes())


def read_pfm(path: str | os.PathLike) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if len(parts) < 4 or parts[0] not in (b"Pf", b"PF"):
        raise ValueError(f"not a PFM file: {path}")
    if parts[0] == b"PF":
        raise ValueError("color PFM is not supported")
    w, h = (int(tok) for tok in parts[1].split())
    scale = float(parts[2])
    dtype = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(parts[3], dtype=dtype, count=h * w).reshape(h, w)
    return np.ascontiguousarray(data[::-1]).astype(np.float64)


def write_csv(spectrum: Spectrum, path: str | os.PathLike) -> None:
    """Rows of "i,j,value" over centered frequency coordinates."""
    fi = centered_frequencies(spectrum.h)
    fj = centered_frequencies(spectrum.w)
    lines = ["i,j,value"]
    for a in range(spectrum.h):
        for b in range(spectrum.w):
            lines.append(f"{fi[a]},{fj[b]},{float(spectrum.values[a, b])!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def render_png(spectrum: Spectrum, path: str | os.PathLike) -> None:
    """log10(1+x) rendering with a fixed colormap, for visual inspection."""
    values = np.log10(1.0 + spectrum.values)
    peak = values.max()
    normalized = values / peak if peak > 0 else values
    rgba = colormaps[RENDER_COLORMAP](normalized)
    rgb = (rgba[:, :, :3] * 255.0 + 0.5).astype(np.uint8)
    ok = cv2.imwrite(str(path), rgb[:, :, ::-1], [cv2.IMWRITE_PNG_COMPRESSION, 6])
    if not ok:
        raise IOError(f"failed to write rendering {path}")
