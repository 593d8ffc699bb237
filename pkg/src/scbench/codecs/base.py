"""Shared codec types: compressed blobs, bit accounting, trivial baselines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..images import Image
from .rangecoder import stream_entropy_bits

HEADER_BITS = 64


class CodecError(ValueError):
    pass


@dataclass(frozen=True)
class CompressedBlob:
    """Header + payload of one encoded image, with both bit accountings.

    exact_bits counts the entropy-coded payload plus a 64-bit header;
    entropy_bits is the zero-order Shannon estimate of the symbol stream
    (no header).
    """

    kind: str
    shape: tuple[int, int, int]
    rate_param: dict
    payload: bytes = b""
    n_symbols: int = 0
    exact_bits: int = 0
    entropy_bits: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.exact_bits < 0:
            raise CodecError("exact_bits must be >= 0")
        if self.entropy_bits < 0:
            raise CodecError("entropy_bits must be >= 0")


def bpp(blob: CompressedBlob, image: Image) -> float:
    """Exact coded size in bits per pixel (header included)."""
    return blob.exact_bits / (image.h * image.w)


def bpp_entropy(blob: CompressedBlob, image: Image) -> float:
    """Shannon-estimate bits per pixel (payload only)."""
    return blob.entropy_bits / (image.h * image.w)


@dataclass(frozen=True)
class IdentityCodec:
    """Stores pixels raw at 8 bits each; reconstruction equals the input."""

    kind: str = "identity"
    rate_param: dict = field(default_factory=dict)

    def roundtrip(self, image: Image) -> tuple[Image, CompressedBlob]:
        symbols = np.rint(np.clip(image.data, 0.0, 1.0) * 255.0).astype(np.int64)
        blob = CompressedBlob(
            kind="identity",
            shape=image.shape,
            rate_param={},
            n_symbols=symbols.size,
            exact_bits=HEADER_BITS + 8 * symbols.size,
            entropy_bits=stream_entropy_bits(symbols),
        )
        return image, blob


@dataclass(frozen=True)
class ZeroingCodec:
    """Maps every image to zeros; the cheapest possible rate point."""

    kind: str = "zeroing"
    rate_param: dict = field(default_factory=dict)

    def roundtrip(self, image: Image) -> tuple[Image, CompressedBlob]:
        recon = Image.from_array(np.zeros(image.shape), clamp=False)
        blob = CompressedBlob(
            kind="zeroing",
            shape=image.shape,
            rate_param={},
            n_symbols=0,
            exact_bits=HEADER_BITS,
            entropy_bits=0.0,
        )
        return recon, blob
