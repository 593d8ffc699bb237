"""Classic-codec stand-in: blockwise DCT, quality-scaled quantization,
zigzag run-length symbols, adaptive entropy coding.

Orthonormal DCT-II over B×B blocks keeps the no-quantization path
lossless; the quality knob q scales a fixed quantization matrix the way
baseline JPEG tooling does (q=100 means every step clamps to 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sp_fft
from scipy import ndimage

from ..images import Image
from .base import HEADER_BITS, CodecError, CompressedBlob
from .rangecoder import encode_symbols, stream_entropy_bits

# Widely used luminance quantization matrix (8x8 reference steps).
_BASE_QUANT_8 = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.float64)


def zigzag_order(block_size: int) -> list[tuple[int, int]]:
    """Antidiagonal traversal from the DC corner, alternating direction."""
    order = []
    for s in range(2 * block_size - 1):
        diagonal = [(i, s - i) for i in range(s + 1)]
        if s % 2 == 0:
            diagonal.reverse()
        order.extend(
            (i, j) for i, j in diagonal if i < block_size and j < block_size
        )
    return order


def quant_matrix(quality: int, block_size: int = 8) -> np.ndarray:
    """Quality-scaled integer steps; q=100 pins every step at 1."""
    if not 1 <= quality <= 100:
        raise CodecError(f"quality must be in [1, 100], got {quality}")
    if block_size == 8:
        base = _BASE_QUANT_8
    else:
        zoom = block_size / 8.0
        base = ndimage.zoom(_BASE_QUANT_8, zoom, order=1, mode="nearest")
        base = np.clip(base, 1.0, None)
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    steps = np.floor((base * scale + 50.0) / 100.0)
    return np.clip(steps, 1.0, 255.0)


@dataclass(frozen=True)
class BlockDctCodec:
    quality: int = 75
    block_size: int = 8
    clamp_output: bool = True
    kind: str = "block_dct"

    def __post_init__(self):
        quant_matrix(self.quality, self.block_size)  # validates quality
        if self.block_size < 2:
            raise CodecError(f"block size must be >= 2, got {self.block_size}")

    @property
    def rate_param(self) -> dict:
        return {"q": self.quality}

    def _tokens_per_block(self):
        b = self.block_size
        # token layout: 0 = end-of-block; 1..b^2-1 = zero runs; then values.
        # |coef| <= ||block||_2 <= b * 128 after level shift, so the widest
        # quantized value is that peak over the smallest step. Sizing the
        # alphabet per quality (both ends derive it from q) keeps the model
        # from spreading initial mass over values the quantizer cannot emit.
        steps = quant_matrix(self.quality, b)
        value_cap = int(np.ceil(128.0 * b / steps.min()))
        return b * b, value_cap, b * b + 2 * value_cap + 1

    def block_coefficients(self, image: Image) -> np.ndarray:
        """Pre-quantization DCT coefficients, shape (K, nb_h, nb_w, B, B)."""
        padded = _pad_to_blocks(image.data, self.block_size)
        blocks = _to_blocks(padded * 255.0 - 128.0, self.block_size)
        return sp_fft.dctn(blocks, type=2, norm="ortho", axes=(-2, -1))

    def roundtrip(self, image: Image) -> tuple[Image, CompressedBlob]:
        b = self.block_size
        steps = quant_matrix(self.quality, b)
        zigzag = zigzag_order(b)
        value_offset, value_cap, alphabet = self._tokens_per_block()

        coeffs = self.block_coefficients(image)
        quantized = np.rint(coeffs / steps).astype(np.int64)
        if np.abs(quantized).max(initial=0) > value_cap:
            raise CodecError("quantized coefficient exceeded the token range")

        k, nb_h, nb_w = quantized.shape[:3]
        tokens: list[int] = []
        for flat_block in quantized.reshape(-1, b, b):
            scanned = [int(flat_block[i, j]) for i, j in zigzag]
            tokens.extend(_rle_encode(scanned, value_offset, value_cap, b * b - 1))

        # decode the token stream back (round trip goes through symbols)
        decoded_blocks = _rle_decode(
            tokens, k * nb_h * nb_w, b, zigzag, value_offset, value_cap
        )
        dequantized = decoded_blocks.reshape(k, nb_h, nb_w, b, b) * steps
        pixels = sp_fft.idctn(dequantized, type=2, norm="ortho", axes=(-2, -1))
        restored = (_from_blocks(pixels) + 128.0) / 255.0
        restored = restored[:, :image.h, :image.w]
        if self.clamp_output:
            recon = Image.from_array(restored, clamp=True)
        else:
            recon = Image.from_array(restored, bounded=False)

        token_arr = np.asarray(tokens, dtype=np.int64)
        payload = encode_symbols(token_arr, alphabet)
        blob = CompressedBlob(
            kind=self.kind,
            shape=image.shape,
            rate_param=self.rate_param,
            payload=payload,
            n_symbols=token_arr.size,
            exact_bits=HEADER_BITS + 8 * len(payload),
            entropy_bits=stream_entropy_bits(token_arr),
            meta={"block_size": b},
        )
        return recon, blob


def _pad_to_blocks(data: np.ndarray, b: int) -> np.ndarray:
    _, h, w = data.shape
    pad_h = (-h) % b
    pad_w = (-w) % b
    if pad_h == 0 and pad_w == 0:
        return data
    return np.pad(data, ((0, 0), (0, pad_h), (0, pad_w)), mode="reflect")


def _to_blocks(data: np.ndarray, b: int) -> np.ndarray:
    k, h, w = data.shape
    blocks = data.reshape(k, h // b, b, w // b, b)
    return blocks.transpose(0, 1, 3, 2, 4)


def _from_blocks(blocks: np.ndarray) -> np.ndarray:
    k, nb_h, nb_w, b, _ = blocks.shape
    return blocks.transpose(0, 1, 3, 2, 4).reshape(k, nb_h * b, nb_w * b)


def _rle_encode(scanned: list[int], value_offset: int, value_cap: int,
                max_run: int) -> list[int]:
    last_nonzero = -1
    for idx, value in enumerate(scanned):
        if value != 0:
            last_nonzero = idx
    tokens = []
    run = 0
    for value in scanned[:last_nonzero + 1]:
        if value == 0:
            run += 1
            continue
        while run > max_run:
            tokens.append(max_run)
            run -= max_run
        if run:
            tokens.append(run)
            run = 0
        tokens.append(value_offset + value + value_cap)
    tokens.append(0)  # end of block
    return tokens


def _rle_decode(tokens: list[int], n_blocks: int, b: int, zigzag,
                value_offset: int, value_cap: int) -> np.ndarray:
    blocks = np.zeros((n_blocks, b, b), dtype=np.int64)
    pos = 0
    for block in range(n_blocks):
        slot = 0
        while True:
            if pos >= len(tokens):
                raise CodecError("token stream ended before all blocks closed")
            token = tokens[pos]
            pos += 1
            if token == 0:
                break
            if token < value_offset:
                slot += token
                continue
            if slot >= b * b:
                raise CodecError("token stream overflows a block")
            i, j = zigzag[slot]
            blocks[block, i, j] = token - value_offset - value_cap
            slot += 1
    if pos != len(tokens):
        raise CodecError("trailing tokens after the final block")
    return blocks
