"""Binary persistence for fitted linear-autoencoder codecs.

Container layout (little-endian throughout):

    magic   5 bytes  b"SCBM1"
    version u8       1
    k,h,w   u32 x3
    r       u32
    delta   f64
    flags   u8       bit0 = masks present, bit1 = clamp_output
    mean    D f64
    w1      r*D f64
    w2      D*r f64
    masks   packed bits, mask1 then mask2 (present iff flag bit0)

A JSON sidecar (<path>.json) carries the same header fields for humans.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .base import CodecError
from .linear_ae import LinearAECodec

MAGIC = b"SCBM1"
_VERSION = 1
_HEADER = struct.Struct("<5sBIIIIdB")


class PersistenceError(CodecError):
    pass


def save_codec(codec: LinearAECodec, path) -> Path:
    path = Path(path)
    k, h, w = codec.shape
    has_masks = codec.mask1 is not None or codec.mask2 is not None
    flags = (1 if has_masks else 0) | (2 if codec.clamp_output else 0)
    header = _HEADER.pack(MAGIC, _VERSION, k, h, w, codec.r, codec.delta, flags)

    chunks = [header,
              codec.mean.astype("<f8").tobytes(),
              codec.w1.astype("<f8").tobytes(),
              codec.w2.astype("<f8").tobytes()]
    if has_masks:
        mask1 = codec.mask1 if codec.mask1 is not None else np.ones_like(codec.w1, dtype=bool)
        mask2 = codec.mask2 if codec.mask2 is not None else np.ones_like(codec.w2, dtype=bool)
        chunks.append(np.packbits(mask1.ravel()).tobytes())
        chunks.append(np.packbits(mask2.ravel()).tobytes())
    path.write_bytes(b"".join(chunks))

    sidecar = {
        "format": MAGIC.decode("ascii"),
        "kind": "linear_ae",
        "shape": [k, h, w],
        "r": codec.r,
        "delta": codec.delta,
        "sparsity": codec.sparsity,
        "clamp_output": codec.clamp_output,
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")
    return path


def load_codec(path) -> LinearAECodec:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise PersistenceError(f"{path}: too short to be an SCBM1 container")
    magic, version, k, h, w, r, delta, flags = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise PersistenceError(f"{path}: bad magic {magic!r}, not an SCBM1 container")
    if version != _VERSION:
        raise PersistenceError(f"{path}: unsupported container version {version}")

    d = k * h * w
    offset = _HEADER.size
    expected = offset + 8 * (d + 2 * r * d)
    has_masks = bool(flags & 1)
    mask_bytes = 2 * ((r * d + 7) // 8) if has_masks else 0
    if len(raw) != expected + mask_bytes:
        raise PersistenceError(
            f"{path}: container size {len(raw)} != expected {expected + mask_bytes}"
        )

    def take_floats(count):
        nonlocal offset
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        offset += 8 * count
        return arr.astype(np.float64)

    mean = take_floats(d)
    w1 = take_floats(r * d).reshape(r, d)
    w2 = take_floats(r * d).reshape(d, r)

    mask1 = mask2 = None
    if has_masks:
        nbytes = (r * d + 7) // 8
        packed1 = np.frombuffer(raw, dtype=np.uint8, count=nbytes, offset=offset)
        offset += nbytes
        packed2 = np.frombuffer(raw, dtype=np.uint8, count=nbytes, offset=offset)
        mask1 = np.unpackbits(packed1, count=r * d).astype(bool).reshape(r, d)
        mask2 = np.unpackbits(packed2, count=r * d).astype(bool).reshape(d, r)

    return LinearAECodec(
        shape=(k, h, w), r=r, mean=mean, w1=w1, w2=w2, delta=delta,
        mask1=mask1, mask2=mask2, clamp_output=bool(flags & 2),
    )
