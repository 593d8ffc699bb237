"""Image and dataset types, deterministic raster I/O, dataset manifests.

Images are K-channel float64 rasters. The canonical value range is [0,1];
synthetic ensembles used by the theory code carry unbounded reals and set
``bounded=False``. All types are immutable after construction.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

SUPPORTED_EXTENSIONS = (".png", ".ppm", ".pgm")


class ImageError(ValueError):
    pass


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Image:
    """A K×H×W float64 raster.

    ``clamped`` records whether construction clipped any value into [0,1].
    ``bounded`` is False for unclamped real-valued images (theory mode).
    """

    data: np.ndarray
    clamped: bool = False
    bounded: bool = True

    def __post_init__(self):
        arr = self.data
        if arr.ndim != 3:
            raise ImageError(f"image data must be K×H×W, got shape {arr.shape}")
        k, h, w = arr.shape
        if k not in (1, 3):
            raise ImageError(f"channel count must be 1 or 3, got {k}")
        if h < 2 or w < 2:
            raise ImageError(f"image must be at least 2×2, got {h}×{w}")
        if arr.dtype != np.float64:
            raise ImageError(f"image data must be float64, got {arr.dtype}")
        if not np.isfinite(arr).all():
            raise ImageError("image data contains non-finite values")
        arr.setflags(write=False)

    @staticmethod
    def from_array(arr: np.ndarray, *, clamp: bool = True, bounded: bool = True) -> "Image":
        """Build an Image from an (H,W) or (K,H,W) float array.

        With ``clamp`` (the default for the canonical [0,1] range), values are
        clipped and the ``clamped`` flag records whether anything changed.
        """
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[None, :, :]
        if bounded and clamp:
            clipped = np.clip(arr, 0.0, 1.0)
            was_clamped = bool((clipped != arr).any())
            return Image(clipped, clamped=was_clamped, bounded=True)
        return Image(arr.copy(), clamped=False, bounded=bounded)

    @property
    def k(self) -> int:
        return self.data.shape[0]

    @property
    def h(self) -> int:
        return self.data.shape[1]

    @property
    def w(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class Dataset:
    """An ordered set of (id, Image) pairs sharing a channel count.

    Items are kept sorted lexicographically by id so ordering is a pure
    function of the ids, never of filesystem enumeration order.
    """

    name: str
    items: tuple[tuple[str, Image], ...]
    common_size: tuple[int, int] | None = field(default=None)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        ids = [item_id for item_id, _ in self.items]
        if len(set(ids)) != len(ids):
            raise DatasetError("dataset item ids must be unique")
        if ids != sorted(ids):
            object.__setattr__(self, "items", tuple(sorted(self.items, key=lambda t: t[0])))
        if self.items:
            k = self.items[0][1].k
            for item_id, image in self.items:
                if image.k != k:
                    raise DatasetError(f"item {item_id!r} has {image.k} channels, expected {k}")
            sizes = {(img.h, img.w) for _, img in self.items}
            if self.common_size is None and len(sizes) == 1:
                object.__setattr__(self, "common_size", sizes.pop())

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def ids(self) -> list[str]:
        return [item_id for item_id, _ in self.items]

    @property
    def k(self) -> int:
        if not self.items:
            raise DatasetError("empty dataset has no channel count")
        return self.items[0][1].k

    def image(self, item_id: str) -> Image:
        for iid, img in self.items:
            if iid == item_id:
                return img
        raise KeyError(item_id)

    def as_array(self) -> np.ndarray:
        """Stack to (N, K, H, W); requires a common size."""
        if self.common_size is None:
            raise DatasetError("dataset images do not share a common size")
        return np.stack([img.data for _, img in self.items])


def center_crop(image: Image, h: int, w: int) -> Image:
    """Centered h×w window; offsets floor((H−h)/2), floor((W−w)/2)."""
    if h > image.h or w > image.w:
        raise ImageError(
            f"crop {h}×{w} exceeds image size {image.h}×{image.w}"
        )
    top = (image.h - h) // 2
    left = (image.w - w) // 2
    data = image.data[:, top:top + h, left:left + w]
    return Image(np.ascontiguousarray(data), clamped=image.clamped, bounded=image.bounded)


def _quantize(data: np.ndarray, maxval: int) -> np.ndarray:
    # round-half-up for deterministic cross-platform bytes
    q = np.floor(data * maxval + 0.5)
    return np.clip(q, 0, maxval)


def write_image(image: Image, path: str | os.PathLike, *, bit_depth: int = 8) -> None:
    """Write PNG (via OpenCV) or binary PPM/PGM at 8 or 16 bits."""
    if not image.bounded:
        raise ImageError("only [0,1]-bounded images can be written to files")
    if bit_depth not in (8, 16):
        raise ImageError(f"bit depth must be 8 or 16, got {bit_depth}")
    path = Path(path)
    maxval = (1 << bit_depth) - 1
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    quantized = _quantize(image.data, maxval).astype(dtype)
    ext = path.suffix.lower()
    if ext == ".png":
        if image.k == 1:
            raster = quantized[0]
        else:
            raster = np.transpose(quantized[::-1], (1, 2, 0))  # RGB -> BGR, HWC
        ok = cv2.imwrite(str(path), raster, [cv2.IMWRITE_PNG_COMPRESSION, 6])
        if not ok:
            raise IOError(f"failed to write PNG {path}")
    elif ext in (".ppm", ".pgm"):
        if ext == ".pgm" and image.k != 1:
            raise ImageError("PGM requires a single channel")
        if ext == ".ppm" and image.k != 3:
            raise ImageError("PPM requires three channels")
        magic = b"P5" if image.k == 1 else b"P6"
        header = magic + f"\n{image.w} {image.h}\n{maxval}\n".encode("ascii")
        hwc = np.transpose(quantized, (1, 2, 0))
        if bit_depth == 16:
            payload = hwc.astype(">u2").tobytes()  # netpbm 16-bit is big-endian
        else:
            payload = hwc.astype(np.uint8).tobytes()
        path.write_bytes(header + payload)
    else:
        raise ImageError(f"unsupported image extension {ext!r}")


def _read_netpbm(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    pos += 1  # single whitespace byte after maxval
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic not in (b"P5", b"P6"):
        raise ImageError(f"unsupported netpbm magic {magic!r} in {path}")
    channels = 1 if magic == b"P5" else 3
    count = w * h * channels
    if maxval > 255:
        data = np.frombuffer(raw, dtype=">u2", count=count, offset=pos).astype(np.float64)
    else:
        data = np.frombuffer(raw, dtype=np.uint8, count=count, offset=pos).astype(np.float64)
    hwc = data.reshape(h, w, channels)
    return np.transpose(hwc, (2, 0, 1)) / maxval


def read_image(path: str | os.PathLike) -> Image:
    """Read PNG/PPM/PGM back to a [0,1] float image."""
    path = Path(path)
    if not path.is_file():
        raise ImageError(f"no such image file: {path}")
    ext = path.suffix.lower()
    if ext == ".png":
        raster = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if raster is None:
            raise ImageError(f"unreadable PNG: {path}")
        maxval = 65535.0 if raster.dtype == np.uint16 else 255.0
        arr = raster.astype(np.float64)
        if arr.ndim == 2:
            data = arr[None, :, :]
        else:
            if arr.shape[2] == 4:
                arr = arr[:, :, :3]
            data = np.transpose(arr, (2, 0, 1))[::-1]  # BGR -> RGB
        return Image.from_array(np.ascontiguousarray(data) / maxval)
    if ext in (".ppm", ".pgm"):
        return Image.from_array(_read_netpbm(path))
    raise ImageError(f"unsupported image extension {ext!r}")


def sha256_file(path: str | os.PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass(frozen=True)
class Manifest:
    """JSON-serializable description of a dataset directory."""

    name: str
    source: str
    crop: tuple[int, int] | None
    items: tuple[dict, ...]

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "source": self.source,
            "crop": list(self.crop) if self.crop else None,
            "items": [dict(sorted(item.items())) for item in self.items],
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def save(self, path: str | os.PathLike) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @staticmethod
    def load(path: str | os.PathLike) -> "Manifest":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        crop = tuple(doc["crop"]) if doc.get("crop") else None
        return Manifest(doc["name"], doc["source"], crop, tuple(doc["items"]))

    def verify(self, root: str | os.PathLike) -> None:
        """Check that every listed file exists and its checksum matches."""
        root = Path(root)
        for item in self.items:
            target = root / item["path"]
            if not target.is_file():
                raise DatasetError(f"manifest item {item['id']!r}: missing file {target}")
            actual = sha256_file(target)
            if actual != item["sha256"]:
                raise DatasetError(
                    f"manifest item {item['id']!r}: checksum mismatch for {target}"
                )


def load_dataset(
    directory: str | os.PathLike,
    crop: tuple[int, int] | None = None,
    *,
    name: str | None = None,
) -> Dataset:
    """Load all PNG/PPM/PGM files from a directory, ordered by id.

    The id of an item is its filename stem. With ``crop``, every image is
    center-cropped; images smaller than the crop are rejected.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetError(f"no such dataset directory: {directory}")
    paths = sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in SUPPORTED_EXTENSIONS
    )
    if not paths:
        raise DatasetError(f"no supported image files in {directory}")
    items = []
    seen = set()
    for p in paths:
        item_id = p.stem
        if item_id in seen:
            raise DatasetError(f"duplicate item id {item_id!r} in {directory}")
        seen.add(item_id)
        try:
            image = read_image(p)
        except ImageError as exc:
            raise DatasetError(f"item {item_id!r}: {exc}") from exc
        if crop is not None:
            h, w = crop
            if image.h < h or image.w < w:
                raise DatasetError(
                    f"item {item_id!r}: image {image.h}×{image.w} smaller than crop {h}×{w}"
                )
            image = center_crop(image, h, w)
        items.append((item_id, image))
    return Dataset(name or directory.name, tuple(items), common_size=crop)


def write_dataset(
    dataset: Dataset,
    directory: str | os.PathLike,
    *,
    bit_depth: int = 8,
    source: str = "",
    crop: tuple[int, int] | None = None,
    provenance: dict | None = None,
) -> Manifest:
    """Write every item as PNG and return the matching Manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for item_id, image in dataset.items:
        rel = f"{item_id}.png"
        target = directory / rel
        write_image(image, target, bit_depth=bit_depth)
        entry = {
            "id": item_id,
            "path": rel,
            "sha256": sha256_file(target),
            "h": image.h,
            "w": image.w,
            "k": image.k,
        }
        if provenance:
            entry.update(provenance)
        entries.append(entry)
    return Manifest(dataset.name, source or str(directory), crop, tuple(entries))
