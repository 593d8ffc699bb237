"""Fourier-basis sensitivity heatmaps.

A codec is probed one frequency at a time: every dataset item is nudged
by a random sign times a unit-norm single-frequency basis image, and the
codec's mean PSNR on the perturbed set is recorded at that grid cell.
Two readings are produced per cell: PSNR against the perturbed input
(how well the codec preserves what it was given) and against the
original (how much the perturbation plus coding together cost).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np
from matplotlib import colormaps

from .images import Dataset, Image
from .quality import PSNR_CAP_DB, psnr
from .seeding import derive_rng
from .spectrum_io import RENDER_COLORMAP

CLAMP_FLAG_THRESHOLD = 0.01


class HeatmapError(ValueError):
    pass


@dataclass(frozen=True)
class FourierBasisImage:
    """Unit Frobenius-norm real matrix supported on one frequency pair.

    ``u`` is H×W; its DFT is nonzero only at centered coordinate
    ``(i, j)`` and the conjugate-symmetric reflection (one coefficient
    when the frequency is its own reflection, as at DC and Nyquist).
    """

    h: int
    w: int
    i: int
    j: int
    u: np.ndarray

    def __post_init__(self):
        if self.u.shape != (self.h, self.w):
            raise HeatmapError(
                f"basis matrix shape {self.u.shape} does not match grid "
                f"({self.h}, {self.w})"
            )
        norm = np.linalg.norm(self.u)
        if abs(norm - 1.0) > 1e-10:
            raise HeatmapError(f"basis matrix norm {norm!r} is not 1")
        self.u.setflags(write=False)


def _centered_range(n: int) -> tuple[int, int]:
    return -(n // 2), (n - 1) // 2


def fourier_basis(h: int, w: int, i: int, j: int) -> FourierBasisImage:
    """Real basis image for centered frequency (i, j) on an h×w grid.

    Built by placing unit mass at (i, j) and its reflection in the DFT
    domain (a single coefficient when the two coincide), inverting, and
    normalizing to unit Frobenius norm. The reflection pair (−i, −j)
    yields the identical matrix.
    """
    lo_i, hi_i = _centered_range(h)
    lo_j, hi_j = _centered_range(w)
    if not (lo_i <= i <= hi_i and lo_j <= j <= hi_j):
        raise HeatmapError(
            f"frequency ({i}, {j}) outside centered grid "
            f"[{lo_i}, {hi_i}] × [{lo_j}, {hi_j}]"
        )
    coeffs = np.zeros((h, w), dtype=np.complex128)
    coeffs[i % h, j % w] = 1.0
    coeffs[(-i) % h, (-j) % w] = 1.0
    u = np.fft.ifft2(coeffs).real
    u = u / np.linalg.norm(u)
    return FourierBasisImage(h=h, w=w, i=i, j=j, u=u)


def perturb(dataset: Dataset, i: int, j: int, eps: float, seed: int) -> Dataset:
    """Add a random sign times eps times the (i, j) basis image to every
    channel of every item.

    Signs are drawn per item id from ``seed`` alone, so the reflected
    frequency (−i, −j) produces a bit-identical dataset. Output pixels
    are clamped to [0,1] for bounded inputs; the clamped-pixel fraction
    lands in ``meta["perturbation"]["clamp_fraction"]``.
    """
    if eps < 0:
        raise HeatmapError(f"eps must be nonnegative, got {eps}")
    if dataset.common_size is None:
        raise HeatmapError("perturb requires a common image size")
    h, w = dataset.common_size
    basis = fourier_basis(h, w, i, j)
    items = []
    signs: dict[str, int] = {}
    clamped_pixels = 0
    total_pixels = 0
    for index, (item_id, image) in enumerate(dataset):
        rng = derive_rng(seed, "heatmap-sign", index)
        r = 1 if rng.integers(0, 2) == 1 else -1
        signs[item_id] = r
        shifted = image.data + (r * eps) * basis.u[None, :, :]
        if image.bounded:
            clipped = np.clip(shifted, 0.0, 1.0)
            clamped_pixels += int((clipped != shifted).sum())
            total_pixels += shifted.size
            out = Image(clipped, clamped=bool((clipped != shifted).any()))
        else:
            out = Image.from_array(shifted, clamp=False, bounded=False)
            total_pixels += shifted.size
        items.append((item_id, out))
    meta = {
        "perturbation": {
            "frequency": [int(i), int(j)],
            "eps": float(eps),
            "seed": int(seed),
            "signs": signs,
            "clamp_fraction": clamped_pixels / total_pixels if total_pixels else 0.0,
        }
    }
    return Dataset(
        name=f"{dataset.name}+f({i},{j})",
        items=tuple(items),
        meta=meta,
    )


@dataclass(frozen=True)
class HeatmapResult:
    """PSNR over the sampled frequency grid for one reference variant.

    ``variant`` is ``"wrt_perturbed"`` (codec output against its own
    perturbed input) or ``"wrt_original"`` (against the unperturbed
    item). ``psnr_db`` and ``clamp_frac`` are indexed [i_index, j_index]
    matching ``freq_i`` × ``freq_j``.
    """

    variant: str
    freq_i: tuple[int, ...]
    freq_j: tuple[int, ...]
    psnr_db: np.ndarray
    clamp_frac: np.ndarray
    eps: float
    stride: int
    psnr_cap: float
    codec_kind: str
    dataset_name: str

    def __post_init__(self):
        if self.variant not in ("wrt_perturbed", "wrt_original"):
            raise HeatmapError(f"unknown heatmap variant {self.variant!r}")
        expected = (len(self.freq_i), len(self.freq_j))
        if self.psnr_db.shape != expected or self.clamp_frac.shape != expected:
            raise HeatmapError("heatmap grids do not match the sampled frequencies")
        if (self.psnr_db > self.psnr_cap + 1e-9).any():
            raise HeatmapError("heatmap contains entries above the PSNR cap")
        self.psnr_db.setflags(write=False)
        self.clamp_frac.setflags(write=False)

    @property
    def flagged(self) -> np.ndarray:
        """Cells whose clamped-pixel fraction exceeds 1%."""
        return self.clamp_frac > CLAMP_FLAG_THRESHOLD

    def cell(self, i: int, j: int) -> float:
        return float(self.psnr_db[self.freq_i.index(i), self.freq_j.index(j)])


def _strided_frequencies(n: int, stride: int) -> tuple[int, ...]:
    """Multiples of stride inside the centered range; always includes 0."""
    lo, hi = _centered_range(n)
    down = range(-stride, lo - 1, -stride)
    up = range(0, hi + 1, stride)
    return tuple(sorted(set(down) | set(up)))


def heatmap(
    codec,
    dataset: Dataset,
    eps: float = 0.1,
    stride: int = 1,
    psnr_cap: float = PSNR_CAP_DB,
    seed: int = 0,
) -> tuple[HeatmapResult, HeatmapResult]:
    """Mean codec PSNR at every sampled frequency, both variants.

    Returns ``(wrt_perturbed, wrt_original)``. Reflected frequency pairs
    receive identical perturbations, so each unordered pair is computed
    once and mirrored.
    """
    if dataset.common_size is None:
        raise HeatmapError("heatmap requires a common image size")
    if not dataset.items:
        raise HeatmapError("heatmap requires a nonempty dataset")
    if stride < 1:
        raise HeatmapError(f"stride must be >= 1, got {stride}")
    h, w = dataset.common_size
    freq_i = _strided_frequencies(h, stride)
    freq_j = _strided_frequencies(w, stride)
    kind = getattr(codec, "kind", type(codec).__name__)

    grid_a = np.zeros((len(freq_i), len(freq_j)))
    grid_b = np.zeros_like(grid_a)
    clamp = np.zeros_like(grid_a)
    cache: dict[tuple[int, int], tuple[float, float, float]] = {}

    for a, i in enumerate(freq_i):
        for b, j in enumerate(freq_j):
            key = min((i % h, j % w), ((-i) % h, (-j) % w))
            if key not in cache:
                cache[key] = _evaluate_cell(
                    codec, kind, dataset, i, j, eps, psnr_cap, seed
                )
            grid_a[a, b], grid_b[a, b], clamp[a, b] = cache[key]

    common = dict(
        freq_i=freq_i, freq_j=freq_j, eps=eps, stride=stride,
        psnr_cap=psnr_cap, codec_kind=kind, dataset_name=dataset.name,
    )
    return (
        HeatmapResult(variant="wrt_perturbed", psnr_db=grid_a,
                      clamp_frac=clamp, **common),
        HeatmapResult(variant="wrt_original", psnr_db=grid_b,
                      clamp_frac=clamp.copy(), **common),
    )


def _evaluate_cell(codec, kind, dataset, i, j, eps, psnr_cap, seed):
    perturbed = perturb(dataset, i, j, eps, seed)
    sum_a = 0.0
    sum_b = 0.0
    for (item_id, original), (_, shifted) in zip(dataset, perturbed):
        try:
            recon, _ = codec.roundtrip(shifted)
        except Exception as exc:
            raise HeatmapError(
                f"codec {kind!r} failed at frequency ({i}, {j}) "
                f"on item {item_id!r}: {exc}"
            ) from exc
        sum_a += psnr(recon, shifted, cap=psnr_cap)
        sum_b += psnr(recon, original, cap=psnr_cap)
    n = len(dataset)
    frac = perturbed.meta["perturbation"]["clamp_fraction"]
    return sum_a / n, sum_b / n, frac


def write_heatmap_csv(result: HeatmapResult, path: str | os.PathLike) -> None:
    """Rows of "i,j,psnr,clamp_frac" over the sampled grid."""
    lines = ["i,j,psnr,clamp_frac"]
    for a, i in enumerate(result.freq_i):
        for b, j in enumerate(result.freq_j):
            lines.append(
                f"{i},{j},{float(result.psnr_db[a, b])!r},"
                f"{float(result.clamp_frac[a, b])!r}"
            )
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def render_heatmap_png(result: HeatmapResult, path: str | os.PathLike) -> None:
    """Colormapped rendering of the PSNR grid (dB values, already a log scale)."""
    values = result.psnr_db
    span = values.max() - values.min()
    normalized = (values - values.min()) / span if span > 0 else np.zeros_like(values)
    rgba = colormaps[RENDER_COLORMAP](normalized)
    rgb = (rgba[:, :, :3] * 255.0 + 0.5).astype(np.uint8)
    ok = cv2.imwrite(str(path), rgb[:, :, ::-1], [cv2.IMWRITE_PNG_COMPRESSION, 6])
    if not ok:
        raise IOError(f"failed to write rendering {path}")
