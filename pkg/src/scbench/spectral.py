"""2-D Fourier machinery and the spectral error metrics.

A Spectrum is a centered map of averaged Fourier magnitudes. The three
dataset metrics share one construction: the elementwise mean, over items,
of the magnitude spectrum of a difference image.

  distortion      D = mean_k PSD(X_k - C(X_k))
  generalization  G = mean_k PSD(c(X_k) - C(c(X_k)))
  robustness      R = mean_k PSD(X_k - C(c(X_k)))
  corruption      F = mean_k PSD(c(X_k) - X_k)

Codecs are any object with ``roundtrip(image) -> (Image, blob)``;
corruptions any object with ``apply_to(image, item_index) -> Image``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .images import Dataset, Image


@dataclass(frozen=True)
class Spectrum:
    """Centered nonnegative magnitude map with provenance tag."""

    values: np.ndarray
    centered: bool
    tag: str
    n: int

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError(f"spectrum must be 2-D, got shape {self.values.shape}")
        if not self.centered:
            raise ValueError("only centered spectra are supported")
        if (self.values < 0).any():
            raise ValueError("spectrum values must be nonnegative")
        self.values.setflags(write=False)

    @property
    def h(self) -> int:
        return self.values.shape[0]

    @property
    def w(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class RadialProfile:
    """Mean magnitude, counts and energy per normalized-radius bin."""

    n_bins: int
    edges: np.ndarray           # n_bins+1 edges spanning [0, 1]
    mean_magnitude: np.ndarray  # per-bin mean of spectrum values
    counts: np.ndarray          # coordinates per bin
    energy: np.ndarray          # per-bin sum of squared values

    def __post_init__(self):
        for arr in (self.edges, self.mean_magnitude, self.counts, self.energy):
            arr.setflags(write=False)


def dft2(channel: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2-D DFT of one H×W channel."""
    channel = np.asarray(channel)
    if channel.ndim != 2 or channel.shape[0] < 2 or channel.shape[1] < 2:
        raise ValueError(f"dft2 expects an H×W array with H,W ≥ 2, got {channel.shape}")
    return np.fft.fft2(channel)


def centered_frequencies(n: int) -> np.ndarray:
    """Integer frequencies along one axis after fftshift: [-floor(n/2), ...]."""
    return np.fft.fftshift(np.rint(np.fft.fftfreq(n) * n).astype(np.int64))


def radius_grid(h: int, w: int) -> np.ndarray:
    """Radius sqrt(i²+j²) of each centered coordinate."""
    fi = centered_frequencies(h)[:, None].astype(np.float64)
    fj = centered_frequencies(w)[None, :].astype(np.float64)
    return np.hypot(fi, fj)


def _psd_array(data: np.ndarray) -> np.ndarray:
    """Channel-averaged |fftshift(dft2)| of a (K,H,W) array."""
    mags = [np.abs(np.fft.fftshift(np.fft.fft2(ch))) for ch in data]
    acc = mags[0]
    for m in mags[1:]:
        acc = acc + m
    return acc / len(mags)


def psd(image: Image, tag: str = "raw-PSD") -> Spectrum:
    """Centered channel-averaged Fourier magnitude of one image."""
    return Spectrum(_psd_array(image.data), centered=True, tag=tag, n=1)


class SpectrumAccumulator:
    """Streaming elementwise-mean PSD over (K,H,W) difference arrays.

    Accumulation order matters for bit-exact reproducibility, so callers
    must feed items in dataset id order (the metric functions do).
    """

    def __init__(self, tag: str):
        self.tag = tag
        self._acc: np.ndarray | None = None
        self._n = 0

    def add(self, diff: np.ndarray) -> None:
        p = _psd_array(diff)
        self._acc = p if self._acc is None else self._acc + p
        self._n += 1

    def spectrum(self) -> Spectrum:
        if self._acc is None:
            raise ValueError("cannot average spectra over an empty dataset")
        return Spectrum(self._acc / self._n, centered=True, tag=self.tag, n=self._n)


def _mean_spectrum(diff_arrays, tag: str) -> Spectrum:
    """Elementwise mean PSD over difference arrays, accumulated in order."""
    acc = SpectrumAccumulator(tag)
    for arr in diff_arrays:
        acc.add(arr)
    return acc.spectrum()


def _require_common_shape(dataset: Dataset) -> None:
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if dataset.common_size is None:
        raise ValueError("spectral metrics require a common image size")


def _roundtrip_checked(codec, image: Image, item_id: str) -> Image:
    recon, _ = codec.roundtrip(image)
    if recon.shape != image.shape:
        raise ValueError(
            f"codec changed shape of item {item_id!r}: {image.shape} -> {recon.shape}"
        )
    return recon


def metric_D(codec, dataset: Dataset) -> Spectrum:
    """Mean PSD of X − C(X) over the dataset."""
    _require_common_shape(dataset)
    diffs = (
        image.data - _roundtrip_checked(codec, image, item_id).data
        for item_id, image in dataset
    )
    return _mean_spectrum(diffs, "D")


def metric_G(codec, dataset: Dataset, corruption) -> Spectrum:
    """Mean PSD of c(X) − C(c(X)) over the dataset."""
    _require_common_shape(dataset)

    def diffs():
        for index, (item_id, image) in enumerate(dataset):
            corrupted = corruption.apply_to(image, index)
            recon = _roundtrip_checked(codec, corrupted, item_id)
            yield corrupted.data - recon.data

    return _mean_spectrum(diffs(), "G")


def metric_R(codec, dataset: Dataset, corruption) -> Spectrum:
    """Mean PSD of X − C(c(X)) over the dataset."""
    _require_common_shape(dataset)

    def diffs():
        for index, (item_id, image) in enumerate(dataset):
            corrupted = corruption.apply_to(image, index)
            recon = _roundtrip_checked(codec, corrupted, item_id)
            yield image.data - recon.data

    return _mean_spectrum(diffs(), "R")


def corruption_spectrum(dataset: Dataset, corruption) -> Spectrum:
    """Mean PSD of c(X) − X: the corruption's spectral fingerprint."""
    _require_common_shape(dataset)
    diffs = (
        corruption.apply_to(image, index).data - image.data
        for index, (_, image) in enumerate(dataset)
    )
    return _mean_spectrum(diffs, "corruption")


def dataset_spectrum(dataset: Dataset) -> Spectrum:
    """Mean PSD of the images themselves (not of differences)."""
    _require_common_shape(dataset)
    return _mean_spectrum((image.data for _, image in dataset), "dataset-PSD")


def metrics_bundle(codec, dataset: Dataset, corruption) -> dict[str, Spectrum]:
    """D, G, R and the corruption spectrum sharing one pass of round trips."""
    _require_common_shape(dataset)
    acc = {key: None for key in ("D", "G", "R", "corruption")}
    for index, (item_id, image) in enumerate(dataset):
        corrupted = corruption.apply_to(image, index)
        recon_clean = _roundtrip_checked(codec, image, item_id)
        recon_corrupt = _roundtrip_checked(codec, corrupted, item_id)
        parts = {
            "D": image.data - recon_clean.data,
            "G": corrupted.data - recon_corrupt.data,
            "R": image.data - recon_corrupt.data,
            "corruption": corrupted.data - image.data,
        }
        for key, diff in parts.items():
            p = _psd_array(diff)
            acc[key] = p if acc[key] is None else acc[key] + p
    n = len(dataset)
    return {
        key: Spectrum(total / n, centered=True, tag=key, n=n)
        for key, total in acc.items()
    }


def radial_profile(spectrum: Spectrum, n_bins: int = 20) -> RadialProfile:
    """Mean magnitude per normalized-radius bin [b/n, (b+1)/n)."""
    if n_bins < 1:
        raise ValueError("n_bins must be ≥ 1")
    rho = radius_grid(spectrum.h, spectrum.w)
    rho_max = rho.max()
    rho_norm = rho / rho_max if rho_max > 0 else rho
    idx = np.minimum((rho_norm * n_bins).astype(np.int64), n_bins - 1)
    flat_idx = idx.ravel()
    values = spectrum.values.ravel()
    counts = np.bincount(flat_idx, minlength=n_bins)
    sums = np.bincount(flat_idx, weights=values, minlength=n_bins)
    energy = np.bincount(flat_idx, weights=values * values, minlength=n_bins)
    mean = np.divide(sums, counts, out=np.zeros(n_bins), where=counts > 0)
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    return RadialProfile(n_bins, edges, mean, counts, energy)


def classify_band(
    profile: RadialProfile,
    *,
    low_fraction: float = 0.60,
    low_radius: float = 0.25,
    high_fraction: float = 0.40,
    high_radius: float = 0.60,
) -> str:
    """Band verdict from the energy split of a radial profile.

    low if ≥ low_fraction of the energy sits at ρ < low_radius; high if
    ≥ high_fraction sits at ρ > high_radius; else medium. Bins are
    attributed to a side by their center, so the defaults are exact when
    bin edges align with the radius thresholds (e.g. n_bins=20).
    """
    total = float(profile.energy.sum())
    if total <= 0.0:
        return "undefined"
    centers = (profile.edges[:-1] + profile.edges[1:]) / 2.0
    low_energy = float(profile.energy[centers < low_radius].sum())
    high_energy = float(profile.energy[centers > high_radius].sum())
    if low_energy / total >= low_fraction:
        return "low"
    if high_energy / total >= high_fraction:
        return "high"
    return "medium"


def band_energy_fractions(profile: RadialProfile, low_radius: float = 0.25,
                          high_radius: float = 0.60) -> tuple[float, float]:
    """(fraction of energy below low_radius, fraction above high_radius)."""
    total = float(profile.energy.sum())
    if total <= 0.0:
        return 0.0, 0.0
    centers = (profile.edges[:-1] + profile.edges[1:]) / 2.0
    low = float(profile.energy[centers < low_radius].sum())
    high = float(profile.energy[centers > high_radius].sum())
    return low / total, high / total


def triangle_audit(d_corr: Spectrum, g: Spectrum, r: Spectrum,
                   tol_scale: float = 1e-9) -> dict:
    """Check F − G ≤ R ≤ F + G elementwise, F the corruption spectrum.

    Tolerance per coordinate is tol_scale·(1+|value|) at the local value
    scale. Returns a JSON-ready report with the worst violation and up to
    ten violating coordinates (centered indices).
    """
    shapes = {d_corr.values.shape, g.values.shape, r.values.shape}
    if len(shapes) != 1:
        raise ValueError(f"spectra on different grids: {shapes}")
    f, gv, rv = d_corr.values, g.values, r.values
    scale = np.maximum(np.maximum(f, gv), rv)
    tol = tol_scale * (1.0 + scale)
    lower_excess = (f - gv) - rv
    upper_excess = rv - (f + gv)
    excess = np.maximum(lower_excess, upper_excess)
    violating = excess > tol
    count = int(violating.sum())
    max_violation = float(excess.max()) if excess.size else 0.0
    fi = centered_frequencies(d_corr.h)
    fj = centered_frequencies(d_corr.w)
    coords = []
    if count:
        order = np.argsort(excess, axis=None)[::-1]
        for flat in order[: min(count, 10)]:
            a, b = np.unravel_index(flat, excess.shape)
            coords.append([int(fi[a]), int(fj[b])])
    return {
        "max_violation": max(max_violation, 0.0),
        "count": count,
        "coords": coords,
        "passed": count == 0,
    }
