"""Closed-form spectral predictions for the linear autoencoder.

For data whose Fourier coefficients are independent with variances
decaying as 1/(|i|^a + |j|^b), the fitted linear autoencoder keeps a
low-frequency pass band and drops the rest. This module samples such
ensembles, builds the predicted pass-band masks, assembles the predicted
distortion/generalization/robustness spectra from the data's own FFTs,
and compares them against the empirical metrics of an actually fitted
codec.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codecs.base import CompressedBlob
from .codecs.linear_ae import LinearAECodec, fit_linear_ae
from .images import Dataset, Image
from .seeding import derive_rng
from .spectral import (Spectrum, dataset_spectrum, metrics_bundle,
                       radius_grid, triangle_audit)


class TheoryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# power-law ensembles


@dataclass(frozen=True)
class PowerLawEnsemble:
    """Synthetic source with independent Fourier coefficients.

    Coefficient variance at integer frequency (i, j) is
    1/(|i|^alpha + |j|^beta); the undefined DC slot gets the finite
    stand-in ``dc_variance`` (default 10x the (1,0) variance).
    ``amplitude`` scales every sample linearly (variances scale by its
    square); the default 1.0 keeps the bare power law. Linear-theory
    comparisons are amplitude-invariant, so the knob only sets the
    signal-to-corruption ratio when absolute-scale corruptions apply.
    """

    shape: tuple[int, int, int]
    n: int
    alpha: float = 2.0
    beta: float = 2.0
    seed: int = 0
    dc_variance: float = 10.0
    amplitude: float = 1.0

    def __post_init__(self):
        k, h, w = self.shape
        if k not in (1, 3) or h < 2 or w < 2:
            raise TheoryError(f"bad ensemble shape {self.shape}")
        if self.n < 1:
            raise TheoryError(f"need at least one sample, got {self.n}")
        if self.alpha <= 0 or self.beta <= 0:
            raise TheoryError("exponents must be positive")
        if self.dc_variance <= 0:
            raise TheoryError("dc_variance must be positive")
        if self.amplitude <= 0:
            raise TheoryError("amplitude must be positive")


def power_law_variance(h: int, w: int, alpha: float, beta: float,
                       dc_variance: float) -> np.ndarray:
    """Per-frequency variance map in unshifted (fft) layout."""
    fi = np.abs(np.rint(np.fft.fftfreq(h) * h))[:, None]
    fj = np.abs(np.rint(np.fft.fftfreq(w) * w))[None, :]
    denom = fi ** alpha + fj ** beta
    with np.errstate(divide="ignore"):
        var = np.where(denom > 0, 1.0 / np.where(denom > 0, denom, 1.0), dc_variance)
    return var


def _conjugate_symmetrize(z: np.ndarray) -> np.ndarray:
    """(Z + conj(Z[-i,-j]))/2: unit-variance, conjugate-symmetric field."""
    h, w = z.shape
    ri = (-np.arange(h)) % h
    rj = (-np.arange(w)) % w
    return 0.5 * (z + np.conj(z[np.ix_(ri, rj)]))


def generate_powerlaw(ensemble: PowerLawEnsemble) -> Dataset:
    """Draw n real images whose DFT variances follow the power law.

    Images are mean-zero reals with no [0,1] clamping; pixel-domain
    samples come from exact inverse FFT of the drawn coefficients, so a
    forward transform recovers exactly the intended statistics.
    """
    k, h, w = ensemble.shape
    std = ensemble.amplitude * np.sqrt(power_law_variance(
        h, w, ensemble.alpha, ensemble.beta, ensemble.dc_variance))
    items = []
    width = max(4, len(str(ensemble.n - 1)))
    for index in range(ensemble.n):
        rng = derive_rng(ensemble.seed, "powerlaw", index)
        channels = []
        for _ in range(k):
            z = rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w))
            coeffs = _conjugate_symmetrize(z) * std
            channels.append(np.fft.ifft2(coeffs).real)
        items.append((
            f"sample{index:0{width}d}",
            Image.from_array(np.stack(channels), bounded=False),
        ))
    name = f"powerlaw-a{ensemble.alpha:g}-b{ensemble.beta:g}-n{ensemble.n}"
    return Dataset(name, tuple(items))


# ---------------------------------------------------------------------------
# pass-band masks


@dataclass(frozen=True)
class FrequencyMask:
    """Centered boolean pass band for a latent budget r over K channels."""

    values: np.ndarray
    mode: str
    r: int
    k: int

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.dtype != bool:
            raise TheoryError("mask must be a 2-D boolean array")
        self.values.setflags(write=False)

    @property
    def kept(self) -> int:
        return int(self.values.sum())

    @property
    def radius(self) -> float:
        """Radius of the disk with the same area budget."""
        return float(np.sqrt(self.r / (np.pi * self.k)))


def lemma1_mask(r: int, k: int, h: int, w: int, mode: str = "disk", *,
                alpha: float = 2.0, beta: float = 2.0) -> FrequencyMask:
    """Predicted pass band of a rank-r linear autoencoder.

    disk: keep integer frequencies with i^2 + j^2 <= r/(pi K).
    variance_rank: keep the ceil(r/K) highest-variance frequencies under
    the power law (DC first; ties by (|i|, |j|, i, j) lexicographic).
    """
    if r < 0 or r > k * h * w:
        raise TheoryError(f"r={r} outside [0, {k * h * w}]")
    if mode == "disk":
        fi = radius_grid(h, w)
        values = fi ** 2 <= r / (np.pi * k)
        if r == 0:
            values = np.zeros((h, w), dtype=bool)
        return FrequencyMask(values, "disk", r, k)
    if mode == "variance_rank":
        keep = int(np.ceil(r / k)) if r else 0
        fi = np.fft.fftshift(np.rint(np.fft.fftfreq(h) * h).astype(np.int64))
        fj = np.fft.fftshift(np.rint(np.fft.fftfreq(w) * w).astype(np.int64))
        coords = [(int(i), int(j)) for i in fi for j in fj]
        def sort_key(coord):
            i, j = coord
            if i == 0 and j == 0:
                variance = np.inf
            else:
                variance = 1.0 / (abs(i) ** alpha + abs(j) ** beta)
            return (-variance, abs(i), abs(j), i, j)
        ranked = sorted(coords, key=sort_key)[:keep]
        index_i = {int(v): idx for idx, v in enumerate(fi)}
        index_j = {int(v): idx for idx, v in enumerate(fj)}
        values = np.zeros((h, w), dtype=bool)
        for i, j in ranked:
            values[index_i[i], index_j[j]] = True
        return FrequencyMask(values, "variance_rank", r, k)
    raise TheoryError(f"unknown mask mode {mode!r}")


def boundary_ring(mask: FrequencyMask, h: int, w: int,
                  width: float = 2.0) -> np.ndarray:
    """Coordinates within ``width`` of the ideal disk radius (excluded
    from per-frequency comparisons; the approximation is loosest there)."""
    return np.abs(radius_grid(h, w) - mask.radius) <= width


# ---------------------------------------------------------------------------
# predicted spectra


def _fft_pairs(dataset: Dataset, corruption):
    """Per item: centered FFT stacks of the clean and corrupted image."""
    for index, (_, image) in enumerate(dataset):
        fx = np.fft.fftshift(np.fft.fft2(image.data), axes=(-2, -1))
        corrupted = corruption.apply_to(image, index, clamp=False)
        fc = np.fft.fftshift(np.fft.fft2(corrupted.data), axes=(-2, -1))
        yield fx, fc


def _check_mask_size(mask: FrequencyMask, dataset: Dataset) -> tuple[int, int]:
    if dataset.common_size is None:
        raise TheoryError("predictions require a common image size")
    h, w = dataset.common_size
    if mask.values.shape != (h, w):
        raise TheoryError(
            f"mask shape {mask.values.shape} != dataset size {(h, w)}"
        )
    return h, w


def predict_D(mask: FrequencyMask, dataset: Dataset) -> Spectrum:
    """Predicted distortion spectrum: 0 in the pass band, mean |X^| outside."""
    h, w = _check_mask_size(mask, dataset)
    acc = np.zeros((h, w))
    for _, image in dataset:
        fx = np.fft.fftshift(np.fft.fft2(image.data), axes=(-2, -1))
        acc += np.where(mask.values, 0.0, np.abs(fx).mean(axis=0))
    return Spectrum(acc / len(dataset), centered=True, tag="pred-D", n=len(dataset))


def predict_R(mask: FrequencyMask, dataset: Dataset, corruption) -> Spectrum:
    """Predicted robustness spectrum.

    Inside the pass band the codec reproduces the corrupted input, so the
    error against the clean image is the corruption difference; outside,
    everything is dropped and the clean magnitude remains.
    """
    h, w = _check_mask_size(mask, dataset)
    acc = np.zeros((h, w))
    n = 0
    for fx, fc in _fft_pairs(dataset, corruption):
        inside = np.abs(fc - fx).mean(axis=0)
        outside = np.abs(fx).mean(axis=0)
        acc += np.where(mask.values, inside, outside)
        n += 1
    return Spectrum(acc / n, centered=True, tag="pred-R", n=n)


def predict_G(mask: FrequencyMask, dataset: Dataset, corruption) -> Spectrum:
    """Predicted generalization spectrum via the three-term expansion.

    Outside the pass band the per-frequency error is |corrupted|, written
    as sqrt(|X^|^2 + 2 Re(conj(X^) d) + |d|^2) with d the corruption
    difference; the expansion reconstructs a squared modulus, so negative
    float residue beyond -1e-12 (relative) is a bug, smaller is clipped.
    """
    h, w = _check_mask_size(mask, dataset)
    acc = np.zeros((h, w))
    n = 0
    for fx, fc in _fft_pairs(dataset, corruption):
        d = fc - fx
        power = np.abs(fx) ** 2
        cross = 2.0 * np.real(np.conj(fx) * d)
        tail = np.abs(d) ** 2
        total = power + cross + tail
        scale = 1.0 + power + tail
        if (total < -1e-12 * scale).any():
            raise TheoryError("three-term expansion went negative beyond tolerance")
        outside = np.sqrt(np.clip(total, 0.0, None)).mean(axis=0)
        acc += np.where(mask.values, 0.0, outside)
        n += 1
    return Spectrum(acc / n, centered=True, tag="pred-G", n=n)


def predict_reconstruction(mask: FrequencyMask, image: Image) -> Image:
    """Lemma-style ideal codec: keep pass-band coefficients, drop the rest."""
    if mask.values.shape != (image.h, image.w):
        raise TheoryError(
            f"mask shape {mask.values.shape} != image size {(image.h, image.w)}"
        )
    unshifted = np.fft.ifftshift(mask.values)
    recon = [
        np.fft.ifft2(np.fft.fft2(ch) * unshifted).real for ch in image.data
    ]
    return Image.from_array(np.stack(recon), bounded=False)


@dataclass(frozen=True)
class MaskProjectionCodec:
    """Closed-form rank-r linear codec: pass-band projection per channel.

    Drop-in for the metric helpers wherever a fitted codec would go, so
    the predicted low-pass behaviour can be measured with the same
    machinery as the empirical codecs.
    """

    mask: FrequencyMask
    kind: str = "mask_projection"

    @property
    def rate_param(self) -> dict:
        return {"r": self.mask.r, "delta": 0.0}

    def roundtrip(self, image: Image) -> tuple[Image, CompressedBlob]:
        recon = predict_reconstruction(self.mask, image)
        blob = CompressedBlob(
            kind=self.kind, shape=image.shape, rate_param=self.rate_param,
            n_symbols=self.mask.r, exact_bits=0, entropy_bits=0.0,
        )
        return recon, blob


# ---------------------------------------------------------------------------
# empirical-vs-predicted report


@dataclass(frozen=True)
class _ProjectionCodec:
    """Quantization-free limit of the linear codec (pure projection)."""

    inner: LinearAECodec
    kind: str = "linear_ae_projection"

    @property
    def rate_param(self) -> dict:
        return {"r": self.inner.r, "delta": 0.0}

    def roundtrip(self, image: Image) -> tuple[Image, CompressedBlob]:
        recon = self.inner.project(image)
        blob = CompressedBlob(
            kind=self.kind, shape=image.shape, rate_param=self.rate_param,
            n_symbols=self.inner.r, exact_bits=0, entropy_bits=0.0,
        )
        return recon, blob


@dataclass(frozen=True)
class _UnclampedCorruption:
    """Adapter forcing theory-mode (no clamp) corruption application."""

    inner: object

    def apply_to(self, image: Image, item_index: int, **_) -> Image:
        return self.inner.apply_to(image, item_index, clamp=False)


def _relative_error(pred: np.ndarray, emp: np.ndarray,
                    denom: np.ndarray) -> np.ndarray:
    safe = np.where(denom > 0, denom, 1.0)
    return np.abs(pred - emp) / safe


def _stats(values: np.ndarray) -> dict:
    flat = np.asarray(values, dtype=np.float64).ravel()
    if flat.size == 0:
        return {"count": 0, "mean": 0.0, "median": 0.0, "p95": 0.0, "max": 0.0}
    return {
        "count": int(flat.size),
        "mean": float(flat.mean()),
        "median": float(np.median(flat)),
        "p95": float(np.percentile(flat, 95)),
        "max": float(flat.max()),
    }


def mask_agreement(emp_d: Spectrum, mask: FrequencyMask,
                   reference: Spectrum, *, factor: float = 0.5,
                   ring_width: float = 2.0) -> float:
    """Fraction of off-ring coordinates where low empirical distortion
    (below factor x dataset magnitude) coincides with the mask."""
    ring = boundary_ring(mask, emp_d.h, emp_d.w, ring_width)
    predicted_low = mask.values
    observed_low = emp_d.values < factor * reference.values
    agree = (predicted_low == observed_low) & ~ring
    denom = int((~ring).sum())
    return float(agree.sum() / denom) if denom else 1.0


def frequency_covariance_offdiag(dataset: Dataset, *, max_coords: int = 64,
                                 seed: int = 0) -> dict:
    """Assumption (I) diagnostic: off-diagonal mass of the frequency
    covariance over the lowest-|frequency| coordinates (subsampled for
    tractability)."""
    if dataset.common_size is None:
        raise TheoryError("covariance diagnostic requires a common size")
    h, w = dataset.common_size
    radii = radius_grid(h, w).ravel()
    order = np.argsort(radii, kind="stable")[:max_coords]
    rows = []
    for _, image in dataset:
        fx = np.fft.fftshift(np.fft.fft2(image.data), axes=(-2, -1))
        rows.append(fx.mean(axis=0).ravel()[order])
    stack = np.array(rows)
    stack -= stack.mean(axis=0, keepdims=True)
    cov = (stack.conj().T @ stack) / max(len(rows) - 1, 1)
    diag = np.abs(np.diag(cov)).sum()
    off = np.abs(cov).sum() - np.abs(np.diag(cov)).sum()
    ratio = float(off / diag) if diag > 0 else 0.0
    level = "low" if ratio < 0.5 else ("moderate" if ratio < 2.0 else "high")
    return {"offdiag_to_diag": ratio, "coords": int(order.size), "level": level}


def theory_report(
    r: int,
    dataset: Dataset,
    corruptions: list,
    *,
    alpha: float = 2.0,
    beta: float = 2.0,
    agreement_factor: float = 0.5,
    ring_width: float = 2.0,
    fit_dataset: Dataset | None = None,
    out_dir=None,
) -> dict:
    """Fit the projection-limit codec, compare empirical and predicted
    spectra under both mask modes, and optionally write spectra + JSON.

    ``fit_dataset`` (default: the evaluation dataset itself) lets the
    codec be estimated on more samples than are evaluated; subspace
    estimation error decays like 1/sqrt(n_fit) and otherwise pollutes the
    per-frequency comparison.
    """
    if dataset.common_size is None:
        raise TheoryError("theory report requires a common image size")
    h, w = dataset.common_size
    k = dataset.k

    source = fit_dataset if fit_dataset is not None else dataset
    if source.common_size != dataset.common_size or source.k != k:
        raise TheoryError("fit dataset shape differs from evaluation dataset")
    fitted = fit_linear_ae(source, r, clamp_output=False)
    codec = _ProjectionCodec(fitted)
    effective_r = fitted.r

    masks = {
        mode: lemma1_mask(effective_r, k, h, w, mode, alpha=alpha, beta=beta)
        for mode in ("disk", "variance_rank")
    }
    reference = dataset_spectrum(dataset)
    ring = {mode: boundary_ring(mask, h, w, ring_width)
            for mode, mask in masks.items()}

    spectra_files: dict[str, str] = {}
    report: dict = {
        "r_requested": int(r),
        "r": int(effective_r),
        "n": len(dataset),
        "shape": [k, h, w],
        "alpha": alpha,
        "beta": beta,
        "masks": {
            mode: {
                "kept": mask.kept,
                "radius": mask.radius,
                "mode": mode,
            } for mode, mask in masks.items()
        },
        "assumption1": frequency_covariance_offdiag(dataset),
        "corruptions": [],
    }

    emp_d = None
    all_spectra: dict[str, Spectrum] = {}
    for corruption in corruptions:
        wrapped = _UnclampedCorruption(corruption)
        bundle = metrics_bundle(codec, dataset, wrapped)
        emp_d = bundle["D"]
        name = getattr(corruption, "name", corruption.__class__.__name__)
        severity = int(getattr(corruption, "severity", 0))
        key = f"{name}-s{severity}"
        all_spectra["emp_D"] = bundle["D"]
        all_spectra[f"emp_G_{key}"] = bundle["G"]
        all_spectra[f"emp_R_{key}"] = bundle["R"]
        all_spectra[f"corruption_{key}"] = bundle["corruption"]

        entry = {
            "name": name,
            "severity": severity,
            "triangle": triangle_audit(bundle["corruption"], bundle["G"], bundle["R"]),
            "modes": {},
        }
        for mode, mask in masks.items():
            pred_r = predict_R(mask, dataset, corruption)
            pred_g = predict_G(mask, dataset, corruption)
            all_spectra[f"pred_R_{mode}_{key}"] = pred_r
            all_spectra[f"pred_G_{mode}_{key}"] = pred_g

            off_ring = ~ring[mode]
            relerr_r = _relative_error(pred_r.values, bundle["R"].values,
                                       bundle["R"].values)
            corrupted_ref = _corrupted_reference(dataset, corruption)
            relerr_g = _relative_error(pred_g.values, bundle["G"].values,
                                       corrupted_ref.values)
            cross = _cross_term_ratio(mask, dataset, corruption)
            entry["modes"][mode] = {
                "relerr_R_offring": _stats(relerr_r[off_ring]),
                "relerr_G_offring": _stats(relerr_g[off_ring]),
                "cross_term_ratio": cross,
            }
        report["corruptions"].append(entry)

    if emp_d is None:
        emp_d = metrics_bundle(codec, dataset, _IdentityCorruption())["D"]
        all_spectra["emp_D"] = emp_d
    for mode, mask in masks.items():
        pred_d = predict_D(mask, dataset)
        all_spectra[f"pred_D_{mode}"] = pred_d
        off_ring = ~ring[mode]
        relerr_d = _relative_error(pred_d.values, emp_d.values, reference.values)
        report["masks"][mode]["relerr_D_offring"] = _stats(relerr_d[off_ring])
        report["masks"][mode]["agreement"] = mask_agreement(
            emp_d, mask, reference,
            factor=agreement_factor, ring_width=ring_width,
        )

    if out_dir is not None:
        from .spectrum_io import write_pfm
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for label, spectrum in all_spectra.items():
            rel = f"{label}.pfm"
            write_pfm(spectrum, out_dir / rel)
            spectra_files[label] = rel
        report["spectra_files"] = spectra_files
        (out_dir / "report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n"
        )
    return report


@dataclass(frozen=True)
class _IdentityCorruption:
    name: str = "identity"
    severity: int = 0

    def apply_to(self, image: Image, item_index: int, **_) -> Image:
        return image


def _corrupted_reference(dataset: Dataset, corruption) -> Spectrum:
    """Mean PSD of the corrupted images (denominator for G errors, whose
    prediction is identically zero inside the pass band)."""
    acc = None
    n = 0
    for _, fc in _fft_pairs(dataset, corruption):
        mag = np.abs(fc).mean(axis=0)
        acc = mag if acc is None else acc + mag
        n += 1
    return Spectrum(acc / n, centered=True, tag="corrupted-PSD", n=n)


def _cross_term_ratio(mask: FrequencyMask, dataset: Dataset, corruption) -> dict:
    """Outside the pass band, |dataset-mean cross term| relative to the
    dataset-mean quadratic terms, per frequency."""
    h, w = mask.values.shape
    cross_acc = np.zeros((h, w))
    quad_acc = np.zeros((h, w))
    n = 0
    for fx, fc in _fft_pairs(dataset, corruption):
        d = fc - fx
        cross_acc += (2.0 * np.real(np.conj(fx) * d)).mean(axis=0)
        quad_acc += (np.abs(fx) ** 2 + np.abs(d) ** 2).mean(axis=0)
        n += 1
    outside = ~mask.values
    ratio = np.abs(cross_acc[outside]) / np.where(
        quad_acc[outside] > 0, quad_acc[outside], 1.0
    )
    stats = _stats(ratio)
    stats["fraction_within_5pct"] = float((ratio <= 0.05).mean()) if ratio.size else 1.0
    return stats
