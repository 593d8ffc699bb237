"""Data-fitted linear autoencoder codec.

Fitting solves min ||X W1' W2' - X||_F over centered data, whose optimum
makes W2 W1 the orthogonal projection onto the top-r principal subspace.
The rate knobs are the latent dimension r and the uniform quantization
step delta. Global magnitude pruning sparsifies (W1, W2) jointly along a
cubic sparsity schedule.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from ..images import Dataset, Image
from .base import HEADER_BITS, CodecError, CompressedBlob
from .rangecoder import encode_symbols, stream_entropy_bits


# Finer quantizers spread the latents over a wider integer range, so the
# alphabet the coder sees (and with it the coded size) grows as delta
# shrinks. Past this span the range is impractical to index directly
# (delta -> 0 diagnostics); symbols are then coded through a value table.
_MAX_DIRECT_ALPHABET = 1 << 16


def _code_latent_symbols(symbols: np.ndarray) -> bytes:
    if symbols.size == 0:
        return b""
    low = int(symbols.min())
    span = int(symbols.max()) - low + 1
    if span <= _MAX_DIRECT_ALPHABET:
        return encode_symbols(symbols - low, span)
    _, indices = np.unique(symbols, return_inverse=True)
    return encode_symbols(indices, int(indices.max()) + 1)


@dataclass(frozen=True)
class LinearAECodec:
    """Affine encode/decode pair around the dataset mean.

    Arrays are treated as immutable once constructed. ``mask1``/``mask2``
    are None until pruning introduces sparsity.
    """

    shape: tuple[int, int, int]
    r: int
    mean: np.ndarray          # (D,)
    w1: np.ndarray            # (r, D)
    w2: np.ndarray            # (D, r)
    delta: float = 1.0 / 64.0
    mask1: np.ndarray | None = None
    mask2: np.ndarray | None = None
    clamp_output: bool = True
    kind: str = "linear_ae"

    def __post_init__(self):
        k, h, w = self.shape
        d = k * h * w
        if self.r < 0 or self.r > d:
            raise CodecError(f"latent dim {self.r} outside [0, {d}]")
        if self.mean.shape != (d,):
            raise CodecError("mean vector does not match image shape")
        if self.w1.shape != (self.r, d) or self.w2.shape != (d, self.r):
            raise CodecError("encoder/decoder matrix shapes do not match r and shape")
        if not self.delta > 0:
            raise CodecError(f"quantization step must be positive, got {self.delta}")

    @property
    def rate_param(self) -> dict:
        return {"r": self.r, "delta": self.delta}

    def effective_weights(self) -> tuple[np.ndarray, np.ndarray]:
        w1 = self.w1 if self.mask1 is None else self.w1 * self.mask1
        w2 = self.w2 if self.mask2 is None else self.w2 * self.mask2
        return w1, w2

    @property
    def sparsity(self) -> float:
        """Fraction of zeroed entries across both matrices."""
        total = self.w1.size + self.w2.size
        if total == 0:
            return 0.0
        if self.mask1 is None and self.mask2 is None:
            return 0.0
        zeros = 0
        zeros += self.w1.size - int(self.mask1.sum()) if self.mask1 is not None else 0
        zeros += self.w2.size - int(self.mask2.sum()) if self.mask2 is not None else 0
        return zeros / total

    def encode_latent(self, image: Image) -> np.ndarray:
        if image.shape != self.shape:
            raise CodecError(f"image shape {image.shape} != codec shape {self.shape}")
        w1, _ = self.effective_weights()
        return w1 @ (image.data.ravel() - self.mean)

    def project(self, image: Image) -> Image:
        """Unquantized reconstruction W2 W1 (x - mu) + mu."""
        w1, w2 = self.effective_weights()
        recon = w2 @ (w1 @ (image.data.ravel() - self.mean)) + self.mean
        return self._wrap(recon)

    def _wrap(self, flat: np.ndarray) -> Image:
        recon = flat.reshape(self.shape)
        if self.clamp_output:
            return Image.from_array(recon, clamp=True)
        return Image.from_array(recon, bounded=False)

    def roundtrip(self, image: Image) -> tuple[Image, CompressedBlob]:
        """Quantized round trip: y -> round(y/delta) -> delta-grid decode."""
        y = self.encode_latent(image)
        symbols = np.rint(y / self.delta).astype(np.int64)
        y_hat = symbols * self.delta
        _, w2 = self.effective_weights()
        recon = self._wrap(w2 @ y_hat + self.mean)

        payload = _code_latent_symbols(symbols)
        blob = CompressedBlob(
            kind=self.kind,
            shape=self.shape,
            rate_param=self.rate_param,
            payload=payload,
            n_symbols=symbols.size,
            exact_bits=HEADER_BITS + 8 * len(payload),
            entropy_bits=stream_entropy_bits(symbols),
        )
        return recon, blob


def fit_linear_ae(dataset: Dataset, r: int, *, delta: float = 1.0 / 64.0,
                  clamp_output: bool = True) -> LinearAECodec:
    """Fit mean + top-r principal subspace from the dataset.

    r above the centered data rank is clipped (with a warning); a
    degenerate dataset yields the rank-0 codec that reconstructs the mean.
    """
    if len(dataset) == 0:
        raise CodecError("cannot fit a codec on an empty dataset")
    x = dataset.as_array()
    n = x.shape[0]
    shape = x.shape[1:]
    d = int(np.prod(shape))
    flat = x.reshape(n, d)
    mean = flat.mean(axis=0)
    centered = flat - mean

    _, s, vh = np.linalg.svd(centered, full_matrices=False)
    tol = s[0] * max(n, d) * np.finfo(np.float64).eps if s.size else 0.0
    rank = int(np.sum(s > tol))
    if r > rank:
        warnings.warn(
            f"latent dim {r} exceeds centered data rank {rank}; clipping",
            stacklevel=2,
        )
        r = rank
    w1 = vh[:r].copy()
    return LinearAECodec(
        shape=shape, r=r, mean=mean, w1=w1, w2=w1.T.copy(),
        delta=delta, clamp_output=clamp_output,
    )


def gmp_schedule(s_i: float, s_f: float, t0: int, dt: int, n: int, t: int) -> float:
    """Cubic sparsity ramp s_t = s_f + (s_i - s_f)(1 - (t-t0)/(n dt))^3."""
    if not 0.0 <= s_i <= s_f < 1.0:
        raise CodecError(f"need 0 <= s_i <= s_f < 1, got s_i={s_i}, s_f={s_f}")
    if dt <= 0 or n <= 0:
        raise CodecError(f"need positive dt and n, got dt={dt}, n={n}")
    offset = t - t0
    if offset < 0 or offset % dt != 0 or offset // dt > n:
        raise CodecError(
            f"t={t} is not on the schedule grid t0 + {{0..{n}}}*{dt}"
        )
    return s_f + (s_i - s_f) * (1.0 - offset / (n * dt)) ** 3


def _masked_refit_w2(codec: LinearAECodec, training: np.ndarray) -> np.ndarray:
    """Least-squares refit of surviving W2 entries against the data.

    With W1 fixed, each output coordinate d solves an independent
    regression of centered x_d on the masked latent columns.
    """
    w1, _ = codec.effective_weights()
    mask2 = codec.mask2 if codec.mask2 is not None else np.ones_like(codec.w2, dtype=bool)
    centered = training.reshape(training.shape[0], -1) - codec.mean
    latents = centered @ w1.T                       # (N, r)
    gram = latents.T @ latents                      # (r, r)
    moment = latents.T @ centered                   # (r, D)
    w2 = np.zeros_like(codec.w2)
    for dim in range(w2.shape[0]):
        cols = np.flatnonzero(mask2[dim])
        if cols.size == 0:
            continue
        sub = gram[np.ix_(cols, cols)]
        rhs = moment[cols, dim]
        solution, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
        w2[dim, cols] = solution
    return w2


def prune_linear_ae(
    codec: LinearAECodec,
    target_sparsity: float,
    steps: tuple[int, int, int] = (0, 1, 4),
    *,
    refit: bool = False,
    training: np.ndarray | None = None,
) -> LinearAECodec:
    """Global magnitude pruning of (W1, W2) along the cubic schedule.

    At each step the globally smallest-magnitude surviving entries are
    zeroed until floor(s_t * total) entries are zero; equal magnitudes
    break toward the lower flat index (W1 raveled first, then W2). With
    ``refit``, surviving W2 entries are re-least-squared after each step.
    """
    if not 0.0 <= target_sparsity < 1.0:
        raise CodecError(f"target sparsity must be in [0, 1), got {target_sparsity}")
    if refit and training is None:
        raise CodecError("refit requires the training data")
    if target_sparsity == 0.0:
        return codec

    t0, dt, n = steps
    s_i = codec.sparsity
    if target_sparsity < s_i:
        raise CodecError(
            f"target sparsity {target_sparsity} below current {s_i:.6f}"
        )
    total = codec.w1.size + codec.w2.size
    split = codec.w1.size

    current = codec
    for step in range(1, n + 1):
        s_t = gmp_schedule(s_i, target_sparsity, t0, dt, n, t0 + step * dt)
        want_zeros = int(np.floor(s_t * total))

        w1, w2 = current.effective_weights()
        mask1 = current.mask1 if current.mask1 is not None else np.ones_like(w1, dtype=bool)
        mask2 = current.mask2 if current.mask2 is not None else np.ones_like(w2, dtype=bool)
        alive = np.concatenate([mask1.ravel(), mask2.ravel()])
        have_zeros = total - int(alive.sum())
        extra = want_zeros - have_zeros
        if extra > 0:
            magnitudes = np.abs(np.concatenate([w1.ravel(), w2.ravel()]))
            magnitudes[~alive] = np.inf
            order = np.argsort(magnitudes, kind="stable")
            alive[order[:extra]] = False
            mask1 = alive[:split].reshape(codec.w1.shape)
            mask2 = alive[split:].reshape(codec.w2.shape)
        current = replace(current, mask1=mask1, mask2=mask2)
        if refit:
            current = replace(current, w2=_masked_refit_w2(current, training))
    return current
