#!/usr/bin/env python3
"""Generate the bundled demo datasets.

Writes two small PNG corpora used by the tests and the demo scripts:

  data/demo_gray128   20 grayscale 128x128 images
  data/demo_rgb64      8 RGB 64x64 images

Both are synthetic but tuned to look statistically like photographs:
a smooth structured field whose amplitude spectrum falls off as a
power law, plus (for the gray set) a faint high-frequency grain so
the images are not band-limited. Everything is derived from fixed
seeds through the package's own counter-based RNG, so rerunning the
script reproduces the corpus byte for byte.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from scbench.images import Dataset, Image, write_dataset
from scbench.seeding import derive_rng

GRAY_SEED = 2024
GRAY_COUNT = 20
GRAY_SIZE = 128

RGB_SEED = 2025
RGB_COUNT = 8
RGB_SIZE = 64

# Amplitude-spectrum exponent of the structured component. 1.35 puts the
# power spectrum near 1/f^2.7, inside the range measured on photographs.
STRUCT_EXPONENT = 1.35
STRUCT_KNEE = 2.0 / GRAY_SIZE   # falloff knee, cycles per pixel
STRUCT_STD = 0.18               # pixel std of the structured field
GRAIN_STD = 0.045               # pixel std of the grain field
GRAIN_CUT = 0.45                # grain band lower edge, cycles per pixel
GRAIN_CUT_WIDTH = 0.015         # softness of that edge
GRAIN_TILT = 0.35               # exponent of the grain band's rising tail
GRAIN_FLOOR = 0.08              # relative level of the broadband residual

# The structured part of every gray image is a random mix of a fixed bank
# of modes: two illumination ramps, fields with soft step edges, narrow
# band textures, and smooth power-law fields. The scene content of the
# whole corpus therefore spans a small linear subspace while the grain is
# independent per image. This mimics what a photo corpus looks like to a
# subspace codec: compressible structure with edges and texture, on top
# of an incompressible sensor-noise floor. Every mode is band-limited to
# MODE_BANDLIMIT so structure and grain also separate cleanly in
# frequency: everything above that radius is grain, nothing below it is.
MODE_KINDS = ("ramp", "ramp", "edge", "edge", "texture", "texture",
              "smooth", "smooth", "smooth", "smooth")
MODE_DECAY = 0.5                # mode k carries weight ~ (k+1)^-MODE_DECAY
MODE_BANDLIMIT = 0.28           # structure cutoff, cycles per pixel
EDGE_WIDTH = 0.15               # tanh knee as a fraction of the field std
TEXTURE_FREQ = 0.265            # texture band center, cycles per pixel
TEXTURE_BW = 0.012              # texture band width, cycles per pixel
TEXTURE_GAIN = 0.5              # textures are fainter than large-scale structure

RGB_EXPONENT = 1.6
RGB_STD = 0.17
CHROMA_STD = 0.05


def _power_law_field(rng: np.random.Generator, n: int, exponent: float,
                     knee: float) -> np.ndarray:
    """Unit-variance field with amplitude spectrum ~ (knee + f)^-exponent."""
    white = rng.standard_normal((n, n))
    fy = np.fft.fftfreq(n)[:, None]
    fx = np.fft.fftfreq(n)[None, :]
    freq = np.hypot(fy, fx)
    gain = (knee + freq) ** -exponent
    gain[0, 0] = gain.ravel()[1]  # keep DC finite; the mean is re-set anyway
    field = np.fft.ifft2(np.fft.fft2(white) * gain).real
    field -= field.mean()
    return field / field.std()


def _grain_field(rng: np.random.Generator, n: int) -> np.ndarray:
    """Unit-variance noise whose amplitude spectrum rises with frequency.

    Most of the power sits in a band above GRAIN_CUT (a soft step times a
    slow power of frequency), on top of a much fainter broadband residual
    that also rises. The sum is monotone in frequency: zero at DC, barely
    above zero through the structure band, climbing through the cut, and
    still rising out to the grid corners.
    """
    white = rng.standard_normal((n, n))
    fy = np.fft.fftfreq(n)[:, None]
    fx = np.fft.fftfreq(n)[None, :]
    freq = np.hypot(fy, fx)
    rel = freq / freq.max()
    edge = 0.5 * (1.0 + np.tanh((freq - GRAIN_CUT) / GRAIN_CUT_WIDTH))
    gain = edge * rel ** GRAIN_TILT + GRAIN_FLOOR * rel ** 1.2
    field = np.fft.ifft2(np.fft.fft2(white) * gain).real
    field -= field.mean()
    return field / field.std()


def _band_limit(field: np.ndarray, max_freq: float) -> np.ndarray:
    """Zero every Fourier coefficient above max_freq (cycles per pixel)."""
    n = field.shape[0]
    fy = np.fft.fftfreq(n)[:, None]
    fx = np.fft.fftfreq(n)[None, :]
    keep = np.hypot(fy, fx) <= max_freq
    out = np.fft.ifft2(np.fft.fft2(field) * keep).real
    out -= out.mean()
    return out / out.std()


def _gradient_plane(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random unit-variance illumination ramp."""
    coords = (np.arange(n) - (n - 1) / 2.0) / n
    a, b = rng.standard_normal(2)
    plane = a * coords[:, None] + b * coords[None, :]
    std = plane.std()
    return plane / std if std > 0 else plane


def _bandpass_field(rng: np.random.Generator, n: int, center: float,
                    width: float) -> np.ndarray:
    """Unit-variance texture: white noise through a Gaussian annulus."""
    white = rng.standard_normal((n, n))
    fy = np.fft.fftfreq(n)[:, None]
    fx = np.fft.fftfreq(n)[None, :]
    freq = np.hypot(fy, fx)
    gain = np.exp(-0.5 * ((freq - center) / width) ** 2)
    field = np.fft.ifft2(np.fft.fft2(white) * gain).real
    field -= field.mean()
    return field / field.std()


def _gray_mode_bank() -> np.ndarray:
    """Fixed (len(MODE_KINDS), n, n) bank of unit-variance fields."""
    n = GRAY_SIZE
    coords = (np.arange(n) - (n - 1) / 2.0) / n
    ramps = iter((coords[:, None] * np.ones((1, n)),
                  np.ones((n, 1)) * coords[None, :]))
    modes = []
    for k, kind in enumerate(MODE_KINDS):
        rng = derive_rng(GRAY_SEED, "demo-mode", k)
        if kind == "ramp":
            field = next(ramps)
        elif kind == "edge":
            field = _power_law_field(rng, n, STRUCT_EXPONENT, STRUCT_KNEE)
            field = np.tanh(field / EDGE_WIDTH)
        elif kind == "texture":
            field = _bandpass_field(rng, n, TEXTURE_FREQ, TEXTURE_BW)
        else:
            field = _power_law_field(rng, n, STRUCT_EXPONENT, STRUCT_KNEE)
        modes.append(_band_limit(field, MODE_BANDLIMIT))
    return np.stack(modes)


_GRAY_MODES: np.ndarray | None = None


def make_gray_image(index: int) -> np.ndarray:
    global _GRAY_MODES
    if _GRAY_MODES is None:
        _GRAY_MODES = _gray_mode_bank()
    rng = derive_rng(GRAY_SEED, "demo-gray", index)
    n_modes = len(MODE_KINDS)
    weights = (np.arange(n_modes) + 1.0) ** -MODE_DECAY
    gains = np.where(np.array(MODE_KINDS) == "texture", TEXTURE_GAIN, 1.0)
    weights = weights * gains
    weights /= np.sqrt(np.sum(weights ** 2))
    coeff = rng.standard_normal(n_modes) * weights
    structure = np.tensordot(coeff, _GRAY_MODES, axes=1)
    grain = _grain_field(rng, GRAY_SIZE)
    img = 0.5 + STRUCT_STD * structure + GRAIN_STD * grain
    return np.clip(img, 0.0, 1.0)[None, :, :]


def make_rgb_image(index: int) -> np.ndarray:
    rng = derive_rng(RGB_SEED, "demo-rgb", index)
    luma = _power_law_field(rng, RGB_SIZE, RGB_EXPONENT, 2.0 / RGB_SIZE)
    plane = _gradient_plane(rng, RGB_SIZE)
    base = 0.5 + RGB_STD * (luma + 0.3 * plane)
    channels = []
    for _ in range(3):
        chroma = _power_law_field(rng, RGB_SIZE, RGB_EXPONENT, 2.0 / RGB_SIZE)
        channels.append(base + CHROMA_STD * chroma)
    return np.clip(np.stack(channels), 0.0, 1.0)


def build(root: Path) -> None:
    gray_items = [
        (f"img{i:02d}", Image.from_array(make_gray_image(i)))
        for i in range(GRAY_COUNT)
    ]
    gray = Dataset("demo_gray128", gray_items)
    gray_manifest = write_dataset(
        gray, root / "demo_gray128",
        source="tools/make_demo_data.py",
        provenance={
            "generator": "make_demo_data",
            "seed": GRAY_SEED,
            "struct_exponent": STRUCT_EXPONENT,
            "struct_std": STRUCT_STD,
            "mode_kinds": list(MODE_KINDS),
            "mode_decay": MODE_DECAY,
            "mode_bandlimit": MODE_BANDLIMIT,
            "grain_cut": GRAIN_CUT,
            "grain_floor": GRAIN_FLOOR,
            "grain_std": GRAIN_STD,
        },
    )
    gray_manifest.save(root / "demo_gray128" / "manifest.json")
    print(f"wrote {len(gray)} images to {root / 'demo_gray128'}")

    rgb_items = [
        (f"img{i:02d}", Image.from_array(make_rgb_image(i)))
        for i in range(RGB_COUNT)
    ]
    rgb = Dataset("demo_rgb64", rgb_items)
    rgb_manifest = write_dataset(
        rgb, root / "demo_rgb64",
        source="tools/make_demo_data.py",
        provenance={
            "generator": "make_demo_data",
            "seed": RGB_SEED,
            "exponent": RGB_EXPONENT,
        },
    )
    rgb_manifest.save(root / "demo_rgb64" / "manifest.json")
    print(f"wrote {len(rgb)} images to {root / 'demo_rgb64'}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--root", type=Path,
        default=Path(__file__).resolve().parents[1] / "data",
        help="output directory (default: <repo>/data)",
    )
    args = parser.parse_args()
    build(args.root)


if __name__ == "__main__":
    main()
