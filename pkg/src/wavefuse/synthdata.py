"""Synthetic grayscale data: random textures for training and blur-half
pairs that mimic multi-focus photography for fusion benchmarks.

Everything here is seeded and deterministic so tests and benchmarks can rely
on byte-identical datasets.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .imageio import GrayImage, resize_bilinear, save_grayscale

__all__ = [
    "make_texture",
    "gaussian_blur",
    "make_multifocus_pair",
    "write_training_set",
    "write_pair_set",
]


def _smooth_field(rng, size: int, grid: int) -> np.ndarray:
    coarse = rng.random((max(grid, 2), max(grid, 2)))
    return resize_bilinear(GrayImage(coarse), size, size).pixels


def make_texture(size: int = 64, seed: int = 0) -> GrayImage:
    """Random texture: low-frequency structure plus fine sinusoidal detail,
    rescaled into [0.05, 0.95].

    The fine component is deliberate.  Gaussian blur barely touches the
    smooth base, so without it a blur-half pair would carry almost no
    focused-vs-defocused contrast for a fusion rule to arbitrate.
    """
    rng = np.random.default_rng(seed)
    field = _smooth_field(rng, size, size // 8)
    field += 0.5 * _smooth_field(rng, size, size // 4)
    yy, xx = np.mgrid[0:size, 0:size] / size
    for _ in range(3):
        fx, fy = rng.uniform(1.0, 4.0, size=2)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        field += 0.08 * np.sin(2.0 * math.pi * (fx * xx + fy * yy) + phase)
    lo, hi = field.min(), field.max()
    field = 0.05 + 0.9 * (field - lo) / (hi - lo)
    for _ in range(4):
        fx, fy = rng.uniform(8.0, 24.0, size=2)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        field += 0.10 * np.sin(2.0 * math.pi * (fx * xx + fy * yy) + phase)
    lo, hi = field.min(), field.max()
    return GrayImage(0.05 + 0.9 * (field - lo) / (hi - lo))


def gaussian_blur(pixels: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with reflect padding (kernel cut at 3 sigma)."""
    if sigma <= 0:
        return np.array(pixels, dtype=np.float64)
    radius = max(1, math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kern = np.exp(-(x * x) / (2.0 * sigma * sigma))
    kern /= kern.sum()
    out = np.asarray(pixels, dtype=np.float64)
    for axis in (0, 1):
        padded = np.pad(out, [(radius, radius) if a == axis else (0, 0) for a in (0, 1)],
                        mode="reflect")
        out = np.apply_along_axis(lambda row: np.convolve(row, kern, mode="valid"), axis, padded)
    return out


def make_multifocus_pair(sharp: GrayImage, sigma: float = 2.0, seam: int = 4):
    """Two copies of one sharp image, each blurred on the opposite half.

    The blur mask ramps linearly over ``seam`` columns around the middle so
    the defocus boundary is soft, like a real depth-of-field edge.
    """
    p = sharp.pixels
    blurred = gaussian_blur(p, sigma)
    w = p.shape[1]
    ramp = np.clip((np.arange(w) - (w / 2 - seam / 2)) / max(seam, 1), 0.0, 1.0)
    right_sharp = p * ramp + blurred * (1.0 - ramp)
    left_sharp = p * (1.0 - ramp) + blurred * ramp
    return GrayImage(np.clip(left_sharp, 0.0, 1.0)), GrayImage(np.clip(right_sharp, 0.0, 1.0))


def write_training_set(directory, count: int, size: int = 64, seed: int = 0) -> list:
    """Write ``count`` texture images as PGM files; returns the paths."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        path = root / f"texture{i:04d}.pgm"
        save_grayscale(make_texture(size, seed=seed + i), path)
        paths.append(path)
    return paths


def write_pair_set(
    directory, count: int, size: int = 64, seed: int = 0, sigma: float = 2.0, seam: int = 4
) -> list:
    """Write ``count`` multi-focus pairs as ``pairNNNN_a/_b.pgm`` files."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    pairs = []
    for i in range(count):
        img_a, img_b = make_multifocus_pair(
            make_texture(size, seed=seed + i), sigma=sigma, seam=seam
        )
        path_a = root / f"pair{i:04d}_a.pgm"
        path_b = root / f"pair{i:04d}_b.pgm"
        save_grayscale(img_a, path_a)
        save_grayscale(img_b, path_b)
        pairs.append((path_a, path_b))
    return pairs
