"""Defocus blur from generalized Gaussian kernels and parametric sensor noise.

The noise model is heteroscedastic shot + read Gaussian noise applied in
sRGB: variance = shot_gain * x + read_sigma^2 per pixel, clamped after.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .colorcore import ImageF
from .errors import ConfigError, ShapeError, ValidationError


@dataclass(frozen=True)
class DefocusKernel:
    taps: np.ndarray  # size x size, non-negative, sums to 1
    sigma: float
    beta: float

    @property
    def size(self) -> int:
        return self.taps.shape[0]


@dataclass(frozen=True)
class NoiseParams:
    shot_gain: float  # signal-proportional variance
    read_sigma: float  # additive std

    def __post_init__(self):
        if self.shot_gain < 0 or self.read_sigma < 0:
            raise ValidationError(
                f"noise parameters must be non-negative, got {self.shot_gain}, {self.read_sigma}"
            )


def generalized_gaussian_kernel(sigma: float, beta: float, size: int) -> DefocusKernel:
    """Normalized radial kernel exp(-0.5 * ((x^2+y^2)/sigma^2)^beta).

    beta = 1 recovers the plain Gaussian; beta < 1 gives heavier tails,
    beta > 1 a flatter, more disk-like profile.
    """
    if size < 1 or size % 2 == 0:
        raise ConfigError(f"kernel size must be odd and positive, got {size}")
    if sigma <= 0 or beta <= 0:
        raise ValidationError(f"sigma and beta must be positive, got {sigma}, {beta}")
    c = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    rho2 = ((xx - c) ** 2 + (yy - c) ** 2) / (sigma * sigma)
    taps = np.exp(-0.5 * np.power(rho2, beta))
    taps /= taps.sum()
    return DefocusKernel(taps, float(sigma), float(beta))


def convolve2d_reflect(img: ImageF, kernel: DefocusKernel) -> ImageF:
    """Same-size 2-D convolution with mirror (no edge repeat) padding."""
    size = kernel.size
    h, w, _ = img.shape
    p = (size - 1) // 2
    if p >= h or p >= w:
        raise ShapeError(f"kernel {size} too large for image {h} x {w}")
    padded = np.pad(img.data.astype(np.float64), ((p, p), (p, p), (0, 0)), mode="reflect")
    win = sliding_window_view(padded, (size, size), axis=(0, 1))  # H x W x C x k x k
    out = np.einsum("hwcij,ij->hwc", win, kernel.taps)
    return ImageF(out.astype(np.float32), img.domain)


def add_noise(img: ImageF, p: NoiseParams, rng_seed: int) -> ImageF:
    """Seeded shot/read noise; mean-preserving before the final clamp."""
    rng = np.random.default_rng(rng_seed)
    x = img.data.astype(np.float64)
    var = p.shot_gain * np.clip(x, 0.0, None) + p.read_sigma**2
    noisy = x + rng.standard_normal(x.shape) * np.sqrt(var)
    return ImageF(np.clip(noisy, 0.0, 1.0).astype(np.float32), img.domain)
