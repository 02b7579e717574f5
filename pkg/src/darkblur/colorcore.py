"""Color-space and camera-response math shared by every pipeline stage.

Images are float32 rasters tagged with an explicit domain: SRGB values live
in [0, 1], LINEAR values are non-negative scene-radiance estimates and may
exceed 1 after clipping reverse. The camera response is modeled as the pure
power law x^2.2 (not the piecewise sRGB standard curve), and lightness uses
the CIE L* pipeline with the D65 white point.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DomainError, ShapeError, ValidationError

GAMMA = 2.2

# Y row of the sRGB-to-XYZ (D65) matrix; only Y is needed for L*.
_Y_WEIGHTS = np.array([0.2126729, 0.7151522, 0.0721750], dtype=np.float64)

# CIE L* cube-root threshold constants.
_LAB_EPS = (6.0 / 29.0) ** 3
_LAB_KAPPA = (29.0 / 3.0) ** 3


class Domain(enum.Enum):
    SRGB = "srgb"
    LINEAR = "linear"


@dataclass(frozen=True)
class ImageF:
    """Floating-point raster, H x W x C, with an explicit domain tag."""

    data: np.ndarray
    domain: Domain

    def __post_init__(self):
        d = self.data
        if d.ndim != 3:
            raise ShapeError(f"image must be H x W x C, got shape {d.shape}")
        h, w, c = d.shape
        if h < 1 or w < 1 or c not in (1, 3):
            raise ShapeError(f"bad image shape {d.shape}: need H,W >= 1 and C in {{1,3}}")
        if d.dtype != np.float32:
            object.__setattr__(self, "data", d.astype(np.float32))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def assert_srgb_range(self, atol: float = 1e-5):
        """SRGB invariant: values in [0, 1]. Checked on load/save."""
        if self.domain is not Domain.SRGB:
            raise DomainError(f"expected SRGB image, got {self.domain}")
        lo, hi = float(self.data.min()), float(self.data.max())
        if lo < -atol or hi > 1.0 + atol:
            raise ValidationError(f"sRGB values out of [0,1]: min={lo}, max={hi}")


# A saturation mask is a plain H x W boolean array.
SaturationMask = np.ndarray


def srgb_to_linear(img: ImageF) -> ImageF:
    """Invert the camera response: elementwise x^2.2, SRGB -> LINEAR."""
    if img.domain is not Domain.SRGB:
        raise DomainError(f"srgb_to_linear needs an SRGB image, got {img.domain}")
    lin = np.power(img.data.astype(np.float64), GAMMA)
    return ImageF(lin.astype(np.float32), Domain.LINEAR)


def linear_to_srgb(img: ImageF) -> ImageF:
    """Apply the camera response: clamp to [0, 1], then x^(1/2.2).

    The clamp is the dynamic-range clip of an 8-bit capture; it runs before
    the inverse gamma so out-of-range radiance saturates to white.
    """
    if img.domain is not Domain.LINEAR:
        raise DomainError(f"linear_to_srgb needs a LINEAR image, got {img.domain}")
    clipped = np.clip(img.data.astype(np.float64), 0.0, 1.0)
    srgb = np.power(clipped, 1.0 / GAMMA)
    return ImageF(srgb.astype(np.float32), Domain.SRGB)


def lightness_from_linear(linear_rgb: np.ndarray) -> np.ndarray:
    """CIE L* (in [0, 100]) from linear RGB values, D65 white point."""
    if linear_rgb.ndim != 3 or linear_rgb.shape[2] != 3:
        raise ShapeError(f"need H x W x 3 linear RGB, got {linear_rgb.shape}")
    y = linear_rgb.astype(np.float64) @ _Y_WEIGHTS
    f = np.where(y > _LAB_EPS, np.cbrt(y), (_LAB_KAPPA * y + 16.0) / 116.0)
    return (116.0 * f - 16.0).astype(np.float32)


def lab_lightness(img: ImageF) -> np.ndarray:
    """CIE L* channel of an sRGB image (H x W floats in [0, 100])."""
    if img.domain is not Domain.SRGB:
        raise DomainError(f"lab_lightness needs an SRGB image, got {img.domain}")
    if img.shape[2] != 3:
        raise ShapeError("lab_lightness needs a 3-channel image")
    lin = np.power(img.data.astype(np.float64), GAMMA)
    return lightness_from_linear(lin)


def saturation_mask(img: ImageF, delta: float = 98.0) -> SaturationMask:
    """Pixels whose L* exceeds ``delta`` (light sources, streaks)."""
    return lab_lightness(img) > delta


def load_image(path: str | Path) -> ImageF:
    """Read an 8-bit PNG (or any PIL-readable file) as an sRGB float image."""
    with Image.open(path) as im:
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.float32)[:, :, None]
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    img = ImageF(arr / 255.0, Domain.SRGB)
    img.assert_srgb_range()
    return img


def save_image(path: str | Path, img: ImageF):
    """Write an sRGB image as an 8-bit PNG (values rounded, not truncated)."""
    img.assert_srgb_range()
    arr = np.clip(np.round(img.data * 255.0), 0, 255).astype(np.uint8)
    if arr.shape[2] == 1:
        pil = Image.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(arr, mode="RGB")
    pil.save(path, format="PNG")


def _axis_coords(n_in: int, n_out: int):
    """Corner-aligned source coordinates for 1-D bilinear resampling."""
    if n_in == 1 or n_out == 1:
        pos = np.zeros(n_out, dtype=np.float64)
    else:
        pos = np.linspace(0.0, n_in - 1.0, n_out)
    i0 = np.minimum(np.floor(pos).astype(np.int64), max(n_in - 2, 0))
    t = pos - i0
    return i0, t


def resize_bilinear(img: ImageF, new_h: int, new_w: int) -> ImageF:
    """Bilinear resample with image corners pinned to pixel centers.

    Resizing to the current size returns the data unchanged (bit-exact).
    """
    if new_h < 1 or new_w < 1:
        raise ShapeError(f"target size must be positive, got {new_h} x {new_w}")
    h, w, _ = img.shape
    if (new_h, new_w) == (h, w):
        return ImageF(img.data.copy(), img.domain)
    i0, ty = _axis_coords(h, new_h)
    j0, tx = _axis_coords(w, new_w)
    i1 = np.minimum(i0 + 1, h - 1)
    j1 = np.minimum(j0 + 1, w - 1)
    x = img.data.astype(np.float64)
    ty = ty[:, None, None]
    tx = tx[None, :, None]
    out = (
        (1 - ty) * (1 - tx) * x[i0[:, None], j0[None, :]]
        + (1 - ty) * tx * x[i0[:, None], j1[None, :]]
        + ty * (1 - tx) * x[i1[:, None], j0[None, :]]
        + ty * tx * x[i1[:, None], j1[None, :]]
    )
    return ImageF(out.astype(np.float32), img.domain)
