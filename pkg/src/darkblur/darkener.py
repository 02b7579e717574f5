"""Procedural low-light simulation via spatially-varying reversed curve adjustment.

A smooth per-pixel parameter field alpha in [-1, 0] drives an iterated
quadratic curve x -> x + alpha * x * (1 - x) that only darkens. A global
offset on the field is solved by bisection so the darkened image hits a
requested mean luminance, standing in for a learned exposure-conditioned
enhancer while keeping the same curve family.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .colorcore import Domain, ImageF, resize_bilinear
from .errors import ShapeError, UnreachableExposureError, ValidationError

DEFAULT_ITERATIONS = 3


@dataclass(frozen=True)
class AlphaMap:
    """Per-pixel curve parameter field in [-1, 0], smooth at scale ``smoothness``."""

    data: np.ndarray  # H x W float32
    smoothness: float

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ShapeError(f"alpha map must be H x W, got {self.data.shape}")
        lo, hi = float(self.data.min()), float(self.data.max())
        if lo < -1.0 - 1e-6 or hi > 1e-6:
            raise ValidationError(f"alpha values out of [-1,0]: min={lo}, max={hi}")


@dataclass(frozen=True)
class ExposureSpec:
    target_mean_luminance: float
    iterations: int = DEFAULT_ITERATIONS

    def __post_init__(self):
        if not 0.0 < self.target_mean_luminance < 1.0:
            raise ValidationError(
                f"target mean luminance must be in (0,1), got {self.target_mean_luminance}"
            )
        if self.iterations < 1:
            raise ValidationError(f"iterations must be >= 1, got {self.iterations}")


def generate_alpha_map(
    rng_seed: int,
    h: int,
    w: int,
    smoothness: float,
    base_level: float,
    amplitude: float = 0.25,
) -> AlphaMap:
    """Smooth random field in [-1, 0] centered on ``base_level``.

    A coarse seeded noise grid (one node per ``smoothness`` pixels) is
    bilinearly upsampled, which bounds neighboring differences by
    2 * amplitude / smoothness before the final clamp.
    """
    if smoothness < 1:
        raise ValidationError(f"smoothness must be >= 1, got {smoothness}")
    if not -1.0 <= base_level <= 0.0:
        raise ValidationError(f"base_level must be in [-1,0], got {base_level}")
    if not 0.0 <= amplitude <= 1.0:
        raise ValidationError(f"amplitude must be in [0,1], got {amplitude}")
    rng = np.random.default_rng(rng_seed)
    ch = max(2, int(np.ceil((h - 1) / smoothness)) + 1)
    cw = max(2, int(np.ceil((w - 1) / smoothness)) + 1)
    coarse = base_level + amplitude * rng.uniform(-1.0, 1.0, size=(ch, cw))
    field = resize_bilinear(
        ImageF(coarse[:, :, None].astype(np.float32), Domain.LINEAR), h, w
    ).data[:, :, 0]
    return AlphaMap(np.clip(field, -1.0, 0.0).astype(np.float32), float(smoothness))


def apply_darkening_curve(img: ImageF, alpha: AlphaMap, iterations: int = DEFAULT_ITERATIONS) -> ImageF:
    """Iterated quadratic darkening x -> x + alpha*x*(1-x), shared across channels.

    Inputs in [0,1] stay in [0,1]; output never exceeds the input elementwise.
    """
    if img.domain is not Domain.SRGB:
        raise ValidationError("darkening operates on sRGB images")
    if iterations < 1:
        raise ValidationError(f"iterations must be >= 1, got {iterations}")
    h, w, _ = img.shape
    if alpha.data.shape != (h, w):
        raise ShapeError(f"alpha map {alpha.data.shape} does not match image {img.shape[:2]}")
    x = img.data.astype(np.float64)
    a = alpha.data.astype(np.float64)[:, :, None]
    for _ in range(iterations):
        x = x + a * x * (1.0 - x)
    return ImageF(np.clip(x, 0.0, 1.0).astype(np.float32), Domain.SRGB)


def mean_luminance(img: ImageF) -> float:
    """Mean sRGB value over all pixels and channels."""
    return float(img.data.mean())


def condition_on_exposure(
    img: ImageF, spec: ExposureSpec, alpha_shape: AlphaMap
) -> tuple[ImageF, AlphaMap]:
    """Darken ``img`` so its mean luminance hits the target within 1e-3.

    Bisects a global offset added to the alpha map (re-clamped to [-1, 0]);
    raises UnreachableExposureError naming the achievable minimum when even
    alpha = -1 everywhere cannot reach the target.
    """
    current = mean_luminance(img)
    target = spec.target_mean_luminance
    # darkening cannot brighten; a target within the 1e-3 contract of the
    # current mean is still satisfiable with an (almost) cleared alpha map
    if target > current + 1e-3:
        raise ValidationError(
            f"target {target:.6f} is above the current mean luminance {current:.6f}; "
            "the curve family can only darken"
        )

    base = alpha_shape.data.astype(np.float64)

    def eval_offset(offset: float) -> tuple[ImageF, AlphaMap, float]:
        shifted = np.clip(base + offset, -1.0, 0.0).astype(np.float32)
        amap = AlphaMap(shifted, alpha_shape.smoothness)
        out = apply_darkening_curve(img, amap, spec.iterations)
        return out, amap, mean_luminance(out)

    lo, hi = -2.0, 1.0  # lo clamps the field to -1 everywhere, hi clears it to 0
    _, _, floor = eval_offset(lo)
    if target < floor - 1e-9:
        raise UnreachableExposureError(
            f"target mean luminance {target:.6f} is below the achievable minimum "
            f"{floor:.6f} at {spec.iterations} iteration(s)",
            achievable_min=floor,
        )

    best = None
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        out, amap, mean = eval_offset(mid)
        best = (out, amap, mean)
        if abs(mean - target) <= 1e-4:
            break
        if mean > target:
            hi = mid
        else:
            lo = mid
    out, amap, mean = best
    if abs(mean - target) > 1e-3:
        raise UnreachableExposureError(
            f"bisection stalled at mean {mean:.6f} for target {target:.6f}",
            achievable_min=floor,
        )
    return out, amap
