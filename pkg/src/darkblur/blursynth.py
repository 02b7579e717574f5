"""Blur model: frame interpolation, clipping reverse, linear-light averaging.

The virtual exposure averages a high-frame-rate stream in linear light.
Saturated pixels (L* above a threshold) first get a supplementary radiance
value added back, restoring the intensity the 8-bit clip destroyed, so the
averaged blur keeps the sharp boundaries real light streaks show.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .colorcore import GAMMA, Domain, ImageF, lightness_from_linear
from .darkener import (
    ExposureSpec,
    apply_darkening_curve,
    condition_on_exposure,
    generate_alpha_map,
    mean_luminance,
)
from .degrade import NoiseParams, add_noise, convolve2d_reflect, generalized_gaussian_kernel
from .errors import ConfigError, InsufficientFramesError, ShapeError, ValidationError


@dataclass(frozen=True)
class FrameSequence:
    """Ordered list of same-shaped frames with a nominal frame rate."""

    frames: tuple[ImageF, ...]
    fps: float = 250.0

    def __post_init__(self):
        if len(self.frames) < 1:
            raise ValidationError("a frame sequence needs at least one frame")
        first = self.frames[0]
        for f in self.frames[1:]:
            if f.shape != first.shape:
                raise ShapeError(f"frame shapes differ: {f.shape} vs {first.shape}")
            if f.domain is not first.domain:
                raise ValidationError("frames must share one domain")
        object.__setattr__(self, "frames", tuple(self.frames))

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class BlurConfig:
    window: int = 7                 # source frames per blur
    interp_factor: int = 8          # inserted-rate multiplier k
    r_range: tuple[float, float] = (20.0, 100.0)  # supplementary value, 8-bit units
    delta: float = 98.0             # L* saturation threshold
    duty_cycle: float = 0.8         # open-shutter fraction of the exposure window
    clipping_reverse_enabled: bool = True

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError(f"window must be >= 1, got {self.window}")
        if self.interp_factor < 1:
            raise ConfigError(f"interp_factor must be >= 1, got {self.interp_factor}")
        lo, hi = self.r_range
        if not (0.0 <= lo <= hi <= 255.0):
            raise ConfigError(f"r_range must be within [0,255], got {self.r_range}")
        if not 0.0 < self.duty_cycle <= 1.0:
            raise ConfigError(f"duty_cycle must be in (0,1], got {self.duty_cycle}")


def interpolate_frames(seq: FrameSequence, k: int) -> FrameSequence:
    """Linear cross-fade raising the frame rate by ``k``.

    Between consecutive frames F_i, F_{i+1} this inserts k-1 blends
    F_i + (j/k)(F_{i+1} - F_i); output length is (n-1)*k + 1. Stands in
    for a learned interpolator behind the same signature.
    """
    if k < 1:
        raise ValidationError(f"interp factor must be >= 1, got {k}")
    if k == 1:
        return seq
    if len(seq) < 2:
        raise InsufficientFramesError("need >= 2 frames to interpolate")
    if seq.frames[0].domain is not Domain.SRGB:
        raise ValidationError("interpolation expects sRGB frames")
    out: list[ImageF] = []
    for a, b in zip(seq.frames[:-1], seq.frames[1:]):
        fa = a.data.astype(np.float64)
        fb = b.data.astype(np.float64)
        out.append(a)
        for j in range(1, k):
            t = j / k
            out.append(ImageF((fa + t * (fb - fa)).astype(np.float32), Domain.SRGB))
    out.append(seq.frames[-1])
    return FrameSequence(tuple(out), fps=seq.fps * k)


def clipping_reverse(frame: ImageF, mask: np.ndarray, r: float) -> ImageF:
    """Add the supplementary value r (8-bit units) to saturated pixels.

    Operates in linear light, after the inverse CRF; output may exceed 1.
    """
    if frame.domain is not Domain.LINEAR:
        raise ValidationError("clipping reverse operates on LINEAR frames")
    if not 0.0 <= r <= 255.0:
        raise ValidationError(f"r must be in [0,255], got {r}")
    h, w, _ = frame.shape
    if mask.shape != (h, w):
        raise ShapeError(f"mask {mask.shape} does not match frame {frame.shape[:2]}")
    out = frame.data.copy()
    out[mask] += np.float32(r / 255.0)
    return ImageF(out, Domain.LINEAR)


def draw_supplement(cfg: BlurConfig, rng_seed: int) -> float:
    """The per-sequence supplementary value, one uniform draw from r_range."""
    rng = np.random.default_rng(rng_seed)
    return float(rng.uniform(cfg.r_range[0], cfg.r_range[1]))


def frame_counts(cfg: BlurConfig) -> tuple[int, int]:
    """(interpolated frame count, averaged frame count) for a full window."""
    n_interp = (cfg.window - 1) * cfg.interp_factor + 1
    n_avg = math.ceil(cfg.duty_cycle * n_interp)
    return n_interp, n_avg


Interpolator = Callable[[FrameSequence, int], FrameSequence]


def synth_blur(
    seq: FrameSequence,
    cfg: BlurConfig,
    rng_seed: int,
    interpolator: Interpolator = interpolate_frames,
) -> ImageF:
    """Average the interpolated window in linear light and re-encode.

    Per interpolated frame: mask saturated pixels at threshold cfg.delta,
    invert the CRF, add the (single, per-sequence) supplementary value on
    masked pixels when clipping reverse is on. The duty cycle keeps only
    the leading ceil(tau * N) frames of the window open.
    """
    if len(seq) != cfg.window:
        raise ConfigError(f"sequence length {len(seq)} != configured window {cfg.window}")
    if seq.frames[0].domain is not Domain.SRGB:
        raise ValidationError("synth_blur expects sRGB frames")
    interp = interpolator(seq, cfg.interp_factor) if cfg.interp_factor > 1 else seq
    n_interp = len(interp)
    n_avg = math.ceil(cfg.duty_cycle * n_interp)
    r = draw_supplement(cfg, rng_seed) if cfg.clipping_reverse_enabled else 0.0

    h, w, c = seq.frames[0].shape
    accum = np.zeros((h, w, c), dtype=np.float64)
    for frame in interp.frames[:n_avg]:
        lin = np.power(frame.data.astype(np.float64), GAMMA)
        if cfg.clipping_reverse_enabled:
            mask = lightness_from_linear(lin) > cfg.delta
            lin[mask] += r / 255.0
        accum += lin
    mean = accum / n_avg
    srgb = np.power(np.clip(mean, 0.0, 1.0), 1.0 / GAMMA)
    return ImageF(srgb.astype(np.float32), Domain.SRGB)


@dataclass(frozen=True)
class DarkenConfig:
    """Sampling ranges for the per-sequence darkening stage."""

    target_range: tuple[float, float] = (0.05, 0.3)
    iterations: int = 3
    smoothness: float = 32.0
    base_level: float = -0.5
    amplitude: float = 0.25
    enabled: bool = True


@dataclass(frozen=True)
class DegradeConfig:
    """Per-pair random defocus and noise; each stage enabled by coin flip."""

    defocus_prob: float = 0.5
    sigma_range: tuple[float, float] = (0.5, 2.0)
    beta_range: tuple[float, float] = (0.5, 2.0)
    kernel_size: int = 11
    noise_prob: float = 0.5
    read_sigma_range: tuple[float, float] = (0.002, 0.02)
    shot_gain_range: tuple[float, float] = (0.0, 0.01)


NoiseFn = Callable[[ImageF, NoiseParams, int], ImageF]


@dataclass(frozen=True)
class PairResult:
    low_blur: ImageF
    gt: ImageF
    meta: dict = field(default_factory=dict)


def make_pair(
    sharp_seq: FrameSequence,
    cfg: BlurConfig,
    darken_cfg: DarkenConfig,
    degrade_cfg: DegradeConfig,
    rng_seed: int,
    interpolator: Interpolator = interpolate_frames,
    noise_fn: NoiseFn = add_noise,
) -> PairResult:
    """Build one (low-light blurred, normal-light sharp) training pair.

    Stage order: darken every source frame with one exposure-conditioned
    alpha map, interpolate, clipping-reverse + average, defocus, noise.
    The ground truth is the untouched mid-frame. All randomness derives
    from ``rng_seed`` via independent per-stage streams.
    """
    if len(sharp_seq) != cfg.window:
        raise ConfigError(f"sequence length {len(sharp_seq)} != window {cfg.window}")
    if cfg.window % 2 == 0:
        raise ConfigError(f"window must be odd so a mid-frame exists, got {cfg.window}")
    mid = sharp_seq.frames[cfg.window // 2]
    gt = ImageF(mid.data.copy(), Domain.SRGB)
    h, w, _ = mid.shape

    seeds = np.random.SeedSequence(rng_seed).generate_state(4)
    seed_alpha, seed_target, seed_blur, seed_degrade = (int(s) for s in seeds)

    meta: dict = {
        "seed": int(rng_seed),
        "window": cfg.window,
        "interp_factor": cfg.interp_factor,
    }
    n_interp, n_avg = frame_counts(cfg)
    meta["frames_interpolated"] = n_interp
    meta["frames_averaged"] = n_avg

    if darken_cfg.enabled:
        alpha = generate_alpha_map(
            seed_alpha, h, w, darken_cfg.smoothness, darken_cfg.base_level, darken_cfg.amplitude
        )
        rng_t = np.random.default_rng(seed_target)
        target = float(rng_t.uniform(*darken_cfg.target_range))
        # The curve family only darkens; cap the target at the current mean.
        target = min(target, mean_luminance(mid))
        _, alpha_adj = condition_on_exposure(
            mid, ExposureSpec(target, darken_cfg.iterations), alpha
        )
        frames = tuple(
            apply_darkening_curve(f, alpha_adj, darken_cfg.iterations) for f in sharp_seq.frames
        )
        work_seq = FrameSequence(frames, fps=sharp_seq.fps)
        meta["exposure_target"] = target
        meta["alpha_min"] = float(alpha_adj.data.min())
        meta["alpha_mean"] = float(alpha_adj.data.mean())
        meta["alpha_max"] = float(alpha_adj.data.max())
    else:
        work_seq = sharp_seq

    low = synth_blur(work_seq, cfg, seed_blur, interpolator)
    meta["r"] = draw_supplement(cfg, seed_blur) if cfg.clipping_reverse_enabled else None
    meta["clipping_reverse"] = cfg.clipping_reverse_enabled

    rng_d = np.random.default_rng(seed_degrade)
    if rng_d.random() < degrade_cfg.defocus_prob:
        sigma = float(rng_d.uniform(*degrade_cfg.sigma_range))
        beta = float(rng_d.uniform(*degrade_cfg.beta_range))
        kernel = generalized_gaussian_kernel(sigma, beta, degrade_cfg.kernel_size)
        low = convolve2d_reflect(low, kernel)
        meta["defocus_sigma"] = sigma
        meta["defocus_beta"] = beta
    else:
        meta["defocus_sigma"] = None
        meta["defocus_beta"] = None
    if rng_d.random() < degrade_cfg.noise_prob:
        read_sigma = float(rng_d.uniform(*degrade_cfg.read_sigma_range))
        shot_gain = float(rng_d.uniform(*degrade_cfg.shot_gain_range))
        noise_seed = int(rng_d.integers(0, 2**63 - 1))
        low = noise_fn(low, NoiseParams(shot_gain=shot_gain, read_sigma=read_sigma), noise_seed)
        meta["noise_read_sigma"] = read_sigma
        meta["noise_shot_gain"] = shot_gain
    else:
        meta["noise_read_sigma"] = None
        meta["noise_shot_gain"] = None

    return PairResult(low_blur=low, gt=gt, meta=meta)
