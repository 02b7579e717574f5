"""Shared fixtures: scripted scene sequences and a synthesized toy dataset."""

from __future__ import annotations

import numpy as np
import pytest

from darkblur.blursynth import (
    BlurConfig,
    DarkenConfig,
    DegradeConfig,
    FrameSequence,
    make_pair,
)
from darkblur.colorcore import Domain, ImageF, resize_bilinear, save_image


def make_scene_sequence(seed: int, n_frames: int = 7, size: int = 64, with_dot: bool = True) -> FrameSequence:
    """A panning smooth background, optionally with a small moving bright dot."""
    rng = np.random.default_rng(seed)
    pad = 12
    big = size + 2 * pad
    coarse = rng.uniform(0.25, 0.85, (5, 5)).astype(np.float32)
    field = resize_bilinear(
        ImageF(np.repeat(coarse[:, :, None], 3, axis=2), Domain.SRGB), big, big
    ).data
    tint = rng.uniform(0.8, 1.0, 3).astype(np.float32)
    field = np.clip(field * tint, 0.0, 1.0)
    vx, vy = int(rng.integers(-2, 3)), int(rng.integers(-2, 3))
    dot = None
    if with_dot:
        dot = (
            int(rng.integers(8, size - 8)),
            int(rng.integers(8, size - 8)),
            int(rng.integers(-1, 2)),
            int(rng.integers(-1, 2)),
        )
    frames = []
    for t in range(n_frames):
        oy = min(max(pad + vy * (t - n_frames // 2), 0), 2 * pad)
        ox = min(max(pad + vx * (t - n_frames // 2), 0), 2 * pad)
        crop = field[oy : oy + size, ox : ox + size].copy()
        if dot is not None:
            cy, cx = dot[0] + dot[2] * t, dot[1] + dot[3] * t
            crop[max(0, cy - 1) : cy + 2, max(0, cx - 1) : cx + 2] = 1.0
        frames.append(ImageF(crop, Domain.SRGB))
    return FrameSequence(tuple(frames), fps=250.0)


def moving_dot_sequence(seed: int, n_frames: int = 7, size: int = 48, dot_half: int = 2) -> FrameSequence:
    """Pure black background with a slow-moving white square (light source)."""
    rng = np.random.default_rng(seed)
    span = n_frames - 1
    margin = dot_half + 2
    direction = 1 if rng.random() < 0.5 else -1
    cy = int(rng.integers(margin, size - margin))
    cx0 = int(rng.integers(margin + span, size - margin - span))
    frames = []
    for t in range(n_frames):
        img = np.zeros((size, size, 3), dtype=np.float32)
        cx = cx0 + direction * t
        img[cy - dot_half : cy + dot_half + 1, cx - dot_half : cx + dot_half + 1] = 1.0
        frames.append(ImageF(img, Domain.SRGB))
    return FrameSequence(tuple(frames), fps=250.0)


def synthesize_dataset(out_dir, n_pairs: int = 16, size: int = 64, seed: int = 100):
    """Run the real pipeline over scripted scenes and write the paired layout."""
    cfg = BlurConfig()
    darken = DarkenConfig()
    degrade = DegradeConfig()
    for sub in ("low_blur", "gt"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    for i in range(n_pairs):
        seq = make_scene_sequence(seed + i, size=size)
        result = make_pair(seq, cfg, darken, degrade, rng_seed=seed * 1000 + i)
        save_image(out_dir / "low_blur" / f"p{i:03d}.png", result.low_blur)
        save_image(out_dir / "gt" / f"p{i:03d}.png", result.gt)
    return out_dir


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("toyset")
    return synthesize_dataset(out, n_pairs=16, size=64, seed=100)
