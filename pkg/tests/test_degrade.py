import math

import numpy as np
import pytest

from darkblur.colorcore import Domain, ImageF
from darkblur.degrade import (
    DefocusKernel,
    NoiseParams,
    add_noise,
    convolve2d_reflect,
    generalized_gaussian_kernel,
)
from darkblur.errors import ConfigError, ValidationError


class TestGeneralizedGaussianKernel:
    def test_beta_one_is_plain_gaussian(self):
        k = generalized_gaussian_kernel(sigma=1.3, beta=1.0, size=7)
        c = 3
        ref = np.empty((7, 7))
        for i in range(7):
            for j in range(7):
                ref[i, j] = math.exp(-((i - c) ** 2 + (j - c) ** 2) / (2 * 1.3**2))
        ref /= ref.sum()
        assert np.abs(k.taps - ref).max() < 1e-12

    def test_normalized(self):
        for sigma, beta, size in [(0.5, 0.5, 5), (2.0, 2.0, 11), (1.0, 3.0, 9)]:
            k = generalized_gaussian_kernel(sigma, beta, size)
            assert abs(k.taps.sum() - 1.0) < 1e-9
            assert (k.taps >= 0).all()

    def test_center_corner_ratio_hand_value(self):
        # profile at (0,0) vs (2,2): exp(0) / exp(-0.5 * ((8/1)^2)) for sigma=1, beta=2
        k = generalized_gaussian_kernel(sigma=1.0, beta=2.0, size=5)
        expected = math.exp(0.5 * 8.0**2)
        assert np.isclose(k.taps[2, 2] / k.taps[0, 0], expected, rtol=1e-9)

    def test_radially_symmetric(self):
        k = generalized_gaussian_kernel(1.5, 0.8, 9)
        assert np.allclose(k.taps, k.taps[::-1, :])
        assert np.allclose(k.taps, k.taps[:, ::-1])
        assert np.allclose(k.taps, k.taps.T)

    def test_even_size_rejected(self):
        with pytest.raises(ConfigError):
            generalized_gaussian_kernel(1.0, 1.0, 4)
        with pytest.raises(ValidationError):
            generalized_gaussian_kernel(-1.0, 1.0, 5)


def _conv_oracle(data, taps):
    """Nested-loop reflect-padded convolution, independent of the implementation."""
    h, w, c = data.shape
    size = taps.shape[0]
    p = size // 2
    padded = np.pad(data, ((p, p), (p, p), (0, 0)), mode="reflect")
    out = np.zeros_like(data, dtype=np.float64)
    for i in range(h):
        for j in range(w):
            for u in range(size):
                for v in range(size):
                    out[i, j] += taps[u, v] * padded[i + u, j + v]
    return out


class TestConvolveReflect:
    def test_delta_kernel_identity(self):
        rng = np.random.default_rng(0)
        img = ImageF(rng.uniform(0, 1, (10, 8, 3)).astype(np.float32), Domain.SRGB)
        taps = np.zeros((5, 5))
        taps[2, 2] = 1.0
        k = DefocusKernel(taps, 1.0, 1.0)
        out = convolve2d_reflect(img, k)
        assert np.allclose(out.data, img.data, atol=1e-6)

    def test_uniform_kernel_on_constant(self):
        img = ImageF(np.full((9, 9, 3), 0.42, dtype=np.float32), Domain.SRGB)
        k = DefocusKernel(np.full((3, 3), 1 / 9.0), 1.0, 1.0)
        out = convolve2d_reflect(img, k)
        assert np.allclose(out.data, 0.42, atol=1e-6)

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(1)
        data = rng.uniform(0, 1, (16, 16, 3)).astype(np.float32)
        k = generalized_gaussian_kernel(1.2, 0.9, 5)
        got = convolve2d_reflect(ImageF(data, Domain.SRGB), k).data
        want = _conv_oracle(data.astype(np.float64), k.taps)
        assert np.abs(got - want).max() < 1e-6

    def test_mean_preserved_on_constant(self):
        img = ImageF(np.full((12, 12, 1), 0.37, dtype=np.float32), Domain.SRGB)
        k = generalized_gaussian_kernel(2.0, 1.5, 7)
        out = convolve2d_reflect(img, k)
        assert abs(float(out.data.mean()) - 0.37) < 1e-6


class TestNoise:
    def test_zero_params_identity(self):
        rng = np.random.default_rng(2)
        img = ImageF(rng.uniform(0, 1, (8, 8, 3)).astype(np.float32), Domain.SRGB)
        out = add_noise(img, NoiseParams(shot_gain=0.0, read_sigma=0.0), rng_seed=5)
        assert np.array_equal(out.data, img.data)

    def test_read_noise_std_monte_carlo(self):
        img = ImageF(np.full((640, 640, 3), 0.5, dtype=np.float32), Domain.SRGB)
        out = add_noise(img, NoiseParams(shot_gain=0.0, read_sigma=0.02), rng_seed=7)
        sample_std = float((out.data.astype(np.float64) - 0.5).std())
        assert 0.018 <= sample_std <= 0.022  # 0.02 +- 10% over >= 1e6 samples

    def test_shot_noise_signal_dependent(self):
        dark = ImageF(np.full((512, 512, 1), 0.1, dtype=np.float32), Domain.SRGB)
        bright = ImageF(np.full((512, 512, 1), 0.9, dtype=np.float32), Domain.SRGB)
        p = NoiseParams(shot_gain=0.005, read_sigma=0.0)
        var_dark = float(np.var(add_noise(dark, p, 11).data.astype(np.float64) - 0.1))
        var_bright = float(np.var(add_noise(bright, p, 11).data.astype(np.float64) - 0.9))
        assert var_dark < var_bright

    def test_mean_preserving_interior(self):
        img = ImageF(np.full((256, 256, 3), 0.5, dtype=np.float32), Domain.SRGB)
        p = NoiseParams(shot_gain=0.0, read_sigma=0.01)
        out = add_noise(img, p, rng_seed=13)
        n = out.data.size
        drift = abs(float(out.data.astype(np.float64).mean()) - 0.5)
        assert drift < 3 * 0.01 / math.sqrt(n)

    def test_deterministic_per_seed(self):
        img = ImageF(np.full((16, 16, 3), 0.4, dtype=np.float32), Domain.SRGB)
        p = NoiseParams(shot_gain=0.002, read_sigma=0.01)
        a = add_noise(img, p, 3).data
        b = add_noise(img, p, 3).data
        c = add_noise(img, p, 4).data
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_negative_params_rejected(self):
        with pytest.raises(ValidationError):
            NoiseParams(shot_gain=-0.1, read_sigma=0.0)
