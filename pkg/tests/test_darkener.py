import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darkblur.colorcore import Domain, ImageF
from darkblur.darkener import (
    AlphaMap,
    ExposureSpec,
    apply_darkening_curve,
    condition_on_exposure,
    generate_alpha_map,
    mean_luminance,
)
from darkblur.errors import UnreachableExposureError, ValidationError


def gray(value, h=8, w=8):
    return ImageF(np.full((h, w, 3), value, dtype=np.float32), Domain.SRGB)


def flat_alpha(value, h=8, w=8, smoothness=8.0):
    return AlphaMap(np.full((h, w), value, dtype=np.float32), smoothness)


class TestAlphaMap:
    def test_zero_amplitude_constant(self):
        amap = generate_alpha_map(0, 16, 24, smoothness=24, base_level=-0.4, amplitude=0.0)
        assert np.allclose(amap.data, -0.4, atol=1e-7)

    def test_deterministic(self):
        a = generate_alpha_map(42, 32, 32, smoothness=8, base_level=-0.5)
        b = generate_alpha_map(42, 32, 32, smoothness=8, base_level=-0.5)
        assert np.array_equal(a.data, b.data)
        c = generate_alpha_map(43, 32, 32, smoothness=8, base_level=-0.5)
        assert not np.array_equal(a.data, c.data)

    def test_neighbor_difference_bound(self):
        # bound measured for the chosen upsampler: 2 * amplitude / smoothness
        amap = generate_alpha_map(7, 256, 256, smoothness=32, base_level=-0.5, amplitude=0.25)
        dy = np.abs(np.diff(amap.data, axis=0)).max()
        dx = np.abs(np.diff(amap.data, axis=1)).max()
        assert max(dx, dy) <= 2.0 * 0.25 / 32 + 1e-6

    def test_range_clamped(self):
        amap = generate_alpha_map(5, 64, 64, smoothness=4, base_level=-0.9, amplitude=1.0)
        assert amap.data.min() >= -1.0
        assert amap.data.max() <= 0.0

    def test_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            AlphaMap(np.full((4, 4), 0.5, dtype=np.float32), 4.0)
        with pytest.raises(ValidationError):
            generate_alpha_map(0, 8, 8, smoothness=0.5, base_level=-0.5)


class TestDarkeningCurve:
    def test_zero_alpha_identity(self):
        img = gray(0.37)
        out = apply_darkening_curve(img, flat_alpha(0.0), iterations=3)
        assert np.allclose(out.data, img.data, atol=1e-7)

    def test_hand_value_one_iteration(self):
        out = apply_darkening_curve(gray(0.8), flat_alpha(-0.5), iterations=1)
        assert np.allclose(out.data, 0.72, atol=1e-6)  # 0.8 - 0.5*0.8*0.2

    def test_hand_value_two_iterations(self):
        out = apply_darkening_curve(gray(0.8), flat_alpha(-0.5), iterations=2)
        assert np.allclose(out.data, 0.6192, atol=1e-6)  # iterate by hand once more

    @given(
        st.floats(min_value=0.0, max_value=1.0),
        st.floats(min_value=-1.0, max_value=0.0),
        st.integers(min_value=1, max_value=5),
    )
    @settings(max_examples=60, deadline=None)
    def test_range_and_darkening(self, x, a, n):
        out = apply_darkening_curve(gray(x, 2, 2), flat_alpha(a, 2, 2), iterations=n)
        assert np.all(out.data >= -1e-7)
        assert np.all(out.data <= 1.0 + 1e-7)
        assert np.all(out.data <= x + 1e-6)  # darkening only

    def test_monotone_in_alpha_and_x(self):
        xs = np.linspace(0, 1, 33, dtype=np.float32)
        img = ImageF(np.tile(xs[None, :, None], (1, 1, 3)), Domain.SRGB)
        prev = None
        for a in (0.0, -0.25, -0.5, -1.0):
            out = apply_darkening_curve(img, flat_alpha(a, 1, 33), iterations=2).data[0, :, 0]
            assert np.all(np.diff(out) >= -1e-6)  # non-decreasing in x
            if prev is not None:
                assert np.all(out <= prev + 1e-6)  # non-increasing in |alpha|
            prev = out

    def test_alpha_shape_mismatch(self):
        with pytest.raises(Exception):
            apply_darkening_curve(gray(0.5, 8, 8), flat_alpha(-0.5, 4, 4), 1)


class TestExposureConditioning:
    def test_target_equals_current(self):
        img = gray(0.6)
        out, _ = condition_on_exposure(img, ExposureSpec(0.6, 3), flat_alpha(-0.3))
        assert abs(mean_luminance(out) - 0.6) <= 1e-3

    def test_gray_bisection_matches_scalar_oracle(self):
        # scalar-curve oracle frozen: alpha(0.8 -> 0.4, 3 iters) = -0.6473817678122455
        img = gray(0.8)
        out, amap = condition_on_exposure(img, ExposureSpec(0.4, 3), flat_alpha(0.0))
        assert abs(mean_luminance(out) - 0.4) <= 1e-3
        assert np.allclose(amap.data, -0.6473817678122455, atol=1e-3)

    def test_unreachable_target_errors_with_floor(self):
        img = gray(0.9)
        with pytest.raises(UnreachableExposureError) as exc:
            condition_on_exposure(img, ExposureSpec(0.001, 1), flat_alpha(-0.2))
        # alpha = -1 with one iteration floors at x^2 = 0.81
        assert abs(exc.value.achievable_min - 0.81) < 1e-3

    def test_brightening_rejected(self):
        with pytest.raises(ValidationError):
            condition_on_exposure(gray(0.3), ExposureSpec(0.5, 3), flat_alpha(-0.2))

    def test_random_images_meet_target_or_error_correctly(self):
        rng = np.random.default_rng(9)
        met = 0
        for trial in range(10):
            data = rng.uniform(0.35, 0.95, (16, 16, 3)).astype(np.float32)
            img = ImageF(data, Domain.SRGB)
            target = float(rng.uniform(0.05, 0.3))
            shape = generate_alpha_map(trial, 16, 16, smoothness=8, base_level=-0.3)
            try:
                out, amap = condition_on_exposure(img, ExposureSpec(target, 3), shape)
            except UnreachableExposureError as exc:
                # the reported floor must match an independent alpha=-1 evaluation
                floor = mean_luminance(
                    apply_darkening_curve(img, flat_alpha(-1.0, 16, 16), iterations=3)
                )
                assert abs(exc.achievable_min - floor) < 1e-6
                assert target < floor
                continue
            met += 1
            assert abs(mean_luminance(out) - target) <= 1e-3
            assert amap.data.min() >= -1.0 and amap.data.max() <= 0.0
        assert met >= 5  # most draws in [0.05, 0.3] are reachable
