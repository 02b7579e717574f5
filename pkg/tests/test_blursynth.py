import numpy as np
import pytest

from conftest import make_scene_sequence, moving_dot_sequence
from darkblur.blursynth import (
    BlurConfig,
    DarkenConfig,
    DegradeConfig,
    FrameSequence,
    clipping_reverse,
    frame_counts,
    interpolate_frames,
    make_pair,
    synth_blur,
)
from darkblur.colorcore import Domain, ImageF, saturation_mask
from darkblur.errors import ConfigError, InsufficientFramesError, ValidationError


def frame(value, h=6, w=6, domain=Domain.SRGB):
    return ImageF(np.full((h, w, 3), value, dtype=np.float32), domain)


def seq_of(values, **kw):
    return FrameSequence(tuple(frame(v, **kw) for v in values), fps=250.0)


class TestInterpolation:
    def test_k1_identity(self):
        seq = seq_of([0.1, 0.9])
        out = interpolate_frames(seq, 1)
        assert out is seq

    def test_constant_frames(self):
        out = interpolate_frames(seq_of([0.4, 0.4]), 4)
        assert len(out) == 5
        for f in out.frames:
            assert np.allclose(f.data, 0.4, atol=1e-7)

    def test_hand_values_k4(self):
        out = interpolate_frames(seq_of([0.0, 0.8]), 4)
        mids = [float(f.data[0, 0, 0]) for f in out.frames]
        assert np.allclose(mids, [0.0, 0.2, 0.4, 0.6, 0.8], atol=1e-6)

    def test_count_and_fps(self):
        out = interpolate_frames(seq_of([0.1, 0.5, 0.9]), 8)
        assert len(out) == (3 - 1) * 8 + 1
        assert out.fps == 250.0 * 8

    def test_single_frame_errors(self):
        with pytest.raises(InsufficientFramesError):
            interpolate_frames(FrameSequence((frame(0.5),)), 2)


class TestClippingReverse:
    def test_empty_mask_identity(self):
        f = frame(0.7, domain=Domain.LINEAR)
        out = clipping_reverse(f, np.zeros((6, 6), dtype=bool), r=80.0)
        assert np.array_equal(out.data, f.data)

    def test_masked_pixel_gains_r(self):
        f = frame(1.0, domain=Domain.LINEAR)
        mask = np.zeros((6, 6), dtype=bool)
        mask[2, 3] = True
        out = clipping_reverse(f, mask, r=50.0)
        assert np.allclose(out.data[2, 3], 1.0 + 50.0 / 255.0, atol=1e-6)
        assert np.allclose(out.data[0, 0], 1.0)

    def test_unmasked_untouched(self):
        f = frame(0.3, domain=Domain.LINEAR)
        mask = np.zeros((6, 6), dtype=bool)
        mask[0, 0] = True
        out = clipping_reverse(f, mask, r=100.0)
        assert out.data[5, 5, 0] == np.float32(0.3)

    def test_srgb_frame_rejected(self):
        with pytest.raises(ValidationError):
            clipping_reverse(frame(0.5), np.zeros((6, 6), dtype=bool), 50.0)


class TestSynthBlur:
    def test_constant_sequence_identity(self):
        cfg = BlurConfig(window=7, clipping_reverse_enabled=False)
        seq = seq_of([0.55] * 7)
        out = synth_blur(seq, cfg, rng_seed=0)
        assert np.abs(out.data - 0.55).max() < 1e-5

    def test_two_frame_hand_oracle(self):
        # g((0.2^2.2 + 0.6^2.2) / 2) evaluated independently = 0.4551822970257646
        cfg = BlurConfig(window=2, interp_factor=1, clipping_reverse_enabled=False)
        out = synth_blur(seq_of([0.2, 0.6]), cfg, rng_seed=0)
        assert np.abs(out.data - 0.4551822970257646).max() < 1e-4

    def test_permutation_invariant(self):
        cfg = BlurConfig(window=3, interp_factor=1, duty_cycle=1.0, clipping_reverse_enabled=False)
        rng = np.random.default_rng(4)
        frames = [
            ImageF(rng.uniform(0, 1, (5, 5, 3)).astype(np.float32), Domain.SRGB) for _ in range(3)
        ]
        a = synth_blur(FrameSequence(tuple(frames)), cfg, 0)
        b = synth_blur(FrameSequence(tuple(frames[::-1])), cfg, 0)
        assert np.allclose(a.data, b.data, atol=1e-6)

    def test_cr_off_bounded_by_frame_max(self):
        cfg = BlurConfig(window=5, interp_factor=4, clipping_reverse_enabled=False)
        seq = make_scene_sequence(21, n_frames=5, size=32)
        out = synth_blur(seq, cfg, 0)
        per_pixel_max = np.max([f.data for f in seq.frames], axis=0)
        assert np.all(out.data <= per_pixel_max + 1e-5)

    def test_wrong_window_rejected(self):
        cfg = BlurConfig(window=7)
        with pytest.raises(ConfigError):
            synth_blur(seq_of([0.5, 0.5]), cfg, 0)

    def test_cr_increases_saturated_pixel_count(self):
        # scripted moving-dot scene: clipping reverse keeps sharp saturated cores
        seq = moving_dot_sequence(3)
        on = synth_blur(seq, BlurConfig(window=7, clipping_reverse_enabled=True), 3)
        off = synth_blur(seq, BlurConfig(window=7, clipping_reverse_enabled=False), 3)
        n_on = int(saturation_mask(on).sum())
        n_off = int(saturation_mask(off).sum())
        assert n_on > n_off

    def test_cr_count_ge_on_random_scenes(self):
        for seed in range(5):
            seq = make_scene_sequence(50 + seed, size=32)
            on = synth_blur(seq, BlurConfig(clipping_reverse_enabled=True), seed)
            off = synth_blur(seq, BlurConfig(clipping_reverse_enabled=False), seed)
            assert int(saturation_mask(on).sum()) >= int(saturation_mask(off).sum())


class TestMakePair:
    def identity_configs(self):
        blur = BlurConfig(window=3, interp_factor=1, duty_cycle=1.0, clipping_reverse_enabled=False)
        darken = DarkenConfig(enabled=False)
        degrade = DegradeConfig(defocus_prob=0.0, noise_prob=0.0)
        return blur, darken, degrade

    def test_identity_config_returns_gt(self):
        blur, darken, degrade = self.identity_configs()
        seq = seq_of([0.37, 0.37, 0.37])
        res = make_pair(seq, blur, darken, degrade, rng_seed=0)
        assert np.abs(res.low_blur.data - res.gt.data).max() < 1e-5

    def test_deterministic_given_seed(self):
        seq = make_scene_sequence(77)
        a = make_pair(seq, BlurConfig(), DarkenConfig(), DegradeConfig(), 123)
        b = make_pair(seq, BlurConfig(), DarkenConfig(), DegradeConfig(), 123)
        assert np.array_equal(a.low_blur.data, b.low_blur.data)
        assert np.array_equal(a.gt.data, b.gt.data)
        assert a.meta == b.meta
        c = make_pair(seq, BlurConfig(), DarkenConfig(), DegradeConfig(), 124)
        assert not np.array_equal(a.low_blur.data, c.low_blur.data)

    def test_gt_is_untouched_mid_frame(self):
        seq = make_scene_sequence(88)
        res = make_pair(seq, BlurConfig(), DarkenConfig(), DegradeConfig(), 5)
        assert np.array_equal(res.gt.data, seq.frames[3].data)

    def test_frame_counts_recorded(self):
        # 7-frame window at k=8 interpolates (7-1)*8+1 = 49 frames; the 0.8
        # duty cycle keeps the leading ceil(0.8 * 49) = 40 of them open
        seq = make_scene_sequence(99)
        res = make_pair(seq, BlurConfig(), DarkenConfig(), DegradeConfig(), 6)
        assert res.meta["frames_interpolated"] == 49
        assert res.meta["frames_averaged"] == 40
        assert frame_counts(BlurConfig()) == (49, 40)

    def test_low_blur_is_darker(self):
        seq = make_scene_sequence(111)
        res = make_pair(seq, BlurConfig(), DarkenConfig(), DegradeConfig(), 7)
        assert float(res.low_blur.data.mean()) < float(res.gt.data.mean())
        assert abs(float(res.low_blur.data.mean())) <= 0.35  # target range cap

    def test_even_window_rejected(self):
        blur = BlurConfig(window=4, interp_factor=1)
        seq = seq_of([0.1, 0.2, 0.3, 0.4])
        with pytest.raises(ConfigError):
            make_pair(seq, blur, DarkenConfig(), DegradeConfig(), 0)
