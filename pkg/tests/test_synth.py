import numpy as np
import pytest

from pulseveil.errors import DataError
from pulseveil.estimators import chrom, pos
from pulseveil.evaluate import estimate_hr
from pulseveil.synth import default_profile, synthesize_clip, synthesize_ppg


class TestSynthesizePpg:
    def test_fundamental_frequency(self):
        trace = synthesize_ppg(hr=60, fs=30.0, duration=10.0)
        assert len(trace) == 300
        # closed form: sin(2 pi t) + 0.3 sin(4 pi t) on the frame clock
        t = np.arange(300) / 30.0
        expected = np.sin(2 * np.pi * t) + 0.3 * np.sin(4 * np.pi * t)
        assert np.allclose(trace.samples, expected, atol=1e-12)

    def test_estimate_recovers_rate(self):
        trace = synthesize_ppg(hr=72, fs=30.0, duration=10.0)
        assert abs(estimate_hr(trace) - 72.0) <= 60.0 * 30.0 / 2048

    def test_pure_sine_without_harmonic(self):
        trace = synthesize_ppg(hr=90, fs=30.0, duration=4.0, harmonic2_amp=0.0)
        t = np.arange(len(trace)) / 30.0
        assert np.allclose(trace.samples, np.sin(2 * np.pi * 1.5 * t), atol=1e-12)

    @pytest.mark.parametrize("hr", [10, 29.9, 241, 500])
    def test_rate_out_of_range(self, hr):
        with pytest.raises(DataError) as exc:
            synthesize_ppg(hr=hr, fs=30.0, duration=1.0)
        assert exc.value.code == "hr-out-of-range"


class TestDefaultProfile:
    def test_bounded_smooth_gain(self):
        profile = default_profile()
        assert profile.shape == (64, 64)
        assert profile.min() >= 0.5 and profile.max() <= 1.0
        # center is the brightest spot
        assert profile[31:33, 31:33].mean() > profile[0, 0]


class TestSynthesizeClip:
    def test_zero_amplitude_gives_constant_clip(self):
        clip, _ = synthesize_clip(
            hr=72, frames=128, pulse_amp=(0.0, 0.0, 0.0), noise_sigma=0.0
        )
        assert np.all(clip.data == clip.data[0, 0, 0])
        out = chrom(clip)
        assert np.max(np.abs(out.samples)) < 1e-8

    def test_ground_truth_aligned_to_frame_clock(self):
        clip, gt = synthesize_clip(hr=100, fps=25.0, frames=200)
        assert len(gt) == len(clip) == 200
        assert gt.fs == clip.fps == 25.0

    def test_full_pipeline_recovers_rate(self):
        clip, _ = synthesize_clip(hr=72, fps=30.0, frames=300, noise_sigma=0.0)
        assert abs(estimate_hr(chrom(clip)) - 72.0) <= 2.0
        assert abs(estimate_hr(pos(clip)) - 72.0) <= 2.0

    def test_same_seed_reproducible_different_seed_noise_only(self):
        a, _ = synthesize_clip(hr=80, frames=64, noise_sigma=2.0, seed=1)
        b, _ = synthesize_clip(hr=80, frames=64, noise_sigma=2.0, seed=1)
        c, _ = synthesize_clip(hr=80, frames=64, noise_sigma=2.0, seed=2)
        assert np.array_equal(a.data, b.data)
        assert not np.array_equal(a.data, c.data)
        clean, _ = synthesize_clip(hr=80, frames=64, noise_sigma=0.0)
        # seeds only move the noise field: both stay near the clean render
        assert np.max(np.abs(a.data.astype(int) - clean.data.astype(int))) < 20

    def test_range_violation(self):
        with pytest.raises(DataError) as exc:
            synthesize_clip(hr=72, base_color=(254, 110, 95), pulse_amp=(3.0, 1.0, 0.4))
        assert exc.value.code == "range-violation"

    def test_recovery_across_acceptance_rates(self):
        for hr in (48, 120, 180):
            clip, _ = synthesize_clip(hr=hr, fps=30.0, frames=256, noise_sigma=2.0, seed=hr)
            assert abs(estimate_hr(chrom(clip)) - hr) <= 2.0
            assert abs(estimate_hr(pos(clip)) - hr) <= 2.0
