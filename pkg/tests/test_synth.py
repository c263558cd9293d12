import numpy as np
import pytest
from scipy.signal import find_peaks

from campulse import dsp, synth


def make_pulse(hr=72.0, seed=1, **kw):
    spec = synth.PulseSpec(hr_bpm=hr, fs=30.0, duration_s=10.0, **kw)
    return synth.gen_pulse(spec, seed=seed)


class TestGenPulse:
    def test_spectral_peak_at_rate(self):
        w = make_pulse(hr=72.0, hr_jitter_pct=0.0)
        spec = dsp.welch_psd(w)
        peak = spec.freqs[np.argmax(spec.power)]
        assert abs(peak - 1.2) <= spec.bin_width

    @pytest.mark.parametrize("hr", [50.0, 75.0, 120.0, 145.0])
    def test_peak_tracks_rate_without_jitter(self, hr):
        w = make_pulse(hr=hr, hr_jitter_pct=0.0)
        spec = dsp.welch_psd(w)
        peak = spec.freqs[np.argmax(spec.power)]
        assert abs(peak - hr / 60.0) <= spec.bin_width

    def test_beat_count(self):
        w = make_pulse(hr=72.0, hr_jitter_pct=0.0, noise_std=0.0)
        min_gap = int(0.5 * 30.0 * 60.0 / 72.0)
        peaks, _ = find_peaks(dsp.butterworth_bandpass(w).samples, distance=min_gap)
        assert abs(len(peaks) - 12) <= 1

    def test_deterministic_per_seed(self):
        a = make_pulse(seed=9, hr_jitter_pct=0.05, noise_std=0.02)
        b = make_pulse(seed=9, hr_jitter_pct=0.05, noise_std=0.02)
        assert np.array_equal(a.samples, b.samples)
        c = make_pulse(seed=10, hr_jitter_pct=0.05, noise_std=0.02)
        assert not np.array_equal(a.samples, c.samples)

    def test_rate_bounds_enforced(self):
        with pytest.raises(synth.SynthError):
            synth.PulseSpec(hr_bpm=40.0)
        with pytest.raises(synth.SynthError):
            synth.PulseSpec(hr_bpm=151.0)


class TestGenClip:
    def test_zero_modulation_freezes_frames(self):
        w = make_pulse()
        scene = synth.SceneSpec(hw=16, modulation_depth=1e-9, sensor_noise_std=0.0)
        clip = synth.gen_clip(w, scene, seed=3)
        spread = np.abs(clip.frames - clip.frames[:, :1]).max()
        assert spread <= 1e-6

    def test_skin_mean_tracks_pulse(self):
        w = make_pulse(hr_jitter_pct=0.02)
        scene = synth.SceneSpec(hw=32, modulation_depth=0.01, sensor_noise_std=0.0)
        clip = synth.gen_clip(w, scene, seed=4)
        mask = synth._skin_mask(scene)
        series = clip.frames[1][:, mask].mean(axis=1).astype(np.float64)
        a = dsp.butterworth_bandpass(dsp.Wave(series, 30.0)).samples
        b = dsp.butterworth_bandpass(w).samples
        rho = np.corrcoef(a, b)[0, 1]
        assert rho >= 0.99

    def test_channel_mean_baseline_recovers_rate(self):
        w = make_pulse(hr=84.0, hr_jitter_pct=0.02)
        scene = synth.SceneSpec(hw=32, modulation_depth=0.01, sensor_noise_std=0.005)
        clip = synth.gen_clip(w, scene, seed=5)
        assert abs(synth.baseline_hr(clip) - 84.0) <= 2.0

    def test_modulation_depth_bounds(self):
        with pytest.raises(synth.SynthError):
            synth.SceneSpec(hw=16, modulation_depth=0.2)


class TestAugment:
    def _clip(self):
        w = make_pulse(hr=100.0, hr_jitter_pct=0.0)
        scene = synth.SceneSpec(hw=16, modulation_depth=0.01)
        clip = synth.gen_clip(w, scene, seed=6, hr_bpm=100.0)
        return clip

    def test_hflip_is_involution(self):
        clip = self._clip()
        twice = synth.augment(
            synth.augment(clip, synth.AugmentPolicy(hflip=True)),
            synth.AugmentPolicy(hflip=True),
        )
        assert np.array_equal(twice.frames, clip.frames)

    def test_identity_policy_bit_identical(self):
        clip = self._clip()
        out = synth.augment(clip, synth.AugmentPolicy())
        assert np.array_equal(out.frames, clip.frames)
        assert np.array_equal(out.gt_wave, clip.gt_wave)

    def test_resample_scales_label_and_length(self):
        clip = self._clip()
        out = synth.augment(clip, synth.AugmentPolicy(resample=0.8))
        assert out.num_frames == round(clip.num_frames * 0.8)
        assert out.hr_bpm == pytest.approx(125.0)

    def test_resampled_wave_matches_rescaled_label(self):
        clip = self._clip()
        for factor in (0.8, 1.25):
            out = synth.augment(clip, synth.AugmentPolicy(resample=factor))
            est = dsp.hr_from_wave(dsp.Wave(out.gt_wave, clip.fs))
            assert abs(est - out.hr_bpm) <= 1.0

    def test_too_short_resample_rejected(self):
        clip = self._clip()
        short = synth.VideoClip(frames=clip.frames[:, :5], fs=30.0, gt_wave=clip.gt_wave[:5])
        with pytest.raises(synth.SynthError, match="< 5"):
            synth.augment(short, synth.AugmentPolicy(resample=0.8))
