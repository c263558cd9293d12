"""Synthetic pulse waves and skin-patch clips for closed-loop verification.

A quasi-periodic pulse is a harmonic stack over a beat phase whose
beat-to-beat intervals jitter (that is how heart-rate variability perturbs
real recordings, as opposed to smooth frequency modulation). A clip embeds
the pulse as a tiny multiplicative brightness modulation of a "skin"
region; the rest of the frame is uncorrelated. A channel-mean baseline can
recover the rate on clean scenes, which proves any trained model has a
recoverable target.
"""

from dataclasses import dataclass

import numpy as np

from .dsp import Wave, hr_from_wave

HARMONIC_PHASES = (0.0, 1.0, 1.7)  # radians; skews the pulse PPG-like


class SynthError(ValueError):
    pass


@dataclass
class PulseSpec:
    hr_bpm: float
    fs: float = 30.0
    duration_s: float = 10.0
    harmonic_ratios: tuple = (1.0, 0.35, 0.1)
    hr_jitter_pct: float = 0.0
    noise_std: float = 0.0

    def __post_init__(self):
        if not 45.0 <= self.hr_bpm <= 150.0:
            raise SynthError(f"hr_bpm {self.hr_bpm} outside 45..150")
        if self.fs <= 0 or self.duration_s <= 0:
            raise SynthError("fs and duration must be positive")


@dataclass
class SceneSpec:
    hw: int = 32
    skin_frac: float = 0.55  # side fraction of the centered skin square
    modulation_depth: float = 0.01
    illumination_drift: float = 0.0
    sensor_noise_std: float = 0.0
    motion_amplitude_px: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.modulation_depth <= 0.05:
            raise SynthError("modulation_depth must be in (0, 0.05]")
        if self.hw % 8:
            raise SynthError("frame size must be divisible by 8")


@dataclass
class VideoClip:
    frames: np.ndarray  # (3, T, H, W)
    fs: float
    gt_wave: np.ndarray | None = None
    hr_bpm: float | None = None

    @property
    def num_frames(self):
        return self.frames.shape[1]


def gen_pulse(spec, seed=0):
    """Harmonic stack over a jittered beat phase, plus white noise."""
    rng = np.random.default_rng(seed)
    t = np.arange(int(round(spec.duration_s * spec.fs))) / spec.fs
    period = 60.0 / spec.hr_bpm
    n_beats = int(np.ceil(spec.duration_s / period)) + 3
    intervals = period * (
        1.0 + spec.hr_jitter_pct * rng.standard_normal(n_beats)
    )
    intervals = np.maximum(intervals, 0.3 * period)
    beat_times = np.concatenate([[0.0], np.cumsum(intervals)])
    phase = 2 * np.pi * np.interp(t, beat_times, np.arange(beat_times.size))
    wave = np.zeros_like(t)
    for k, (ratio, ph) in enumerate(zip(spec.harmonic_ratios, HARMONIC_PHASES)):
        wave += ratio * np.cos((k + 1) * phase + ph)
    wave += spec.noise_std * rng.standard_normal(t.size)
    return Wave(samples=wave, fs=spec.fs)


def _skin_mask(scene):
    hw = scene.hw
    side = max(2, int(round(scene.skin_frac * hw)))
    lo = (hw - side) // 2
    mask = np.zeros((hw, hw), dtype=bool)
    mask[lo : lo + side, lo : lo + side] = True
    return mask


BASE_COLOR = np.array([0.62, 0.46, 0.40])  # R, G, B skin tone
BACKGROUND = np.array([0.25, 0.28, 0.30])


def gen_clip(pulse, scene, seed=0, hr_bpm=None):
    """Embed a pulse as brightness modulation of the skin region.

    skin pixel  = base_color * (1 + depth * pulse_t) + drift + noise
    other pixel = background + noise (uncorrelated with the pulse)
    """
    rng = np.random.default_rng(seed)
    t = pulse.samples.size
    hw = scene.hw
    mask = _skin_mask(scene)

    # unit-variance pulse so modulation_depth is the fractional amplitude
    p = pulse.samples - pulse.samples.mean()
    std = p.std()
    if std > 0:
        p = p / std

    texture = 1.0 + 0.05 * rng.uniform(-1.0, 1.0, size=(hw, hw))
    skin = BASE_COLOR[:, None, None] * texture
    background = np.broadcast_to(BACKGROUND[:, None, None], (3, hw, hw))
    gain = 1.0 + scene.modulation_depth * p  # (T,)

    if scene.motion_amplitude_px > 0:
        shift = np.round(
            scene.motion_amplitude_px
            * np.sin(2 * np.pi * 0.2 * np.arange(t) / pulse.fs)
        ).astype(int)
    else:
        shift = np.zeros(t, dtype=int)

    drift = scene.illumination_drift * np.sin(
        2 * np.pi * 0.05 * np.arange(t) / pulse.fs
    )
    frames = np.empty((3, t, hw, hw), dtype=np.float32)
    for i in range(t):
        m = np.roll(mask, shift[i], axis=1) if shift[i] else mask
        frames[:, i] = np.where(m, skin * gain[i], background) + drift[i]
    if scene.sensor_noise_std > 0:
        frames += rng.normal(0.0, scene.sensor_noise_std, size=frames.shape).astype(
            np.float32
        )
    return VideoClip(
        frames=frames,
        fs=pulse.fs,
        gt_wave=pulse.samples.copy(),
        hr_bpm=hr_bpm,
    )


@dataclass
class AugmentPolicy:
    hflip: bool = False
    resample: float | None = None  # time-scale factor in [0.8, 1.25]


def sample_policy(rng):
    """Random draw used during training: flip half the time, resample always."""
    return AugmentPolicy(
        hflip=bool(rng.integers(0, 2)),
        resample=float(rng.uniform(0.8, 1.25)),
    )


def augment(clip, policy, seed=0):
    """Horizontal flip and/or linear time resampling (labels rescale)."""
    frames = clip.frames
    wave = clip.gt_wave
    hr = clip.hr_bpm
    if policy.hflip:
        frames = frames[..., ::-1].copy()
    if policy.resample is not None:
        factor = float(policy.resample)
        t_old = frames.shape[1]
        t_new = int(round(t_old * factor))
        if t_new < 5:
            raise SynthError(f"resampled length {t_new} < 5")
        src = np.minimum(np.arange(t_new) / factor, t_old - 1)
        lo = np.floor(src).astype(int)
        hi = np.minimum(lo + 1, t_old - 1)
        frac = (src - lo).astype(frames.dtype)
        frames = (
            frames[:, lo] * (1.0 - frac)[None, :, None, None]
            + frames[:, hi] * frac[None, :, None, None]
        )
        if wave is not None:
            wf = wave[lo] * (1.0 - frac) + wave[hi] * frac
            wave = wf
        if hr is not None:
            hr = hr / factor
    elif wave is not None:
        wave = wave.copy()
    return VideoClip(frames=frames, fs=clip.fs, gt_wave=wave, hr_bpm=hr)


def baseline_hr(clip):
    """Channel-mean readout: average the green channel over the frame,
    then run the standard bandpass -> Welch -> peak chain."""
    series = clip.frames[1].mean(axis=(1, 2)).astype(np.float64)
    return hr_from_wave(Wave(samples=series, fs=clip.fs))
