"""Training loop, evaluation, inference.

The step loss is a * (1 - Pearson) + b * spectral cross-entropy, both
expressed with tensor ops so gradients flow; the tensor expressions are
pinned against :mod:`campulse.dsp` in the tests. Runs are deterministic
given (seed, config, data).
"""

import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import get_window

from . import dsp
from . import ops as O
from .autodiff import NonFiniteError, Tensor, backward, zero_grads
from .data import list_clips, load_clip
from .model import Model
from .synth import AugmentPolicy, VideoClip, augment


class ConfigError(ValueError):
    pass


class NumericError(RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


@dataclass
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.0
    epochs: int = 10
    batch_size: int = 2
    seed: int = 0
    loss_a: float = 0.2
    loss_b: float = 1.0
    frames_per_segment: int = 160
    augment: bool = False
    dtype: str = "f32"  # f32 for speed runs, f64 for exactness work

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.batch_size < 2:
            raise ConfigError("batch size must be >= 2 (batchnorm statistics)")
        if self.frames_per_segment % 4:
            raise ConfigError("frames_per_segment must divide by 4")
        if self.dtype not in ("f32", "f64"):
            raise ConfigError("dtype must be f32 or f64")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "f32" else np.float64


def config_hash(model_cfg, train_cfg=None):
    blob = model_cfg.to_json()
    if train_cfg is not None:
        blob += json.dumps(asdict(train_cfg), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 weight_decay=0.0):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = np.asarray(p.grad, dtype=p.data.dtype)
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            mhat = self.m[name] / (1 - b1**self.t)
            vhat = self.v[name] / (1 - b2**self.t)
            p.data = p.data - self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def zero_grad(self):
        zero_grads(self.params.values())


# ---------------------------------------------------------------------------
# differentiable losses (must agree with campulse.dsp)
# ---------------------------------------------------------------------------

def _center_rows(x):
    b, t = x.shape
    mu = O.expand_dim(O.mul(O.sum_axis(x, 1), 1.0 / t), 1, t)
    return O.sub(x, mu)


def waveform_loss(pred, gt, eps=1e-8):
    """Mean over the batch of (1 - Pearson correlation); pred (B,T) Tensor."""
    gt = gt if isinstance(gt, Tensor) else Tensor(np.asarray(gt, pred.dtype))
    p = _center_rows(pred)
    g = _center_rows(gt)
    num = O.sum_axis(O.mul(p, g), 1)
    den = O.mul(
        O.sqrt(O.add(O.sum_axis(O.mul(p, p), 1), eps)),
        O.sqrt(O.add(O.sum_axis(O.mul(g, g), 1), eps)),
    )
    return O.sub(1.0, O.mean_all(O.div(num, den)))


class SpectralLossPlan:
    """Precomputed constants for the single-segment band periodogram.

    Windows the whole wave as one segment, which coincides with welch_psd
    whenever T is at most the Welch segment cap (the canonical training
    length); longer augmented segments just use a longer window.
    """

    def __init__(self, t, fs, band=dsp.HR_BAND, dtype=np.float64):
        self.t = t
        self.fs = fs
        self.nfft = max(int(np.ceil(fs / dsp.WELCH_BIN_HZ)), t)
        self.window = get_window("hamming", t).astype(dtype)
        self.scale = 1.0 / (fs * (self.window**2).sum())
        freqs = np.fft.rfftfreq(self.nfft, d=1.0 / fs)
        idx = np.flatnonzero((freqs >= band[0]) & (freqs <= band[1]))
        if idx.size < 2:
            raise ConfigError("band resolves to fewer than 2 bins")
        self.band_lo = int(idx[0])
        self.band_hi = int(idx[-1]) + 1
        # one-sided doubling applies to every bin except DC/Nyquist; the
        # band never touches those
        self.bin_scale = 2.0 * self.scale
        self.dtype = dtype

    def band_power(self, pred):
        """Differentiable band PSD of (B, T) rows."""
        b, t = pred.shape
        if t != self.t:
            raise ConfigError(f"plan built for T={self.t}, got {t}")
        win = Tensor(np.broadcast_to(self.window, (b, t)).astype(pred.dtype))
        p = O.mul(_center_rows(pred), win)
        spec = O.rfft_time(O.reshape(p, (b, t, 1)), nfft=self.nfft)
        power = O.sum_axis(O.mul(spec, spec), 3)  # (B, F, 1)
        power = O.reshape(power, (b, spec.shape[1]))
        band = O.slice_time(power, self.band_lo, self.band_hi, axis=1)
        return O.mul(band, self.bin_scale)

    def target_bins(self, gt_waves, fs):
        """Class index per clip from the true wave's Welch spectrum."""
        targets = []
        for row in np.asarray(gt_waves, dtype=np.float64):
            spec = dsp.welch_psd(dsp.Wave(row, fs))
            targets.append(
                int(np.argmax(spec.power[self.band_lo : self.band_hi]))
            )
        return np.asarray(targets)

    def cross_entropy(self, pred, targets):
        """CE of log-power logits against per-row target bins."""
        band = self.band_power(pred)
        logits = O.log(O.add(band, dsp.PSD_FLOOR))
        b, k = logits.shape
        # logsumexp with a constant shift for stability
        shift = logits.data.max(axis=1)
        shifted = O.sub(logits, Tensor(np.repeat(shift[:, None], k, axis=1)))
        lse = O.add(O.log(O.sum_axis(O.exp(shifted), 1)), Tensor(shift))
        onehot = np.zeros((b, k), dtype=logits.dtype)
        onehot[np.arange(b), targets] = 1.0
        picked = O.sum_axis(O.mul(logits, Tensor(onehot)), 1)
        return O.mean_all(O.sub(lse, picked))


def spectral_loss(pred, gt_waves, fs, plan=None):
    plan = plan or SpectralLossPlan(pred.shape[1], fs, dtype=pred.dtype)
    return plan.cross_entropy(pred, plan.target_bins(gt_waves, fs))


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class RunManifest:
    model_config: dict
    train_config: dict
    seed: int
    config_hash: str
    epoch_losses: list = field(default_factory=list)
    checkpoint: str = ""
    wall_time_s: float = 0.0

    def save(self, path):
        with open(path, "w") as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True)


def _segments(clip, seg_len):
    """Full non-overlapping segments of a clip (frames + wave)."""
    t = clip.num_frames
    out = []
    for start in range(0, t - seg_len + 1, seg_len):
        out.append(
            (
                clip.frames[:, start : start + seg_len],
                clip.gt_wave[start : start + seg_len],
            )
        )
    return out


def _batch_augment(frames, waves, rng, seg_len):
    """One random policy per batch; resampled length snaps to a multiple
    of 4 so the sliced paths stay valid."""
    flip = bool(rng.integers(0, 2))
    factor = float(rng.uniform(0.8, 1.25))
    t_new = max(8, int(round(seg_len * factor / 4)) * 4)
    eff = t_new / seg_len
    policy = AugmentPolicy(hflip=flip, resample=eff)
    new_frames, new_waves = [], []
    for fr, wv in zip(frames, waves):
        clip = VideoClip(frames=fr, fs=1.0, gt_wave=wv)
        aug = augment(clip, policy)
        new_frames.append(aug.frames)
        new_waves.append(aug.gt_wave)
    return np.stack(new_frames), np.stack(new_waves)


def train(model_cfg, train_cfg, train_dir, out_dir, log=print):
    """Adam over segment batches; writes a checkpoint every epoch plus a
    run manifest. Returns (model, manifest)."""
    started = time.time()
    clips = [load_clip(p) for p, _ in list_clips(train_dir)]
    if len(clips) < 2:
        raise ConfigError(f"need at least 2 training clips, got {len(clips)}")
    seg_len = train_cfg.frames_per_segment
    segments = []
    for clip in clips:
        if clip.gt_wave is None:
            raise ConfigError("training clips must carry gt_wave")
        segments.extend(_segments(clip, min(seg_len, clip.num_frames // 4 * 4)))
    if not segments:
        raise ConfigError("no full segments available for training")
    if len({seg[1].size for seg in segments}) != 1:
        raise ConfigError("training clips must share a common segment length")
    fs = clips[0].fs

    os.makedirs(out_dir, exist_ok=True)
    model = Model(model_cfg, seed=train_cfg.seed, dtype=train_cfg.np_dtype)
    opt = Adam(
        model.parameters(),
        lr=train_cfg.lr,
        beta1=train_cfg.beta1,
        beta2=train_cfg.beta2,
        weight_decay=train_cfg.weight_decay,
    )
    rng = np.random.default_rng(train_cfg.seed)
    manifest = RunManifest(
        model_config=json.loads(model_cfg.to_json()),
        train_config=asdict(train_cfg),
        seed=train_cfg.seed,
        config_hash=config_hash(model_cfg, train_cfg),
        checkpoint=os.path.join(out_dir, "checkpoint.rmtc"),
    )

    step = 0
    bsz = train_cfg.batch_size
    for epoch in range(train_cfg.epochs):
        order = rng.permutation(len(segments))
        losses = []
        for lo in range(0, len(order) - bsz + 1, bsz):
            idx = order[lo : lo + bsz]
            frames = np.stack([segments[i][0] for i in idx])
            waves = np.stack([segments[i][1] for i in idx])
            if train_cfg.augment:
                frames, waves = _batch_augment(frames, waves, rng, frames.shape[2])
            step += 1
            try:
                bvp = model.forward(
                    Tensor(frames.astype(train_cfg.np_dtype)), train=True
                )
                lt = waveform_loss(bvp, waves.astype(train_cfg.np_dtype))
                lf = spectral_loss(bvp, waves, fs)
                loss = O.add(
                    O.mul(lt, float(train_cfg.loss_a)),
                    O.mul(lf, float(train_cfg.loss_b)),
                )
                value = loss.item()
                if not np.isfinite(value):
                    raise NumericError(f"non-finite loss at step {step}", step=step)
                opt.zero_grad()
                backward(loss)
                opt.step()
            except NonFiniteError as exc:
                raise NumericError(f"{exc} at step {step}", step=step) from exc
            losses.append(value)
        manifest.epoch_losses.append(float(np.mean(losses)))
        model.save(manifest.checkpoint)
        log(
            f"epoch {epoch + 1}/{train_cfg.epochs}: "
            f"loss {manifest.epoch_losses[-1]:.4f} ({len(losses)} steps)"
        )
    manifest.wall_time_s = time.time() - started
    manifest.save(os.path.join(out_dir, "manifest.json"))
    return model, manifest


# ---------------------------------------------------------------------------
# evaluation / inference
# ---------------------------------------------------------------------------

def predict_wave(model, clip, max_len=None):
    """Eval-mode forward of one clip -> Wave (full length or truncated)."""
    frames = clip.frames if max_len is None else clip.frames[:, :max_len]
    bvp = model.forward(frames[None], train=False)
    return dsp.Wave(bvp.data[0].astype(np.float64), clip.fs)


def evaluate(model, test_dir, max_len=None):
    """Per clip: forward -> bandpass -> Welch -> peak HR; aggregate the
    five metrics. Returns (summary, per-clip rows)."""
    entries = list_clips(test_dir)
    if not entries:
        raise ConfigError(f"no clips found in {test_dir}")
    rows = []
    pred_waves = []
    pred_hrs = []
    gt_hrs = []
    for i, (path, _) in enumerate(entries):
        clip = load_clip(path)
        wave = predict_wave(model, clip, max_len=max_len)
        filtered = dsp.butterworth_bandpass(wave)
        hr = dsp.estimate_hr(dsp.welch_psd(filtered))
        gt_hr = dsp.hr_from_wave(dsp.Wave(clip.gt_wave[: wave.samples.size], clip.fs))
        snr = dsp.snr_db(filtered, gt_hr)
        rows.append(
            {
                "clip_id": os.path.basename(path),
                "gt_hr": gt_hr,
                "pred_hr": hr,
                "mae_contrib": abs(hr - gt_hr),
                "snr_db": snr,
            }
        )
        pred_waves.append(filtered)
        pred_hrs.append(hr)
        gt_hrs.append(gt_hr)
    summary = dsp.metrics(pred_hrs, gt_hrs, pred_waves=pred_waves)
    return summary, rows


def infer(model, clip, band=dsp.HR_BAND):
    """Wave + HR for one clip of any length >= 5; returns flags instead of
    failing on degenerate input."""
    wave = predict_wave(model, clip)
    filtered = dsp.butterworth_bandpass(wave)
    spec = dsp.welch_psd(filtered)
    hr = dsp.estimate_hr(spec)
    flags = []
    if wave.duration_s < 2.0:
        flags.append("near-single-beat, reduced reliability")
    if not dsp.band_peak_is_global(dsp.welch_psd(wave)):
        flags.append("spectral peak outside heart-rate band")
    snr = dsp.snr_db(filtered, hr)
    if snr < 0:
        flags.append("low spectral SNR")
    return {"wave": wave, "hr_bpm": hr, "snr_db": snr, "flags": flags}
