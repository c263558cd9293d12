"""Signal-domain machinery: losses, bandpass, spectral HR readout, metrics.

Everything operates on plain numpy waves. The training loop re-expresses
the two losses with differentiable tensor ops; tests pin that re-expression
to the functions here.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import signal
from scipy.special import logsumexp

HR_BAND = (0.75, 2.5)  # Hz, the plausible heart-rate range
SNR_BAND = (0.75, 4.0)  # Hz, wide enough to contain the first harmonic
PSD_FLOOR = 1e-10
WELCH_MAX_SEGMENT = 160
WELCH_BIN_HZ = 0.01  # <= 0.6 bpm readout resolution


class DspError(ValueError):
    pass


@dataclass
class Wave:
    samples: np.ndarray
    fs: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.fs <= 0:
            raise DspError("fs must be positive")
        if self.samples.ndim != 1 or self.samples.size < 2:
            raise DspError("a wave needs at least two samples")

    @property
    def duration_s(self):
        return self.samples.size / self.fs


@dataclass
class SpectrumEstimate:
    freqs: np.ndarray
    power: np.ndarray
    bin_width: float


@dataclass
class LossConfig:
    a: float = 0.2  # waveform-correlation weight
    b: float = 1.0  # spectral cross-entropy weight
    hr_band: tuple = field(default=HR_BAND)

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise DspError("loss weights must be non-negative")
        lo, hi = self.hr_band
        if not 0 < lo < hi:
            raise DspError("hr_band must satisfy 0 < lo < hi")


def loss_time(pred, gt, eps=1e-8):
    """1 - Pearson correlation; 0 when aligned, 2 when anti-aligned."""
    if pred.samples.size != gt.samples.size:
        raise DspError("loss_time: length mismatch")
    p = pred.samples - pred.samples.mean()
    g = gt.samples - gt.samples.mean()
    rho = (p @ g) / (np.sqrt(p @ p + eps) * np.sqrt(g @ g + eps))
    return 1.0 - rho


def welch_psd(w, segment=None, bin_hz=WELCH_BIN_HZ):
    """Averaged-periodogram density: Hamming window, 50% overlap,
    mean-detrended segments, zero-padded so bins are <= bin_hz apart."""
    t = w.samples.size
    nperseg = min(t, WELCH_MAX_SEGMENT) if segment is None else int(segment)
    if t < nperseg:
        raise DspError(f"welch_psd: {t} samples < segment {nperseg}")
    nfft = max(int(np.ceil(w.fs / bin_hz)), nperseg)
    freqs, power = signal.welch(
        w.samples,
        fs=w.fs,
        window="hamming",
        nperseg=nperseg,
        noverlap=nperseg // 2,
        nfft=nfft,
        detrend="constant",
    )
    return SpectrumEstimate(freqs=freqs, power=power, bin_width=w.fs / nfft)


def band_indices(spec, band):
    lo, hi = band
    idx = np.flatnonzero((spec.freqs >= lo) & (spec.freqs <= hi))
    if idx.size == 0:
        raise DspError(f"no spectral bins inside band {band}")
    return idx


def loss_freq(pred, gt, band=HR_BAND):
    """Cross-entropy between the true spectral peak class and the predicted
    band spectrum, with log-power logits (scale-invariant in pred)."""
    if pred.fs != gt.fs:
        raise DspError("loss_freq: sampling rates differ")
    spec_p = welch_psd(pred)
    spec_g = welch_psd(gt)
    idx = band_indices(spec_p, band)
    if idx.size < 2:
        raise DspError("loss_freq: band resolves to fewer than 2 bins")
    target = int(np.argmax(spec_g.power[idx]))
    logits = np.log(spec_p.power[idx] + PSD_FLOOR)
    return float(logsumexp(logits) - logits[target])


def butterworth_bandpass(w, lo=HR_BAND[0], hi=HR_BAND[1]):
    """Second-order Butterworth bandpass applied forward-backward."""
    if w.fs <= 2 * hi:
        raise DspError(f"fs={w.fs} too low for a {hi} Hz cutoff")
    sos = signal.butter(2, [lo, hi], btype="bandpass", output="sos", fs=w.fs)
    # scipy's default transient pad, capped so very short waves still filter
    default_pad = 3 * (2 * len(sos) + 1 - min((sos[:, 2] == 0).sum(), (sos[:, 5] == 0).sum()))
    out = signal.sosfiltfilt(sos, w.samples, padlen=min(default_pad, w.samples.size - 1))
    return Wave(samples=out, fs=w.fs)


def estimate_hr(spec, band=HR_BAND):
    """Heart rate in bpm: 60 x the strongest in-band frequency."""
    idx = band_indices(spec, band)
    return 60.0 * float(spec.freqs[idx[np.argmax(spec.power[idx])]])


def band_peak_is_global(spec, band=HR_BAND):
    """False when the spectrum peaks outside the search band (low confidence)."""
    idx = band_indices(spec, band)
    return float(spec.power[idx].max()) >= float(spec.power.max())


def hr_from_wave(w, band=HR_BAND):
    """Bandpass -> Welch -> peak pick, the standard readout chain."""
    return estimate_hr(welch_psd(butterworth_bandpass(w, *band)), band)


def snr_db(w, hr_bpm, band=SNR_BAND, halfwidth_hz=0.1):
    """Spectral power near the true rate (fundamental + first harmonic)
    against everything else in the band, in dB.

    Uses one full-length windowed periodogram: segment averaging would
    smear a clean tone far beyond the 0.1 Hz template and punish perfect
    signals."""
    spec = welch_psd(w, segment=w.samples.size)
    idx = band_indices(spec, band)
    f = spec.freqs[idx]
    p = spec.power[idx]
    f0 = hr_bpm / 60.0
    template = (np.abs(f - f0) <= halfwidth_hz) | (np.abs(f - 2 * f0) <= halfwidth_hz)
    sig = p[template].sum()
    noise = p[~template].sum()
    return 10.0 * np.log10((sig + PSD_FLOOR) / (noise + PSD_FLOOR))


@dataclass
class MetricsSummary:
    mae: float
    rmse: float
    mape: float
    pearson: float
    snr_db: float | None


def _pearson_lists(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    va, vb = a.var(), b.var()
    if va == 0 and vb == 0:
        return 1.0 if np.array_equal(a, b) else 0.0
    if va == 0 or vb == 0:
        return 0.0
    return float(np.corrcoef(a, b)[0, 1])


def metrics(pred_hrs, gt_hrs, pred_waves=None, gt_waves=None):
    """Clip-level HR metrics plus the average spectral SNR of the
    predicted waves measured against the true rates."""
    pred = np.asarray(pred_hrs, dtype=np.float64)
    gt = np.asarray(gt_hrs, dtype=np.float64) if gt_hrs is not None else None
    if gt is None:
        if gt_waves is None:
            raise DspError("metrics: need gt_hrs or gt_waves")
        gt = np.array([hr_from_wave(w) for w in gt_waves])
    if pred.size == 0 or pred.size != gt.size:
        raise DspError("metrics: empty or mismatched HR lists")
    err = pred - gt
    snr = None
    if pred_waves is not None:
        snr = float(np.mean([snr_db(w, h) for w, h in zip(pred_waves, gt)]))
    return MetricsSummary(
        mae=float(np.abs(err).mean()),
        rmse=float(np.sqrt((err**2).mean())),
        mape=float(np.abs(err / gt).mean() * 100.0),
        pearson=_pearson_lists(pred, gt),
        snr_db=snr,
    )
