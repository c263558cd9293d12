import numpy as np
import pytest

from campulse import dsp


def sine_wave(f, fs=30.0, t=600, phase=0.0, amp=1.0):
    tt = np.arange(t) / fs
    return dsp.Wave(amp * np.sin(2 * np.pi * f * tt + phase), fs)


class TestLossTime:
    def test_identical_waves(self, rng):
        w = dsp.Wave(rng.standard_normal(200), 30.0)
        assert dsp.loss_time(w, w) == pytest.approx(0.0, abs=1e-6)

    def test_negated_waves(self, rng):
        w = dsp.Wave(rng.standard_normal(200), 30.0)
        neg = dsp.Wave(-w.samples, 30.0)
        assert dsp.loss_time(neg, w) == pytest.approx(2.0, abs=1e-6)

    def test_independent_noise_monte_carlo(self):
        rng = np.random.default_rng(123)
        vals = []
        for _ in range(100):
            a = dsp.Wave(rng.standard_normal(10_000), 30.0)
            b = dsp.Wave(rng.standard_normal(10_000), 30.0)
            vals.append(dsp.loss_time(a, b))
        assert abs(np.mean(vals) - 1.0) <= 0.05

    def test_length_mismatch(self, rng):
        with pytest.raises(dsp.DspError, match="length"):
            dsp.loss_time(
                dsp.Wave(rng.standard_normal(10), 30.0),
                dsp.Wave(rng.standard_normal(11), 30.0),
            )

    def test_affine_invariance(self, rng):
        a = dsp.Wave(rng.standard_normal(500), 30.0)
        b = dsp.Wave(rng.standard_normal(500), 30.0)
        base = dsp.loss_time(a, b)
        scaled = dsp.Wave(3.7 * a.samples + 11.0, 30.0)
        assert dsp.loss_time(scaled, b) == pytest.approx(base, abs=1e-9)


def test_loss_config_validation():
    dsp.LossConfig()  # defaults are legal
    with pytest.raises(dsp.DspError):
        dsp.LossConfig(a=-0.1)
    with pytest.raises(dsp.DspError):
        dsp.LossConfig(hr_band=(2.5, 0.75))


class TestLossFreq:
    def test_matched_beats_shifted(self):
        gt = sine_wave(1.5)
        base = dsp.loss_freq(sine_wave(1.5, phase=0.4), gt)
        for off in (-0.4, -0.2, 0.2, 0.4):
            assert base < dsp.loss_freq(sine_wave(1.5 + off), gt)

    def test_uniform_spectrum_gives_log_k(self, monkeypatch):
        gt = sine_wave(1.2, t=160)
        pred = sine_wave(1.2, t=160)
        spec = dsp.welch_psd(pred)
        k = dsp.band_indices(spec, dsp.HR_BAND).size
        flat = spec.power.copy()
        flat[:] = 0.5  # uniform over every bin, so uniform over the band
        monkeypatch.setattr(
            dsp,
            "welch_psd",
            lambda w, **kw: dsp.SpectrumEstimate(spec.freqs, flat, spec.bin_width),
        )
        assert dsp.loss_freq(pred, gt) == pytest.approx(np.log(k), rel=1e-6)

    def test_wrong_rate_costs_more(self):
        gt = sine_wave(1.2)
        assert dsp.loss_freq(sine_wave(2.0), gt) > dsp.loss_freq(sine_wave(1.2), gt)

    def test_scale_invariance(self, rng):
        gt = sine_wave(1.3, t=160)
        pred = dsp.Wave(
            sine_wave(1.3, t=160).samples + 0.1 * rng.standard_normal(160), 30.0
        )
        base = dsp.loss_freq(pred, gt)
        for c in (0.1, 10.0):
            scaled = dsp.Wave(c * pred.samples, 30.0)
            assert dsp.loss_freq(scaled, gt) == pytest.approx(base, abs=1e-6)

    def test_rate_mismatch_rejected(self):
        with pytest.raises(dsp.DspError, match="sampling"):
            dsp.loss_freq(sine_wave(1.0, fs=30.0), sine_wave(1.0, fs=25.0))


class TestButterworth:
    def test_dc_rejected(self):
        w = dsp.butterworth_bandpass(dsp.Wave(np.ones(600), 30.0))
        assert np.abs(w.samples[60:-60]).max() <= 1e-3

    def test_passband_amplitude(self):
        w = dsp.butterworth_bandpass(sine_wave(1.5))
        mid = np.abs(w.samples[120:-120]).max()
        assert 0.9 <= mid <= 1.0

    def test_stopband_attenuation(self):
        w = dsp.butterworth_bandpass(sine_wave(5.0))
        assert np.abs(w.samples[120:-120]).max() <= 0.2

    def test_length_preserved_even_for_tiny_inputs(self):
        for t in (5, 9, 30):
            w = dsp.butterworth_bandpass(dsp.Wave(np.sin(np.arange(t)), 30.0))
            assert w.samples.size == t

    def test_low_rate_rejected(self):
        with pytest.raises(dsp.DspError, match="low"):
            dsp.butterworth_bandpass(dsp.Wave(np.ones(100), 4.0))

    def test_refiltering_keeps_hr(self):
        w = dsp.butterworth_bandpass(sine_wave(1.4))
        once = dsp.estimate_hr(dsp.welch_psd(w))
        twice = dsp.estimate_hr(dsp.welch_psd(dsp.butterworth_bandpass(w)))
        assert once == pytest.approx(twice, abs=1e-9)


class TestWelch:
    def test_sine_peak_bin(self):
        spec = dsp.welch_psd(sine_wave(1.5, t=160))
        peak = spec.freqs[np.argmax(spec.power)]
        assert abs(peak - 1.5) <= spec.bin_width

    def test_bin_width_resolution(self):
        spec = dsp.welch_psd(sine_wave(1.0, t=160))
        assert spec.bin_width <= 0.01 + 1e-12

    def test_white_noise_band_flatness(self):
        rng = np.random.default_rng(7)
        acc = None
        for _ in range(100):
            spec = dsp.welch_psd(dsp.Wave(rng.standard_normal(600), 30.0))
            acc = spec.power if acc is None else acc + spec.power
        idx = dsp.band_indices(spec, dsp.HR_BAND)
        band = acc[idx]
        assert band.max() / band.min() <= 1.5

    def test_parseval_within_ten_percent(self, rng):
        x = rng.standard_normal(600)
        spec = dsp.welch_psd(dsp.Wave(x, 30.0))
        total = spec.power.sum() * spec.bin_width
        var = np.var(x)
        assert abs(total - var) / var <= 0.10

    def test_segment_longer_than_signal_rejected(self, rng):
        with pytest.raises(dsp.DspError, match="segment"):
            dsp.welch_psd(dsp.Wave(rng.standard_normal(100), 30.0), segment=128)


class TestEstimateHr:
    def test_delta_spectrum(self):
        freqs = np.linspace(0, 5, 501)
        power = np.zeros_like(freqs)
        power[np.argmin(np.abs(freqs - 1.5))] = 1.0
        spec = dsp.SpectrumEstimate(freqs, power, 0.01)
        assert dsp.estimate_hr(spec) == pytest.approx(90.0)

    def test_fundamental_beats_harmonic(self):
        freqs = np.linspace(0, 5, 501)
        power = np.zeros_like(freqs)
        power[np.argmin(np.abs(freqs - 1.2))] = 1.0
        power[np.argmin(np.abs(freqs - 2.4))] = 0.3
        spec = dsp.SpectrumEstimate(freqs, power, 0.01)
        assert dsp.estimate_hr(spec) == pytest.approx(72.0)

    def test_band_clamp_with_confidence_flag(self):
        freqs = np.linspace(0, 5, 501)
        power = np.exp(-0.5 * ((freqs - 3.0) / 0.05) ** 2)  # peak at 3 Hz
        power[np.argmin(np.abs(freqs - 1.0))] = 0.4  # best in-band bin
        spec = dsp.SpectrumEstimate(freqs, power, 0.01)
        hr = dsp.estimate_hr(spec)
        assert 0.75 * 60 <= hr <= 2.5 * 60
        assert hr == pytest.approx(60.0)
        assert not dsp.band_peak_is_global(spec)

    def test_empty_band_rejected(self):
        spec = dsp.SpectrumEstimate(np.array([5.0, 6.0]), np.ones(2), 1.0)
        with pytest.raises(dsp.DspError, match="band"):
            dsp.estimate_hr(spec)

    @pytest.mark.parametrize("f", [0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4])
    def test_full_chain_sweep(self, f):
        hr = dsp.hr_from_wave(sine_wave(f))
        assert abs(hr - 60.0 * f) <= 0.6


class TestMetrics:
    def test_identity(self):
        m = dsp.metrics([70.0, 80.0], [70.0, 80.0])
        assert m.mae == 0 and m.rmse == 0 and m.mape == 0
        assert m.pearson == pytest.approx(1.0)

    def test_constant_equal_lists(self):
        m = dsp.metrics([72.0] * 5, [72.0] * 5)
        assert m.pearson == 1.0

    def test_constant_offset(self):
        gt = np.linspace(60, 100, 10)
        m = dsp.metrics(gt + 2.0, gt)
        assert m.mae == pytest.approx(2.0)
        assert m.rmse == pytest.approx(2.0)

    def test_empty_rejected(self):
        with pytest.raises(dsp.DspError):
            dsp.metrics([], [])

    def test_clean_sine_snr(self):
        w = sine_wave(1.5, t=900)
        assert dsp.snr_db(w, 90.0) >= 20.0

    def test_metrics_with_waves(self):
        waves = [sine_wave(1.2, t=600), sine_wave(1.8, t=600)]
        m = dsp.metrics([72.0, 108.0], [72.0, 108.0], pred_waves=waves)
        assert m.snr_db >= 20.0
