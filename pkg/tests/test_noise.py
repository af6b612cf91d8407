import math

import numpy as np
import pytest

from nvmag.errors import DataError
from nvmag.noise import (
    DISPERSIVE_SLOPE_FACTOR,
    ELEMENTARY_CHARGE_C,
    SlopeCalibration,
    TimeSeries,
    asd_averaged,
    band_sensitivity,
    extract_tone,
    shot_noise_limit,
    volts_to_field,
)


def white_series(sigma_t, fs=1000.0, duration=100.0, seed=0):
    rng = np.random.default_rng(seed)
    n = int(fs * duration)
    return TimeSeries(fs, rng.normal(0.0, sigma_t, n))


class TestTimeSeries:
    def test_duration(self):
        ts = TimeSeries(100.0, np.zeros(250))
        assert ts.duration_s == pytest.approx(2.5)

    @pytest.mark.parametrize(
        "rate,samples",
        [
            (0.0, [0.0, 1.0]),
            (-5.0, [0.0, 1.0]),
            (math.nan, [0.0, 1.0]),
            (10.0, [0.0]),
            (10.0, [[0.0, 1.0]]),
            (10.0, [0.0, math.inf]),
        ],
    )
    def test_validation(self, rate, samples):
        with pytest.raises(DataError):
            TimeSeries(rate, samples)

    def test_samples_write_protected(self):
        ts = TimeSeries(10.0, [1.0, 2.0])
        with pytest.raises(ValueError):
            ts.samples[0] = 5.0


class TestAsd:
    def test_segmenting_and_bin_layout(self):
        ts = white_series(1e-12, fs=1000.0, duration=100.0)
        asd = asd_averaged(ts, 1.0)
        assert asd.segment_count == 100
        assert asd.bin_width_hz == pytest.approx(1.0)
        assert asd.frequencies_hz.size == 501
        assert asd.frequencies_hz[0] == 0.0
        assert asd.frequencies_hz[-1] == pytest.approx(500.0)

    def test_leftover_samples_dropped(self):
        ts = TimeSeries(100.0, np.random.default_rng(1).normal(size=950))
        asd = asd_averaged(ts, 1.0)
        assert asd.segment_count == 9

    def test_white_noise_level(self):
        # sigma * sqrt(2 / fs): 10.04 pT at 1 kHz should read 449 pT/sqrt(Hz)
        sigma = 10.04e-12
        fs = 1000.0
        ts = white_series(sigma, fs=fs, duration=100.0, seed=2)
        asd = asd_averaged(ts, 1.0)
        level = band_sensitivity(asd, 60.0, 90.0)
        assert level == pytest.approx(sigma * math.sqrt(2.0 / fs), rel=0.05)

    def test_parseval_total_power(self):
        # sum of density^2 * df equals the record variance essentially exactly
        ts = white_series(3.7e-9, fs=500.0, duration=40.0, seed=3)
        asd = asd_averaged(ts, 2.0)
        total = float(np.sum(asd.density**2) * asd.bin_width_hz)
        n_used = asd.segment_count * int(2.0 * 500.0)
        used = ts.samples[:n_used]
        variance = float(np.mean(used**2))
        assert total == pytest.approx(variance, rel=1e-9)

    def test_bin_centered_tone_peak(self):
        # amplitude A concentrated in one bin reads A * sqrt(T_seg / 2)
        fs, t_seg, f0, amp = 1000.0, 1.0, 85.0, 0.7e-6
        t = np.arange(int(fs * 20.0)) / fs
        ts = TimeSeries(fs, amp * np.cos(2 * math.pi * f0 * t))
        asd = asd_averaged(ts, t_seg)
        i = int(round(f0 * t_seg))
        assert asd.frequencies_hz[i] == pytest.approx(f0)
        assert asd.density[i] == pytest.approx(amp * math.sqrt(t_seg / 2.0), rel=1e-9)

    def test_more_segments_reduce_scatter_as_sqrt_n(self):
        # bin-to-bin scatter of a white spectrum shrinks ~ 1/sqrt(segments)
        sigma, fs = 1.0, 1000.0
        ts = white_series(sigma, fs=fs, duration=100.0, seed=4)
        asd100 = asd_averaged(ts, 1.0)
        ts1 = TimeSeries(fs, ts.samples[: int(fs)])
        asd1 = asd_averaged(ts1, 1.0)
        band = lambda a: a.density[(a.frequencies_hz >= 100) & (a.frequencies_hz <= 400)]
        ratio = np.std(band(asd100)) / np.std(band(asd1))
        assert ratio == pytest.approx(0.1, abs=0.04)

    def test_rms_average_is_unbiased_amplitude_reads_low(self):
        sigma, fs = 1.0, 1000.0
        ts = white_series(sigma, fs=fs, duration=200.0, seed=5)
        expected = sigma * math.sqrt(2.0 / fs)
        rms = band_sensitivity(asd_averaged(ts, 1.0, average="rms"), 100, 400)
        amp = band_sensitivity(asd_averaged(ts, 1.0, average="amplitude"), 100, 400)
        assert rms == pytest.approx(expected, rel=0.02)
        # Rayleigh magnitude bias: mean amplitude = sqrt(pi)/2 of the rms
        assert amp / rms == pytest.approx(math.sqrt(math.pi) / 2.0, rel=0.02)

    def test_unsupported_options_fail_loudly(self):
        ts = white_series(1.0, duration=4.0)
        with pytest.raises(NotImplementedError):
            asd_averaged(ts, 1.0, window="hann")
        with pytest.raises(NotImplementedError):
            asd_averaged(ts, 1.0, overlap=0.5)
        with pytest.raises(ValueError):
            asd_averaged(ts, 1.0, average="median")

    def test_segment_length_validation(self):
        ts = white_series(1.0, duration=4.0)
        with pytest.raises(ValueError):
            asd_averaged(ts, 0.0)
        with pytest.raises(ValueError):
            asd_averaged(ts, 100.0)

    def test_band_validation(self):
        asd = asd_averaged(white_series(1.0, duration=4.0), 1.0)
        with pytest.raises(ValueError):
            band_sensitivity(asd, 90.0, 60.0)
        with pytest.raises(ValueError):
            band_sensitivity(asd, 100.25, 100.75)


class TestCalibration:
    def test_volts_per_tesla(self):
        cal = SlopeCalibration(slope_v_per_hz=2.0e-9, gamma_mhz_per_mt=28.024)
        assert cal.volts_per_tesla == pytest.approx(2.0e-9 * 28.024e9)

    def test_rejects_zero_slope(self):
        with pytest.raises(ValueError):
            SlopeCalibration(slope_v_per_hz=0.0)

    def test_volts_to_field_scaling(self):
        cal = SlopeCalibration(slope_v_per_hz=1.5e-9)
        ts = TimeSeries(100.0, np.array([1.0, -2.0, 0.5]))
        out = volts_to_field(ts, cal)
        assert np.allclose(out.samples, ts.samples / cal.volts_per_tesla, rtol=1e-15)
        assert out.sample_rate_hz == ts.sample_rate_hz

    def test_calibration_commutes_with_asd(self):
        # scaling the record then taking the ASD equals scaling the ASD
        cal = SlopeCalibration(slope_v_per_hz=0.8e-9)
        ts = white_series(1e-3, duration=10.0, seed=6)
        a_before = asd_averaged(volts_to_field(ts, cal), 1.0)
        a_after = asd_averaged(ts, 1.0)
        assert np.allclose(
            a_before.density, a_after.density / cal.volts_per_tesla, rtol=1e-12
        )


class TestToneExtraction:
    def test_noiseless_tone_exact(self):
        fs, f0 = 1000.0, 85.0
        t = np.arange(10000) / fs
        amp, phase, offset = 0.7e-6, 0.6, 3.2e-6
        ts = TimeSeries(fs, amp * np.cos(2 * math.pi * f0 * t + phase) + offset)
        fit = extract_tone(ts, f0)
        assert fit.amplitude == pytest.approx(amp, rel=1e-12)
        assert fit.phase_rad == pytest.approx(phase, abs=1e-12)
        assert fit.offset == pytest.approx(offset, abs=1e-18)

    def test_phase_does_not_change_amplitude(self):
        fs, f0, amp = 500.0, 37.0, 2.0
        t = np.arange(5000) / fs
        amps = []
        for phase in (0.0, 0.9, -2.4, math.pi / 2):
            ts = TimeSeries(fs, amp * np.cos(2 * math.pi * f0 * t + phase))
            amps.append(extract_tone(ts, f0).amplitude)
        assert np.allclose(amps, amp, rtol=1e-10)

    def test_snr_ten_amplitude_within_three_sigma(self):
        # tone at SNR 10: estimates over 100 noise seeds must scatter as
        # predicted (sigma_A = sigma * sqrt(2/N)) and stay within 3 sigma
        fs, f0, amp = 1000.0, 85.0, 1.0
        n = 10000
        noise_sigma = amp / 10.0
        t = np.arange(n) / fs
        clean = amp * np.cos(2 * math.pi * f0 * t)
        sigma_pred = noise_sigma * math.sqrt(2.0 / n)
        estimates = []
        for seed in range(100):
            rng = np.random.default_rng(seed)
            ts = TimeSeries(fs, clean + rng.normal(0.0, noise_sigma, n))
            estimates.append(extract_tone(ts, f0).amplitude)
        err = np.abs(np.asarray(estimates) - amp)
        assert np.mean(err <= 3.0 * sigma_pred) >= 0.95
        assert np.std(estimates) == pytest.approx(sigma_pred, rel=0.35)

    def test_rejects_dc_and_aliased_frequencies(self):
        ts = TimeSeries(100.0, np.zeros(100) + np.arange(100.0))
        with pytest.raises(ValueError):
            extract_tone(ts, 0.0)
        with pytest.raises(ValueError, match="alias"):
            extract_tone(ts, 50.0)
        with pytest.raises(ValueError, match="alias"):
            extract_tone(ts, 73.0)


class TestShotNoise:
    def test_known_operating_point(self):
        # 2.4 mW collected, 1.6% contrast, 0.35 MHz wide lines: ~11 pT/sqrt(Hz)
        est = shot_noise_limit(2.4e-3, 0.016, 0.35)
        assert est.photocurrent_a == pytest.approx(0.96e-3)
        assert est.limit_t_per_sqrt_hz == pytest.approx(10.98e-12, rel=0.005)

    def test_formula_reconstruction(self):
        est = shot_noise_limit(1e-3, 0.02, 10.0, responsivity_a_per_w=0.5)
        manual = (
            DISPERSIVE_SLOPE_FACTOR
            * (10.0e6 / (28.024e9 * 0.02))
            * math.sqrt(2.0 * ELEMENTARY_CHARGE_C / (0.5 * 1e-3))
        )
        assert est.limit_t_per_sqrt_hz == pytest.approx(manual, rel=1e-12)
        assert est.lineshape_factor == pytest.approx(4.0 / (3.0 * math.sqrt(3.0)))
        assert "sqrt(2*e/I)" in est.formula

    def test_quarter_power_doubles_limit(self):
        a = shot_noise_limit(1e-3, 0.014, 11.48)
        b = shot_noise_limit(0.25e-3, 0.014, 11.48)
        assert b.limit_t_per_sqrt_hz == pytest.approx(2.0 * a.limit_t_per_sqrt_hz, rel=1e-12)

    def test_zero_contrast_is_infinite(self):
        est = shot_noise_limit(1e-3, 0.0, 11.48)
        assert math.isinf(est.limit_t_per_sqrt_hz)

    def test_validation(self):
        with pytest.raises(ValueError):
            shot_noise_limit(0.0, 0.01, 10.0)
        with pytest.raises(ValueError):
            shot_noise_limit(1e-3, -0.1, 10.0)
        with pytest.raises(ValueError):
            shot_noise_limit(1e-3, 0.01, 0.0)
        with pytest.raises(ValueError):
            shot_noise_limit(1e-3, 0.01, 10.0, responsivity_a_per_w=0.0)
