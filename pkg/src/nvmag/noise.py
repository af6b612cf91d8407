"""Amplitude spectral densities, tone extraction, and sensitivity limits.

Sensitivity is characterized by the amplitude spectral density (ASD) of the
demodulated signal: the square root of the one-sided power spectral
density, in units of V/sqrt(Hz) or T/sqrt(Hz) after calibration.  Spectra
are estimated on non-overlapping rectangular-window segments whose powers
are averaged before the square root, so that:

  - white noise of standard deviation sigma shows a flat density
    sigma * sqrt(2 / sample_rate);
  - a sine of amplitude A centered in a bin shows a peak
    A * sqrt(segment_duration / 2);
  - summing density**2 * df over the one-sided spectrum returns the signal
    variance (Parseval).

Conversion from volts to tesla divides by the slope of the dispersive
signal at the operating point times the frequency-per-field scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

__all__ = [
    "TimeSeries",
    "ASDResult",
    "SlopeCalibration",
    "ToneFit",
    "ShotNoiseEstimate",
    "asd_averaged",
    "band_sensitivity",
    "volts_to_field",
    "extract_tone",
    "shot_noise_limit",
]

ELEMENTARY_CHARGE_C = 1.602176634e-19

# Peak-slope factor of the dispersive lineshape: 4 / (3 * sqrt(3)).
DISPERSIVE_SLOPE_FACTOR = 4.0 / (3.0 * math.sqrt(3.0))


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled record: rate in Hz and the samples themselves."""

    sample_rate_hz: float
    samples: np.ndarray

    def __post_init__(self):
        if not (math.isfinite(self.sample_rate_hz) and self.sample_rate_hz > 0):
            raise DataError("sample_rate_hz must be positive")
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1:
            raise DataError("samples must be one-dimensional")
        if s.size < 2:
            raise DataError("need at least two samples")
        if not np.all(np.isfinite(s)):
            raise DataError("samples contain non-finite values")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class ASDResult:
    """One-sided amplitude spectral density and how it was estimated."""

    frequencies_hz: np.ndarray
    density: np.ndarray
    segment_count: int
    segment_duration_s: float

    @property
    def bin_width_hz(self) -> float:
        return 1.0 / self.segment_duration_s


def asd_averaged(
    ts: TimeSeries, segment_duration_s: float, window="rect", overlap=0.0, average="rms"
) -> ASDResult:
    """Segment-averaged one-sided ASD of a time series.

    The record is cut into floor(duration / segment_duration) non-overlapping
    segments; leftover samples at the end are dropped.  Per segment the
    one-sided PSD is (2 / (fs * n)) * |rfft|**2 with the DC term (and the
    Nyquist term when the segment length is even) halved.

    ``average`` picks how per-segment densities combine pointwise: "rms"
    (default) averages powers and takes the square root, the unbiased
    estimator whose white-noise level is sigma*sqrt(2/fs); "amplitude"
    takes the plain mean of the per-segment magnitudes, which reads low on
    stochastic signals by the Rayleigh factor sqrt(pi)/2 ~ 0.886 (plots
    averaged that way show the same bias).

    Only the rectangular window and zero overlap are implemented; other
    values raise NotImplementedError so callers fail loudly rather than
    silently getting a different estimator.
    """
    if window != "rect":
        raise NotImplementedError(f"window {window!r} not supported, only 'rect'")
    if overlap != 0.0:
        raise NotImplementedError("segment overlap not supported")
    if average not in ("rms", "amplitude"):
        raise ValueError("average must be 'rms' or 'amplitude'")
    if not (math.isfinite(segment_duration_s) and segment_duration_s > 0):
        raise ValueError("segment_duration_s must be positive")
    n_seg = int(round(segment_duration_s * ts.sample_rate_hz))
    if n_seg < 2:
        raise ValueError("segment too short for the sample rate")
    if n_seg > ts.samples.size:
        raise ValueError(
            f"segment of {n_seg} samples exceeds the record ({ts.samples.size})"
        )
    count = ts.samples.size // n_seg
    fs = ts.sample_rate_hz

    acc = None
    for k in range(count):
        seg = ts.samples[k * n_seg : (k + 1) * n_seg]
        spec = np.fft.rfft(seg)
        psd = (2.0 / (fs * n_seg)) * np.abs(spec) ** 2
        psd[0] *= 0.5
        if n_seg % 2 == 0:
            psd[-1] *= 0.5
        term = psd if average == "rms" else np.sqrt(psd)
        acc = term if acc is None else acc + term
    acc /= count
    densities = np.sqrt(acc) if average == "rms" else acc

    freqs = np.fft.rfftfreq(n_seg, d=1.0 / fs)
    return ASDResult(
        frequencies_hz=freqs,
        density=densities,
        segment_count=count,
        segment_duration_s=n_seg / fs,
    )


def band_sensitivity(asd: ASDResult, f_lo_hz: float, f_hi_hz: float) -> float:
    """Mean density over the inclusive band [f_lo, f_hi]."""
    if f_hi_hz < f_lo_hz:
        raise ValueError("f_hi_hz must be >= f_lo_hz")
    mask = (asd.frequencies_hz >= f_lo_hz) & (asd.frequencies_hz <= f_hi_hz)
    if not np.any(mask):
        raise ValueError(
            f"no spectral bins inside [{f_lo_hz:g}, {f_hi_hz:g}] Hz "
            f"(bin width {asd.bin_width_hz:g} Hz)"
        )
    return float(np.mean(asd.density[mask]))


@dataclass(frozen=True)
class SlopeCalibration:
    """Volts-to-field conversion via the lock-in slope at the operating point.

    ``slope_v_per_hz`` is the measured signal slope against microwave
    frequency; dividing by it and by the frequency-per-field scale
    (gamma, expressed in Hz/T) turns volts into tesla.
    """

    slope_v_per_hz: float
    gamma_mhz_per_mt: float = 28.024

    def __post_init__(self):
        if not (math.isfinite(self.slope_v_per_hz) and self.slope_v_per_hz != 0):
            raise ValueError("slope_v_per_hz must be nonzero")
        if not (math.isfinite(self.gamma_mhz_per_mt) and self.gamma_mhz_per_mt > 0):
            raise ValueError("gamma_mhz_per_mt must be positive")

    @property
    def volts_per_tesla(self) -> float:
        # MHz/mT -> Hz/T is a factor 1e9.
        return self.slope_v_per_hz * self.gamma_mhz_per_mt * 1e9


def volts_to_field(ts: TimeSeries, cal: SlopeCalibration) -> TimeSeries:
    """Rescale a voltage record into tesla using the slope calibration."""
    return TimeSeries(ts.sample_rate_hz, ts.samples / cal.volts_per_tesla)


@dataclass(frozen=True)
class ToneFit:
    """Least-squares single-tone decomposition: value = A*cos(2*pi*f*t + phase) + offset."""

    amplitude: float
    phase_rad: float
    offset: float


def extract_tone(ts: TimeSeries, f0_hz: float) -> ToneFit:
    """Amplitude, phase, and offset of a known-frequency tone in a record.

    Linear least squares on the basis {cos, sin, 1}, so the estimate is
    unbiased by white noise and needs no windowing.  ``f0_hz`` must lie
    strictly between 0 and the Nyquist frequency; above Nyquist the tone
    would alias onto a different frequency, which this deliberately refuses
    to guess.
    """
    nyquist = ts.sample_rate_hz / 2.0
    if f0_hz <= 0:
        raise ValueError("f0_hz must be positive")
    if f0_hz >= nyquist:
        raise ValueError(
            f"f0_hz = {f0_hz:g} Hz is at or above Nyquist ({nyquist:g} Hz); "
            "the tone would alias"
        )
    t = np.arange(ts.samples.size) / ts.sample_rate_hz
    phase = 2.0 * math.pi * f0_hz * t
    basis = np.column_stack([np.cos(phase), np.sin(phase), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(basis, ts.samples, rcond=None)
    a, b, c = coef
    # a*cos + b*sin = A*cos(phase + phi) with A = hypot(a, b), phi = atan2(-b, a).
    return ToneFit(
        amplitude=float(math.hypot(a, b)),
        phase_rad=float(math.atan2(-b, a)),
        offset=float(c),
    )


@dataclass(frozen=True)
class ShotNoiseEstimate:
    """Photocurrent shot-noise floor of the field measurement."""

    limit_t_per_sqrt_hz: float
    photocurrent_a: float
    lineshape_factor: float
    formula: str


def shot_noise_limit(
    pl_power_w: float,
    contrast: float,
    fwhm_mhz: float,
    responsivity_a_per_w: float = 0.4,
    gamma_mhz_per_mt: float = 28.024,
) -> ShotNoiseEstimate:
    """Shot-noise-limited field sensitivity in T/sqrt(Hz).

    The optimum operating point of the dispersive lineshape gives

        limit = (4 / (3*sqrt(3))) * (fwhm / (gamma * contrast))
                * sqrt(2 * e / photocurrent)

    with photocurrent = responsivity * collected power.  Zero contrast
    means no signal at all: the limit is infinite, not an error.
    """
    if pl_power_w <= 0:
        raise ValueError("pl_power_w must be positive")
    if contrast < 0:
        raise ValueError("contrast must be >= 0")
    if fwhm_mhz <= 0:
        raise ValueError("fwhm_mhz must be positive")
    if responsivity_a_per_w <= 0:
        raise ValueError("responsivity_a_per_w must be positive")
    photocurrent = responsivity_a_per_w * pl_power_w
    gamma_hz_per_t = gamma_mhz_per_mt * 1e9
    fwhm_hz = fwhm_mhz * 1e6
    if contrast == 0:
        limit = math.inf
    else:
        limit = (
            DISPERSIVE_SLOPE_FACTOR
            * fwhm_hz
            / (gamma_hz_per_t * contrast)
            * math.sqrt(2.0 * ELEMENTARY_CHARGE_C / photocurrent)
        )
    return ShotNoiseEstimate(
        limit_t_per_sqrt_hz=limit,
        photocurrent_a=photocurrent,
        lineshape_factor=DISPERSIVE_SLOPE_FACTOR,
        formula="(4/(3*sqrt(3))) * fwhm / (gamma * contrast) * sqrt(2*e/I)",
    )
