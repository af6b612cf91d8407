"""Dispersive multi-peak spectra: model, synthesis, peak finding, fitting.

Lock-in detection with frequency modulation turns each absorption peak into
the derivative of a Lorentzian.  With u = (f - center) / (fwhm / 2) one
line contributes

    amp * (-2 * u) / (1 + u**2) ** 2

so a line crosses zero at its center, has extrema at u = +-1/sqrt(3)
(spacing fwhm/sqrt(3)), and peak magnitude |amp| * 9/(8*sqrt(3)).  ``amp``
carries the detector units (volts here by convention) and its sign encodes
the lock-in phase.

A spectrum is a sum of such lines on a shared linewidth plus a constant
baseline.  Fitting is damped least squares with the analytic Jacobian;
per-line centers and amplitudes float, fwhm and baseline are shared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, GuessError
from .leastsq import covariance, damped_least_squares

__all__ = [
    "Lineshape",
    "SpectrumModel",
    "SweepTrace",
    "SpectrumFit",
    "PEAK_TO_AMP",
    "dlorentzian",
    "synthesize",
    "sample_grid",
    "initial_guess",
    "fit_spectrum",
]

# Peak magnitude of the unit-amplitude dispersive shape: 9 / (8*sqrt(3)).
PEAK_TO_AMP = 9.0 / (8.0 * math.sqrt(3.0))

MAX_COMPONENTS = 8


@dataclass(frozen=True)
class Lineshape:
    """One dispersive line: center and fwhm in MHz, amplitude in volts."""

    center_mhz: float
    amplitude: float
    fwhm_mhz: float

    def __post_init__(self):
        if not (math.isfinite(self.center_mhz) and math.isfinite(self.amplitude)):
            raise ValueError("center and amplitude must be finite")
        if not (math.isfinite(self.fwhm_mhz) and self.fwhm_mhz > 0):
            raise ValueError("fwhm_mhz must be positive")


@dataclass(frozen=True)
class SpectrumModel:
    """Sum of 1..8 dispersive lines with shared fwhm plus a constant baseline."""

    centers_mhz: tuple
    amplitudes: tuple
    fwhm_mhz: float
    baseline: float = 0.0

    def __post_init__(self):
        centers = tuple(float(c) for c in self.centers_mhz)
        amps = tuple(float(a) for a in self.amplitudes)
        object.__setattr__(self, "centers_mhz", centers)
        object.__setattr__(self, "amplitudes", amps)
        if not 1 <= len(centers) <= MAX_COMPONENTS:
            raise ValueError(f"need 1..{MAX_COMPONENTS} components, got {len(centers)}")
        if len(amps) != len(centers):
            raise ValueError("centers and amplitudes must have equal length")
        if not all(map(math.isfinite, centers + amps)):
            raise ValueError("centers and amplitudes must be finite")
        if not (math.isfinite(self.fwhm_mhz) and self.fwhm_mhz > 0):
            raise ValueError("fwhm_mhz must be positive")
        if not math.isfinite(self.baseline):
            raise ValueError("baseline must be finite")

    @property
    def n_components(self) -> int:
        return len(self.centers_mhz)

    @property
    def lines(self) -> tuple:
        return tuple(
            Lineshape(c, a, self.fwhm_mhz)
            for c, a in zip(self.centers_mhz, self.amplitudes)
        )

    def __call__(self, freqs_mhz) -> np.ndarray:
        f = np.asarray(freqs_mhz, dtype=float)
        out = np.full_like(f, self.baseline)
        for line in self.lines:
            out += dlorentzian(f, line)
        return out


def dlorentzian(freqs_mhz, line: Lineshape) -> np.ndarray:
    """Dispersive (derivative-of-Lorentzian) lineshape evaluated at ``freqs_mhz``."""
    f = np.asarray(freqs_mhz, dtype=float)
    u = (f - line.center_mhz) / (line.fwhm_mhz / 2.0)
    return line.amplitude * (-2.0 * u) / (1.0 + u * u) ** 2


@dataclass(frozen=True)
class SweepTrace:
    """One measured sweep: frequency axis (MHz) and lock-in signal (V).

    Frequencies must be strictly ascending.  ``y_mm``/``z_mm`` carry the
    scan position when the trace belongs to a grid scan.
    """

    freqs_mhz: np.ndarray
    signal: np.ndarray
    y_mm: float | None = None
    z_mm: float | None = None

    def __post_init__(self):
        f = np.asarray(self.freqs_mhz, dtype=float)
        s = np.asarray(self.signal, dtype=float)
        if f.ndim != 1 or s.ndim != 1:
            raise DataError("trace arrays must be one-dimensional")
        if f.shape != s.shape:
            raise DataError(f"length mismatch: {f.size} frequencies, {s.size} samples")
        if f.size < 2:
            raise DataError("trace needs at least two points")
        if not np.all(np.isfinite(f)):
            raise DataError("frequency axis contains non-finite values")
        if np.any(np.diff(f) <= 0):
            raise DataError("frequency axis must be strictly ascending")
        f.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "freqs_mhz", f)
        object.__setattr__(self, "signal", s)

    @property
    def n_points(self) -> int:
        return int(self.freqs_mhz.size)


def sample_grid(centers_mhz, half_width_mhz=20.0, step_mhz=1.0) -> np.ndarray:
    """Ascending union of symmetric windows around the given centers.

    Windows that overlap are merged; duplicate frequencies are dropped.
    This is the acquisition pattern used for synthetic sweeps: a cluster of
    points around every expected line instead of one wide scan.
    """
    if half_width_mhz <= 0 or step_mhz <= 0:
        raise ValueError("half_width_mhz and step_mhz must be positive")
    n = int(round(half_width_mhz / step_mhz))
    offsets = np.arange(-n, n + 1) * step_mhz
    pts = np.concatenate([c + offsets for c in np.asarray(centers_mhz, dtype=float)])
    pts = np.unique(np.round(pts, 9))
    return pts


def synthesize(model: SpectrumModel, freqs_mhz, noise_sigma=0.0, seed=None) -> SweepTrace:
    """Evaluate ``model`` on ``freqs_mhz`` and add white Gaussian noise."""
    f = np.asarray(freqs_mhz, dtype=float)
    y = model(f)
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        y = y + rng.normal(0.0, noise_sigma, size=f.shape)
    return SweepTrace(f, y)


def _robust_sigma(signal: np.ndarray) -> float:
    # Noise scale from first differences; the median ignores the few
    # steep-slope samples on the lines themselves.  For white noise
    # median(|diff|) = sigma * sqrt(2) * 0.6745.
    d = np.abs(np.diff(signal))
    return float(np.median(d)) / 0.9539 if d.size else 0.0


def initial_guess(trace: SweepTrace, n_components=4, threshold_sigmas=5.0) -> SpectrumModel:
    """Starting model from the extremum pattern of a dispersive sweep.

    Each line appears as a significant maximum followed by a significant
    minimum (or the reverse) with a zero crossing in between, closer
    together than 15 median frequency steps (an extremum pair sits
    fwhm/sqrt(3) apart, so this accepts lines up to ~26 steps wide while
    rejecting pairings across distant sweep windows).  The center estimate
    is the interpolated crossing of the de-baselined signal between the two
    extrema; the fwhm estimate is sqrt(3) times the extremum spacing.

    Raises GuessError when fewer than ``n_components`` candidates are
    found, reporting how many did appear.  Extra candidates are cut by
    descending extremum size.
    """
    if not 1 <= n_components <= MAX_COMPONENTS:
        raise ValueError(f"n_components must be 1..{MAX_COMPONENTS}")
    f = trace.freqs_mhz
    y = trace.signal
    baseline = float(np.median(y))
    s = y - baseline
    sigma = _robust_sigma(y)
    threshold = threshold_sigmas * sigma if sigma > 0 else 0.0

    # Interior extrema of the de-baselined signal that clear the noise floor.
    left = s[1:-1] - s[:-2]
    right = s[1:-1] - s[2:]
    is_max = (left > 0) & (right >= 0) & (s[1:-1] > threshold)
    is_min = (left < 0) & (right <= 0) & (s[1:-1] < -threshold)
    idx = np.nonzero(is_max | is_min)[0] + 1
    sign = np.where(is_max[idx - 1], 1, -1)

    max_gap = 15.0 * float(np.median(np.diff(f)))
    candidates = []
    k = 0
    while k + 1 < idx.size:
        i, j = idx[k], idx[k + 1]
        paired = (
            sign[k] != sign[k + 1]
            and f[j] - f[i] <= max_gap
            and np.any(np.sign(s[i : j + 1]) != np.sign(s[i]))
        )
        if paired:
            # Center: interpolated zero crossing between the two extrema.
            seg = s[i : j + 1]
            cross = np.nonzero(np.diff(np.sign(seg)) != 0)[0]
            c = cross[0] + i
            frac = abs(s[c]) / (abs(s[c]) + abs(s[c + 1]))
            center = f[c] + frac * (f[c + 1] - f[c])
            spacing = f[j] - f[i]
            size = 0.5 * (abs(s[i]) + abs(s[j]))
            # Positive amplitude shows a maximum first (shape falls through zero).
            amp_sign = 1.0 if sign[k] > 0 else -1.0
            candidates.append((size, center, spacing, amp_sign))
            k += 2
        else:
            k += 1

    if len(candidates) < n_components:
        raise GuessError(
            f"found {len(candidates)} of {n_components} expected lines; "
            "check sweep coverage or lower the detection threshold"
        )
    candidates.sort(key=lambda c: -c[0])
    chosen = sorted(candidates[:n_components], key=lambda c: c[1])

    fwhm = float(np.median([c[2] for c in chosen])) * math.sqrt(3.0)
    centers = [c[1] for c in chosen]
    amps = [c[3] * c[0] / PEAK_TO_AMP for c in chosen]
    return SpectrumModel(tuple(centers), tuple(amps), fwhm, baseline)


@dataclass(frozen=True)
class SpectrumFit:
    """Fit outcome: best model, per-parameter sigmas, and diagnostics.

    Sigma entries are NaN when the covariance could not be formed.
    ``residual_rms`` is in the signal units (V).
    """

    model: SpectrumModel
    center_sigmas_mhz: tuple
    amplitude_sigmas: tuple
    fwhm_sigma_mhz: float
    baseline_sigma: float
    residual_rms: float
    converged: bool
    iterations: int
    message: str


def _pack(model: SpectrumModel) -> np.ndarray:
    return np.array(list(model.centers_mhz) + list(model.amplitudes) + [model.fwhm_mhz, model.baseline])


def _unpack(x: np.ndarray, n: int) -> SpectrumModel:
    return SpectrumModel(tuple(x[:n]), tuple(x[n : 2 * n]), float(x[2 * n]), float(x[2 * n + 1]))


def fit_spectrum(trace: SweepTrace, guess: SpectrumModel) -> SpectrumFit:
    """Refine ``guess`` on ``trace`` by damped least squares.

    Parameters are the n centers, n amplitudes, the shared fwhm, and the
    baseline.  The fwhm is kept positive through a floor of 1e-6 MHz.
    Components of the result are sorted by center.  Raises DataError when
    the trace contains non-finite signal values; traces shorter than 8
    points per free parameter still fit but the covariance gets noisy.
    """
    if not np.all(np.isfinite(trace.signal)):
        raise DataError("signal contains non-finite values")
    n = guess.n_components
    f = trace.freqs_mhz
    y = trace.signal
    n_params = 2 * n + 2
    if trace.n_points < n_params + 1:
        raise DataError(
            f"{trace.n_points} points cannot constrain {n_params} parameters"
        )

    def model_of(x):
        return _unpack(x, n)

    def residual(x):
        return model_of(x)(f) - y

    def jac(x):
        centers = x[:n]
        amps = x[n : 2 * n]
        w = x[2 * n]
        j = np.empty((f.size, n_params))
        dshape_dw_sum = np.zeros(f.size)
        for i in range(n):
            u = (f - centers[i]) / (w / 2.0)
            denom = (1.0 + u * u) ** 2
            shape = (-2.0 * u) / denom
            # d/du of the unit shape: -2(1 - 3u^2) / (1 + u^2)^3.
            dshape_du = -2.0 * (1.0 - 3.0 * u * u) / (1.0 + u * u) ** 3
            j[:, i] = amps[i] * dshape_du * (-2.0 / w)
            j[:, n + i] = shape
            dshape_dw_sum += amps[i] * dshape_du * (-u / w)
        j[:, 2 * n] = dshape_dw_sum
        j[:, 2 * n + 1] = 1.0
        return j

    x0 = _pack(guess)
    lo = np.full(n_params, -np.inf)
    hi = np.full(n_params, np.inf)
    lo[2 * n] = 1e-6
    res = damped_least_squares(residual, jac, x0, bounds=(lo, hi), step_tol=1e-8)

    model = model_of(res.x)
    cov = covariance(res.jacobian, res.chi2, trace.n_points, n_params)
    if cov is None:
        sig = np.full(n_params, np.nan)
    else:
        sig = np.sqrt(np.maximum(np.diag(cov), 0.0))

    order = np.argsort(model.centers_mhz)
    model = SpectrumModel(
        tuple(model.centers_mhz[i] for i in order),
        tuple(model.amplitudes[i] for i in order),
        model.fwhm_mhz,
        model.baseline,
    )
    return SpectrumFit(
        model=model,
        center_sigmas_mhz=tuple(float(sig[i]) for i in order),
        amplitude_sigmas=tuple(float(sig[n + i]) for i in order),
        fwhm_sigma_mhz=float(sig[2 * n]),
        baseline_sigma=float(sig[2 * n + 1]),
        residual_rms=math.sqrt(res.chi2 / trace.n_points),
        converged=res.converged,
        iterations=res.iterations,
        message=res.message,
    )
