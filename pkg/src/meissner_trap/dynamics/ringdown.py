"""Driven-then-released ringdowns and damped-sinusoid fitting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter1d, median_filter
from scipy.optimize import least_squares, minimize_scalar
from scipy.signal import find_peaks
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..validation import check_positive, check_uniform_grid

MIN_SAMPLES = 16


class UndersampledError(ValueError):
    pass


class NoOscillationError(RuntimeError):
    pass


class FitNotConvergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled signal; ``release_index`` marks the drive switch-off."""

    t: np.ndarray
    x: np.ndarray
    sample_rate: float = field(default=None)
    release_index: int | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if t.shape != x.shape or t.ndim != 1:
            raise ValueError("t and x must be 1-D and of equal length")
        if t.size < MIN_SAMPLES:
            raise ValueError(f"time series needs at least {MIN_SAMPLES} samples")
        dt = check_uniform_grid(t, "t")
        fs = 1.0 / dt if self.sample_rate is None else float(self.sample_rate)
        if abs(fs * dt - 1.0) > 1e-9:
            raise ValueError("sample_rate disagrees with the time step")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "sample_rate", fs)

    def __len__(self):
        return self.t.size

    @classmethod
    def from_rounded(cls, t, x, tol: float = 1e-3) -> "TimeSeries":
        """Rebuild the exact grid from sample times rounded on output.

        The step is the least-squares slope of ``t`` against sample index;
        every time must sit within ``tol`` steps of that grid.
        """
        t = np.asarray(t, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("t must be 1-D with at least 2 samples")
        k = np.arange(t.size)
        dt, t0 = np.polyfit(k, t, 1)
        if not dt > 0 or np.max(np.abs(t - (t0 + dt * k))) > tol * dt:
            raise ValueError("t is not uniformly sampled")
        return cls(t0 + dt * k, x, 1.0 / dt)


def quality_factor(f0: float, tau: float) -> float:
    """``Q = pi f0 tau``."""
    check_positive(f0, "f0")
    check_positive(tau, "tau")
    return math.pi * f0 * tau


def ringdown_model(t, amplitude, f0, phase, tau, offset=0.0):
    return amplitude * np.exp(-t / tau) * np.cos(2 * np.pi * f0 * t + phase) + offset


def simulate_ringdown(f0: float, tau: float, drive_duration: float, record_duration: float,
                      sample_rate: float, noise_rms: float = 0.0, seed=None,
                      amplitude: float = 1e-6, phase: float = 0.0) -> TimeSeries:
    """Steady drive for ``drive_duration`` followed by a free ringdown.

    Samples are at ``t = k / sample_rate``. The drive holds
    ``A cos(2 pi f0 t' + phase)`` with ``t'`` measured from the release, which
    is sample ``round(drive_duration * sample_rate)``; after release the
    envelope decays as ``exp(-t'/tau)``.
    """
    f0 = check_positive(f0, "f0")
    tau = check_positive(tau, "tau")
    fs = check_positive(sample_rate, "sample_rate")
    check_positive(drive_duration, "drive_duration", strict=False)
    check_positive(record_duration, "record_duration")
    check_positive(noise_rms, "noise_rms", strict=False)
    if fs <= 10 * f0:
        raise UndersampledError(f"sample_rate {fs} Hz must exceed 10 f0 = {10 * f0} Hz")
    n_drive = int(round(drive_duration * fs))
    n_rec = int(round(record_duration * fs))
    k = np.arange(n_drive + n_rec)
    t = k / fs
    tr = (k - n_drive) / fs
    env = np.where(tr < 0, 1.0, np.exp(-np.maximum(tr, 0.0) / tau))
    x = amplitude * env * np.cos(2 * np.pi * f0 * tr + phase)
    if noise_rms > 0:
        x = x + np.random.default_rng(seed).normal(0.0, noise_rms, x.size)
    return TimeSeries(t, x, fs, release_index=n_drive)


@dataclass(frozen=True)
class RingdownFit:
    f0: float
    tau: float
    amplitude: float
    phase: float
    offset: float
    q: float
    residual_rms: float
    start_index: int
    stderr: dict = field(default_factory=dict)

    def report(self) -> str:
        return (f"f0_hz={self.f0:.9e}\ntau_s={self.tau:.9e}\nq={self.q:.9e}\n"
                f"residual_rms={self.residual_rms:.9e}\namplitude={self.amplitude:.9e}\n"
                f"phase_rad={self.phase:.9e}\noffset={self.offset:.9e}\n"
                f"start_index={self.start_index}\n")


def _periodogram(y, fs, pad=4):
    n = y.size
    spec = np.abs(np.fft.rfft((y - y.mean()) * np.hanning(n), pad * n)) ** 2
    return np.fft.rfftfreq(pad * n, 1.0 / fs), spec


def _check_oscillation(y, fs):
    # roundoff on a constant series can fake a spectral peak
    if np.ptp(y) <= 1e-9 * np.max(np.abs(y), initial=0.0):
        raise NoOscillationError("series is constant")
    f, p = _periodogram(y, fs, pad=1)
    p = p[1:]
    if p.size == 0 or not np.any(p > 0) or p.max() < 3.0 * np.median(p):
        raise NoOscillationError("no spectral peak above 3x the median PSD")


def _refine_frequency(y, t, f_peak, df):
    yc = y - y.mean()
    w = np.hanning(y.size)

    def neg_power(f):
        return -abs(np.sum(w * yc * np.exp(-2j * np.pi * f * t)))

    res = minimize_scalar(neg_power, bounds=(max(f_peak - df, 1e-12), f_peak + df),
                          method="bounded", options={"xatol": 1e-9 * f_peak})
    return float(res.x)


def _envelope_tau(y, t, f0, offset):
    r = np.abs(y - offset)
    dist = max(int(0.7 * (1.0 / f0) / (t[1] - t[0])), 1)
    idx, _ = find_peaks(r, distance=dist)
    idx = idx[r[idx] > 0]
    span = t[-1] - t[0]
    if idx.size < 3:
        return span
    slope = np.polyfit(t[idx], np.log(r[idx]), 1)[0]
    return -1.0 / slope if slope < 0 else 10.0 * span


def detect_release(x, fs, f0_hint=None, drop=0.95):
    """Index where the smoothed envelope first falls below ``drop`` of its maximum."""
    x = np.asarray(x, dtype=float)
    if f0_hint is None:
        f, p = _periodogram(x, fs, pad=1)
        f0_hint = f[1:][np.argmax(p[1:])]
    win = max(int(round(1.5 * fs / f0_hint)), 3)
    env = maximum_filter1d(np.abs(x - np.median(x)), win)
    above = np.flatnonzero(env >= drop * env.max())
    # the centred window sees the plateau for win//2 samples past the release
    return int(max(above[-1] - win // 2, 0))


class RingdownFitter(BaseEstimator):
    """Fit ``A exp(-t/tau) cos(2 pi f0 t + phi) + c`` to a released oscillator.

    Parameters
    ----------
    start_index : int or None
        First sample of the free decay. ``None`` uses the series'
        ``release_index`` when given, otherwise the envelope-drop detector.
    robust : bool
        Refit with a Huber loss scaled to 5 robust sigmas of the
        moving-median residual, down-weighting tracking outliers.
    max_iter : int
        Levenberg-Marquardt iteration cap.
    ftol : float
        Relative cost-change convergence threshold.
    """

    def __init__(self, start_index=None, robust=False, max_iter=200, ftol=1e-10):
        self.start_index = start_index
        self.robust = robust
        self.max_iter = max_iter
        self.ftol = ftol

    def fit(self, t, x=None, release_index=None):
        ts = t if isinstance(t, TimeSeries) else TimeSeries(t, x, release_index=release_index)
        fs = ts.sample_rate
        start = self.start_index
        if start is None:
            start = ts.release_index if ts.release_index is not None else detect_release(ts.x, fs)
        start = int(start)
        if ts.t.size - start < MIN_SAMPLES:
            raise NoOscillationError("post-release segment too short")
        tt = ts.t[start:] - ts.t[start]
        y = ts.x[start:]
        _check_oscillation(y, fs)

        f, p = _periodogram(y, fs)
        f_peak = f[1:][np.argmax(p[1:])]
        f0 = _refine_frequency(y, tt, f_peak, 2 * fs / (4 * y.size))
        offset = float(np.median(y))
        tau = _envelope_tau(y, tt, f0, offset)
        env = np.exp(-tt / tau)
        basis = np.column_stack([env * np.cos(2 * np.pi * f0 * tt), env * np.sin(2 * np.pi * f0 * tt),
                                 np.ones_like(tt)])
        a, b, c = np.linalg.lstsq(basis, y, rcond=None)[0]
        amp, phase = math.hypot(a, b), math.atan2(-b, a)
        amp_scale = amp if amp > 0 else 1.0

        def resid(p):
            return (ringdown_model(tt, p[0] * amp_scale, p[1], p[2], p[3], p[4] * amp_scale) - y) / amp_scale

        p0 = np.array([amp / amp_scale, f0, phase, tau, c / amp_scale])
        res = least_squares(resid, p0, method="lm", ftol=self.ftol, xtol=1e-12, gtol=1e-12,
                            x_scale=np.array([1.0, 1.0 / tt[-1], 1.0, tau, 1.0]),
                            max_nfev=self.max_iter * (p0.size + 1))
        if self.robust:
            r = res.fun
            sigma = 1.4826 * np.median(np.abs(r - median_filter(r, size=15, mode="nearest")))
            if sigma > 0:
                res = least_squares(resid, res.x, method="trf", loss="huber", f_scale=5 * sigma,
                                    ftol=self.ftol, x_scale=np.array([1.0, 1.0 / tt[-1], 1.0, tau, 1.0]),
                                    max_nfev=self.max_iter * (p0.size + 1))
        p = res.x
        if res.status <= 0 or not np.all(np.isfinite(p)) or p[1] <= 0 or p[3] <= 0:
            raise FitNotConvergedError(f"ringdown fit failed: {res.message}")
        amp, f0, phase, tau, off = p[0] * amp_scale, p[1], p[2], p[3], p[4] * amp_scale
        if amp < 0:
            amp, phase = -amp, phase + math.pi
        phase = (phase + math.pi) % (2 * math.pi) - math.pi
        r = ringdown_model(tt, amp, f0, phase, tau, off) - y
        dof = max(y.size - p.size, 1)
        stderr = {}
        try:
            cov = np.linalg.inv(res.jac.T @ res.jac) * (np.sum(res.fun ** 2) / dof)
            e = np.sqrt(np.clip(np.diag(cov), 0, None))
            stderr = {"amplitude": e[0] * amp_scale, "f0": e[1], "phase": e[2], "tau": e[3],
                      "offset": e[4] * amp_scale}
        except np.linalg.LinAlgError:
            pass
        self.result_ = RingdownFit(float(f0), float(tau), float(amp), float(phase), float(off),
                                   quality_factor(f0, tau), float(np.sqrt(np.mean(r ** 2))),
                                   start, stderr)
        self.t_start_ = float(ts.t[start])
        return self

    def predict(self, t):
        check_is_fitted(self, "result_")
        r = self.result_
        tt = np.asarray(t, dtype=float) - self.t_start_
        return ringdown_model(tt, r.amplitude, r.f0, r.phase, r.tau, r.offset)


def fit_ringdown(ts: TimeSeries, start_index=None, robust=False) -> RingdownFit:
    return RingdownFitter(start_index=start_index, robust=robust).fit(ts).result_
