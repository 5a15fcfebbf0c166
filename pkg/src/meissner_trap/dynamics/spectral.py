"""Averaged power spectral density."""

from __future__ import annotations

import numpy as np
from scipy.signal import welch

from ..validation import check_range
from .ringdown import TimeSeries


class TooShortError(ValueError):
    pass


def psd(ts: TimeSeries, segment_length: int | None = None, overlap: float = 0.5):
    """One-sided Welch PSD with a Hann window.

    Parameters
    ----------
    segment_length : int, optional
        Samples per segment; defaults to the whole series (a single
        windowed periodogram).
    overlap : float
        Fractional overlap between segments, in [0, 0.9].

    Returns
    -------
    freq : ndarray
        Hz.
    power : ndarray
        Units of ``x**2 / Hz``; ``sum(power) * df`` equals the variance.
    """
    overlap = check_range(overlap, "overlap", 0.0, 0.9)
    n = len(ts)
    nper = n if segment_length is None else int(segment_length)
    if nper < 2 or nper > n:
        raise TooShortError(f"segment_length {nper} must lie in [2, {n}]")
    freq, power = welch(ts.x, fs=ts.sample_rate, window="hann", nperseg=nper,
                        noverlap=int(overlap * nper), detrend="constant",
                        return_onesided=True, scaling="density")
    return freq, power
