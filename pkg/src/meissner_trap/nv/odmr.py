"""ODMR spectrum synthesis and multi-Lorentzian dip fitting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks, peak_widths
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..validation import check_ascending, check_positive, check_range
from .hamiltonian import DiamondCut100, ZeemanModel


AUTO_DIP_SIGMA = 5.0


class FitNotConvergedError(RuntimeError):
    pass


class TooFewDipsError(ValueError):
    pass


def lorentzian(f, center, fwhm):
    """Unit-peak Lorentzian."""
    u = 2.0 * (np.asarray(f) - center) / fwhm
    return 1.0 / (1.0 + u * u)


@dataclass(frozen=True)
class ODMRSpectrum:
    frequencies: np.ndarray
    signal: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        f = check_ascending(self.frequencies, "frequencies")
        s = np.asarray(self.signal, dtype=float)
        if s.shape != f.shape:
            raise ValueError("signal and frequencies differ in length")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "signal", s)


def odmr_forward(zm: ZeemanModel, b_lab, cut: DiamondCut100 | None = None,
                 linewidth: float = 8e6, contrast: float = 0.10, grid=None,
                 weights=None) -> ODMRSpectrum:
    """Normalised fluorescence for a field ``b_lab`` seen by all four NV axes.

    Each of the 8 lines is a Lorentzian of FWHM ``linewidth`` and depth
    ``contrast / 8`` (scaled by the optional per-orientation ``weights``,
    which default to 1).
    """
    cut = cut or DiamondCut100()
    linewidth = check_positive(linewidth, "linewidth")
    contrast = check_range(contrast, "contrast", 0.0, 0.3, closed=(False, True))
    if grid is None:
        grid = np.linspace(2.5e9, 3.25e9, 1501)
    grid = check_ascending(grid, "grid")
    w = np.ones(len(cut)) if weights is None else np.asarray(weights, float)
    lines = cut.transitions(zm, b_lab)  # (4, 2)
    dip = np.zeros_like(grid)
    for k in range(len(cut)):
        for fc in lines[k]:
            dip += w[k] * contrast / 8.0 * lorentzian(grid, fc, linewidth)
    meta = {"linewidth_hz": linewidth, "contrast": contrast}
    return ODMRSpectrum(grid, 1.0 - dip, meta)


@dataclass(frozen=True)
class ODMRLine:
    center: float
    fwhm: float
    depth: float
    center_err: float
    fwhm_err: float
    depth_err: float


def _noise_sigma(y):
    # MAD of first differences is insensitive to the dips themselves
    d = np.diff(y)
    return 1.4826 * np.median(np.abs(d - np.median(d))) / np.sqrt(2.0)


def detect_dips(freqs, signal, max_dips=None, n_sigma=3.0):
    """Dip indices below ``baseline - n_sigma * sigma``, most prominent first."""
    baseline = np.median(signal)
    sigma = _noise_sigma(signal)
    thresh = baseline - n_sigma * sigma
    idx, props = find_peaks(-signal, height=-thresh, prominence=max(n_sigma * sigma, 1e-12))
    order = np.argsort(props["prominences"])[::-1]
    idx = idx[order]
    if max_dips is not None:
        idx = idx[:max_dips]
    return idx, baseline, sigma


class LorentzianDipFitter(BaseEstimator):
    """Least-squares fit of ``baseline - sum_k depth_k L(f; c_k, w_k)``.

    Parameters
    ----------
    n_dips : int or None
        Number of dips to fit; ``None`` fits every dip whose prominence
        exceeds ``AUTO_DIP_SIGMA`` noise sigmas (3 sigmas otherwise).
    max_iter : int
        Levenberg-Marquardt iteration cap.
    ftol : float
        Relative cost-change convergence threshold.

    Attributes
    ----------
    lines_ : list of ODMRLine
        Fitted dips sorted by centre.
    baseline_ : float
    residual_rms_ : float
    """

    def __init__(self, n_dips=2, max_iter=200, ftol=1e-10):
        self.n_dips = n_dips
        self.max_iter = max_iter
        self.ftol = ftol

    @staticmethod
    def _model(p, x, k):
        y = np.full_like(x, p[0])
        for j in range(k):
            c, w, d = p[1 + 3 * j: 4 + 3 * j]
            y -= d * lorentzian(x, c, w)
        return y

    def fit(self, frequencies, signal):
        f = check_ascending(frequencies, "frequencies")
        y = np.asarray(signal, dtype=float)
        if self.n_dips is not None and self.n_dips < 1:
            raise ValueError("n_dips must be >= 1")
        # without a requested count every candidate is fitted, so the cut is
        # raised to keep noise spikes out of the model
        n_sigma = 3.0 if self.n_dips is not None else AUTO_DIP_SIGMA
        idx, baseline, _ = detect_dips(f, y, self.n_dips, n_sigma)
        if self.n_dips is not None and len(idx) < self.n_dips:
            raise TooFewDipsError(f"found {len(idx)} dips, {self.n_dips} requested")
        if len(idx) == 0:
            raise TooFewDipsError("no dips found")
        k = len(idx)
        # work in MHz about the grid centre for conditioning
        f0, scale = 0.5 * (f[0] + f[-1]), 1e6
        x = (f - f0) / scale
        widths = peak_widths(-y, idx, rel_height=0.5)[0] * np.mean(np.diff(x))
        p0 = [baseline]
        for i, w in zip(idx, widths):
            p0 += [x[i], max(w, 2 * np.mean(np.diff(x))), baseline - y[i]]
        p0 = np.asarray(p0)
        res = least_squares(lambda p: self._model(p, x, k) - y, p0, method="lm",
                            ftol=self.ftol, xtol=1e-12, max_nfev=self.max_iter * (p0.size + 1))
        if res.status <= 0 or not np.all(np.isfinite(res.x)):
            raise FitNotConvergedError(res.message)
        dof = max(y.size - p0.size, 1)
        s2 = 2.0 * res.cost / dof
        try:
            cov = np.linalg.inv(res.jac.T @ res.jac) * s2
            err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        except np.linalg.LinAlgError:
            err = np.full(p0.size, np.nan)
        lines = []
        for j in range(k):
            c, w, d = res.x[1 + 3 * j: 4 + 3 * j]
            ec, ew, ed = err[1 + 3 * j: 4 + 3 * j]
            lines.append(ODMRLine(f0 + c * scale, abs(w) * scale, d, ec * scale, ew * scale, ed))
        self.lines_ = sorted(lines, key=lambda ln: ln.center)
        self.baseline_ = float(res.x[0])
        self.residual_rms_ = float(np.sqrt(2.0 * res.cost / y.size))
        self._params, self._f0, self._scale, self._k = res.x, f0, scale, k
        return self

    def predict(self, frequencies):
        check_is_fitted(self, "lines_")
        x = (np.asarray(frequencies, float) - self._f0) / self._scale
        return self._model(self._params, x, self._k)

    @property
    def centers_(self):
        check_is_fitted(self, "lines_")
        return np.array([ln.center for ln in self.lines_])


def fit_lorentzians(spec: ODMRSpectrum, n_dips=2, **kwargs) -> list[ODMRLine]:
    return LorentzianDipFitter(n_dips=n_dips, **kwargs).fit(spec.frequencies, spec.signal).lines_
