"""Field magnitude and vector estimates from observed ODMR transitions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from ..validation import check_range
from .hamiltonian import MAGIC_ANGLE, DiamondCut100, ZeemanModel, transition_frequencies

B_MAX = 1.0
NEWTON_TOL_HZ = 1.0


class NoSolutionError(ValueError):
    pass


class UnderdeterminedError(ValueError):
    pass


@dataclass(frozen=True)
class FieldEstimate:
    magnitude: float
    vector: np.ndarray | None = None
    residuals: np.ndarray | None = None
    uncertainty: float = float("nan")
    note: str = ""

    def __post_init__(self):
        if self.magnitude < 0:
            raise ValueError("magnitude must be non-negative")
        if self.vector is not None and not np.isclose(np.linalg.norm(self.vector), self.magnitude,
                                                      rtol=1e-12, atol=0.0):
            raise ValueError("|vector| must equal magnitude")


def _splitting(zm, b0, theta):
    b = np.stack([b0 * np.sin(theta), np.zeros_like(b0), b0 * np.cos(theta)], axis=-1)
    f = transition_frequencies(zm, b, (0.0, 0.0, 1.0))
    return f[..., 1] - f[..., 0]


def invert_field_magnitude(zm: ZeemanModel, f_minus: float, f_plus: float,
                           theta: float = MAGIC_ANGLE, sigma_f: float = 0.0) -> FieldEstimate:
    """Field magnitude reproducing the observed splitting ``f_plus - f_minus``.

    The smallest root on a log grid up to ``B_MAX`` is bracketed, bisected
    and Newton-polished until the splitting matches to 1 Hz.

    Parameters
    ----------
    theta : float
        Angle between field and NV axis; the default is the angle between
        lab z and every axis of a (100) cut.
    sigma_f : float
        Per-line frequency uncertainty (Hz) propagated to ``uncertainty``.
    """
    theta = check_range(theta, "theta", 0.0, np.pi / 2)
    target = float(f_plus) - float(f_minus)
    if target < 0:
        raise NoSolutionError("f_plus < f_minus")
    if target == 0:
        return FieldEstimate(0.0, residuals=np.zeros(1), uncertainty=0.0)
    grid = np.concatenate([[0.0], np.geomspace(1e-9, B_MAX, 2001)])
    g = _splitting(zm, grid, theta) - target
    hit = np.flatnonzero(np.sign(g[:-1]) != np.sign(g[1:]))
    if hit.size == 0:
        raise NoSolutionError(f"splitting {target:.6g} Hz is outside the model range up to {B_MAX} T")
    lo, hi = grid[hit[0]], grid[hit[0] + 1]
    f = lambda b: float(_splitting(zm, np.array(b), theta)) - target
    flo = f(lo)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < 1e-6 * hi:
            break
    b = 0.5 * (lo + hi)
    for _ in range(20):
        fb = f(b)
        if abs(fb) < NEWTON_TOL_HZ * 1e-3:
            break
        h = max(1e-9 * b, 1e-15)
        slope = (f(b + h) - f(b - h)) / (2 * h)
        if slope == 0:
            break
        b_new = b - fb / slope
        if not (lo <= b_new <= hi):
            break
        b = b_new
    resid = f(b)
    if abs(resid) > NEWTON_TOL_HZ:
        raise NoSolutionError(f"root polish stalled at {resid:.3g} Hz")
    h = max(1e-6 * b, 1e-12)
    slope = (f(b + h) - f(max(b - h, 0.0))) / (b + h - max(b - h, 0.0))
    unc = np.sqrt(2.0) * sigma_f / slope if slope > 0 else np.inf
    return FieldEstimate(float(b), residuals=np.array([resid]), uncertainty=float(unc))


def _group(labels, freqs, n_orient):
    labels = np.asarray(labels, dtype=int)
    freqs = np.asarray(freqs, dtype=float)
    if labels.shape != freqs.shape or labels.ndim != 1:
        raise ValueError("labels and frequencies must be matching 1-D sequences")
    if np.any((labels < 0) | (labels >= n_orient)):
        raise ValueError("orientation label out of range")
    groups = {}
    for lab, f in zip(labels, freqs):
        groups.setdefault(int(lab), []).append(f)
    for lab, fs in groups.items():
        if len(fs) > 2:
            raise ValueError(f"orientation {lab} has {len(fs)} transitions; at most 2 allowed")
        fs.sort()
    return groups


def reconstruct_field_vector(zm: ZeemanModel, frequencies, labels,
                             cut: DiamondCut100 | None = None) -> FieldEstimate:
    """Least-squares field vector from labelled transition frequencies.

    ``labels[i]`` is the orientation index (into ``cut.orientations``) of
    ``frequencies[i]``. Two lines of one orientation map to ``(f-, f+)``; a
    lone line is matched to whichever model line is nearer. Transitions are
    even in B, so the representative with ``B_z >= 0`` is returned.
    """
    cut = cut or DiamondCut100()
    groups = _group(labels, frequencies, len(cut))
    n_obs = sum(len(v) for v in groups.values())
    if n_obs < 3 or len(groups) < 2:
        raise UnderdeterminedError("need >= 3 transitions spanning >= 2 orientations")
    keys = sorted(groups)
    obs = [np.array(groups[k]) for k in keys]
    scale = 1e-3  # fit in mT

    def resid(p):
        model = cut.transitions(zm, p * scale)
        out = []
        for k, fo in zip(keys, obs):
            fm = model[k]
            if fo.size == 2:
                out.append(fo - fm)
            else:
                d = fo[0] - fm
                out.append(d[[np.argmin(np.abs(d))]])
        return np.concatenate(out) / 1e6

    spread = max(fo.max() - fo.min() if fo.size == 2 else abs(fo[0] - zm.D) for fo in obs)
    b_guess = max(spread / (2 * zm.gamma) / scale, 1e-3)
    # one seed per octant, kept off the <111> axes where d|B_perp|/dB vanishes
    base = np.array([0.45, 0.6, 0.66]) / np.linalg.norm([0.45, 0.6, 0.66])
    signs = np.array(np.meshgrid([1, -1], [1, -1], [1, -1], indexing="ij")).reshape(3, -1).T
    seeds = [b_guess * s * base for s in signs]
    # fields along a cube axis sit on a ridge between octant basins
    seeds += [np.sqrt(3.0) * b_guess * e for e in np.eye(3)]
    fits = [least_squares(resid, s, method="lm", ftol=1e-12, xtol=1e-14, max_nfev=2000)
            for s in seeds]
    low = min(r.cost for r in fits)
    # cube-symmetric solutions tie; prefer the one closest to lab z
    tied = [r for r in fits if r.cost <= low + 1e-9 * max(low, 1e-12) + 1e-16]
    best = max(tied, key=lambda r: abs(r.x[2]) / max(np.linalg.norm(r.x), 1e-300))
    b = best.x * scale
    if b[2] < 0:
        b = -b
    mag = float(np.linalg.norm(b))
    res_hz = resid(b / scale) * 1e6
    dof = n_obs - 3
    unc = float("nan")
    if dof > 0:
        try:
            cov = np.linalg.inv(best.jac.T @ best.jac) * (2 * best.cost / dof)
            bm = best.x
            unc = float(np.sqrt(max(bm @ cov @ bm, 0.0)) / max(np.linalg.norm(bm), 1e-300) * scale)
        except np.linalg.LinAlgError:
            pass
    return FieldEstimate(mag, b, res_hz, unc,
                         note="ODMR is even in B; -vector fits equally well (B_z >= 0 returned)")
