"""NV ground-state spin Hamiltonian and its transition frequencies.

Energies are in Hz (``H / h``). The basis is the S_z eigenbasis ordered
``(|+1>, |0>, |-1>)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..validation import check_positive, check_unit, check_vector

D_ZFS = 2.877e9
GAMMA_NV = 2.8e10
MAGIC_ANGLE = float(np.arccos(1.0 / np.sqrt(3.0)))
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 50

_R = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class SpinOperators:
    """Spin-1 matrices ``S_x, S_y, S_z``."""

    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray

    @classmethod
    def spin1(cls) -> "SpinOperators":
        sx = _R * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
        sy = _R * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
        sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
        for m in (sx, sy, sz):
            m.setflags(write=False)
        return cls(sx, sy, sz)

    def __iter__(self):
        return iter((self.sx, self.sy, self.sz))


SPIN1 = SpinOperators.spin1()
ZERO_STATE = 1  # index of |0> in the basis


@dataclass(frozen=True)
class ZeemanModel:
    """Zero-field splitting ``D`` (Hz) and gyromagnetic ratio ``gamma`` (Hz/T)."""

    D: float = D_ZFS
    gamma: float = GAMMA_NV

    def __post_init__(self):
        check_positive(self.D, "D")
        check_positive(self.gamma, "gamma")


def hamiltonian(zm: ZeemanModel, b_nv) -> np.ndarray:
    """``H/h = D S_z^2 + gamma B.S`` for field(s) ``b_nv`` in the NV frame.

    ``b_nv`` may be (3,) or (..., 3); the result has shape (..., 3, 3).
    """
    b = check_vector(b_nv, "b_nv")
    sx, sy, sz = SPIN1
    h = zm.D * (sz @ sz) + zm.gamma * (
        b[..., 0, None, None] * sx + b[..., 1, None, None] * sy + b[..., 2, None, None] * sz)
    return h


def jacobi_eigh(h: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigen-decomposition of Hermitian matrices by cyclic complex Jacobi.

    Parameters
    ----------
    h : ndarray, shape (..., n, n)
        Hermitian input (only consistency, not Hermiticity, is checked).
    tol : float
        Stop when the off-diagonal Frobenius norm is below ``tol * ||H||_F``
        for every matrix in the batch.

    Returns
    -------
    w : ndarray, shape (..., n)
        Real eigenvalues, ascending.
    v : ndarray, shape (..., n, n)
        Unitary matrix whose columns are the eigenvectors.
    """
    a = np.array(h, dtype=complex)
    shape = a.shape
    n = shape[-1]
    a = a.reshape(-1, n, n)
    a = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    v = np.broadcast_to(np.eye(n, dtype=complex), a.shape).copy()
    scale = np.linalg.norm(a, axis=(-2, -1))
    limit = tol * scale
    iu, ju = np.triu_indices(n, 1)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(a[:, iu, ju]) ** 2, axis=-1) * 2)
        if np.all(off <= limit):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p, q]
                mag = np.abs(apq)
                act = mag > 1e-3 * JACOBI_TOL * scale
                if not np.any(act):
                    continue
                phase = np.where(act, apq / np.where(act, mag, 1.0), 1.0)
                app = a[:, p, p].real
                aqq = a[:, q, q].real
                tau = np.where(act, (aqq - app) / (2 * np.where(act, mag, 1.0)), 0.0)
                t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
                t = np.where(act, t, 0.0)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # G = diag(1, e^{-i phi}) on (p, q) followed by a real rotation;
                # A <- G^H A G only touches rows/columns p and q
                ph = np.conj(phase)
                gqp = (-s * ph)[:, None]
                gqq = (c * ph)[:, None]
                cc, ss = c[:, None], s[:, None]
                col_p, col_q = a[:, :, p].copy(), a[:, :, q].copy()
                a[:, :, p] = cc * col_p + gqp * col_q
                a[:, :, q] = ss * col_p + gqq * col_q
                row_p, row_q = a[:, p, :].copy(), a[:, q, :].copy()
                a[:, p, :] = cc * row_p + np.conj(gqp) * row_q
                a[:, q, :] = ss * row_p + np.conj(gqq) * row_q
                a[act, p, q] = 0.0
                a[act, q, p] = 0.0
                vp, vq = v[:, :, p].copy(), v[:, :, q].copy()
                v[:, :, p] = cc * vp + gqp * vq
                v[:, :, q] = ss * vp + gqq * vq
    w = np.diagonal(a, axis1=-2, axis2=-1).real
    order = np.argsort(w, axis=-1)
    w = np.take_along_axis(w, order, axis=-1)
    v = np.take_along_axis(v, order[:, None, :], axis=-1)
    return w.reshape(shape[:-1]), v.reshape(shape)


def _nv_frame_field(b_lab: np.ndarray, orientation: np.ndarray) -> np.ndarray:
    """Field in the NV frame, ``(B_perp, 0, B_par)``; only the angle matters."""
    b_par = b_lab @ orientation
    b_perp = np.linalg.norm(b_lab - b_par[..., None] * orientation, axis=-1)
    return np.stack([b_perp, np.zeros_like(b_par), b_par], axis=-1)


def _transitions(zm: ZeemanModel, b_nv: np.ndarray) -> np.ndarray:
    w, v = jacobi_eigh(hamiltonian(zm, b_nv))
    pop0 = np.abs(v[..., ZERO_STATE, :]) ** 2
    k0 = np.argmax(pop0, axis=-1)
    e0 = np.take_along_axis(w, k0[..., None], axis=-1)
    others = np.sort(np.abs(w - e0), axis=-1)[..., 1:]
    return np.sort(others, axis=-1)


def transition_frequencies(zm: ZeemanModel, b_lab, orientation) -> np.ndarray:
    """The two ODMR transitions (Hz) out of the ``|0>``-like level.

    Parameters
    ----------
    b_lab : array_like, shape (3,) or (..., 3)
        Field in the lab frame (T).
    orientation : array_like, shape (3,)
        Unit NV axis in the lab frame.

    Returns
    -------
    ndarray, shape (..., 2)
        ``(f_minus, f_plus)``, absolute values sorted ascending. Past the
        ground-state level crossing (``gamma B > D`` along the axis) the
        lower line is ``gamma B - D``.
    """
    n = check_unit(orientation, "orientation")
    b = check_vector(b_lab, "b_lab")
    return _transitions(zm, _nv_frame_field(b, n))


@dataclass(frozen=True)
class DiamondCut100:
    """The four NV axes of a (100)-cut diamond, lab z along the surface normal.

    The vectors are the tetrahedral bond directions, so pairwise angles are
    109.47 deg. As axes (sign irrelevant for the spin physics) each makes
    54.74 deg with lab z.
    """

    orientations: np.ndarray = None

    def __post_init__(self):
        if self.orientations is None:
            dirs = np.array([[1, 1, 1], [-1, -1, 1], [-1, 1, -1], [1, -1, -1]], float) / np.sqrt(3.0)
            dirs.setflags(write=False)
            object.__setattr__(self, "orientations", dirs)

    def __len__(self):
        return len(self.orientations)

    def transitions(self, zm: ZeemanModel, b_lab) -> np.ndarray:
        """Transitions per orientation, shape (..., 4, 2)."""
        b = check_vector(b_lab, "b_lab")
        # (..., 4, 3) NV-frame fields solved in one batch
        b_nv = np.stack([_nv_frame_field(b, n) for n in self.orientations], axis=-2)
        return _transitions(zm, b_nv)
