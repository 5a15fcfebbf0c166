"""Independent reference calculations used by the test-suite."""

import math

import numpy as np
from scipy import integrate

MU0 = 4e-7 * math.pi


def biot_savart_curve(curve, dcurve, t0, t1, current, p, epsrel=1e-12):
    """Brute-force line integral of mu0 I dl x r / (4 pi |r|^3)."""
    p = np.asarray(p, dtype=float)
    # absolute floor from the (positive) magnitude integral, so components
    # that nearly cancel do not demand an unreachable relative accuracy
    mag, _ = integrate.quad(
        lambda t: np.linalg.norm(dcurve(t)) / np.linalg.norm(p - curve(t)) ** 2,
        t0, t1, limit=500)
    epsabs = 1e-14 * mag

    def comp(k):
        def f(t):
            r = p - curve(t)
            return np.cross(dcurve(t), r)[k] / np.linalg.norm(r) ** 3
        val, _ = integrate.quad(f, t0, t1, epsrel=epsrel, epsabs=epsabs, limit=500)
        return val

    return MU0 * current / (4 * math.pi) * np.array([comp(k) for k in range(3)])


def frame(axis, ref):
    e3 = np.asarray(axis, float)
    e1 = np.asarray(ref, float) - e3 * np.dot(ref, e3)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(e3, e1), e3


def arc_oracle(center, axis, ref, radius, a0, a1, current, p):
    e1, e2, _ = frame(axis, ref)
    c = np.asarray(center, float)

    def curve(t):
        return c + radius * (math.cos(t) * e1 + math.sin(t) * e2)

    def dcurve(t):
        return radius * (-math.sin(t) * e1 + math.cos(t) * e2)

    return biot_savart_curve(curve, dcurve, a0, a1, current, p)


def segment_oracle(start, end, current, p):
    s = np.asarray(start, float)
    v = np.asarray(end, float) - s
    return biot_savart_curve(lambda t: s + t * v, lambda t: v, 0.0, 1.0, current, p)


def loop_trapezoid(center, axis, radius, current, p, n=10_000):
    """Periodic trapezoid rule over a closed loop (spectrally accurate)."""
    e1, e2, _ = frame(axis, [1.0, 0.3, -0.2] if abs(axis[0]) < 0.9 else [0.0, 1.0, 0.0])
    t = np.arange(n) * 2 * math.pi / n
    pts = np.asarray(center) + radius * (np.cos(t)[:, None] * e1 + np.sin(t)[:, None] * e2)
    dl = radius * (-np.sin(t)[:, None] * e1 + np.cos(t)[:, None] * e2) * (2 * math.pi / n)
    r = np.asarray(p) - pts
    return MU0 * current / (4 * math.pi) * np.sum(
        np.cross(dl, r) / np.linalg.norm(r, axis=1)[:, None] ** 3, axis=0)


def random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def cubic_eigvalsh(a):
    """Eigenvalues of Hermitian 3x3 matrices from the characteristic cubic.

    Trigonometric solution of det(A - lambda I) = 0, independent of any
    iterative eigen-solver. Returns ascending eigenvalues, shape (n, 3).
    """
    a = np.asarray(a, dtype=complex)
    q = np.trace(a, axis1=-2, axis2=-1).real / 3.0
    p1 = np.abs(a[:, 0, 1]) ** 2 + np.abs(a[:, 0, 2]) ** 2 + np.abs(a[:, 1, 2]) ** 2
    diag = np.diagonal(a, axis1=-2, axis2=-1).real
    p2 = np.sum((diag - q[:, None]) ** 2, axis=1) + 2 * p1
    p = np.sqrt(p2 / 6.0)
    safe = np.where(p > 0, p, 1.0)
    b = (a - q[:, None, None] * np.eye(3)) / safe[:, None, None]
    r = np.clip(np.linalg.det(b).real / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    e1 = q + 2 * p * np.cos(phi)
    e3 = q + 2 * p * np.cos(phi + 2 * np.pi / 3)
    e2 = 3 * q - e1 - e3
    return np.sort(np.stack([e1, e2, e3], axis=1), axis=1)
