"""Complete elliptic integrals by the arithmetic-geometric mean."""

import numpy as np

AGM_TOL = 1e-13
_MAX_ITER = 60


def agm_elliptic(m):
    """AGM evaluation of ``K(m)``, ``E(m)`` and the correction tail.

    Returns ``(K, E, tail)`` where ``E = K * (1 - m/2 - tail)`` and
    ``tail = sum_{n>=1} 2**(n-1) c_n**2``. The tail is a sum of positive
    terms of order ``m**2``; callers use it to form ``K - E`` style
    differences without cancellation near ``m = 0``.
    """
    m = np.asarray(m, dtype=float)
    if np.any((m < 0.0) | (m >= 1.0)):
        raise ValueError("elliptic parameter must lie in [0, 1)")
    a = np.ones_like(m)
    b = np.sqrt(1.0 - m)
    tail = np.zeros_like(m)
    weight = 0.5
    for _ in range(_MAX_ITER):
        c = 0.5 * (a - b)
        a, b = 0.5 * (a + b), np.sqrt(a * b)
        weight *= 2.0
        tail = tail + weight * c * c
        if np.all(np.abs(a - b) <= AGM_TOL * a):
            break
    else:  # pragma: no cover - AGM converges quadratically
        raise RuntimeError("AGM iteration did not converge")
    K = np.pi / (2.0 * a)
    return K, K * (1.0 - 0.5 * m - tail), tail


def ellipke(m):
    """Return ``(K(m), E(m))`` for parameter ``m = k**2`` in ``[0, 1)``."""
    K, E, _ = agm_elliptic(m)
    return K, E
