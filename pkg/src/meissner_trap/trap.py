"""Meissner-levitation trap built from two flux-concentrator coils.

A superconducting sphere of volume ``V`` in a field ``B`` has energy
``3 V |B|^2 / (4 mu0)``; adding gravity gives the trapping potential whose
minimum, Hessian and eigenmodes are computed here.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .magnetics import (
    MU0,
    CoreState,
    FluxConcentratorCoil,
    SingularityError,
    compile_assembly,
    field_jacobian,
)

ZETA_DEFINITION = "zeta_i = grad_i|B| * r2**2 / (mu0 * N * I), N*I = mean drive ampere-turns"
HOTSPOT_STANDOFF = 10e-6
HOTSPOT_SAMPLES = 720
HESSIAN_STEP = 1e-6


class NoMinimumError(RuntimeError):
    """No restart converged to a minimum inside the gap."""


class SaddlePointError(RuntimeError):
    """The stationary point has a non-positive Hessian eigenvalue."""


@dataclass(frozen=True)
class Particle:
    """Levitated sphere; defaults to a 50 um Sn63Pb37 sphere."""

    radius: float = 25e-6
    density: float = 8400.0

    def __post_init__(self):
        if not (self.radius > 0 and self.density > 0):
            raise ValueError("particle radius and density must be positive")

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius ** 3

    @property
    def mass(self) -> float:
        return self.density * self.volume


@dataclass(frozen=True)
class TrapConfig:
    """Two coaxial concentrators facing each other across a gap.

    The gap midpoint is the origin and gravity acts along ``-z``. Each
    coil's axis points out of its bore face into the gap, so equal positive
    drive currents circulate in opposite senses (anti-Helmholtz).
    """

    top: FluxConcentratorCoil
    bottom: FluxConcentratorCoil
    separation: float
    anti_aligned: bool = True
    gravity: float = 9.81
    particle: Particle = field(default_factory=Particle)

    def __post_init__(self):
        if not self.separation > 0:
            raise ValueError("separation must be positive")
        a_top, a_bot = self.top.axis, self.bottom.axis
        if np.linalg.norm(a_top + a_bot) > 1e-9:
            raise ValueError("coil axes must be collinear and facing each other")
        gap = self.top.face_center - self.bottom.face_center
        lateral = gap - a_bot * np.dot(gap, a_bot)
        if np.linalg.norm(lateral) > 1e-9 or abs(np.dot(gap, a_bot) - self.separation) > 1e-12:
            raise ValueError("core faces must be coaxial and `separation` apart")
        slit_sum = np.add(self.top.slit_direction, self.bottom.slit_direction)
        if self.anti_aligned and np.linalg.norm(slit_sum) > 1e-9:
            raise ValueError("anti-aligned trap needs opposite slit directions")

    @property
    def current_top(self) -> float:
        return self.top.drive.current

    @property
    def current_bottom(self) -> float:
        return self.bottom.drive.current

    @property
    def coils(self) -> list:
        return [self.top, self.bottom]

    @property
    def core_r1(self) -> float:
        return min(self.top.core_r1, self.bottom.core_r1)

    def with_currents(self, top: float, bottom: float) -> "TrapConfig":
        return dataclasses.replace(self, top=self.top.with_current(top),
                                   bottom=self.bottom.with_current(bottom))

    def with_gravity(self, gravity: float) -> "TrapConfig":
        return dataclasses.replace(self, gravity=float(gravity))

    def with_separation(self, separation: float) -> "TrapConfig":
        shift = 0.5 * (separation - self.separation)
        return dataclasses.replace(
            self,
            top=_shift_coil(self.top, -shift * self.top.axis),
            bottom=_shift_coil(self.bottom, -shift * self.bottom.axis),
            separation=float(separation))

    @classmethod
    def nominal(cls, separation=1.2e-3, current_top=1.0, current_bottom=1.0,
              gravity=9.81, particle=None, **coil_kwargs) -> "TrapConfig":
        """Anti-aligned pair of the experimental concentrators.

        ``coil_kwargs`` go to :meth:`FluxConcentratorCoil.nominal` (e.g.
        ``slit_width``, ``n_sheet``, ``state``).
        """
        h = 0.5 * separation
        top = FluxConcentratorCoil.nominal(face_center=(0, 0, h), axis=(0, 0, -1),
                                         slit_direction=(1, 0, 0), current=current_top,
                                         **coil_kwargs)
        bottom = FluxConcentratorCoil.nominal(face_center=(0, 0, -h), axis=(0, 0, 1),
                                            slit_direction=(-1, 0, 0),
                                            current=current_bottom, **coil_kwargs)
        return cls(top, bottom, float(separation), True, float(gravity),
                   particle or Particle())


def _shift_coil(fc: FluxConcentratorCoil, offset) -> FluxConcentratorCoil:
    centre = np.asarray(fc.drive.center) + offset
    return dataclasses.replace(fc, drive=dataclasses.replace(fc.drive, center=tuple(centre)))


@dataclass(frozen=True)
class TrapCharacterization:
    equilibrium: np.ndarray
    hessian: np.ndarray
    eigenvalues: np.ndarray  # ordered as (x, y, z) modes
    frequencies: np.ndarray  # Hz, (f_x, f_y, f_z)
    mode_axes: np.ndarray  # rows are unit eigenvectors, (x, y, z) modes
    gradients: np.ndarray  # T/m, |dB/ds| along each mode axis
    zeta: np.ndarray
    b_hot: float
    field_at_equilibrium: np.ndarray
    jacobian: np.ndarray
    metadata: dict

    @property
    def fx(self) -> float:
        return float(self.frequencies[0])

    @property
    def fy(self) -> float:
        return float(self.frequencies[1])

    @property
    def fz(self) -> float:
        return float(self.frequencies[2])

    def summary(self) -> str:
        """``key=value`` text block."""
        r0 = self.equilibrium
        lines = [
            f"x0_m={r0[0]:.9e}", f"y0_m={r0[1]:.9e}", f"z0_m={r0[2]:.9e}",
            f"fx_hz={self.frequencies[0]:.9e}", f"fy_hz={self.frequencies[1]:.9e}",
            f"fz_hz={self.frequencies[2]:.9e}",
            f"gradx_t_per_m={self.gradients[0]:.9e}", f"grady_t_per_m={self.gradients[1]:.9e}",
            f"gradz_t_per_m={self.gradients[2]:.9e}",
            f"zeta_x={self.zeta[0]:.9e}", f"zeta_y={self.zeta[1]:.9e}", f"zeta_z={self.zeta[2]:.9e}",
            f"bhot_t={self.b_hot:.9e}",
        ]
        lines += [f"{k}={v}" for k, v in self.metadata.items()]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- potential


def _prefactor(cfg: TrapConfig) -> float:
    return 3.0 * cfg.particle.volume / (4.0 * MU0)


def potential_energy(cfg: TrapConfig, p) -> np.ndarray | float:
    """Potential energy (J) of the particle at ``p`` (shape (3,) or (n, 3))."""
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    b = compile_assembly(cfg.coils).field(pts)
    u = _prefactor(cfg) * np.einsum("nk,nk->n", b, b)
    if cfg.gravity:
        u = u + cfg.particle.mass * cfg.gravity * pts[:, 2]
    return float(u[0]) if single else u


def in_gap(cfg: TrapConfig, p, margin: float = 0.0) -> bool:
    p = np.asarray(p, dtype=float)
    return bool(abs(p[2]) < 0.5 * cfg.separation - margin and np.hypot(p[0], p[1]) < cfg.core_r1 - margin)


def _objective(cfg: TrapConfig):
    def f(p):
        if not in_gap(cfg, p):
            return np.inf
        try:
            return potential_energy(cfg, p)
        except SingularityError:
            return np.inf
    return f


def _nelder_mead(f, x0, scale, xatol, fatol):
    simplex = np.vstack([x0, x0 + scale * np.eye(3)])
    return minimize(f, x0, method="Nelder-Mead",
                    options=dict(initial_simplex=simplex, xatol=xatol, fatol=fatol,
                                 maxiter=20000, maxfev=40000))


def find_equilibrium(cfg: TrapConfig, xatol: float = 1e-9, fatol: float = 1e-24) -> np.ndarray:
    """Local minimum of the potential inside the gap.

    Nelder-Mead runs from the gap centre and from six starts offset by a
    quarter gap along each axis; the lowest in-gap result is refined to the
    final tolerances and then Newton-polished on the finite-difference
    gradient.
    """
    f = _objective(cfg)
    q = 0.25 * cfg.separation
    starts = [np.zeros(3)] + [s * q * e for e in np.eye(3) for s in (1.0, -1.0)]
    margin = 1e-6
    best = None
    for x0 in starts:
        res = _nelder_mead(f, x0, 0.4 * q, xatol=1e-7, fatol=1e-19)
        if not np.isfinite(res.fun) or not in_gap(cfg, res.x, margin):
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise NoMinimumError("all restarts left the gap region")
    res = _nelder_mead(f, best.x, 1e-6, xatol=xatol, fatol=fatol)
    x = _newton_polish(cfg, res.x)
    if not in_gap(cfg, x, margin):
        raise NoMinimumError("minimum lies on the gap boundary")
    return x


def _fd_gradient(cfg, x, h):
    pts = np.concatenate([x + h * np.eye(3), x - h * np.eye(3)])
    u = potential_energy(cfg, pts)
    return (u[:3] - u[3:]) / (2 * h)


def _newton_polish(cfg, x, steps=3):
    g = _fd_gradient(cfg, x, 1e-8)
    for _ in range(steps):
        try:
            H = fd_hessian(cfg, x, richardson=False)
            dx = -np.linalg.solve(H, g)
        except (np.linalg.LinAlgError, SingularityError):
            break
        if np.linalg.norm(dx) > 1e-7:
            break  # not in the quadratic basin; keep the simplex answer
        x_new = x + dx
        g_new = _fd_gradient(cfg, x_new, 1e-8)
        if np.linalg.norm(g_new) >= np.linalg.norm(g):
            break
        x, g = x_new, g_new
    return x


# -------------------------------------------------------------- Hessian


def _hessian_stencil(h):
    offs = [np.zeros(3)]
    for i in range(3):
        for s in (1, -1):
            offs.append(s * h * np.eye(3)[i])
    pairs = []
    for i, j in itertools.combinations(range(3), 2):
        for si, sj in itertools.product((1, -1), repeat=2):
            offs.append(h * (si * np.eye(3)[i] + sj * np.eye(3)[j]))
            pairs.append((i, j, si * sj))
    return np.array(offs), pairs


def _hessian_from(u, h, pairs):
    H = np.zeros((3, 3))
    for i in range(3):
        H[i, i] = (u[1 + 2 * i] - 2 * u[0] + u[2 + 2 * i]) / (h * h)
    acc = {}
    for (i, j, sign), val in zip(pairs, u[7:]):
        acc[(i, j)] = acc.get((i, j), 0.0) + sign * val
    for (i, j), v in acc.items():
        H[i, j] = H[j, i] = v / (4 * h * h)
    return H


def fd_hessian(cfg: TrapConfig, x, h: float = HESSIAN_STEP, richardson: bool = True) -> np.ndarray:
    """Central-difference Hessian of the potential (J/m^2)."""
    x = np.asarray(x, dtype=float)
    offs, pairs = _hessian_stencil(h)
    if not richardson:
        return _hessian_from(potential_energy(cfg, x + offs), h, pairs)
    offs2, _ = _hessian_stencil(0.5 * h)
    u = potential_energy(cfg, np.concatenate([x + offs, x + offs2]))
    H1 = _hessian_from(u[:len(offs)], h, pairs)
    H2 = _hessian_from(u[len(offs):], 0.5 * h, pairs)
    H = (4 * H2 - H1) / 3
    return 0.5 * (H + H.T)


def label_modes(vectors: np.ndarray) -> list[int]:
    """Assign eigenvector columns to x, y, z by dominant axis.

    The permutation maximising the summed squared projections wins; exact
    ties resolve in x, y, z order because permutations are scanned
    lexicographically.
    """
    best, best_score = None, -1.0
    for perm in itertools.permutations(range(3)):
        score = sum(vectors[axis, col] ** 2 for axis, col in enumerate(perm))
        if score > best_score + 1e-12:
            best, best_score = perm, score
    return list(best)


def hotspot_field(cfg: TrapConfig) -> float:
    """Largest |B| on probe rings 10 um outside each bore edge."""
    phi = np.linspace(0.0, 2 * math.pi, HOTSPOT_SAMPLES, endpoint=False)
    rings = []
    for fc in cfg.coils:
        e3 = fc.axis
        e1 = np.asarray(fc.slit_direction)
        e2 = np.cross(e3, e1)
        centre = fc.face_center + HOTSPOT_STANDOFF * e3
        rings.append(centre + fc.core_r2 * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2))
    b = compile_assembly(cfg.coils).field(np.concatenate(rings))
    return float(np.linalg.norm(b, axis=1).max())


def characterize(cfg: TrapConfig, equilibrium=None) -> TrapCharacterization:
    """Equilibrium, eigenmodes, gradients and geometric factors of a trap."""
    r0 = find_equilibrium(cfg) if equilibrium is None else np.asarray(equilibrium, float)
    H = fd_hessian(cfg, r0)
    w, v = np.linalg.eigh(H)
    if np.any(w <= 0):
        raise SaddlePointError(f"Hessian eigenvalues {w} are not all positive")
    order = label_modes(v)
    w = w[order]
    axes = v[:, order].T
    axes = axes * np.where(axes[np.arange(3), np.arange(3)] < 0, -1.0, 1.0)[:, None]
    freqs = np.sqrt(w / cfg.particle.mass) / (2 * math.pi)
    jac = field_jacobian(cfg.coils, r0).matrix
    grads = np.linalg.norm(axes @ jac.T, axis=1)
    ni = 0.5 * (abs(cfg.top.ampere_turns) + abs(cfg.bottom.ampere_turns))
    r2 = 0.5 * (cfg.top.core_r2 + cfg.bottom.core_r2)
    zeta = grads * r2 ** 2 / (MU0 * ni) if ni > 0 else np.full(3, np.nan)
    b0 = compile_assembly(cfg.coils).field(r0[None])[0]
    meta = {
        "zeta_definition": ZETA_DEFINITION,
        "gradient_definition": "|J u_i|, J the field Jacobian at r0, u_i the mode axis",
        "gravity_m_s2": f"{cfg.gravity:.9e}",
        "separation_m": f"{cfg.separation:.9e}",
        "current_top_a": f"{cfg.current_top:.9e}",
        "current_bottom_a": f"{cfg.current_bottom:.9e}",
    }
    return TrapCharacterization(r0, H, w, freqs, axes, grads, zeta, hotspot_field(cfg),
                                b0, jac, meta)


# ---------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class SweepResult:
    parameter: str  # "current_a" or "separation_m"
    values: np.ndarray
    frequencies: np.ndarray  # (n, 3)
    gradients: np.ndarray  # (n, 3)
    zeta: np.ndarray  # (n, 3)
    b_hot: np.ndarray
    equilibria: np.ndarray  # (n, 3)

    @property
    def r_squared(self) -> np.ndarray:
        """R^2 of a through-origin linear fit of each mode frequency."""
        x = self.values
        out = []
        for y in self.frequencies.T:
            slope = np.dot(x, y) / np.dot(x, x)
            ss_res = np.sum((y - slope * x) ** 2)
            ss_tot = np.sum((y - y.mean()) ** 2)
            out.append(1.0 - ss_res / ss_tot if ss_tot > 0 else np.nan)
        return np.array(out)

    @property
    def slopes(self) -> np.ndarray:
        x = self.values
        return self.frequencies.T @ x / np.dot(x, x)


def _run_sweep(configs, values, parameter, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(characterize, configs))
    else:
        results = [characterize(c) for c in configs]
    return SweepResult(
        parameter, np.asarray(values, dtype=float),
        np.array([r.frequencies for r in results]),
        np.array([r.gradients for r in results]),
        np.array([r.zeta for r in results]),
        np.array([r.b_hot for r in results]),
        np.array([r.equilibrium for r in results]))


def current_sweep(cfg: TrapConfig, currents, gravity: float = 0.0, workers: int = 1) -> SweepResult:
    """Characterise the trap with both coils at each current.

    Gravity defaults to zero so the frequencies are exactly linear in
    current; pass ``gravity=cfg.gravity`` to include the sag.
    """
    currents = [float(i) for i in currents]
    if any(i <= 0 for i in currents) or currents != sorted(currents):
        raise ValueError("currents must be positive and ascending")
    base = cfg.with_gravity(gravity)
    return _run_sweep([base.with_currents(i, i) for i in currents], currents, "current_a", workers)


def separation_sweep(cfg: TrapConfig, separations, current: float = 1.0,
                     gravity: float = 0.0, workers: int = 1) -> SweepResult:
    """Characterise the trap at each core-face separation at fixed current."""
    seps = [float(d) for d in separations]
    if any(d <= 0 for d in seps):
        raise ValueError("separations must be positive")
    base = cfg.with_gravity(gravity).with_currents(current, current)
    return _run_sweep([base.with_separation(d) for d in seps], seps, "separation_m", workers)


def bc1_breach_current(cfg: TrapConfig | None, b_c1: float, hotspot=None) -> float:
    """Coil current at which the hottest bore-edge field reaches ``b_c1``.

    Uses linearity of the field in current. ``hotspot=(B_hot, I)`` replaces
    the model's own probe-ring value by an external figure.
    """
    if b_c1 < 0:
        raise ValueError("B_c1 must be non-negative")
    if hotspot is None:
        if cfg.current_top <= 0 and cfg.current_bottom <= 0:
            raise ValueError("trap currents are zero")
        b_hot, current = hotspot_field(cfg), max(cfg.current_top, cfg.current_bottom)
    else:
        b_hot, current = hotspot
    return b_c1 / (b_hot / current)


__all__ = [
    "Particle", "TrapConfig", "TrapCharacterization", "SweepResult",
    "NoMinimumError", "SaddlePointError", "potential_energy", "find_equilibrium",
    "fd_hessian", "characterize", "current_sweep", "separation_sweep",
    "bc1_breach_current", "hotspot_field", "label_modes", "in_gap", "CoreState",
    "ZETA_DEFINITION",
]
