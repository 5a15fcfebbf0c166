"""Biot-Savart fields of filament assemblies.

Closed loops use the complete-elliptic-integral form, partial arcs the
adaptive Gauss-Kronrod rule and straight segments the finite-wire closed
form. Assemblies are compiled once into flat arrays (cached on the frozen
elements) so repeated evaluation over points is vectorised.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .elements import (
    MU0,
    CoreState,
    CurrentArc,
    CurrentSegment,
    FluxConcentratorCoil,
    WoundCoil,
    as_vec3,
    local_frame,
)
from .elliptic import agm_elliptic
from .quadrature import adaptive_gk15

SINGULAR_DISTANCE = 1e-9
ARC_RTOL = 1e-10
_CHUNK = 4096


class SingularityError(ValueError):
    """Evaluation point lies on (or too close to) a current filament."""


class StepTooLargeError(RuntimeError):
    """Richardson estimates of a finite-difference derivative disagree."""


# ---------------------------------------------------------------- kernels


def _loop_kernel(centers, axes, radii, currents, points):
    """Sum of closed-loop fields, shape (n, 3)."""
    out = np.zeros_like(points)
    if len(radii) == 0:
        return out
    step = max(1, _CHUNK // len(radii))
    for i in range(0, len(points), step):
        p = points[i:i + step]
        d = p[None, :, :] - centers[:, None, :]
        z = np.einsum("lnk,lk->ln", d, axes)
        rvec = d - z[..., None] * axes[:, None, :]
        rho = np.linalg.norm(rvec, axis=-1)
        R = radii[:, None]
        a2 = (R + rho) ** 2 + z * z
        b2 = (R - rho) ** 2 + z * z
        if np.any(b2 < SINGULAR_DISTANCE ** 2):
            raise SingularityError("point lies on a current loop")
        m = 4.0 * R * rho / a2
        K, E, tail = agm_elliptic(m)
        C = MU0 * currents[:, None] / (2.0 * math.pi)
        sa = np.sqrt(a2)
        bz = C / sa * (K + (R * R - rho * rho - z * z) / b2 * E)
        # (R^2+rho^2+z^2)/b2*E - K rearranged so every term is O(m^2)
        x = 0.5 * m * (E * m * a2 / b2 - K * (0.5 * m + tail)) - K * tail
        safe = np.where(rho > 0.0, rho, 1.0)
        br = np.where(rho > 0.0, C * z * x / (safe * sa), 0.0)
        with np.errstate(invalid="ignore"):
            rhat = np.where(rho[..., None] > 0.0, rvec / safe[..., None], 0.0)
        b = br[..., None] * rhat + bz[..., None] * axes[:, None, :]
        out[i:i + step] = b.sum(axis=0)
    return out


def _segment_kernel(starts, ends, currents, points):
    out = np.zeros_like(points)
    if len(currents) == 0:
        return out
    step = max(1, _CHUNK // len(currents))
    for i in range(0, len(points), step):
        p = points[i:i + step]
        r1 = p[None, :, :] - starts[:, None, :]
        r2 = p[None, :, :] - ends[:, None, :]
        n1 = np.linalg.norm(r1, axis=-1)
        n2 = np.linalg.norm(r2, axis=-1)
        cross = np.cross(r1, r2)
        seg = ends - starts
        seglen = np.linalg.norm(seg, axis=-1)[:, None]
        t = np.einsum("snk,sk->sn", r1, seg) / seglen ** 2
        dist = np.linalg.norm(cross, axis=-1) / seglen
        on_wire = (dist < SINGULAR_DISTANCE) & (t > -SINGULAR_DISTANCE / seglen) & (
            t < 1.0 + SINGULAR_DISTANCE / seglen)
        if np.any(on_wire):
            raise SingularityError("point lies on a current segment")
        denom = n1 * n2 * (n1 * n2 + np.einsum("snk,snk->sn", r1, r2))
        f = MU0 * currents[:, None] / (4.0 * math.pi) * (n1 + n2) / denom
        out[i:i + step] = np.einsum("sn,snk->nk", f, cross)
    return out


def _arc_kernel(frames, centers, radii, a0, a1, currents, points, rtol=ARC_RTOL):
    """Partial-arc fields by adaptive quadrature of the Biot-Savart integrand."""
    n_arc, n_pt = len(radii), len(points)
    if n_arc == 0:
        return np.zeros_like(points)
    d = points[None, :, :] - centers[:, None, :]
    loc = np.einsum("ank,ajk->anj", d, frames)  # (arc, point, xyz)
    _check_arc_distance(loc, radii, a0, a1)
    x = loc[..., 0].ravel()
    y = loc[..., 1].ravel()
    z = loc[..., 2].ravel()
    R = np.repeat(radii, n_pt)
    s2 = x * x + y * y + z * z + R * R

    def integrand(t, owner):
        c, s = np.cos(t), np.sin(t)
        xo, yo, zo, Ro = x[owner, None], y[owner, None], z[owner, None], R[owner, None]
        inv = (s2[owner, None] - 2.0 * Ro * (xo * c + yo * s)) ** -1.5
        return np.stack([zo * c * inv, zo * s * inv, (Ro - xo * c - yo * s) * inv], axis=-1)

    lo = np.repeat(a0, n_pt)
    hi = np.repeat(a1, n_pt)
    local = adaptive_gk15(integrand, lo, hi, rtol=rtol, initial_panels=4)
    scale = (MU0 / (4.0 * math.pi) * currents * radii)
    local = local.reshape(n_arc, n_pt, 3) * scale[:, None, None]
    return np.einsum("anj,ajk->nk", local, frames)


def _check_arc_distance(loc, radii, a0, a1):
    rho = np.hypot(loc[..., 0], loc[..., 1])
    phi = np.arctan2(loc[..., 1], loc[..., 0])
    # azimuth of the point unwrapped into [a0, a0 + 2pi)
    rel = np.mod(phi - a0[:, None], 2.0 * math.pi)
    inside = rel <= (a1 - a0)[:, None]
    R = radii[:, None]
    ring = (rho - R) ** 2 + loc[..., 2] ** 2
    ends = []
    for ang in (a0, a1):
        ex = R * np.cos(ang)[:, None]
        ey = R * np.sin(ang)[:, None]
        ends.append((loc[..., 0] - ex) ** 2 + (loc[..., 1] - ey) ** 2 + loc[..., 2] ** 2)
    d2 = np.where(inside, ring, np.minimum(*ends))
    if np.any(d2 < SINGULAR_DISTANCE ** 2):
        raise SingularityError("point lies on a current arc")


# ------------------------------------------------------------ compilation


@dataclass(frozen=True)
class CompiledAssembly:
    """Flat arrays for every filament of an assembly."""

    loop_centers: np.ndarray
    loop_axes: np.ndarray
    loop_radii: np.ndarray
    loop_currents: np.ndarray
    arc_frames: np.ndarray
    arc_centers: np.ndarray
    arc_radii: np.ndarray
    arc_start: np.ndarray
    arc_end: np.ndarray
    arc_currents: np.ndarray
    seg_starts: np.ndarray
    seg_ends: np.ndarray
    seg_currents: np.ndarray

    def field(self, points: np.ndarray) -> np.ndarray:
        return (_loop_kernel(self.loop_centers, self.loop_axes, self.loop_radii,
                             self.loop_currents, points)
                + _arc_kernel(self.arc_frames, self.arc_centers, self.arc_radii,
                              self.arc_start, self.arc_end, self.arc_currents, points)
                + _segment_kernel(self.seg_starts, self.seg_ends, self.seg_currents, points))

    def min_distance(self, points: np.ndarray) -> np.ndarray:
        """Distance from each point to the nearest filament."""
        best = np.full(len(points), np.inf)
        for c, a, r in zip(self.loop_centers, self.loop_axes, self.loop_radii):
            d = points - c
            z = d @ a
            rho = np.linalg.norm(d - z[:, None] * a, axis=1)
            best = np.minimum(best, np.hypot(rho - r, z))
        for k in range(len(self.arc_radii)):
            loc = (points - self.arc_centers[k]) @ self.arc_frames[k].T
            phi = np.linspace(self.arc_start[k], self.arc_end[k], 721)
            ring = self.arc_radii[k] * np.stack([np.cos(phi), np.sin(phi), 0 * phi], -1)
            dd = np.linalg.norm(loc[:, None, :] - ring[None], axis=-1).min(axis=1)
            best = np.minimum(best, dd)
        for s, e in zip(self.seg_starts, self.seg_ends):
            v = e - s
            t = np.clip((points - s) @ v / (v @ v), 0.0, 1.0)
            best = np.minimum(best, np.linalg.norm(points - s - t[:, None] * v, axis=1))
        return best


def _flatten(assembly):
    if isinstance(assembly, (CurrentArc, CurrentSegment, WoundCoil, FluxConcentratorCoil)):
        yield assembly
        return
    for item in assembly:
        yield from _flatten(item)


def _elements(source):
    """Expand coils into primitive arcs and segments."""
    if isinstance(source, WoundCoil):
        radii, offsets = source.lattice()
        axis = np.asarray(source.axis)
        center = np.asarray(source.center)
        for r, z in zip(radii, offsets):
            yield CurrentArc.loop(center + z * axis, source.axis, float(r), source.current)
    elif isinstance(source, FluxConcentratorCoil):
        yield from _elements(source.drive)
        if source.state is CoreState.SUPERCONDUCTING:
            yield from shielding_path(source)
    else:
        yield source


@functools.lru_cache(maxsize=256)
def _compile(items: tuple) -> CompiledAssembly:
    loops, arcs, segs = [], [], []
    for src in items:
        for el in _elements(src):
            if isinstance(el, CurrentSegment):
                segs.append(el)
            elif el.is_full:
                loops.append(el)
            else:
                arcs.append(el)

    def arr(rows, width=None):
        a = np.array(rows, dtype=float)
        if width is not None:
            a = a.reshape(-1, width)
        return a

    return CompiledAssembly(
        loop_centers=arr([l.center for l in loops], 3),
        loop_axes=arr([l.axis for l in loops], 3),
        loop_radii=arr([l.radius for l in loops]),
        loop_currents=arr([l.current for l in loops]),
        arc_frames=np.array([local_frame(a.axis, a.reference) for a in arcs]).reshape(-1, 3, 3),
        arc_centers=arr([a.center for a in arcs], 3),
        arc_radii=arr([a.radius for a in arcs]),
        arc_start=arr([a.start_angle for a in arcs]),
        arc_end=arr([a.end_angle for a in arcs]),
        arc_currents=arr([a.current for a in arcs]),
        seg_starts=arr([s.start for s in segs], 3),
        seg_ends=arr([s.end for s in segs], 3),
        seg_currents=arr([s.current for s in segs]),
    )


def compile_assembly(assembly) -> CompiledAssembly:
    return _compile(tuple(_flatten(assembly)))


def _points(p) -> tuple[np.ndarray, bool]:
    arr = np.asarray(p, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[-1] != 3 or not np.all(np.isfinite(arr)):
        raise ValueError("points must be finite with shape (3,) or (n, 3)")
    return arr, single


# ------------------------------------------------------------ public API


def field_of_segment(seg: CurrentSegment, p) -> np.ndarray:
    """Field (T) of a finite straight wire at ``p`` (shape (3,) or (n, 3))."""
    pts, single = _points(p)
    b = _segment_kernel(np.array([seg.start]), np.array([seg.end]),
                        np.array([seg.current]), pts)
    return b[0] if single else b


def field_of_arc(arc: CurrentArc, p) -> np.ndarray:
    """Field (T) of a circular arc; closed form for a full turn."""
    pts, single = _points(p)
    if arc.is_full:
        b = _loop_kernel(np.array([arc.center]), np.array([arc.axis]),
                         np.array([arc.radius]), np.array([arc.current]), pts)
    else:
        b = _arc_kernel(local_frame(arc.axis, arc.reference)[None],
                        np.array([arc.center]), np.array([arc.radius]),
                        np.array([arc.start_angle]), np.array([arc.end_angle]),
                        np.array([arc.current]), pts)
    return b[0] if single else b


def field_at(assembly, p) -> np.ndarray:
    """Superposed field (T) of an assembly at one or many points."""
    pts, single = _points(p)
    b = compile_assembly(assembly).field(pts)
    return b[0] if single else b


def shielding_path(fc: FluxConcentratorCoil) -> list:
    """Induced current path of a superconducting core.

    ``n_sheet`` closed circuits each carry ``N*I/n_sheet``: an arc of radius
    ``core_r2`` inside the bore circulating with the drive current, a radial
    leg out along one side of the slit, a counter-circulating arc of radius
    ``core_r1`` on the outer wall, and a leg back along the other side. Bore
    filaments are spread over the bore depth ``core_l2`` below the face,
    outer filaments over the full core height ``core_l1``; circuit ``k``
    joins bore filament ``k`` to outer filament ``k``.
    """
    n = int(fc.n_sheet)
    frame = local_frame(fc.axis, fc.slit_direction)
    e1, e2, e3 = frame
    face = fc.face_center
    i_fil = fc.ampere_turns / n
    half = 0.5 * fc.slit_width
    d_in = math.asin(half / fc.core_r2)
    d_out = math.asin(half / fc.core_r1)
    x_in = fc.core_r2 * math.cos(d_in)
    x_out = fc.core_r1 * math.cos(d_out)
    ref = as_vec3(e1)
    axis = as_vec3(e3)
    path = []
    for k in range(n):
        z_in = -(k + 0.5) * fc.core_l2 / n
        z_out = -(k + 0.5) * fc.core_l1 / n
        c_in = face + z_in * e3
        c_out = face + z_out * e3
        path.append(CurrentArc(c_in, axis, fc.core_r2, d_in, 2 * math.pi - d_in, i_fil, ref))
        path.append(CurrentArc(c_out, axis, fc.core_r1, d_out, 2 * math.pi - d_out, -i_fil, ref))
        if half > 0.0:
            path.append(CurrentSegment(c_in + x_in * e1 - half * e2,
                                       c_out + x_out * e1 - half * e2, i_fil))
            path.append(CurrentSegment(c_out + x_out * e1 + half * e2,
                                       c_in + x_in * e1 + half * e2, i_fil))
        else:
            # zero-width slit: the two legs coincide and cancel exactly
            pass
    return path


@dataclass(frozen=True)
class FieldJacobian:
    """``matrix[i, j] = dB_i/dx_j`` (T/m) at ``point`` with FD ``step`` (m)."""

    matrix: np.ndarray
    point: np.ndarray
    step: float

    @property
    def divergence(self) -> float:
        return float(np.trace(self.matrix))

    @property
    def curl_asymmetry(self) -> float:
        return float(np.abs(self.matrix - self.matrix.T).max())


def _central_jacobian(field_fn, p, h):
    stencil = np.concatenate([p + h * np.eye(3), p - h * np.eye(3)])
    b = field_fn(stencil)
    return ((b[:3] - b[3:]) / (2.0 * h)).T


def field_jacobian(assembly, p, h: float = 1e-6, rtol: float = 1e-4) -> FieldJacobian:
    """Central-difference Jacobian with one Richardson extrapolation step."""
    p = np.asarray(as_vec3(p, "point"))
    compiled = compile_assembly(assembly)
    if compiled.min_distance(p[None])[0] < 2.0 * h:
        raise SingularityError("finite-difference stencil touches a filament")
    j1 = _central_jacobian(compiled.field, p, h)
    j2 = _central_jacobian(compiled.field, p, 0.5 * h)
    scale = np.abs(j2).max()
    if scale > 0.0 and np.abs(j1 - j2).max() > rtol * scale:
        raise StepTooLargeError("Richardson estimates disagree; reduce the step")
    return FieldJacobian((4.0 * j2 - j1) / 3.0, p, h)


@dataclass(frozen=True)
class Amplification:
    """Bore-centre field ratio of a concentrator (superconducting / normal)."""

    numerical: float
    length_ratio: float  # l1 / l2, the long-solenoid estimate
    printed_ratio: float  # l2 / l1, as the formula is printed


def amplification_factor(fc: FluxConcentratorCoil) -> Amplification:
    centre = fc.bore_center
    sc = np.linalg.norm(field_at(fc.with_state(CoreState.SUPERCONDUCTING), centre))
    nm = np.linalg.norm(field_at(fc.with_state(CoreState.NORMAL), centre))
    return Amplification(float(sc / nm), fc.core_l1 / fc.core_l2, fc.core_l2 / fc.core_l1)
