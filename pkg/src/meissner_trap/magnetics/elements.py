"""Current-carrying geometric elements.

All elements are frozen dataclasses holding plain floats and 3-tuples so that
they are hashable; the field solver caches their compiled array form.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

Vec3 = tuple[float, float, float]

MU0 = 4e-7 * math.pi


def as_vec3(value, name="vector") -> Vec3:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be three finite numbers, got {value!r}")
    return (float(arr[0]), float(arr[1]), float(arr[2]))


def unit(value) -> Vec3:
    """Normalise a 3-vector."""
    arr = np.asarray(as_vec3(value), dtype=float)
    n = np.linalg.norm(arr)
    if n == 0.0:
        raise ValueError("cannot normalise the zero vector")
    return as_vec3(arr / n)


def _check_unit(v: Vec3, name: str, tol: float = 1e-12) -> None:
    if abs(math.sqrt(sum(c * c for c in v)) - 1.0) > tol:
        raise ValueError(f"{name} must be a unit vector (|{name}| = 1 within {tol})")


def perpendicular(axis) -> Vec3:
    """Deterministic unit vector perpendicular to ``axis``."""
    a = np.asarray(axis, dtype=float)
    trial = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    v = trial - a * np.dot(trial, a)
    return unit(v)


def local_frame(axis, reference=None) -> np.ndarray:
    """Rows ``(e1, e2, e3)`` with ``e3 = axis`` and ``e1`` along ``reference``."""
    e3 = np.asarray(axis, dtype=float)
    ref = perpendicular(axis) if reference is None else reference
    e1 = np.asarray(ref, dtype=float) - e3 * np.dot(ref, e3)
    e1 /= np.linalg.norm(e1)
    return np.array([e1, np.cross(e3, e1), e3])


@dataclass(frozen=True)
class CurrentSegment:
    """Straight filament from ``start`` to ``end`` carrying ``current`` (A)."""

    start: Vec3
    end: Vec3
    current: float

    def __post_init__(self):
        object.__setattr__(self, "start", as_vec3(self.start, "start"))
        object.__setattr__(self, "end", as_vec3(self.end, "end"))
        object.__setattr__(self, "current", float(self.current))
        if self.start == self.end:
            raise ValueError("segment start and end coincide")

    def scaled(self, factor: float) -> "CurrentSegment":
        return CurrentSegment(self.start, self.end, self.current * factor)


@dataclass(frozen=True)
class CurrentArc:
    """Circular filament arc.

    Angles are measured about ``axis`` from ``reference`` (a deterministic
    perpendicular when omitted). Positive current circulates by the
    right-hand rule about ``axis``. A span of ``2*pi`` is a closed loop and is
    evaluated in closed form.
    """

    center: Vec3
    axis: Vec3
    radius: float
    start_angle: float
    end_angle: float
    current: float
    reference: Vec3 | None = None

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec3(self.center, "center"))
        object.__setattr__(self, "axis", as_vec3(self.axis, "axis"))
        _check_unit(self.axis, "axis")
        if self.reference is not None:
            object.__setattr__(self, "reference", as_vec3(self.reference, "reference"))
        if not self.radius > 0.0:
            raise ValueError("arc radius must be positive")
        if not self.end_angle > self.start_angle:
            raise ValueError("end_angle must exceed start_angle")
        if self.end_angle - self.start_angle > 2.0 * math.pi + 1e-12:
            raise ValueError("arc span exceeds a full turn")
        object.__setattr__(self, "current", float(self.current))

    @property
    def is_full(self) -> bool:
        return self.end_angle - self.start_angle >= 2.0 * math.pi - 1e-12

    @classmethod
    def loop(cls, center, axis, radius, current) -> "CurrentArc":
        return cls(center, axis, radius, 0.0, 2.0 * math.pi, current)

    def scaled(self, factor: float) -> "CurrentArc":
        return CurrentArc(self.center, self.axis, self.radius, self.start_angle,
                          self.end_angle, self.current * factor, self.reference)


@dataclass(frozen=True)
class WoundCoil:
    """Multi-turn solenoid wound between ``inner_radius`` and ``outer_radius``.

    Turns sit on a row-major axial x radial lattice whose cell is as close
    to square as the turn count allows (the wire pitch), filling one layer
    before the next. ``center`` is the axial midpoint.
    """

    center: Vec3
    axis: Vec3
    inner_radius: float
    outer_radius: float
    length: float
    turns: int
    current: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec3(self.center, "center"))
        object.__setattr__(self, "axis", as_vec3(self.axis, "axis"))
        _check_unit(self.axis, "axis")
        if not (self.outer_radius >= self.inner_radius > 0.0):
            raise ValueError("need outer_radius >= inner_radius > 0")
        if not self.length > 0.0:
            raise ValueError("coil length must be positive")
        if int(self.turns) != self.turns or self.turns < 1:
            raise ValueError("turns must be a positive integer")
        object.__setattr__(self, "turns", int(self.turns))
        object.__setattr__(self, "current", float(self.current))

    def lattice(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(radii, axial_offsets)`` of every turn."""
        thickness = self.outer_radius - self.inner_radius
        if thickness == 0.0:
            n_axial = self.turns
        else:
            pitch = math.sqrt(self.length * thickness / self.turns)
            n_axial = min(self.turns, max(1, round(self.length / pitch)))
        n_radial = -(-self.turns // n_axial)
        k = np.arange(self.turns)
        layer, row = np.divmod(k, n_axial)
        z = -0.5 * self.length + (row + 0.5) * self.length / n_axial
        if n_radial == 1:
            r = np.full(self.turns, 0.5 * (self.inner_radius + self.outer_radius))
        else:
            r = self.inner_radius + (layer + 0.5) * thickness / n_radial
        return r, z

    def scaled(self, factor: float) -> "WoundCoil":
        return WoundCoil(self.center, self.axis, self.inner_radius,
                         self.outer_radius, self.length, self.turns,
                         self.current * factor)


class CoreState(str, enum.Enum):
    NORMAL = "normal"
    SUPERCONDUCTING = "superconducting"


# Core dimensions of the machined niobium concentrators and their drive coil.
NOMINAL_L1 = 4.5e-3
NOMINAL_L2 = 0.45e-3
NOMINAL_R1 = 6.57e-3
NOMINAL_R2 = 0.2e-3
NOMINAL_TURNS = 180
WIRE_DIAMETER = 100e-6


@dataclass(frozen=True)
class FluxConcentratorCoil:
    """Drive coil around a slit superconducting core.

    The core is coaxial with the drive coil and centred on it axially. Its
    flat face, which holds the small bore of radius ``core_r2`` and depth
    ``core_l2``, sits at ``drive.center + axis * core_l1 / 2``; "above the
    core" means along ``+axis`` from that face. ``slit_direction`` points
    from the bore outward along the slit.
    """

    drive: WoundCoil
    core_l1: float
    core_l2: float
    core_r1: float
    core_r2: float
    slit_direction: Vec3
    slit_width: float = 0.2e-3
    state: CoreState = CoreState.SUPERCONDUCTING
    n_sheet: int = 16

    def __post_init__(self):
        object.__setattr__(self, "slit_direction", as_vec3(self.slit_direction, "slit_direction"))
        _check_unit(self.slit_direction, "slit_direction")
        object.__setattr__(self, "state", CoreState(self.state))
        if not self.core_l1 > self.core_l2 > 0.0:
            raise ValueError("need core_l1 > core_l2 > 0")
        if not self.core_r1 > self.core_r2 > 0.0:
            raise ValueError("need core_r1 > core_r2 > 0")
        if abs(float(np.dot(self.slit_direction, self.drive.axis))) > 1e-9:
            raise ValueError("slit_direction must be perpendicular to the coil axis")
        if not 0.0 <= self.slit_width < 2.0 * self.core_r2:
            raise ValueError("slit_width must be in [0, 2 * core_r2)")
        if int(self.n_sheet) < 1:
            raise ValueError("n_sheet must be >= 1")

    @property
    def axis(self) -> np.ndarray:
        return np.asarray(self.drive.axis)

    @property
    def face_center(self) -> np.ndarray:
        return np.asarray(self.drive.center) + self.axis * 0.5 * self.core_l1

    @property
    def bore_center(self) -> np.ndarray:
        return self.face_center - self.axis * 0.5 * self.core_l2

    @property
    def ampere_turns(self) -> float:
        return self.drive.turns * self.drive.current

    def with_state(self, state) -> "FluxConcentratorCoil":
        return replace(self, state=CoreState(state))

    def with_current(self, current: float) -> "FluxConcentratorCoil":
        return replace(self, drive=replace(self.drive, current=float(current)))

    def scaled(self, factor: float) -> "FluxConcentratorCoil":
        return self.with_current(self.drive.current * factor)

    @classmethod
    def nominal(cls, face_center=(0.0, 0.0, 0.0), axis=(0.0, 0.0, 1.0),
              slit_direction=(1.0, 0.0, 0.0), current=1.0,
              state=CoreState.SUPERCONDUCTING, slit_width=0.2e-3,
              n_sheet=16) -> "FluxConcentratorCoil":
        """Core and drive coil with the dimensions used in the experiments.

        The 180 turns of 100 um wire are wound directly on the core over its
        full height: 45 turns per layer, 4 layers.
        """
        axis = unit(axis)
        center = np.asarray(as_vec3(face_center)) - np.asarray(axis) * 0.5 * NOMINAL_L1
        per_layer = round(NOMINAL_L1 / WIRE_DIAMETER)
        layers = -(-NOMINAL_TURNS // per_layer)
        drive = WoundCoil(center, axis, NOMINAL_R1, NOMINAL_R1 + layers * WIRE_DIAMETER,
                          NOMINAL_L1, NOMINAL_TURNS, current)
        return cls(drive, NOMINAL_L1, NOMINAL_L2, NOMINAL_R1, NOMINAL_R2,
                   unit(slit_direction), slit_width, CoreState(state), n_sheet)
