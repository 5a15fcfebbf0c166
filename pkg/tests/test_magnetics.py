import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meissner_trap.magnetics import (
    MU0,
    CoreState,
    CurrentArc,
    CurrentSegment,
    FluxConcentratorCoil,
    SingularityError,
    WoundCoil,
    amplification_factor,
    field_at,
    field_jacobian,
    field_of_arc,
    field_of_segment,
    shielding_path,
)
from meissner_trap.magnetics.elliptic import ellipke
from oracles import arc_oracle, loop_trapezoid, random_unit, segment_oracle


def rel(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b)


# ----------------------------------------------------------------- elliptic


def test_agm_matches_scipy():
    from scipy.special import ellipe, ellipk
    m = np.concatenate([[0.0], np.linspace(1e-9, 1 - 1e-9, 500)])
    K, E = ellipke(m)
    assert np.allclose(K, ellipk(m), rtol=1e-13, atol=0)
    assert np.allclose(E, ellipe(m), rtol=1e-13, atol=0)


def test_agm_rejects_m_ge_one():
    with pytest.raises(ValueError):
        ellipke(1.0)


# ----------------------------------------------------------------- segments


def test_segment_infinite_wire_limit():
    seg = CurrentSegment((0, 0, -10), (0, 0, 10), 1.0)
    b = field_of_segment(seg, (0.01, 0, 0))
    # a 20 m wire sits 5e-7 below the infinite-wire value at 1 cm
    exact = MU0 / (2 * math.pi * 0.01) * 10 / math.hypot(10, 0.01)
    assert np.linalg.norm(b) == pytest.approx(exact, rel=1e-12)
    assert np.linalg.norm(b) == pytest.approx(2.000e-5, rel=1e-6)
    assert b[1] > 0  # right-hand rule


@pytest.mark.parametrize("d,L", [(1e-3, 2e-3), (0.05, 0.01), (0.3, 3.0)])
def test_segment_perpendicular_bisector(d, L):
    seg = CurrentSegment((0, 0, -L), (0, 0, L), 2.5)
    expected = MU0 * 2.5 * L / (2 * math.pi * d * math.sqrt(d * d + L * L))
    assert np.linalg.norm(field_of_segment(seg, (0, d, 0))) == pytest.approx(expected, rel=1e-12)


def test_segment_matches_quadrature():
    rng = np.random.default_rng(3)
    for _ in range(10):
        a, b, p = rng.normal(size=(3, 3)) * 1e-3
        seg = CurrentSegment(a, b, rng.uniform(-3, 3))
        assert rel(field_of_segment(seg, p), segment_oracle(a, b, seg.current, p)) < 1e-9


def test_segment_on_wire_raises_and_collinear_outside_is_zero():
    seg = CurrentSegment((0, 0, 0), (1, 0, 0), 1.0)
    with pytest.raises(SingularityError):
        field_of_segment(seg, (0.5, 0, 0))
    assert np.allclose(field_of_segment(seg, (2.0, 0, 0)), 0.0)


# --------------------------------------------------------------------- arcs


def test_loop_center_field():
    loop = CurrentArc.loop((0, 0, 0), (0, 0, 1), 0.2e-3, 1.0)
    assert field_of_arc(loop, (0, 0, 0))[2] == pytest.approx(3.1416e-3, rel=1e-4)
    assert field_of_arc(loop, (0, 0, 0))[2] == pytest.approx(MU0 / (2 * 0.2e-3), rel=1e-13)


@pytest.mark.parametrize("z", [-3e-3, 1e-4, 0.5e-3, 7e-3])
def test_loop_on_axis(z):
    r = 0.2e-3
    loop = CurrentArc.loop((0, 0, 0), (0, 0, 1), r, 1.0)
    expected = MU0 * r * r / (2 * (r * r + z * z) ** 1.5)
    b = field_of_arc(loop, (0, 0, z))
    assert b[2] == pytest.approx(expected, rel=1e-13)
    assert abs(b[0]) + abs(b[1]) < 1e-15 * expected


def test_loop_off_axis_matches_trapezoid():
    loop = CurrentArc.loop((1e-3, 0, 2e-3), (0, 0.6, 0.8), 2e-3, 1.7)
    p = np.array([2.1e-3, -0.4e-3, 3.3e-3])
    assert rel(field_of_arc(loop, p), loop_trapezoid(loop.center, loop.axis, 2e-3, 1.7, p)) < 1e-9


def test_loop_near_axis_is_smooth():
    # the radial component must vanish linearly without cancellation noise
    loop = CurrentArc.loop((0, 0, 0), (0, 0, 1), 1e-3, 1.0)
    rhos = np.array([1e-12, 1e-10, 1e-8, 1e-6])
    b = field_of_arc(loop, np.stack([rhos, 0 * rhos, np.full(4, 0.7e-3)], -1))
    slope = b[:, 0] / rhos
    assert np.allclose(slope, slope[-1], rtol=1e-6)


def test_partial_arc_matches_quadrature():
    arc = CurrentArc((0, 0, 0), (0, 0, 1), 1e-3, 0.3, 5.9, 2.0, reference=(1, 0, 0))
    for p in [(0, 0, 0), (0.5e-3, 0.2e-3, 0.3e-3), (1.01e-3, 0.0, 1e-5)]:
        ref = arc_oracle(arc.center, arc.axis, (1, 0, 0), 1e-3, 0.3, 5.9, 2.0, p)
        assert rel(field_of_arc(arc, p), ref) < 1e-9


def test_arc_on_filament_raises():
    arc = CurrentArc((0, 0, 0), (0, 0, 1), 1e-3, 0.0, 1.0, 1.0, reference=(1, 0, 0))
    with pytest.raises(SingularityError):
        field_of_arc(arc, (1e-3 * math.cos(0.5), 1e-3 * math.sin(0.5), 0.0))
    # same radius but outside the angular range is fine
    field_of_arc(arc, (1e-3 * math.cos(3.0), 1e-3 * math.sin(3.0), 0.0))


def test_random_filaments_match_quadrature():
    rng = np.random.default_rng(11)
    for _ in range(50):
        axis = random_unit(rng)
        ref = random_unit(rng)
        center = rng.normal(size=3) * 1e-3
        radius = rng.uniform(0.1e-3, 3e-3)
        p = center + rng.normal(size=3) * 2e-3
        a0 = rng.uniform(0, 2)
        a1 = a0 + rng.uniform(0.2, 2 * math.pi - 0.01)
        arc = CurrentArc(center, axis, radius, a0, a1, 1.0, reference=ref)
        assert rel(field_of_arc(arc, p), arc_oracle(center, axis, arc.reference, radius, a0, a1, 1.0, p)) < 1e-9


# ---------------------------------------------------------------- assemblies


def test_empty_assembly():
    assert np.array_equal(field_at([], (1, 2, 3)), np.zeros(3))


def test_wound_coil_lattice_nominal():
    fc = FluxConcentratorCoil.nominal()
    r, z = fc.drive.lattice()
    assert len(r) == 180
    assert len(set(np.round(r, 12))) == 4
    assert len(set(np.round(z, 12))) == 45
    assert fc.drive.outer_radius == pytest.approx(6.97e-3)


def test_wound_coil_long_solenoid_limit():
    coil = WoundCoil((0, 0, 0), (0, 0, 1), 1e-3, 1e-3, 0.5, 2000, 0.5)
    assert field_at(coil, (0, 0, 0))[2] == pytest.approx(MU0 * 2000 / 0.5 * 0.5, rel=1e-4)


def test_shielding_path_currents():
    fc = FluxConcentratorCoil.nominal(current=1.0)
    path = shielding_path(fc)
    inner = [e for e in path if isinstance(e, CurrentArc) and e.radius == fc.core_r2]
    outer = [e for e in path if isinstance(e, CurrentArc) and e.radius == fc.core_r1]
    legs = [e for e in path if isinstance(e, CurrentSegment)]
    assert len(inner) == len(outer) == 16 and len(legs) == 32
    assert sum(e.current for e in inner) == pytest.approx(180.0)
    assert sum(e.current for e in outer) == pytest.approx(-180.0)
    zs = [e.center[2] for e in inner]
    assert max(zs) - min(zs) == pytest.approx(0.45e-3 * 15 / 16)
    assert max(zs) < 0.0 < 0.45e-3 + min(zs) + 1e-12


def test_shielding_path_is_closed():
    fc = FluxConcentratorCoil.nominal(slit_direction=(0.6, 0.8, 0.0))
    path = shielding_path(fc)
    ends = []
    for e in path:
        if isinstance(e, CurrentSegment):
            ends.append((np.array(e.start), np.array(e.end)))
    for k in range(16):
        inner, outer = path[4 * k], path[4 * k + 1]
        leg_out, leg_back = ends[2 * k]
        e1 = np.array(fc.slit_direction)
        e3 = np.array(fc.drive.axis)
        e2 = np.cross(e3, e1)

        def at(arc, ang):
            return np.array(arc.center) + arc.radius * (math.cos(ang) * e1 + math.sin(ang) * e2)

        assert np.allclose(leg_out, at(inner, inner.end_angle), atol=1e-15)
        assert np.allclose(leg_back, at(outer, outer.end_angle), atol=1e-15)
        assert np.allclose(ends[2 * k + 1][0], at(outer, outer.start_angle), atol=1e-15)
        assert np.allclose(ends[2 * k + 1][1], at(inner, inner.start_angle), atol=1e-15)


def test_legs_cancel_on_slit_bisector_plane():
    # legs only: on the plane containing the axis and bisecting the slit,
    # the antiparallel leg fields cancel in the limit of zero slit width
    fc = FluxConcentratorCoil.nominal(slit_width=1e-9)
    legs = [e for e in shielding_path(fc) if isinstance(e, CurrentSegment)]
    b = field_at(legs, (3e-3, 0.0, 0.4e-3))
    single = field_at(legs[:1], (3e-3, 0.0, 0.4e-3))
    assert np.linalg.norm(b) < 1e-5 * np.linalg.norm(single)


def test_normal_state_is_drive_only():
    fc = FluxConcentratorCoil.nominal(state=CoreState.NORMAL)
    p = (0.1e-3, 0.2e-3, 0.5e-3)
    assert np.array_equal(field_at(fc, p), field_at(fc.drive, p))


def test_amplification_length_ratio():
    amp = amplification_factor(FluxConcentratorCoil.nominal())
    assert amp.length_ratio == pytest.approx(10.0, rel=1e-12)
    assert amp.printed_ratio == pytest.approx(0.1, rel=1e-12)
    # the filament model concentrates much more strongly than the FEM
    assert amp.numerical > 1.0


def test_amplification_identity_when_lengths_equal():
    fc = FluxConcentratorCoil.nominal()
    import dataclasses
    same = dataclasses.replace(fc, core_l2=fc.core_l1 * (1 - 1e-12))
    assert amplification_factor(same).length_ratio == pytest.approx(1.0)


def test_normal_state_slope_near_measured_value():
    fc = FluxConcentratorCoil.nominal(state=CoreState.NORMAL, current=1e-3)
    bz = field_at(fc, (0, 0, 0.5e-3))[2]
    assert bz * 1e3 / 1.0 == pytest.approx(0.011, rel=0.25)  # mT per mA


def test_sheet_convergence():
    p = np.array([0.05e-3, 0.03e-3, 0.5e-3])
    b16 = field_at(FluxConcentratorCoil.nominal(n_sheet=16), p)
    b32 = field_at(FluxConcentratorCoil.nominal(n_sheet=32), p)
    assert rel(b16, b32) < 0.005


# ------------------------------------------------------------------ Jacobian


def anti_helmholtz(radius=1e-3, sep=1e-3, current=1.0):
    return [CurrentArc.loop((0, 0, -sep / 2), (0, 0, 1), radius, current),
            CurrentArc.loop((0, 0, sep / 2), (0, 0, 1), radius, -current)]


def test_anti_helmholtz_jacobian_closed_form():
    R, s = 1e-3, 1e-3
    a = s / 2
    g_z = 2 * 3 * MU0 * R * R * a / (2 * (R * R + a * a) ** 2.5)
    jac = field_jacobian(anti_helmholtz(R, s), (0, 0, 0)).matrix
    # lower loop circulates +z: Bz falls with z through the centre
    expected = np.diag([g_z / 2, g_z / 2, -g_z])
    assert np.allclose(jac, expected, rtol=0, atol=1e-8 * g_z)
    assert abs(np.trace(jac)) < 1e-6 * np.abs(jac).max()


def test_jacobian_div_and_curl_free():
    fc = FluxConcentratorCoil.nominal()
    rng = np.random.default_rng(5)
    for _ in range(100):
        p = rng.uniform([-1e-3, -1e-3, 0.15e-3], [1e-3, 1e-3, 2e-3])
        jac = field_jacobian(fc, p)
        big = np.abs(jac.matrix).max()
        assert abs(jac.divergence) <= 1e-6 * big
    for _ in range(20):
        p = rng.uniform([-1e-3, -1e-3, 1.0e-3], [1e-3, 1e-3, 3e-3])
        jac = field_jacobian(fc, p)
        assert jac.curl_asymmetry <= 1e-5 * np.abs(jac.matrix).max()


def test_concentrator_gradients_at_probe_height():
    p = np.array([0.0, 0.0, 0.5e-3])
    h = 1e-6
    for state, target in [(CoreState.SUPERCONDUCTING, 4.45), (CoreState.NORMAL, 0.166)]:
        fc = FluxConcentratorCoil.nominal(state=state, current=0.1)
        up = np.linalg.norm(field_at(fc, p + [0, 0, h]))
        dn = np.linalg.norm(field_at(fc, p - [0, 0, h]))
        grad = abs(up - dn) / (2 * h)  # T/m == mT/mm
        assert grad == pytest.approx(target, rel=0.4)


def test_jacobian_near_filament_raises():
    loop = CurrentArc.loop((0, 0, 0), (0, 0, 1), 1e-3, 1.0)
    with pytest.raises(SingularityError):
        field_jacobian([loop], (1e-3 + 1e-6, 0, 0))


# ----------------------------------------------------------------- properties

currents = st.floats(min_value=-5, max_value=5, allow_nan=False).filter(lambda v: abs(v) > 1e-3)


@settings(max_examples=25, deadline=None)
@given(currents, currents, st.floats(min_value=0.1, max_value=4.0))
def test_superposition_and_homogeneity(i1, i2, scale):
    fc = FluxConcentratorCoil.nominal(current=i1)
    seg = CurrentSegment((2e-3, -1e-3, 0.3e-3), (2e-3, 1e-3, 0.9e-3), i2)
    p = np.array([0.1e-3, -0.05e-3, 0.6e-3])
    total = field_at([fc, seg], p)
    parts = field_at(fc, p) + field_at(seg, p)
    assert rel(total, parts) < 1e-12
    scaled = field_at([fc.scaled(scale), seg.scaled(scale)], p)
    assert rel(scaled, scale * total) < 1e-12


def _reflect(v, n):
    v = np.asarray(v, float)
    return v - 2 * np.dot(v, n) * n


def test_mirror_symmetry_pseudovector():
    rng = np.random.default_rng(7)
    n = random_unit(rng)
    loops = [CurrentArc.loop(rng.normal(size=3) * 1e-3, random_unit(rng), 1e-3, 1.3)
             for _ in range(3)]
    segs = [CurrentSegment(*(rng.normal(size=(2, 3)) * 1e-3), -0.7) for _ in range(3)]
    # a mirrored loop circulates the other way about its mirrored axis
    m_loops = [CurrentArc.loop(_reflect(l.center, n), _reflect(l.axis, n), l.radius, -l.current)
               for l in loops]
    m_segs = [CurrentSegment(_reflect(s.start, n), _reflect(s.end, n), s.current) for s in segs]
    for _ in range(5):
        p = rng.normal(size=3) * 2e-3
        b = field_at(loops + segs, p)
        bm = field_at(m_loops + m_segs, _reflect(p, n))
        # pseudovector: B' = -M B
        assert np.allclose(bm, -_reflect(b, n), rtol=0, atol=1e-12 * np.linalg.norm(b))
