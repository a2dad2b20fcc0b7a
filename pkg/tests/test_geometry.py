import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eigh
from scipy.spatial.transform import Rotation

from fluxon.errors import (
    DegeneratePatch,
    NonFiniteDerivative,
    OrientationError,
    OriginUndefinedAngle,
    OutsidePatch,
)
from fluxon.geometry import (
    LocalPoint,
    SurfacePatch,
    biquadratic,
    build_local_frame,
    cubic_remainder_constant,
    cylinder,
    height_function,
    paraboloid,
    plane,
    sphere,
    surface_from_string,
    to_cylindrical,
    to_spherical,
)


def fundamental_form_curvatures(patch, uv=None):
    """Oracle: generalised eigenvalues of (II, I) with the bulk-facing normal."""
    u, v = patch.charge_uv if uv is None else uv
    Pu, Pv = patch.first_derivatives(u, v)
    Puu, Puv, Pvv = patch.second_derivatives(u, v)
    n = np.cross(Pu, Pv)
    n /= np.linalg.norm(n)
    P0 = np.asarray(patch.position(np.asarray(u), np.asarray(v)), float)
    if patch.bulk_indicator(P0 + 1e-6 * patch.scale * n) < 0:
        n = -n
    I = np.array([[Pu @ Pu, Pu @ Pv], [Pu @ Pv, Pv @ Pv]])
    II = np.array([[Puu @ n, Puv @ n], [Puv @ n, Pvv @ n]])
    return tuple(sorted(eigh(II, I, eigvals_only=True), reverse=True))


@pytest.mark.parametrize("patch,expected", [
    (sphere(2.0), (0.5, 0.5)),
    (sphere(0.3), (1 / 0.3, 1 / 0.3)),
    (cylinder(1.0), (1.0, 0.0)),
    (cylinder(4.0), (0.25, 0.0)),
    (plane(), (0.0, 0.0)),
    (paraboloid(1.0, -1.0), (1.0, -1.0)),
    (paraboloid(-0.4, 2.5), (2.5, -0.4)),
])
def test_builtin_curvatures(patch, expected):
    frame = build_local_frame(patch)
    assert frame.k_x >= frame.k_y
    assert (frame.k_x, frame.k_y) == pytest.approx(expected, abs=1e-12)
    assert (frame.k_x, frame.k_y) == pytest.approx(fundamental_form_curvatures(patch), abs=1e-12)


def test_biquadratic_matches_fundamental_form_oracle():
    patch = biquadratic(0.7, -0.2, 0.3, 0.1, -0.4, 0.2)
    frame = build_local_frame(patch)
    assert (frame.k_x, frame.k_y) == pytest.approx(fundamental_form_curvatures(patch), abs=1e-12)


def test_cylinder_frame_axes():
    frame = build_local_frame(cylinder(1.0))
    # x along the circumferential direction, z into the bulk
    assert np.allclose(np.abs(frame.x_axis), [0, 1, 0], atol=1e-12)
    assert frame.z_axis @ (np.zeros(3) - frame.origin) > 0


def test_sphere_exterior_has_positive_curvature():
    frame = build_local_frame(sphere(1.5))
    assert frame.k_x > 0 and frame.k_y > 0
    centre_local = frame.to_local(np.zeros(3))
    assert centre_local == pytest.approx([0, 0, 1.5], abs=1e-12)


def test_frame_is_right_handed_and_orthonormal():
    frame = build_local_frame(biquadratic(0.5, 0.1, 0.2, 0.0, 0.0, 0.3))
    Q = frame.axes
    assert np.allclose(Q @ Q.T, np.eye(3), atol=1e-13)
    assert np.linalg.det(Q) == pytest.approx(1.0, abs=1e-13)


def test_rotation_angle_of_swapped_paraboloid():
    assert build_local_frame(paraboloid(1.0, -1.0)).rotation_angle == pytest.approx(0.0, abs=1e-14)
    assert abs(build_local_frame(paraboloid(-1.0, 1.0)).rotation_angle) == pytest.approx(math.pi / 2, abs=1e-12)


def test_umbilic_point_has_exactly_equal_curvatures():
    frame = build_local_frame(sphere(1.7))
    assert frame.k_x == frame.k_y
    assert frame.rotation_angle == 0.0


rotations = st.integers(0, 2**32 - 1).map(lambda s: Rotation.random(random_state=s).as_matrix())
shifts = st.tuples(*[st.floats(-5, 5, allow_nan=False)] * 3)


@settings(max_examples=40, deadline=None)
@given(rotations, shifts)
def test_frame_invariance_under_rigid_motion(Q, t):
    patch = biquadratic(0.9, -0.35, 0.2, -0.1, 0.3, 0.05)
    moved = patch.transformed(Q, t)
    f0, f1 = build_local_frame(patch), build_local_frame(moved)
    assert f1.k_x == pytest.approx(f0.k_x, abs=1e-9)
    assert f1.k_y == pytest.approx(f0.k_y, abs=1e-9)
    # a surface point keeps its local coordinates
    X = np.asarray(patch.position(np.array(0.1), np.array(-0.05)))
    assert f1.to_local(Q @ X + np.asarray(t)) == pytest.approx(f0.to_local(X), abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 1), st.floats(-1, 1))
def test_relabel_invariance(kx, ky, c30, c12):
    base = biquadratic(kx, ky, c30, 0.0, c12, 0.0)
    swapped = SurfacePatch(
        position=lambda u, v: base.position(v, u),
        bulk_indicator=base.bulk_indicator,
        charge_uv=base.charge_uv[::-1],
        scale=base.scale,
    )
    f0, f1 = build_local_frame(base), build_local_frame(swapped)
    assert f1.k_x == pytest.approx(f0.k_x, abs=1e-6)
    assert f1.k_y == pytest.approx(f0.k_y, abs=1e-6)
    assert f1.z_axis == pytest.approx(f0.z_axis, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 10.0))
def test_curvature_scales_inversely_with_size(a):
    assert build_local_frame(sphere(a)).k_x == pytest.approx(1 / a, rel=1e-12)


def test_fd_derivatives_agree_with_analytic():
    patch = sphere(1.3)
    assert patch.check_derivatives([(1.2, 0.3), (math.pi / 2, 0.0), (2.0, -1.0)]) < 1e-9


def test_fd_fallback_frame_matches_analytic():
    ana = biquadratic(0.6, -0.25, 0.1, 0.2, 0.0, -0.1)
    fd = SurfacePatch(position=ana.position, bulk_indicator=ana.bulk_indicator, charge_uv=ana.charge_uv)
    f0, f1 = build_local_frame(ana), build_local_frame(fd)
    assert f1.k_x == pytest.approx(f0.k_x, abs=1e-6)
    assert f1.k_y == pytest.approx(f0.k_y, abs=1e-6)


def test_height_function_on_sphere():
    a = 2.0
    patch = sphere(a)
    frame = build_local_frame(patch)
    rho = np.array([1e-3, 0.1, 0.5, 1.2])
    phi = np.array([0.0, 0.7, 2.0, 4.0])
    hs = height_function(frame, patch, rho * np.cos(phi), rho * np.sin(phi))
    exact = a - np.sqrt(a * a - rho**2)
    assert hs.F == pytest.approx(exact, rel=1e-12, abs=1e-16)
    slope = rho / np.sqrt(a * a - rho**2)
    assert np.hypot(hs.F_x, hs.F_y) == pytest.approx(slope, rel=1e-10)


def test_height_function_quadratic_leading_term():
    patch = biquadratic(0.8, 0.3, 0.5, -0.2, 0.1, 0.3)
    frame = build_local_frame(patch)
    c = cubic_remainder_constant(frame, patch, 0.2)
    assert 0 < c < 10
    rho = np.geomspace(1e-4, 1e-2, 5)
    hs = height_function(frame, patch, rho, 0 * rho)
    assert np.all(np.abs(hs.F - hs.quadratic) <= 2 * c * rho**3)


def test_surface_from_string():
    assert build_local_frame(surface_from_string("sphere:a=2")).k_x == pytest.approx(0.5)
    assert surface_from_string("plane").name.startswith("plane")
    with pytest.raises(ValueError, match="unknown surface"):
        surface_from_string("torus:a=1")
    with pytest.raises(ValueError):
        surface_from_string("sphere:b=1")
    with pytest.raises(ValueError):
        surface_from_string("sphere:a")


def test_degenerate_patch():
    patch = SurfacePatch(position=lambda u, v: np.stack(np.broadcast_arrays(u + v, u + v, 0 * u), -1),
                         bulk_indicator=lambda X: X[..., 2])
    with pytest.raises(DegeneratePatch):
        build_local_frame(patch)


def test_orientation_error_when_bulk_side_is_ambiguous():
    patch = SurfacePatch(position=plane().position, bulk_indicator=lambda X: 1.0)
    with pytest.raises(OrientationError):
        build_local_frame(patch)


def test_non_finite_derivative():
    base = plane()
    patch = SurfacePatch(position=base.position, bulk_indicator=base.bulk_indicator,
                         d_u=lambda u, v: np.array([np.nan, 0, 0]), d_v=base.d_v)
    with pytest.raises(NonFiniteDerivative):
        build_local_frame(patch)


def test_outside_patch():
    patch = sphere(1.0)
    frame = build_local_frame(patch)
    with pytest.raises(OutsidePatch):
        height_function(frame, patch, 0.95, 0.0)


def test_bad_normal_orientation():
    with pytest.raises(ValueError):
        build_local_frame(plane(), normal_orientation="outward")


def test_transformed_rejects_reflection():
    with pytest.raises(ValueError):
        plane().transformed(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_spherical_roundtrip():
    p = LocalPoint.from_spherical(2.0, 2.5, 5.0)
    r, th, ph = to_spherical(p)
    assert (float(r), float(th), float(ph)) == pytest.approx((2.0, 2.5, 5.0))
    assert p.in_domain


def test_angles_undefined_at_origin():
    with pytest.raises(OriginUndefinedAngle):
        to_spherical(LocalPoint(0.0, 0.0, 0.0))
    with pytest.raises(OriginUndefinedAngle):
        to_cylindrical(LocalPoint(0.0, 0.0, 0.0))


def test_cylindrical_axis_convention():
    rho, phi, z = to_cylindrical(LocalPoint(0.0, 0.0, -1.0))
    assert (float(rho), float(phi), float(z)) == (0.0, 0.0, -1.0)


@pytest.mark.parametrize("patch", [biquadratic(0.7, -0.2, 0.3, 0.1, -0.4, 0.2), cylinder(2.0), paraboloid(-0.3, 0.8)],
                         ids=lambda p: p.name)
def test_principal_frame_has_no_mixed_term(patch):
    frame = build_local_frame(patch)
    bound = 1e-9 * max(abs(frame.k_x), abs(frame.k_y), 1 / patch.scale)
    assert abs(frame.hessian[0, 1]) < bound
    # the same from the height function itself
    h = 1e-3
    F = lambda x, y: float(height_function(frame, patch, x, y).F)
    mixed = (F(h, h) - F(h, -h) - F(-h, h) + F(-h, -h)) / (4 * h * h)
    assert abs(mixed) < 1e-6


@pytest.mark.parametrize("a", [0.3, 1.0, 5.0])
def test_fd_fallback_on_sphere(a):
    ana = sphere(a)
    fd = SurfacePatch(position=ana.position, bulk_indicator=ana.bulk_indicator, charge_uv=ana.charge_uv,
                      scale=ana.scale)
    frame = build_local_frame(fd)
    assert frame.k_x * a == pytest.approx(1.0, abs=1e-6)
    assert frame.k_y * a == pytest.approx(1.0, abs=1e-6)
