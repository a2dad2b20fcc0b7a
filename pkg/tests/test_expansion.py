import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fluxon.errors import AtCharge, NearSingularAxis, OnSingularAxis
from fluxon.expansion import (
    PHI0_SI,
    Charge,
    ExpansionParams,
    b_field_singular,
    grad_psi0,
    grad_psi1r,
    grad_psi1s,
    is_solvable,
    psi0,
    psi1r,
    psi1s,
    psi_singular,
    r_minus_z,
    sphere_singular_potential,
    superpose,
)
from fluxon.geometry import LocalPoint, build_local_frame, paraboloid
from fluxon.verification import fd_gradient

# mpmath at 30 digits: K+ ln(1 + sqrt 2) with K+ = 1.5 / (8 pi)
PSI1S_ORACLE = 0.05260311115679814
# -(K-/2) (x^2 - y^2)/(r - z)^2 at (0.3, -0.4, -1.2), k = (1, 0.5)
PSI1R_ORACLE = 0.00011140846016432673


def test_oracles_are_reproducible_with_mpmath():
    mp.mp.dps = 30
    kp = mp.mpf(1.5) / (8 * mp.pi)
    assert float(kp * mp.log(1 + mp.sqrt(2))) == pytest.approx(PSI1S_ORACLE, rel=1e-15)
    x, y, z = mp.mpf("0.3"), mp.mpf("-0.4"), mp.mpf("-1.2")
    km = mp.mpf("0.5") / (8 * mp.pi)
    r = mp.sqrt(x * x + y * y + z * z)
    assert float(-km / 2 * (x * x - y * y) / (r - z) ** 2) == pytest.approx(PSI1R_ORACLE, rel=1e-15)


def test_psi1s_oracle():
    prm = ExpansionParams(1.0, 0.5, 1.0)
    assert psi1s(LocalPoint(1.0, 0.0, -1.0), prm) == pytest.approx(PSI1S_ORACLE, rel=1e-14)


def test_psi1r_oracle():
    prm = ExpansionParams(1.0, 0.5, 1.0)
    assert psi1r(LocalPoint(0.3, -0.4, -1.2), prm) == pytest.approx(PSI1R_ORACLE, rel=1e-14)


def test_planar_monopole_value():
    assert psi0(LocalPoint(0.0, 0.0, -2.0), Charge()) == pytest.approx(1 / (4 * math.pi), rel=1e-15)


def test_flux_quantum_si():
    assert PHI0_SI == pytest.approx(2.067833848e-15, rel=1e-9)
    assert Charge.si(-1).flux == -PHI0_SI


def test_k_coefficients():
    prm = ExpansionParams(1.2, -0.4, 1.0, Charge(-1, 2.0))
    assert prm.K_plus == pytest.approx(-2.0 * 0.8 / (8 * math.pi))
    assert prm.K_minus == pytest.approx(-2.0 * 1.6 / (8 * math.pi))


def test_from_frame_uses_principal_curvatures():
    prm = ExpansionParams.from_frame(build_local_frame(paraboloid(0.3, 0.9)), d=2.0)
    assert (prm.k_x, prm.k_y, prm.d) == pytest.approx((0.9, 0.3, 2.0))


def test_r_minus_z_is_accurate_above_the_plane():
    p = LocalPoint(1e-9, 0.0, 1.0)
    assert r_minus_z(p) == pytest.approx(0.5e-18, rel=1e-12)


domain_points = st.builds(
    LocalPoint.from_spherical,
    st.floats(1e-3, 1e2),
    st.floats(0.51 * math.pi, math.pi),
    st.floats(0, 2 * math.pi),
)
curvatures = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(domain_points, curvatures, curvatures)
def test_field_equals_minus_analytic_gradient(p, kx, ky):
    prm = ExpansionParams(kx, ky, 1.0)
    assume(float(r_minus_z(p)) > 1e-5 * float(p.r))
    grad = grad_psi0(p, prm.charge) + grad_psi1s(p, prm) + grad_psi1r(p, prm)
    B = b_field_singular(p, prm).cartesian(p)
    scale = max(np.linalg.norm(B), np.linalg.norm(grad))
    assert np.max(np.abs(B + grad)) <= 1e-11 * scale


@settings(max_examples=40, deadline=None)
@given(domain_points, curvatures, curvatures)
def test_analytic_gradient_matches_fd(p, kx, ky):
    assume(float(p.z) < -0.05 * float(p.r))
    prm = ExpansionParams(kx, ky, 1.0)
    for grad, fn in ((grad_psi1s, psi1s), (grad_psi1r, psi1r)):
        fd = fd_gradient(lambda x, y, z: fn(LocalPoint(x, y, z), prm), p)
        ana = grad(p, prm)
        assert np.max(np.abs(fd - ana)) <= 1e-7 * (np.linalg.norm(ana) + abs(prm.K_plus) / float(p.r) + 1e-300)


@settings(max_examples=40, deadline=None)
@given(domain_points, curvatures, curvatures, st.floats(0.01, 100), st.floats(0.01, 100))
def test_gauge_shift_is_a_constant(p, kx, ky, d1, d2):
    a, b = ExpansionParams(kx, ky, d1), ExpansionParams(kx, ky, d2)
    diff = psi_singular(p, a).total - psi_singular(p, b).total
    assert diff == pytest.approx(a.K_plus * math.log(d2 / d1), abs=1e-12 * (1 + abs(psi_singular(p, a).total)))


@settings(max_examples=40, deadline=None)
@given(domain_points, curvatures, curvatures, st.floats(0.1, 10))
def test_scaling(p, kx, ky, lam):
    prm = ExpansionParams(kx, ky, 1.0)
    q = LocalPoint(lam * p.x, lam * p.y, lam * p.z)
    assert psi0(q, prm.charge) == pytest.approx(psi0(p, prm.charge) / lam, rel=1e-12)
    assert psi1s(q, prm) - psi1s(p, prm) == pytest.approx(prm.K_plus * math.log(lam), abs=1e-10)
    assert psi1r(q, prm) == pytest.approx(psi1r(p, prm), rel=1e-10, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(domain_points, curvatures, curvatures)
def test_charge_sign_flips_everything(p, kx, ky):
    plus = psi_singular(p, ExpansionParams(kx, ky, 1.0, Charge(1))).total
    minus = psi_singular(p, ExpansionParams(kx, ky, 1.0, Charge(-1))).total
    assert minus == pytest.approx(-plus, rel=1e-14, abs=1e-300)


def test_vectorised_matches_scalar():
    prm = ExpansionParams(0.7, -0.2, 1.5)
    pts = LocalPoint.from_spherical(np.array([0.1, 1.0, 3.0]), np.array([2.0, 2.5, 3.0]), np.array([0.0, 1.0, 4.0]))
    vec = psi_singular(pts, prm).total
    for i in range(3):
        one = LocalPoint(float(pts.x[i]), float(pts.y[i]), float(pts.z[i]))
        assert vec[i] == psi_singular(one, prm).total


def test_on_plane_values_are_finite():
    prm = ExpansionParams(1.0, 0.4, 1.0)
    assert np.isfinite(psi_singular(LocalPoint(0.5, 0.2, 0.0), prm).total)


def test_errors():
    prm = ExpansionParams(1.0, 0.5)
    with pytest.raises(AtCharge):
        psi0(LocalPoint(0.0, 0.0, 0.0), prm.charge)
    with pytest.raises(AtCharge):
        psi1s(LocalPoint(0.0, 0.0, 0.0), prm)
    with pytest.raises(OnSingularAxis):
        psi1s(LocalPoint(0.0, 0.0, 1.0), prm)
    with pytest.raises(OnSingularAxis):
        psi1r(LocalPoint(0.0, 0.0, 2.0), prm)
    with pytest.raises(NearSingularAxis):
        b_field_singular(LocalPoint(1e-8, 0.0, 1.0), prm)
    with pytest.raises(ValueError):
        Charge(2)
    with pytest.raises(ValueError):
        Charge(1, -1.0)
    with pytest.raises(ValueError):
        ExpansionParams(1.0, 1.0, 0.0)


def test_sphere_singular_potential_defaults():
    a = 1.5
    p = LocalPoint(0.1, 0.2, -0.3)
    explicit = psi_singular(p, ExpansionParams(1 / a, 1 / a, 2 * a)).total
    assert sphere_singular_potential(a, p, Charge()) == pytest.approx(explicit, rel=1e-15)


def test_solvability():
    assert is_solvable([Charge(1), Charge(-1)])
    assert not is_solvable([Charge(1)])
    assert is_solvable([Charge(1)], bounded_domain=False)


def test_superpose():
    prm = ExpansionParams(0.5, 0.5)
    p1, p2 = LocalPoint(0.0, 0.0, -1.0), LocalPoint(0.3, 0.0, -0.5)
    assert superpose([(p1, prm), (p2, prm)]) == pytest.approx(
        psi_singular(p1, prm).total + psi_singular(p2, prm).total)


@settings(max_examples=30, deadline=None)
@given(domain_points, st.floats(-3, 3), st.floats(0, 2 * math.pi))
def test_umbilic_angular_term_vanishes_for_any_rotation(p, k, angle):
    prm = ExpansionParams(k, k)
    c, s = math.cos(angle), math.sin(angle)
    q = LocalPoint(c * p.x - s * p.y, s * p.x + c * p.y, p.z)
    assert abs(psi1r(q, prm)) <= 1e-12
