"""Half-space machinery behind the first-order correction.

Two independent reconstructions live here:

* the Neumann datum for the first correction, obtained by transferring the
  curved-boundary condition to the tangent plane and differentiating the
  previous-order potential numerically (:func:`perturb_rhs`);
* the asymmetric correction as a Hankel integral evaluated by adaptive
  Gauss-Kronrod quadrature (:func:`hankel_psi1r`), with its own Bessel
  function :func:`bessel_j2`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import GridContainsOrigin, IllConditionedFit, QuadratureNonConvergence
from .expansion import ExpansionParams
from .geometry import LocalFrame, SurfacePatch, height_function

# ---------------------------------------------------------------------------
# Bessel J2
# ---------------------------------------------------------------------------

_SERIES_MAX = 8.0
_ASYMPTOTIC_MIN = 30.0


def _j2_series(x):
    h2 = (0.5 * x) ** 2
    term = h2 / 2.0  # k = 0: (x/2)^2 / (0! 2!)
    total = term.copy()
    for k in range(1, 40):
        term = -term * h2 / (k * (k + 2))
        total += term
    return total


def _j2_miller(x):
    """Miller's backward recurrence normalised by J0 + 2 sum J_2k = 1."""
    xmax = float(np.max(x))
    n_start = int(xmax + 10.0 * xmax ** (1.0 / 3.0) + 40)
    n_start += n_start % 2
    j_next = np.zeros_like(x)
    j_cur = np.full_like(x, 1e-300)
    norm = np.zeros_like(x)
    j2 = np.zeros_like(x)
    for k in range(n_start, 0, -1):
        j_prev = (2.0 * k / x) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev  # j_cur now holds J_{k-1}
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j_cur
        if k - 1 == 2:
            j2 = j_cur.copy()
        big = np.abs(j_cur) > 1e250
        if np.any(big):
            s = np.where(big, 1e-250, 1.0)
            j_cur *= s
            j_next *= s
            norm *= s
            j2 *= s
    norm += j_cur  # J0
    return j2 / norm


def _j2_asymptotic(x):
    mu = 16.0  # 4 nu^2
    p = np.ones_like(x)
    q = np.zeros_like(x)
    a = 1.0
    inv = 1.0 / x
    pw = np.ones_like(x)
    for k in range(1, 60):
        a *= (mu - (2 * k - 1) ** 2) / (k * 8.0)
        pw = pw * inv
        term = a * pw
        if k % 2 == 1:
            q += (-1) ** ((k - 1) // 2) * term
        else:
            p += (-1) ** (k // 2) * term
        if np.max(np.abs(term)) < 1e-17 and a != 0:
            break
        if a == 0:
            break
    # omega = x - 5 pi / 4, expanded to avoid reducing x - const in floating point
    c, s = math.cos(5 * math.pi / 4), math.sin(5 * math.pi / 4)
    cw = np.cos(x) * c + np.sin(x) * s
    sw = np.sin(x) * c - np.cos(x) * s
    return np.sqrt(2.0 / (math.pi * x)) * (p * cw - q * sw)


def bessel_j2(x):
    """Bessel function of the first kind of order two.

    Power series for ``|x| <= 8``, Miller backward recurrence up to 30 and
    the Hankel asymptotic expansion beyond; absolute error about 1e-15.
    """
    xa = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(xa)
    small = xa <= _SERIES_MAX
    large = xa > _ASYMPTOTIC_MIN
    mid = ~small & ~large
    if np.any(small):
        out[small] = _j2_series(xa[small])
    if np.any(mid):
        out[mid] = _j2_miller(xa[mid])
    if np.any(large):
        out[large] = _j2_asymptotic(xa[large])
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# adaptive Gauss-Kronrod (7, 15)
# ---------------------------------------------------------------------------

_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # 15 nodes, ascending
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[[13, 11, 9]] = _WG[:3]
_WG15[7] = _WG[3]
_EPS = np.finfo(float).eps


def gauss_kronrod(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                  rel_tol: float = 1e-12, abs_tol: float = 1e-15,
                  max_subdivisions: int = 20000, initial_panels: int = 16):
    """Adaptive G7/K15 integration of a vectorised ``f`` over ``[a, b]``.

    All panels still above tolerance are bisected together each sweep.
    Returns ``(value, error_estimate, n_panels)``.
    """
    edges = np.linspace(a, b, initial_panels + 1)
    lo, hi = edges[:-1], edges[1:]
    accepted_val = 0.0
    accepted_err = 0.0
    total_len = b - a
    n_splits = 0
    estimate = None
    while lo.size:
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        fx = f(mid[:, None] + half[:, None] * _NODES[None, :])
        k = half * (fx @ _WK)
        g = half * (fx @ _WG15)
        err = np.abs(k - g)
        # panels cannot do better than rounding in their own weighted sum
        floor = 50 * _EPS * half * (np.abs(fx) @ _WK)
        if estimate is None:
            estimate = float(np.sum(k))
        tol = max(abs_tol, rel_tol * abs(estimate))
        ok = err <= np.maximum(tol * (hi - lo) / total_len, floor)
        accepted_val += float(np.sum(k[ok]))
        accepted_err += float(np.sum(err[ok]))
        lo, hi = lo[~ok], hi[~ok]
        if lo.size:
            estimate = accepted_val + float(np.sum(k[~ok]))
            n_splits += lo.size
            if n_splits > max_subdivisions:
                raise QuadratureNonConvergence(
                    f"subdivision cap {max_subdivisions} reached; remaining error {float(np.sum(err[~ok])):.3g}")
            m = 0.5 * (lo + hi)
            lo, hi = np.concatenate([lo, m]), np.concatenate([m, hi])
    return accepted_val, accepted_err, initial_panels + n_splits


# ---------------------------------------------------------------------------
# Hankel reconstruction of the asymmetric correction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureSpec:
    lambda_max: Optional[float] = None  # None: max(40/|z|, 200/rho)
    rel_tol: float = 1e-12
    abs_tol: float = 1e-15
    max_subdivisions: int = 20000

    def __post_init__(self):
        if self.lambda_max is not None and not self.lambda_max > 0:
            raise ValueError("lambda_max must be positive")
        for tol in (self.rel_tol, self.abs_tol):
            if not 0 < tol <= 1e-2:
                raise ValueError("quadrature tolerances must lie in (0, 1e-2]")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be positive")


def hankel_closed_form(rho, z):
    """``(1/2) (rho / (r - z))^2`` for z < 0."""
    rho = np.asarray(rho, dtype=float)
    z = np.asarray(z, dtype=float)
    r = np.hypot(rho, z)
    return 0.5 * (rho / (r - z)) ** 2


def hankel_psi1r(rho: float, z: float, spec: QuadratureSpec = QuadratureSpec(),
                 return_error: bool = False):
    """Quadrature of ``int_0^inf J2(lam rho) exp(-lam |z|) dlam / lam``.

    Multiplied by ``-K- cos(2 phi)`` this is the asymmetric correction.
    The truncation tail beyond ``lambda_max`` is bounded by
    ``exp(-lambda_max |z|) / (lambda_max |z|)`` and added to the error.
    """
    if rho < 0:
        raise ValueError("rho must be non-negative")
    if not z < 0:
        raise ValueError("z must be strictly negative")
    if rho == 0:
        return (0.0, 0.0) if return_error else 0.0
    az = abs(z)
    lam_max = spec.lambda_max or max(40.0 / az, 200.0 / rho)
    tail = math.exp(-lam_max * az) / (lam_max * az)

    def integrand(lam):
        out = np.empty_like(lam)
        tiny = lam * rho < 1e-8
        # J2(t)/t -> t/8 as t -> 0
        out[tiny] = lam[tiny] * rho**2 / 8.0 * np.exp(-lam[tiny] * az)
        lt = lam[~tiny]
        out[~tiny] = bessel_j2(lt * rho) * np.exp(-lt * az) / lt
        return out

    live = min(lam_max, 50.0 / az)
    n0 = int(min(4096, max(16, math.ceil(live * rho / math.pi) + 16)))
    value, err, _ = gauss_kronrod(integrand, 0.0, lam_max, spec.rel_tol, spec.abs_tol,
                                  spec.max_subdivisions, initial_panels=n0)
    if tail > max(spec.abs_tol, spec.rel_tol * abs(value)):
        raise QuadratureNonConvergence(f"truncation tail {tail:.3g} exceeds tolerance; raise lambda_max")
    err += tail
    return (value, err) if return_error else value


# ---------------------------------------------------------------------------
# boundary transfer
# ---------------------------------------------------------------------------

HeightModel = Callable[[np.ndarray, np.ndarray], tuple]


def quadratic_height(k_x: float, k_y: float) -> HeightModel:
    """Main-term height model ``f = (k_x x^2 + k_y y^2)/2`` and its gradient."""
    def height(x, y):
        return 0.5 * (k_x * x**2 + k_y * y**2), k_x * x, k_y * y
    return height


def patch_height(frame: LocalFrame, patch: SurfacePatch) -> HeightModel:
    """Full height function of an actual patch (includes the O(rho^3) remainder)."""
    def height(x, y):
        hs = height_function(frame, patch, x, y)
        return hs.F, hs.F_x, hs.F_y
    return height


@dataclass(frozen=True)
class BoundaryRHS:
    rho: np.ndarray
    phi: np.ndarray
    values: np.ndarray  # shape (len(rho), len(phi))
    c_sym: Optional[float] = None  # analytic -K+
    c_asym: Optional[float] = None  # analytic -K-


# one-sided 4th-order second derivative at the end node
_D2_ONE_SIDED = np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]) / 12.0


def perturb_rhs(height: HeightModel, psi_prev: Callable, rho, phi,
                params: ExpansionParams | None = None, h_rel: float = 1e-3) -> BoundaryRHS:
    """Numeric Neumann datum ``F_x psi_x + F_y psi_y - F psi_zz`` on ``z = 0``.

    ``psi_prev(x, y, z)`` is the previous-order potential. Tangential
    derivatives use 4th-order central differences; the z-derivative uses a
    one-sided 4th-order stencil into ``z < 0``. Steps scale with rho.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if np.any(rho <= 0):
        raise GridContainsOrigin("the polar grid must exclude rho = 0")
    R, P = np.meshgrid(rho, phi, indexing="ij")
    x, y = R * np.cos(P), R * np.sin(P)
    zero = np.zeros_like(x)
    h = h_rel * R

    def d1(dx, dy):
        f = lambda s: psi_prev(x + s * dx, y + s * dy, zero)
        return (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h)

    psi_x = d1(1.0, 0.0)
    psi_y = d1(0.0, 1.0)
    psi_zz = sum(c * psi_prev(x, y, -i * h) for i, c in enumerate(_D2_ONE_SIDED)) / h**2
    F, Fx, Fy = height(x, y)[:3]
    values = Fx * psi_x + Fy * psi_y - F * psi_zz
    return BoundaryRHS(
        rho=rho,
        phi=phi,
        values=values,
        c_sym=None if params is None else -params.K_plus,
        c_asym=None if params is None else -params.K_minus,
    )


def analytic_rhs(params: ExpansionParams, rho, phi) -> np.ndarray:
    """``-(K+ + K- cos 2 phi) / rho`` on the (rho, phi) grid."""
    R, P = np.meshgrid(np.atleast_1d(rho), np.atleast_1d(phi), indexing="ij")
    return -(params.K_plus + params.K_minus * np.cos(2 * P)) / R


@dataclass(frozen=True)
class RHSFit:
    c_sym: float
    c_asym: float
    se_sym: float
    se_asym: float
    residual_rms: float


def fit_rhs_coefficients(rhs: BoundaryRHS, min_decades: float = 2.0) -> RHSFit:
    """Least-squares fit of ``datum * rho`` against the modes {1, cos 2 phi}."""
    if rhs.phi.size < 8:
        raise IllConditionedFit(f"need at least 8 azimuthal nodes, got {rhs.phi.size}")
    span = math.log10(rhs.rho.max() / rhs.rho.min()) if rhs.rho.size > 1 else 0.0
    if span < min_decades - 1e-9:
        raise ValueError(f"radial grid spans {span:.2f} decades; need {min_decades}")
    R, P = np.meshgrid(rhs.rho, rhs.phi, indexing="ij")
    A = np.column_stack([np.ones(R.size), np.cos(2 * P).ravel()])
    b = (rhs.values * R).ravel()
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = b - A @ coef
    dof = max(b.size - 2, 1)
    cov = (resid @ resid / dof) * np.linalg.inv(A.T @ A)
    return RHSFit(
        c_sym=float(coef[0]),
        c_asym=float(coef[1]),
        se_sym=float(math.sqrt(cov[0, 0])),
        se_asym=float(math.sqrt(cov[1, 1])),
        residual_rms=float(math.sqrt(np.mean(resid**2))),
    )


def second_order_datum(height: HeightModel, psi_total: Callable, params: ExpansionParams,
                       rho, phi) -> np.ndarray:
    """Datum left for the next correction once the first one is accounted for.

    ``psi_total`` should be psi0 + psi1; the first-order datum already
    absorbed by psi1 is subtracted.
    """
    rhs = perturb_rhs(height, psi_total, rho, phi)
    return rhs.values - analytic_rhs(params, rho, phi)
