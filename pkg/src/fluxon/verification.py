"""Numerical verifiers: finite differences, flux, boundary residuals, smearing."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonNormalizedDensity, QuadratureNonConvergence, StencilLeavesDomain
from .expansion import (
    THETA_MIN,
    Charge,
    ExpansionParams,
    FieldVector,
    grad_psi1r,
    grad_psi1s,
    psi_singular,
)
from .geometry import LocalPoint

EPS = np.finfo(float).eps

ScalarField = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GridSpec:
    """Log-spaced radii times a (theta, phi) tensor grid inside z < 0."""

    r_min: float = 1e-2
    r_max: float = 1.0
    n_r: int = 7
    theta_min: float = 0.6 * math.pi
    theta_max: float = 0.98 * math.pi
    n_theta: int = 5
    n_phi: int = 8

    def __post_init__(self):
        if not 0 < self.r_min <= self.r_max:
            raise ValueError("need 0 < r_min <= r_max")
        if not (math.pi / 2 < self.theta_min <= self.theta_max <= math.pi):
            raise ValueError("theta range must lie in (pi/2, pi] so that z < 0")
        if min(self.n_r, self.n_theta, self.n_phi) < 1:
            raise ValueError("grid counts must be positive")

    def points(self) -> LocalPoint:
        r = np.geomspace(self.r_min, self.r_max, self.n_r)
        th = np.linspace(self.theta_min, self.theta_max, self.n_theta)
        ph = 2 * math.pi * np.arange(self.n_phi) / self.n_phi
        R, T, P = np.meshgrid(r, th, ph, indexing="ij")
        return LocalPoint.from_spherical(R.ravel(), T.ravel(), P.ravel())

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def fitted_order(steps, errors) -> float:
    """Slope of log(error) against log(step)."""
    return float(np.polyfit(np.log(np.asarray(steps, float)), np.log(np.asarray(errors, float)), 1)[0])


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def _xyz(point: LocalPoint):
    return tuple(np.asarray(c, dtype=float) for c in (point.x, point.y, point.z))


def fd_laplacian(f: ScalarField, point: LocalPoint, h) -> np.ndarray:
    """Second-order 7-point Laplacian; every stencil node must have z < 0."""
    x, y, z = _xyz(point)
    h = np.asarray(h, dtype=float)
    if np.any(z + h >= 0):
        raise StencilLeavesDomain("Laplacian stencil reaches z >= 0")
    c = f(x, y, z)
    lap = (f(x + h, y, z) + f(x - h, y, z) + f(x, y + h, z) + f(x, y - h, z)
           + f(x, y, z + h) + f(x, y, z - h) - 6 * c) / h**2
    return lap


def default_laplacian_step(point: LocalPoint):
    return point.r * EPS**0.25


def default_gradient_step(point: LocalPoint, scale: float = 1.0):
    return np.maximum(1e-4 * point.r, 1e-8 * scale)


def fd_gradient(f: ScalarField, point: LocalPoint, h=None) -> np.ndarray:
    """Fourth-order central-difference gradient, stacked on the last axis."""
    x, y, z = _xyz(point)
    h = default_gradient_step(point) if h is None else np.asarray(h, dtype=float)
    if np.any(z + 2 * h >= 0):
        raise StencilLeavesDomain("gradient stencil reaches z >= 0")

    def d(dx, dy, dz):
        g = lambda s: f(x + s * dx, y + s * dy, z + s * dz)
        return (-g(2 * h) + 8 * g(h) - 8 * g(-h) + g(-2 * h)) / (12 * h)

    return np.stack(np.broadcast_arrays(d(1, 0, 0), d(0, 1, 0), d(0, 0, 1)), axis=-1)


# ---------------------------------------------------------------------------
# flux and boundary data
# ---------------------------------------------------------------------------

def flux_through_hemisphere(field: Callable[[LocalPoint], FieldVector], epsilon: float,
                            n_theta: int = 48, n_phi: int = 96, tol: float = 1e-12) -> float:
    """Flux of ``B`` through the half sphere ``r = epsilon, z <= 0``.

    Gauss-Legendre in cos(theta) and the trapezoid rule in phi; the result
    is recomputed at double resolution and must agree to ``tol`` (relative).
    """
    def once(nt, nph):
        u, wu = np.polynomial.legendre.leggauss(nt)
        cos_t = 0.5 * (u - 1.0)  # [-1, 0]
        wu = 0.5 * wu
        phi = 2 * math.pi * np.arange(nph) / nph
        C, P = np.meshgrid(cos_t, phi, indexing="ij")
        theta = np.arccos(C)
        pts = LocalPoint.from_spherical(epsilon, theta, P)
        Br = np.asarray(field(pts).B_r, dtype=float) * np.ones_like(C)
        return float(epsilon**2 * (2 * math.pi / nph) * np.sum(wu[:, None] * Br))

    coarse = once(n_theta, n_phi)
    fine = once(2 * n_theta, 2 * n_phi)
    if abs(fine - coarse) > tol * max(abs(fine), 1e-300):
        raise QuadratureNonConvergence(f"hemisphere flux unresolved: {coarse!r} vs {fine!r}")
    return fine


def boundary_residual(term: str, rho, phi, delta, params: ExpansionParams):
    """``d psi / dz`` at ``z = -delta`` minus the Neumann datum of the split problem.

    ``term`` is ``"psi1s"`` (datum ``-K+/rho``) or ``"psi1r"``
    (datum ``-K- cos(2 phi)/rho``).
    """
    rho, phi, delta = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (rho, phi, delta)))
    pt = LocalPoint(rho * np.cos(phi), rho * np.sin(phi), -delta)
    if term == "psi1s":
        dz = grad_psi1s(pt, params)[..., 2]
        target = -params.K_plus / rho
    elif term == "psi1r":
        dz = grad_psi1r(pt, params)[..., 2]
        target = -params.K_minus * np.cos(2 * phi) / rho
    else:
        raise ValueError(f"term must be 'psi1s' or 'psi1r', got {term!r}")
    res = dz - target
    return float(res) if np.ndim(res) == 0 else res


# ---------------------------------------------------------------------------
# finite-size fluxon
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmearDensity:
    """Radially symmetric density ``mu(s)`` on the tangent plane.

    ``total`` is the signed flux carried (nu Phi0); ``support`` is where the
    radial quadrature is truncated.
    """

    profile: Callable[[np.ndarray], np.ndarray]
    width: float
    total: float
    support: float

    @classmethod
    def gaussian(cls, width: float, charge: Charge | None = None, support: float | None = None):
        if not width > 0:
            raise ValueError("core width must be positive")
        flux = (charge or Charge()).flux
        norm = flux / (2 * math.pi * width**2)
        return cls(lambda s: norm * np.exp(-0.5 * (s / width) ** 2), width, flux,
                   8 * width if support is None else support)

    def __add__(self, other: "SmearDensity") -> "SmearDensity":
        p, q = self.profile, other.profile
        return SmearDensity(lambda s: p(s) + q(s), max(self.width, other.width),
                            self.total + other.total, max(self.support, other.support))

    def scaled(self, factor: float) -> "SmearDensity":
        p = self.profile
        return SmearDensity(lambda s: factor * p(s), self.width, factor * self.total, self.support)


def _polar_nodes(support: float, n_radial: int, n_angle: int):
    x, w = np.polynomial.legendre.leggauss(n_radial)
    s = 0.5 * support * (x + 1.0)
    ws = 0.5 * support * w * s  # includes the polar Jacobian
    alpha = 2 * math.pi * np.arange(n_angle) / n_angle
    S, A = np.meshgrid(s, alpha, indexing="ij")
    W = np.repeat(ws[:, None], n_angle, axis=1) * (2 * math.pi / n_angle)
    return S.ravel(), A.ravel(), W.ravel()


def density_integral(density: SmearDensity, n_radial: int = 64, n_angle: int = 64) -> float:
    s, _, w = _polar_nodes(density.support, n_radial, n_angle)
    return float(np.sum(density.profile(s) * w))


def smeared_potential(density: SmearDensity, params: ExpansionParams, point: LocalPoint,
                      n_radial: int = 64, n_angle: int = 64, norm_tol: float = 1e-10):
    """Singular potential convolved with a tangent-plane density.

    Each area element of the density acts as a fractional point charge
    ``mu dA / (nu Phi0)``; the origin is an admissible evaluation point.
    """
    s, alpha, w = _polar_nodes(density.support, n_radial, n_angle)
    mu_w = density.profile(s) * w
    flux = params.charge.flux
    got = float(np.sum(mu_w))
    if abs(got - flux) > norm_tol * abs(flux) or abs(density.total - flux) > norm_tol * abs(flux):
        raise NonNormalizedDensity(f"density integrates to {got!r}, expected {flux!r}")
    x, y, z = _xyz(point)
    shape = np.broadcast(x, y, z).shape
    x, y, z = (np.broadcast_to(c, shape).reshape(-1, 1) for c in (x, y, z))
    pts = LocalPoint(x - s * np.cos(alpha), y - s * np.sin(alpha), np.broadcast_to(z, (x.shape[0], s.size)))
    vals = psi_singular(pts, params).total
    out = (vals @ mu_w) / flux
    out = out.reshape(shape)
    return float(out) if out.ndim == 0 else out


def fit_log_cutoff(params: ExpansionParams, widths, **kw) -> dict:
    """Fit origin values of Gaussian-smeared potentials to ``a/w + b ln w + c``.

    The coefficient ``b`` measures how the logarithmic term is cut off by
    the core width.
    """
    widths = np.asarray(widths, dtype=float)
    origin = LocalPoint(0.0, 0.0, 0.0)
    vals = np.array([smeared_potential(SmearDensity.gaussian(w, params.charge), params, origin, **kw)
                     for w in widths])
    A = np.column_stack([1 / widths, np.log(widths), np.ones_like(widths)])
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    return {"inverse_width": float(coef[0]), "log": float(coef[1]), "constant": float(coef[2]),
            "values": vals}


__all__ = [
    "GridSpec", "fitted_order", "fd_laplacian", "fd_gradient", "flux_through_hemisphere",
    "boundary_residual", "SmearDensity", "density_integral", "smeared_potential", "fit_log_cutoff",
    "default_laplacian_step", "default_gradient_step", "THETA_MIN",
]
