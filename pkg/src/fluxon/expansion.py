"""Singular part of the potential and field of a surface fluxon.

All functions accept a :class:`~fluxon.geometry.LocalPoint` whose
components may be scalars or equally shaped arrays, and evaluate

    psi0  = nu Phi0 / (2 pi r)
    psi1s = K+ ln((r - z) / d)
    psi1r = -(K- / 2) (x^2 - y^2) / (r - z)^2

with ``K+- = nu Phi0 (k_x +- k_y) / (8 pi)``. The physical domain is ``z < 0``;
both curvature terms are singular on the ray ``x = y = 0, z >= 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import AtCharge, NearSingularAxis, OnSingularAxis
from .geometry import LocalFrame, LocalPoint

PLANCK_H = 6.62607015e-34  # J s, exact SI
ELEMENTARY_CHARGE = 1.602176634e-19  # C, exact SI
PHI0_SI = PLANCK_H / (2 * ELEMENTARY_CHARGE)

THETA_MIN = 1e-6
# 1 - cos(THETA_MIN), written to keep full precision
AXIS_TOL = 2 * math.sin(THETA_MIN / 2) ** 2


@dataclass(frozen=True)
class Charge:
    nu: int = 1
    phi0: float = 1.0

    def __post_init__(self):
        if self.nu not in (1, -1):
            raise ValueError(f"charge sign must be +1 or -1, got {self.nu!r}")
        if not self.phi0 > 0:
            raise ValueError("flux quantum must be positive")

    @classmethod
    def si(cls, nu: int = 1) -> "Charge":
        return cls(nu, PHI0_SI)

    @property
    def flux(self) -> float:
        return self.nu * self.phi0


@dataclass(frozen=True)
class ExpansionParams:
    k_x: float
    k_y: float
    d: float = 1.0
    charge: Charge = field(default_factory=Charge)
    K_plus: float = field(init=False)
    K_minus: float = field(init=False)

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("gauge length d must be positive")
        object.__setattr__(self, "K_plus", self.charge.flux * (self.k_x + self.k_y) / (8 * math.pi))
        object.__setattr__(self, "K_minus", self.charge.flux * (self.k_x - self.k_y) / (8 * math.pi))

    @classmethod
    def from_frame(cls, frame: LocalFrame, d: float = 1.0, charge: Charge | None = None) -> "ExpansionParams":
        return cls(frame.k_x, frame.k_y, d, charge or Charge())

    def with_gauge(self, d: float) -> "ExpansionParams":
        return ExpansionParams(self.k_x, self.k_y, d, self.charge)


@dataclass(frozen=True)
class PotentialBreakdown:
    psi0: np.ndarray | float
    psi1s: np.ndarray | float
    psi1r: np.ndarray | float
    total: np.ndarray | float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", self.psi0 + self.psi1s + self.psi1r)


@dataclass(frozen=True)
class FieldVector:
    """Field components in the local spherical basis (r̂, θ̂, φ̂)."""

    B_r: np.ndarray | float
    B_theta: np.ndarray | float
    B_phi: np.ndarray | float

    def cartesian(self, point: LocalPoint) -> np.ndarray:
        """Components along (x̂, ŷ, ẑ), stacked on the last axis."""
        r = point.r
        rho = point.rho
        ct, st = point.z / r, rho / r
        with np.errstate(invalid="ignore", divide="ignore"):
            cp = np.where(rho > 0, point.x / np.where(rho > 0, rho, 1.0), 1.0)
            sp = np.where(rho > 0, point.y / np.where(rho > 0, rho, 1.0), 0.0)
        bx = self.B_r * st * cp + self.B_theta * ct * cp - self.B_phi * sp
        by = self.B_r * st * sp + self.B_theta * ct * sp + self.B_phi * cp
        bz = self.B_r * ct - self.B_theta * st
        return np.stack(np.broadcast_arrays(bx, by, bz), axis=-1)

    @property
    def magnitude(self):
        return np.sqrt(np.square(self.B_r) + np.square(self.B_theta) + np.square(self.B_phi))


def _f(a):
    return np.asarray(a, dtype=float)


def r_minus_z(point: LocalPoint):
    """``r - z`` without cancellation for z > 0 (uses rho^2 / (r + z))."""
    x, y, z = _f(point.x), _f(point.y), _f(point.z)
    r = point.r
    rho2 = x * x + y * y
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(z <= 0, r - z, rho2 / np.where(z <= 0, 1.0, r + z))


def _check_r(point: LocalPoint):
    r = point.r
    if np.any(r == 0):
        raise AtCharge("potential is singular at the charge location r = 0")
    return r


def _check_axis(point: LocalPoint):
    r = _check_r(point)
    q = r_minus_z(point)
    if np.any(q <= AXIS_TOL * r):
        raise OnSingularAxis("point lies on the singular semi-axis x = y = 0, z >= 0")
    return r, q


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def psi0(point: LocalPoint, charge: Charge):
    """Leading monopole term, twice the free-space point-charge potential."""
    r = _check_r(point)
    return _scalar(charge.flux / (2 * math.pi * r))


def psi1s(point: LocalPoint, params: ExpansionParams):
    """Axially symmetric logarithmic term ``K+ ln((r - z)/d)``."""
    _, q = _check_axis(point)
    return _scalar(params.K_plus * np.log(q / params.d))


def psi1r(point: LocalPoint, params: ExpansionParams):
    """Asymmetric term; depends on the direction only, not on r."""
    _, q = _check_axis(point)
    x, y = _f(point.x), _f(point.y)
    return _scalar(-0.5 * params.K_minus * (x * x - y * y) / q**2)


def psi_singular(point: LocalPoint, params: ExpansionParams) -> PotentialBreakdown:
    return PotentialBreakdown(psi0(point, params.charge), psi1s(point, params), psi1r(point, params))


def grad_psi0(point: LocalPoint, charge: Charge) -> np.ndarray:
    r = _check_r(point)
    c = -charge.flux / (2 * math.pi * r**3)
    return np.stack(np.broadcast_arrays(c * point.x, c * point.y, c * point.z), axis=-1)


def grad_psi1s(point: LocalPoint, params: ExpansionParams) -> np.ndarray:
    r, q = _check_axis(point)
    k = params.K_plus
    gx = k * _f(point.x) / (r * q)
    gy = k * _f(point.y) / (r * q)
    gz = -k / r
    return np.stack(np.broadcast_arrays(gx, gy, gz), axis=-1)


def grad_psi1r(point: LocalPoint, params: ExpansionParams) -> np.ndarray:
    r, q = _check_axis(point)
    x, y = _f(point.x), _f(point.y)
    k = params.K_minus
    s = x * x - y * y
    gx = -0.5 * k * (2 * x / q**2 - 2 * s * x / (r * q**3))
    gy = -0.5 * k * (-2 * y / q**2 - 2 * s * y / (r * q**3))
    gz = -k * s / (r * q**2)
    return np.stack(np.broadcast_arrays(gx, gy, gz), axis=-1)


def b_field_singular(point: LocalPoint, params: ExpansionParams,
                     theta_min: float = THETA_MIN) -> FieldVector:
    """Singular part of ``B = -grad psi`` in the local spherical basis.

    The angular factors use ``1 - cos(theta) = (r - z)/r`` and
    ``sin(theta) = rho/r`` so they keep full accuracy near theta = pi.
    """
    r = _check_r(point)
    q = r_minus_z(point)
    if np.any(q <= 2 * math.sin(theta_min / 2) ** 2 * r):
        raise NearSingularAxis(f"polar angle below guard {theta_min:g} rad")
    one_m_cos = q / r
    sin_t = point.rho / r
    phi = np.arctan2(point.y, point.x)
    c = params.charge.flux / (2 * math.pi)
    ksum = params.k_x + params.k_y
    kdiff = params.k_x - params.k_y
    asym = kdiff / (4 * r) * sin_t / one_m_cos**2
    B_r = c * (1 / r**2 - ksum / (4 * r))
    B_theta = -c * (ksum / (4 * r) * sin_t / one_m_cos + asym * np.cos(2 * phi))
    B_phi = -c * asym * np.sin(2 * phi)
    return FieldVector(_scalar(B_r), _scalar(B_theta), _scalar(B_phi))


def sphere_singular_potential(a: float, point: LocalPoint, charge: Charge,
                              k: float | None = None, d: float | None = None):
    """Singular potential at a charge on a sphere of radius ``a`` (exterior domain).

    Uses ``k_x = k_y = 1/a`` and gauge ``d = 2a`` unless overridden; the
    overrides exist for negative-control studies.
    """
    kk = 1.0 / a if k is None else k
    params = ExpansionParams(kk, kk, 2 * a if d is None else d, charge)
    return psi_singular(point, params).total


def potential_field(params: ExpansionParams, terms=("psi0", "psi1s", "psi1r")):
    """Wrap selected singular terms as a plain ``f(x, y, z)`` callable."""
    funcs = {
        "psi0": lambda p: psi0(p, params.charge),
        "psi1s": lambda p: psi1s(p, params),
        "psi1r": lambda p: psi1r(p, params),
    }
    unknown = set(terms) - set(funcs)
    if unknown:
        raise ValueError(f"unknown terms {sorted(unknown)}")

    def f(x, y, z):
        p = LocalPoint(x, y, z)
        return sum(funcs[t](p) for t in terms)
    return f


def is_solvable(charges: Iterable[Charge], bounded_domain: bool = True) -> bool:
    """Global compatibility: in a bounded domain the total flux must vanish."""
    charges = list(charges)
    if not bounded_domain:
        return True
    total = sum(c.flux for c in charges)
    scale = max((c.phi0 for c in charges), default=1.0)
    return abs(total) <= 1e-12 * scale


def superpose(contributions: Iterable[tuple[LocalPoint, ExpansionParams]]):
    """Plain sum of single-charge singular potentials, each in its own local frame."""
    return sum(psi_singular(p, prm).total for p, prm in contributions)
