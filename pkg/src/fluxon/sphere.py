"""Exact exterior-sphere solution for a single surface fluxon.

The charge sits at the pole ``gamma = 0`` of a sphere of radius ``a``; the
exterior harmonic series

    psi = sum_l  nu Phi0 (2l + 1) / (4 pi a (l + 1)) (a/R)^(l+1) P_l(cos gamma)

has inward-normal derivative equal to the surface delta function at the pole.
Its sum in closed form is

    psi = nu Phi0 / (4 pi a) [2t / D - ln((t - u + D) / (1 - u))],
    t = a/R,  u = cos gamma,  D = sqrt(1 - 2tu + t^2).

The closed form is only trusted after :func:`validate_closed_form` has
matched it against the series.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AtCharge, FluxonError
from .expansion import Charge, sphere_singular_potential
from .geometry import LocalPoint
from .halfspace import gauss_kronrod


@dataclass(frozen=True)
class SphereProblem:
    """Evaluation point ``(R, gamma)`` outside a sphere carrying one fluxon at gamma = 0.

    ``elevation`` is ``R - a``; pass it explicitly when it is known more
    accurately than the difference of two nearly equal radii.
    """

    a: float
    R: np.ndarray | float
    gamma: np.ndarray | float
    charge: Charge = field(default_factory=Charge)
    elevation: np.ndarray | float | None = None

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("sphere radius must be positive")
        if self.elevation is None:
            object.__setattr__(self, "elevation", np.asarray(self.R, dtype=float) - self.a)
        if np.any(np.asarray(self.elevation) < 0):
            raise ValueError("evaluation point must satisfy R >= a")
        g = np.asarray(self.gamma, dtype=float)
        if np.any(g < 0) or np.any(g > math.pi):
            raise ValueError("gamma must lie in [0, pi]")

    @classmethod
    def from_local(cls, a: float, point: LocalPoint, charge: Charge | None = None) -> "SphereProblem":
        """Map a point of the charge-centred local frame onto ``(R, gamma)``.

        The local ``z`` axis points toward the sphere centre, which sits at
        ``(0, 0, a)``. Elevation and ``1 - cos(gamma)`` are formed without
        cancellation.
        """
        x, y, z = (np.asarray(c, dtype=float) for c in (point.x, point.y, point.z))
        rho2 = x * x + y * y
        R = np.sqrt((a - z) ** 2 + rho2)
        elevation = (z * z - 2 * a * z + rho2) / (R + a)
        w = rho2 / (R * (R + a - z))  # 1 - cos(gamma)
        gamma = 2 * np.arcsin(np.sqrt(np.clip(w / 2, 0.0, 1.0)))
        return cls(a, R, gamma, charge or Charge(), elevation)

    @property
    def t(self):
        return self.a / np.asarray(self.R, dtype=float)

    @property
    def one_minus_t(self):
        return np.asarray(self.elevation, dtype=float) / np.asarray(self.R, dtype=float)

    @property
    def one_minus_u(self):
        return 2 * np.sin(0.5 * np.asarray(self.gamma, dtype=float)) ** 2


@dataclass(frozen=True)
class SeriesResult:
    value: np.ndarray | float
    last_term: np.ndarray | float
    slow_convergence: bool
    n_terms: int


def series_terms(problem: SphereProblem, L: int) -> np.ndarray:
    """Individual terms ``l = 0..L`` of the exterior series (last axis is l)."""
    t = np.asarray(problem.t, dtype=float)
    u = np.cos(np.asarray(problem.gamma, dtype=float))
    flux = problem.charge.flux
    out = np.empty(t.shape + (L + 1,))
    p_prev, p = np.ones_like(u), u.copy()
    tp = t.copy()
    for l in range(L + 1):
        if l == 0:
            pl = p_prev
        elif l == 1:
            pl = p
        else:
            p_prev, p = p, ((2 * l - 1) * u * p - (l - 1) * p_prev) / l
            pl = p
        out[..., l] = flux * (2 * l + 1) / (4 * math.pi * problem.a * (l + 1)) * tp * pl
        tp = tp * t
    return out


def sphere_series(problem: SphereProblem, L: int, rel_tol: float = 1e-12) -> SeriesResult:
    """Partial sum of the exterior Legendre series up to degree ``L``.

    Legendre polynomials come from the upward three-term recurrence. The
    result is flagged ``slow_convergence`` when the last term still exceeds
    ``rel_tol`` times the sum, which is expected on the sphere itself.
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    if np.any((np.asarray(problem.elevation) == 0) & (np.asarray(problem.gamma) == 0)):
        raise AtCharge("series diverges at the charge")
    terms = series_terms(problem, L)
    value = terms.sum(axis=-1)
    last = terms[..., -1]
    slow = bool(np.any(np.abs(last) > rel_tol * np.maximum(np.abs(value), 1e-300)))
    scal = (lambda v: float(v) if np.ndim(v) == 0 else v)
    return SeriesResult(scal(value), scal(last), slow, L + 1)


def _closed_parts(problem: SphereProblem):
    t = np.asarray(problem.t, dtype=float)
    s = np.asarray(problem.one_minus_t, dtype=float)
    w = np.asarray(problem.one_minus_u, dtype=float)
    if np.any((s == 0) & (w == 0)):
        raise AtCharge("closed form is singular at the charge (R = a, gamma = 0)")
    D = np.sqrt(s * s + 2 * t * w)
    diff = w - s  # t - u
    with np.errstate(divide="ignore", invalid="ignore"):
        G = np.where(diff >= 0, (diff + D) / np.where(w > 0, w, 1.0), (2 - w) / (D - diff))
    return t, D, diff, G


def sphere_closed_form(problem: SphereProblem):
    """Summed exterior series; see the module docstring."""
    t, D, _, G = _closed_parts(problem)
    A = problem.charge.flux / (4 * math.pi * problem.a)
    val = A * (2 * t / D - np.log(G))
    return float(val) if np.ndim(val) == 0 else val


def sphere_radial_field(problem: SphereProblem):
    """``B_R = -d psi / dR`` of the closed form."""
    t, D, diff, _ = _closed_parts(problem)
    A = problem.charge.flux / (4 * math.pi * problem.a)
    dpsi_dt = A * (1 / D - 2 * t * diff / D**3)
    val = dpsi_dt * t / np.asarray(problem.R, dtype=float)
    return float(val) if np.ndim(val) == 0 else val


def sphere_flux(a: float, R: float, charge: Charge | None = None,
                rel_tol: float = 1e-13) -> float:
    """Outward flux of the closed-form field through the sphere of radius ``R > a``."""
    charge = charge or Charge()

    def integrand(g):
        prob = SphereProblem(a, np.full_like(g, R), g, charge)
        return 2 * math.pi * R**2 * np.sin(g) * sphere_radial_field(prob)

    val, _, _ = gauss_kronrod(integrand, 0.0, math.pi, rel_tol=rel_tol, abs_tol=1e-15,
                              initial_panels=32)
    return val


class ClosedFormUnvalidated(FluxonError):
    pass


@functools.lru_cache(maxsize=None)
def validate_closed_form(a: float = 1.0, n_points: int = 20, L: int = 2000,
                         tol: float = 1e-10, seed: int = 20030) -> float:
    """Cross-check the closed form against the series at random exterior points.

    Returns the largest relative deviation; raises ``ClosedFormUnvalidated``
    above ``tol``. Cached, so callers can use it as a cheap gate.
    """
    rng = np.random.default_rng(seed)
    R = a * rng.uniform(1.05, 10.0, n_points)
    gamma = rng.uniform(0.0, math.pi, n_points)
    prob = SphereProblem(a, R, gamma)
    ser = sphere_series(prob, L).value
    closed = sphere_closed_form(prob)
    dev = float(np.max(np.abs(ser - closed) / np.maximum(np.abs(closed), 1e-300)))
    if not dev <= tol:
        raise ClosedFormUnvalidated(f"closed form deviates from series by {dev:.3g}")
    return dev


@dataclass(frozen=True)
class RemainderCurve:
    r: np.ndarray
    remainder: np.ndarray
    remainder_half: np.ndarray  # at r / 2
    cauchy: np.ndarray  # |Rem(r) - Rem(r/2)|
    cauchy_slope: float  # log-log slope of cauchy vs r
    log_coefficient: float  # slope of Rem against ln r
    exact: np.ndarray
    singular: np.ndarray


def remainder_analysis(a: float, theta: float, phi: float = 0.0, r_values=None,
                       charge: Charge | None = None, k: float | None = None,
                       d: float | None = None) -> RemainderCurve:
    """Exact minus singular potential along a fixed approach direction.

    ``theta`` is the local polar angle of the approach direction, measured
    from the inward normal; it must lie in (pi/2, pi]. ``k`` and ``d``
    override the curvature and gauge of the singular part (negative controls).
    """
    if not (math.pi / 2 < theta <= math.pi):
        raise ValueError("approach direction must satisfy pi/2 < theta <= pi")
    validate_closed_form(1.0)
    charge = charge or Charge()
    r = a * np.geomspace(1e-6, 1e-2, 17) if r_values is None else np.asarray(r_values, dtype=float)

    def rem(rr):
        pt = LocalPoint.from_spherical(rr, theta, phi)
        exact = sphere_closed_form(SphereProblem.from_local(a, pt, charge))
        sing = sphere_singular_potential(a, pt, charge, k=k, d=d)
        return exact - sing, exact, sing

    rem_r, exact, sing = rem(r)
    rem_h, _, _ = rem(r / 2)
    cauchy = np.abs(rem_r - rem_h)
    with np.errstate(divide="ignore"):
        slope = float(np.polyfit(np.log(r), np.log(cauchy), 1)[0]) if np.all(cauchy > 0) else float("nan")
    logc = float(np.polyfit(np.log(r), rem_r, 1)[0])
    return RemainderCurve(r, rem_r, rem_h, cauchy, slope, logc, exact, sing)
