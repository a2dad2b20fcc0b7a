"""Charge-centred local frame and principal curvatures of a boundary patch.

The frame puts the charge at the origin, points ``z`` along the surface
normal into the superconducting bulk and rotates the tangent axes so that
the height function ``z = F(x, y)`` has no mixed second derivative. The
physical (empty-space) domain is then locally ``z < F(x, y)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import (
    DegeneratePatch,
    NonFiniteDerivative,
    OrientationError,
    OriginUndefinedAngle,
    OutsidePatch,
)

EPS = np.finfo(float).eps

VectorMap = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _vec(a) -> np.ndarray:
    return np.asarray(a, dtype=float)


@dataclass(frozen=True)
class SurfacePatch:
    """Parametric boundary patch ``P(u, v)`` with optional analytic derivatives.

    ``position`` and the derivative callables take broadcastable arrays
    ``u, v`` and return arrays of shape ``u.shape + (3,)``. Missing
    derivatives are replaced by central differences whose step is set by
    ``scale``, the characteristic length of the patch.

    ``bulk_indicator`` maps global points (shape ``(..., 3)``) to a number
    that is positive inside the superconductor and negative in empty space.
    """

    position: VectorMap
    bulk_indicator: Callable[[np.ndarray], np.ndarray]
    charge_uv: tuple[float, float] = (0.0, 0.0)
    scale: float = 1.0
    d_u: Optional[VectorMap] = None
    d_v: Optional[VectorMap] = None
    d_uu: Optional[VectorMap] = None
    d_uv: Optional[VectorMap] = None
    d_vv: Optional[VectorMap] = None
    validity_radius: float = math.inf
    name: str = "custom"

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("patch scale must be positive")

    # -- derivatives -----------------------------------------------------
    @property
    def h_first(self) -> float:
        return self.scale * EPS ** (1.0 / 3.0)

    @property
    def h_second(self) -> float:
        return self.scale * EPS ** 0.25

    def first_derivatives(self, u, v):
        u, v = np.broadcast_arrays(_vec(u), _vec(v))
        if self.d_u is not None and self.d_v is not None:
            return _vec(self.d_u(u, v)), _vec(self.d_v(u, v))
        return self.fd_first_derivatives(u, v)

    def fd_first_derivatives(self, u, v):
        h = self.h_first
        P = self.position
        pu = (_vec(P(u + h, v)) - _vec(P(u - h, v))) / (2 * h)
        pv = (_vec(P(u, v + h)) - _vec(P(u, v - h))) / (2 * h)
        return pu, pv

    def second_derivatives(self, u, v):
        u, v = np.broadcast_arrays(_vec(u), _vec(v))
        if self.d_uu is not None and self.d_uv is not None and self.d_vv is not None:
            return _vec(self.d_uu(u, v)), _vec(self.d_uv(u, v)), _vec(self.d_vv(u, v))
        h = self.h_second
        P = lambda a, b: _vec(self.position(a, b))
        p0 = P(u, v)
        puu = (P(u + h, v) - 2 * p0 + P(u - h, v)) / h**2
        pvv = (P(u, v + h) - 2 * p0 + P(u, v - h)) / h**2
        puv = (P(u + h, v + h) - P(u + h, v - h) - P(u - h, v + h) + P(u - h, v - h)) / (4 * h**2)
        return puu, puv, pvv

    def check_derivatives(self, probes) -> float:
        """Largest relative mismatch between supplied and FD first derivatives.

        ``probes`` is a sequence of ``(u, v)`` pairs. Returns 0.0 when no
        analytic first derivatives were supplied.
        """
        if self.d_u is None or self.d_v is None:
            return 0.0
        worst = 0.0
        for u, v in probes:
            su, sv = self.first_derivatives(u, v)
            fu, fv = self.fd_first_derivatives(_vec(u), _vec(v))
            for s, f in ((su, fu), (sv, fv)):
                den = max(np.linalg.norm(s), self.scale * 1e-300)
                worst = max(worst, float(np.linalg.norm(s - f) / den))
        return worst

    def transformed(self, rotation, shift) -> "SurfacePatch":
        """Patch moved by the rigid motion ``X -> rotation @ X + shift``."""
        Q = _vec(rotation)
        t = _vec(shift)
        if not np.allclose(Q @ Q.T, np.eye(3), atol=1e-12) or np.linalg.det(Q) < 0:
            raise ValueError("rotation must be a proper orthogonal matrix")

        def lin(fn):
            return None if fn is None else (lambda u, v: _vec(fn(u, v)) @ Q.T)

        return replace(
            self,
            position=lambda u, v: _vec(self.position(u, v)) @ Q.T + t,
            bulk_indicator=lambda X: self.bulk_indicator((_vec(X) - t) @ Q),
            d_u=lin(self.d_u),
            d_v=lin(self.d_v),
            d_uu=lin(self.d_uu),
            d_uv=lin(self.d_uv),
            d_vv=lin(self.d_vv),
            name=f"{self.name}(moved)",
        )


# ---------------------------------------------------------------------------
# built-in patches
# ---------------------------------------------------------------------------

def _stack(*comps):
    comps = np.broadcast_arrays(*[_vec(c) for c in comps])
    return np.stack(comps, axis=-1)


def sphere(a: float) -> SurfacePatch:
    """Sphere of radius ``a``; the domain is its exterior."""
    if not a > 0:
        raise ValueError("sphere radius must be positive")
    su, cu, sv, cv = np.sin, np.cos, np.sin, np.cos
    zero = lambda u: np.zeros_like(_vec(u))
    return SurfacePatch(
        position=lambda u, v: a * _stack(su(u) * cv(v), su(u) * sv(v), cu(u)),
        bulk_indicator=lambda X: a**2 - np.sum(_vec(X) ** 2, axis=-1),
        charge_uv=(math.pi / 2, 0.0),
        scale=a,
        d_u=lambda u, v: a * _stack(cu(u) * cv(v), cu(u) * sv(v), -su(u)),
        d_v=lambda u, v: a * _stack(-su(u) * sv(v), su(u) * cv(v), zero(u + v)),
        d_uu=lambda u, v: -a * _stack(su(u) * cv(v), su(u) * sv(v), cu(u)),
        d_uv=lambda u, v: a * _stack(-cu(u) * sv(v), cu(u) * cv(v), zero(u + v)),
        d_vv=lambda u, v: a * _stack(-su(u) * cv(v), -su(u) * sv(v), zero(u + v)),
        validity_radius=0.9 * a,
        name=f"sphere(a={a!r})",
    )


def cylinder(a: float) -> SurfacePatch:
    """Circular cylinder of radius ``a`` with axis along the second parameter."""
    if not a > 0:
        raise ValueError("cylinder radius must be positive")
    zero = lambda u, v: np.zeros(np.broadcast(_vec(u), _vec(v)).shape)
    one = lambda u, v: np.ones(np.broadcast(_vec(u), _vec(v)).shape)
    return SurfacePatch(
        position=lambda u, v: _stack(a * np.cos(u), a * np.sin(u), v),
        bulk_indicator=lambda X: a**2 - _vec(X)[..., 0] ** 2 - _vec(X)[..., 1] ** 2,
        scale=a,
        d_u=lambda u, v: _stack(-a * np.sin(u), a * np.cos(u), zero(u, v)),
        d_v=lambda u, v: _stack(zero(u, v), zero(u, v), one(u, v)),
        d_uu=lambda u, v: _stack(-a * np.cos(u), -a * np.sin(u), zero(u, v)),
        d_uv=lambda u, v: _stack(zero(u, v), zero(u, v), zero(u, v)),
        d_vv=lambda u, v: _stack(zero(u, v), zero(u, v), zero(u, v)),
        validity_radius=0.9 * a,
        name=f"cylinder(a={a!r})",
    )


def biquadratic(k_x: float, k_y: float, c30: float = 0.0, c21: float = 0.0,
                c12: float = 0.0, c03: float = 0.0, scale: float = 1.0) -> SurfacePatch:
    """Graph ``z = k_x u^2/2 + k_y v^2/2 + cubic(u, v)``; bulk above the graph."""
    def g(u, v):
        return 0.5 * k_x * u**2 + 0.5 * k_y * v**2 + c30 * u**3 + c21 * u**2 * v + c12 * u * v**2 + c03 * v**3

    def zero(u, v):
        return np.zeros(np.broadcast(_vec(u), _vec(v)).shape)

    def one(u, v):
        return np.ones(np.broadcast(_vec(u), _vec(v)).shape)

    return SurfacePatch(
        position=lambda u, v: _stack(u, v, g(_vec(u), _vec(v))),
        bulk_indicator=lambda X: _vec(X)[..., 2] - g(_vec(X)[..., 0], _vec(X)[..., 1]),
        scale=scale,
        d_u=lambda u, v: _stack(one(u, v), zero(u, v),
                                k_x * u + 3 * c30 * u**2 + 2 * c21 * u * v + c12 * v**2),
        d_v=lambda u, v: _stack(zero(u, v), one(u, v),
                                k_y * v + c21 * u**2 + 2 * c12 * u * v + 3 * c03 * v**2),
        d_uu=lambda u, v: _stack(zero(u, v), zero(u, v), k_x + 6 * c30 * u + 2 * c21 * v),
        d_uv=lambda u, v: _stack(zero(u, v), zero(u, v), 2 * c21 * u + 2 * c12 * v + zero(u, v)),
        d_vv=lambda u, v: _stack(zero(u, v), zero(u, v), k_y + 2 * c12 * u + 6 * c03 * v),
        name=f"biquadratic(k_x={k_x!r}, k_y={k_y!r}, c=({c30!r}, {c21!r}, {c12!r}, {c03!r}))",
    )


def paraboloid(k_x: float, k_y: float) -> SurfacePatch:
    return replace(biquadratic(k_x, k_y), name=f"paraboloid(k_x={k_x!r}, k_y={k_y!r})")


def plane() -> SurfacePatch:
    return replace(biquadratic(0.0, 0.0), name="plane")


BUILTIN_SURFACES = {
    "sphere": sphere,
    "cylinder": cylinder,
    "plane": plane,
    "paraboloid": paraboloid,
    "biquadratic": biquadratic,
}


def surface_from_string(text: str) -> SurfacePatch:
    """Parse ``name`` or ``name:key=value,key=value`` into a built-in patch.

    >>> surface_from_string("sphere:a=2").name
    'sphere(a=2.0)'
    """
    name, _, rest = text.partition(":")
    name = name.strip().lower()
    if name not in BUILTIN_SURFACES:
        raise ValueError(f"unknown surface {name!r}; choose from {sorted(BUILTIN_SURFACES)}")
    kwargs = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"surface parameter {item!r} is not of the form key=value")
        kwargs[key.strip()] = float(val)
    try:
        return BUILTIN_SURFACES[name](**kwargs)
    except TypeError as exc:
        raise ValueError(f"bad parameters for surface {name!r}: {exc}") from None


# ---------------------------------------------------------------------------
# local frame
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocalFrame:
    origin: np.ndarray
    x_axis: np.ndarray
    y_axis: np.ndarray
    z_axis: np.ndarray
    k_x: float
    k_y: float
    rotation_angle: float
    charge_uv: tuple[float, float] = (0.0, 0.0)
    # tangent-plane Hessian of F in the rotated axes; off-diagonal is the residual mixed term
    hessian: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))

    @property
    def axes(self) -> np.ndarray:
        """Rows are x̂, ŷ, ẑ."""
        return np.stack([self.x_axis, self.y_axis, self.z_axis])

    def to_local(self, X) -> np.ndarray:
        return (_vec(X) - self.origin) @ self.axes.T

    def to_global(self, xyz) -> np.ndarray:
        return _vec(xyz) @ self.axes + self.origin


def _unit(v):
    return v / np.linalg.norm(v)


def build_local_frame(patch: SurfacePatch, uv=None, normal_orientation: str = "into_bulk",
                      umbilic_tol: float = 1e-12) -> LocalFrame:
    """Construct the charge-centred frame and principal curvatures.

    The principal directions come from the symmetric 2x2 shape operator
    expressed in an orthonormal tangent basis; ``k_x >= k_y``. When the two
    curvatures agree to ``umbilic_tol`` they are replaced by their mean and
    the rotation angle is 0 (tangent ``x`` along ``P_u``).
    """
    if normal_orientation not in ("into_bulk", "IntoBulk"):
        raise ValueError(f"unsupported normal orientation {normal_orientation!r}")
    u0, v0 = patch.charge_uv if uv is None else uv
    P0 = _vec(patch.position(_vec(u0), _vec(v0)))
    Pu, Pv = patch.first_derivatives(u0, v0)
    Puu, Puv, Pvv = patch.second_derivatives(u0, v0)
    for arr in (P0, Pu, Pv, Puu, Puv, Pvv):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteDerivative(f"non-finite derivative of {patch.name} at {(u0, v0)}")

    n = np.cross(Pu, Pv)
    if np.linalg.norm(n) <= 1e-12 * np.linalg.norm(Pu) * np.linalg.norm(Pv) or np.linalg.norm(n) == 0:
        raise DegeneratePatch(f"P_u x P_v vanishes for {patch.name} at {(u0, v0)}")
    n = _unit(n)

    h = 1e-6 * patch.scale
    plus = float(patch.bulk_indicator(P0 + h * n))
    minus = float(patch.bulk_indicator(P0 - h * n))
    if plus > 0 >= minus:
        z_axis = n
    elif minus > 0 >= plus:
        z_axis = -n
    else:
        raise OrientationError(f"cannot tell bulk side of {patch.name}: indicator {plus:.3g}/{minus:.3g}")

    t1 = _unit(Pu)
    t2 = np.cross(z_axis, t1)
    A = np.array([[t1 @ Pu, t1 @ Pv], [t2 @ Pu, t2 @ Pv]])
    II = np.array([[Puu @ z_axis, Puv @ z_axis], [Puv @ z_axis, Pvv @ z_axis]])
    Ainv = np.linalg.inv(A)
    H = Ainv.T @ II @ Ainv
    H = 0.5 * (H + H.T)

    w, V = np.linalg.eigh(H)
    k_y, k_x = float(w[0]), float(w[1])
    if abs(k_x - k_y) <= umbilic_tol * max(abs(k_x), abs(k_y), 1.0 / patch.scale):
        # umbilic within rounding: equal curvatures, tangent x along P_u
        k_x = k_y = 0.5 * (k_x + k_y)
        c, s = 1.0, 0.0
    else:
        c, s = V[:, 1]
        if c < 0 or (c == 0 and s < 0):
            c, s = -c, -s
    x_axis = c * t1 + s * t2
    y_axis = np.cross(z_axis, x_axis)
    R = np.array([[c, -s], [s, c]])
    frame = LocalFrame(
        origin=P0,
        x_axis=x_axis,
        y_axis=y_axis,
        z_axis=z_axis,
        k_x=k_x,
        k_y=k_y,
        rotation_angle=math.atan2(s, c),
        charge_uv=(float(u0), float(v0)),
        hessian=R.T @ H @ R,
    )

    # bulk probe must land at z > 0 in the new frame
    probe = P0 + h * z_axis
    if not (frame.to_local(probe)[2] > 0 and patch.bulk_indicator(probe) > 0):
        raise OrientationError("bulk-side probe does not satisfy z > 0")
    return frame


# ---------------------------------------------------------------------------
# height function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HeightSample:
    F: np.ndarray
    F_x: np.ndarray
    F_y: np.ndarray
    quadratic: np.ndarray  # k_x x^2/2 + k_y y^2/2


def height_function(frame: LocalFrame, patch: SurfacePatch, x, y,
                    max_iter: int = 60) -> HeightSample:
    """Height ``F`` of the surface above the tangent point ``(x, y)`` and its gradient.

    The tangent point is projected back onto the patch by Newton iteration
    in ``(u, v)``, started from the charge parameters.
    """
    x, y = np.broadcast_arrays(_vec(x), _vec(y))
    if np.any(np.hypot(x, y) > patch.validity_radius):
        raise OutsidePatch(f"tangent point beyond validity radius {patch.validity_radius}")
    u = np.full(x.shape, frame.charge_uv[0])
    v = np.full(x.shape, frame.charge_uv[1])
    tol = 8 * EPS * max(patch.scale, float(np.max(np.abs(x), initial=0)), float(np.max(np.abs(y), initial=0)))
    ex, ey, ez, O = frame.x_axis, frame.y_axis, frame.z_axis, frame.origin
    for _ in range(max_iter):
        d = _vec(patch.position(u, v)) - O
        Pu, Pv = patch.first_derivatives(u, v)
        rx, ry = d @ ex - x, d @ ey - y
        a, b, c, e = Pu @ ex, Pv @ ex, Pu @ ey, Pv @ ey
        det = a * e - b * c
        if np.any(~np.isfinite(det)) or np.any(np.abs(det) < 1e-300):
            raise OutsidePatch("tangent projection became singular")
        du = (e * rx - b * ry) / det
        dv = (a * ry - c * rx) / det
        u, v = u - du, v - dv
        if np.max(np.abs(rx), initial=0) <= tol and np.max(np.abs(ry), initial=0) <= tol:
            break
    else:
        raise OutsidePatch("projection onto the patch did not converge")

    d = _vec(patch.position(u, v)) - O
    Pu, Pv = patch.first_derivatives(u, v)
    a, b, c, e = Pu @ ex, Pv @ ex, Pu @ ey, Pv @ ey
    det = a * e - b * c
    Fu, Fv = Pu @ ez, Pv @ ez
    # (F_u, F_v) = (F_x, F_y) J  with  J = [[a, b], [c, e]]
    Fx = (Fu * e - Fv * c) / det
    Fy = (Fv * a - Fu * b) / det
    quad = 0.5 * frame.k_x * x**2 + 0.5 * frame.k_y * y**2
    return HeightSample(F=d @ ez, F_x=Fx, F_y=Fy, quadratic=quad)


def cubic_remainder_constant(frame: LocalFrame, patch: SurfacePatch, radius: float,
                             n_rho: int = 8, n_phi: int = 16) -> float:
    """Fitted ``C`` in ``|F - f| <= C rho^3`` over a polar sample of the given radius.

    Reported for information only; no accuracy claim is derived from it.
    """
    rho = radius * np.geomspace(1e-2, 1.0, n_rho)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    R, P = np.meshgrid(rho, phi, indexing="ij")
    hs = height_function(frame, patch, R * np.cos(P), R * np.sin(P))
    return float(np.max(np.abs(hs.F - hs.quadratic) / R**3))


# ---------------------------------------------------------------------------
# local points and coordinate conversions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocalPoint:
    """Cartesian point in a :class:`LocalFrame`; components may be arrays."""

    x: np.ndarray | float
    y: np.ndarray | float
    z: np.ndarray | float

    @classmethod
    def from_spherical(cls, r, theta, phi) -> "LocalPoint":
        r, theta, phi = np.broadcast_arrays(_vec(r), _vec(theta), _vec(phi))
        st = np.sin(theta)
        return cls(r * st * np.cos(phi), r * st * np.sin(phi), r * np.cos(theta))

    @classmethod
    def from_array(cls, xyz) -> "LocalPoint":
        xyz = _vec(xyz)
        return cls(xyz[..., 0], xyz[..., 1], xyz[..., 2])

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(_vec(self.x), _vec(self.y), _vec(self.z)), axis=-1)

    @property
    def r(self):
        return np.sqrt(_vec(self.x) ** 2 + _vec(self.y) ** 2 + _vec(self.z) ** 2)

    @property
    def rho(self):
        return np.hypot(self.x, self.y)

    @property
    def in_domain(self):
        """Empty-space side of the tangent plane (boundary plane included)."""
        return _vec(self.z) <= 0

    def shifted(self, dx=0.0, dy=0.0, dz=0.0) -> "LocalPoint":
        return LocalPoint(self.x + dx, self.y + dy, self.z + dz)


def to_spherical(point: LocalPoint):
    """Return ``(r, theta, phi)`` with theta from +z in [0, pi] and phi in [0, 2 pi)."""
    r = point.r
    if np.any(r == 0):
        raise OriginUndefinedAngle("spherical angles are undefined at the charge (r = 0)")
    theta = np.arctan2(point.rho, point.z)
    phi = np.mod(np.arctan2(point.y, point.x), 2 * np.pi)
    return r, theta, phi


def to_cylindrical(point: LocalPoint):
    """Return ``(rho, phi, z)``; phi is 0 by convention on the axis rho = 0, r > 0."""
    if np.any(point.r == 0):
        raise OriginUndefinedAngle("azimuth is undefined at the charge (r = 0)")
    phi = np.mod(np.arctan2(point.y, point.x), 2 * np.pi)
    return point.rho, phi, _vec(point.z)
