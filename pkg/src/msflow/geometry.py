"""Analytic convex planar domains parameterized by their support function.

The boundary of a smooth strictly convex body is described by the outward
normal angle theta in [0, 2pi).  The support function h(theta) gives the
boundary point, the Frenet frame {T, N}, the curvature k = 1/(h + h'') and
the arc element ds = (h + h'') dtheta in closed form, so convexity and
curvature bounds are exact instead of being estimated from a polyline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import BadSpec, ConvexityViolation

TWO_PI = 2.0 * math.pi

_VALIDATION_SAMPLES = 4096
_QUAD_SAMPLES = 2048
_ARCLEN_SAMPLES = 16384
_DIST_SAMPLES = 1024


def _periodic_integral(values: np.ndarray) -> float:
    # trapezoid rule on a uniform periodic grid == mean * period (spectral
    # accuracy for smooth periodic integrands)
    return float(np.mean(values) * TWO_PI)


@dataclass(frozen=True)
class BoundaryFrame:
    """Boundary point with inward normal, CCW tangent and curvature."""

    point: np.ndarray
    inward_normal: np.ndarray
    tangent: np.ndarray
    curvature: float
    arc_element: float  # ds/dtheta = h + h''


class SupportCurve:
    """Smooth strictly convex domain given by its support function.

    Instances are immutable after construction and safe to share across
    threads.  Use :func:`circle`, :func:`ellipse`, :func:`fourier_support`
    or :func:`build_domain` to construct one.
    """

    def __init__(self, kind: str, params: dict):
        self.kind = kind
        self.params = dict(params)
        if kind == "circle":
            if params["R"] <= 0:
                raise BadSpec(f"circle radius must be positive, got {params['R']}")
        elif kind == "ellipse":
            if params["a"] <= 0 or params["b"] <= 0:
                raise BadSpec(
                    f"ellipse semi-axes must be positive, got a={params['a']}, b={params['b']}"
                )
        elif kind == "fourier":
            terms = params["terms"]
            for n, _, _ in terms:
                if int(n) < 0:
                    raise BadSpec(f"fourier mode must be nonnegative, got n={n}")
        else:
            raise BadSpec(f"unknown shape kind {kind!r}")
        self._validate_convexity()

    # -- support function and its theta-derivatives (analytic per kind) --

    def support(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "circle":
            return np.full_like(theta, self.params["R"])
        if self.kind == "ellipse":
            a, b = self.params["a"], self.params["b"]
            return np.sqrt((a * np.cos(theta)) ** 2 + (b * np.sin(theta)) ** 2)
        h = np.full_like(theta, self.params["h0"])
        for n, an, bn in self.params["terms"]:
            h = h + an * np.cos(n * theta) + bn * np.sin(n * theta)
        return h

    def support_d1(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "circle":
            return np.zeros_like(theta)
        if self.kind == "ellipse":
            a, b = self.params["a"], self.params["b"]
            f = (a * np.cos(theta)) ** 2 + (b * np.sin(theta)) ** 2
            fp = (b * b - a * a) * np.sin(2.0 * theta)
            return fp / (2.0 * np.sqrt(f))
        d = np.zeros_like(theta)
        for n, an, bn in self.params["terms"]:
            d = d - an * n * np.sin(n * theta) + bn * n * np.cos(n * theta)
        return d

    def support_d2(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "circle":
            return np.zeros_like(theta)
        if self.kind == "ellipse":
            a, b = self.params["a"], self.params["b"]
            f = (a * np.cos(theta)) ** 2 + (b * np.sin(theta)) ** 2
            fp = (b * b - a * a) * np.sin(2.0 * theta)
            fpp = 2.0 * (b * b - a * a) * np.cos(2.0 * theta)
            return fpp / (2.0 * np.sqrt(f)) - fp * fp / (4.0 * f ** 1.5)
        d = np.zeros_like(theta)
        for n, an, bn in self.params["terms"]:
            d = d - an * n * n * np.cos(n * theta) - bn * n * n * np.sin(n * theta)
        return d

    # -- derived boundary geometry --

    def radius_of_curvature(self, theta):
        """rho(theta) = h + h'' = ds/dtheta; strictly positive by convexity."""
        return self.support(theta) + self.support_d2(theta)

    def curvature(self, theta):
        return 1.0 / self.radius_of_curvature(theta)

    def point(self, theta):
        theta = np.asarray(theta, dtype=float)
        h = self.support(theta)
        hp = self.support_d1(theta)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([h * c - hp * s, h * s + hp * c], axis=-1)

    def tangent(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack([-np.sin(theta), np.cos(theta)], axis=-1)

    def inward_normal(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack([-np.cos(theta), -np.sin(theta)], axis=-1)

    def frame_at(self, theta: float) -> BoundaryFrame:
        rho = float(self.radius_of_curvature(theta))
        return BoundaryFrame(
            point=self.point(theta),
            inward_normal=self.inward_normal(theta),
            tangent=self.tangent(theta),
            curvature=1.0 / rho,
            arc_element=rho,
        )

    # -- integral quantities --

    @cached_property
    def perimeter(self) -> float:
        th = np.linspace(0.0, TWO_PI, _QUAD_SAMPLES, endpoint=False)
        return _periodic_integral(self.radius_of_curvature(th))

    @cached_property
    def area(self) -> float:
        """|Omega| = (1/2) integral of (h^2 - h'^2)."""
        th = np.linspace(0.0, TWO_PI, _QUAD_SAMPLES, endpoint=False)
        h = self.support(th)
        hp = self.support_d1(th)
        return 0.5 * _periodic_integral(h * h - hp * hp)

    @cached_property
    def area_green(self) -> float:
        """|Omega| by Green's theorem on the boundary curve itself."""
        th = np.linspace(0.0, TWO_PI, _QUAD_SAMPLES, endpoint=False)
        # gamma' = rho T, so x dy - y dx = rho * (gamma . n) dtheta = rho h dtheta
        return 0.5 * _periodic_integral(self.radius_of_curvature(th) * self.support(th))

    @cached_property
    def centroid(self) -> np.ndarray:
        th = np.linspace(0.0, TWO_PI, _QUAD_SAMPLES, endpoint=False)
        g = self.point(th)
        rho = self.radius_of_curvature(th)
        n = np.stack([np.cos(th), np.sin(th)], axis=-1)
        cx = _periodic_integral(0.5 * g[:, 0] ** 2 * n[:, 0] * rho)
        cy = _periodic_integral(0.5 * g[:, 1] ** 2 * n[:, 1] * rho)
        return np.array([cx, cy]) / self.area

    # -- arc length parameterization --

    @cached_property
    def _arclength_table(self):
        th = np.linspace(0.0, TWO_PI, _ARCLEN_SAMPLES + 1)
        rho = self.radius_of_curvature(th)
        ds = 0.5 * (rho[1:] + rho[:-1]) * (th[1] - th[0])
        s = np.concatenate([[0.0], np.cumsum(ds)])
        return th, s

    def theta_at_arclength(self, s):
        """Inverse of s(theta), with s measured from theta = 0."""
        th, table = self._arclength_table
        s = np.mod(np.asarray(s, dtype=float), table[-1])
        return np.interp(s, table, th)

    # -- point queries --

    @cached_property
    def _distance_grid(self):
        th = np.linspace(0.0, TWO_PI, _DIST_SAMPLES, endpoint=False)
        normals = np.stack([np.cos(th), np.sin(th)], axis=-1)
        return normals, self.support(th)

    def distance_to_boundary(self, points) -> np.ndarray:
        """Signed distance to the boundary, positive inside.

        For a convex body this is the minimum over supporting halfplanes of
        h(theta) - x . n(theta), exact up to the theta sampling density.
        """
        normals, h = self._distance_grid
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.min(h[None, :] - pts @ normals.T, axis=1)

    def contains(self, points) -> np.ndarray:
        return self.distance_to_boundary(points) > 0.0

    def _validate_convexity(self):
        th = np.linspace(0.0, TWO_PI, _VALIDATION_SAMPLES, endpoint=False)
        rho = self.radius_of_curvature(th)
        i = int(np.argmin(rho))
        if rho[i] <= 0.0:
            raise ConvexityViolation(
                f"support curve is not strictly convex: h + h'' = {rho[i]:.6g} "
                f"at theta = {th[i]:.6g}"
            )


def circle(R: float) -> SupportCurve:
    return SupportCurve("circle", {"R": float(R)})


def ellipse(a: float, b: float) -> SupportCurve:
    return SupportCurve("ellipse", {"a": float(a), "b": float(b)})


def fourier_support(h0: float, terms) -> SupportCurve:
    terms = [(int(n), float(an), float(bn)) for n, an, bn in terms]
    return SupportCurve("fourier", {"h0": float(h0), "terms": terms})


def build_domain(spec: dict) -> SupportCurve:
    """Build a domain from a JSON-style shape spec.

    Accepted forms: {"shape": "circle", "R": r}, {"shape": "ellipse",
    "a": a, "b": b}, {"shape": "support", "h0": h0, "fourier": [[n, an, bn], ...]}.
    """
    if not isinstance(spec, dict) or "shape" not in spec:
        raise BadSpec(f"shape spec must be a dict with a 'shape' key, got {spec!r}")
    kind = spec["shape"]
    try:
        if kind == "circle":
            return circle(spec["R"])
        if kind == "ellipse":
            return ellipse(spec["a"], spec["b"])
        if kind == "support":
            return fourier_support(spec["h0"], spec.get("fourier", []))
    except KeyError as exc:
        raise BadSpec(f"shape spec missing field {exc}") from exc
    raise BadSpec(f"unknown shape {kind!r}")


def frame_at(curve: SupportCurve, theta: float) -> BoundaryFrame:
    """Boundary frame of `curve` at outward-normal angle `theta`."""
    return curve.frame_at(theta)


class AngleProfile:
    """Prescribed contact angle alpha(theta) on the boundary, valued in (0, pi)."""

    def __init__(self, kind: str, params: dict):
        self.kind = kind
        self.params = dict(params)
        th = np.linspace(0.0, TWO_PI, _VALIDATION_SAMPLES, endpoint=False)
        a = self.alpha(th)
        if np.min(a) <= 0.0 or np.max(a) >= math.pi:
            raise BadSpec(
                f"contact angle must lie strictly inside (0, pi); "
                f"sampled range [{np.min(a):.6g}, {np.max(a):.6g}]"
            )

    def alpha(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "const":
            return np.full_like(theta, self.params["value"])
        a = np.full_like(theta, self.params["c0"])
        for n, an, bn in self.params["terms"]:
            a = a + an * np.cos(n * theta) + bn * np.sin(n * theta)
        return a

    def dalpha_dtheta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "const":
            return np.zeros_like(theta)
        d = np.zeros_like(theta)
        for n, an, bn in self.params["terms"]:
            d = d - an * n * np.sin(n * theta) + bn * n * np.cos(n * theta)
        return d

    def cos_alpha(self, theta):
        return np.cos(self.alpha(theta))

    def tangential_derivative(self, curve: SupportCurve, theta):
        """D_T alpha = alpha'(theta) / rho(theta) (derivative in arc length)."""
        return self.dalpha_dtheta(theta) / curve.radius_of_curvature(theta)


def constant_angle(value: float) -> AngleProfile:
    return AngleProfile("const", {"value": float(value)})


def fourier_angle(c0: float, terms) -> AngleProfile:
    terms = [(int(n), float(an), float(bn)) for n, an, bn in terms]
    return AngleProfile("fourier", {"c0": float(c0), "terms": terms})


def build_angle(spec: dict) -> AngleProfile:
    """Build an angle profile from {"const": a} or {"fourier": {...}}."""
    if not isinstance(spec, dict):
        raise BadSpec(f"alpha spec must be a dict, got {spec!r}")
    if "const" in spec:
        return constant_angle(spec["const"])
    if "fourier" in spec:
        f = spec["fourier"]
        try:
            return fourier_angle(f["c0"], f.get("terms", []))
        except KeyError as exc:
            raise BadSpec(f"alpha fourier spec missing field {exc}") from exc
    raise BadSpec(f"alpha spec must contain 'const' or 'fourier', got {spec!r}")


@dataclass(frozen=True)
class PlanarTestFunction:
    """Smooth test function on the plane with an analytic gradient."""

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]


COORDINATE_X = PlanarTestFunction(
    "x1",
    lambda p: p[..., 0],
    lambda p: np.stack([np.ones_like(p[..., 0]), np.zeros_like(p[..., 0])], axis=-1),
)

RADIUS_SQUARED = PlanarTestFunction(
    "x1^2+x2^2",
    lambda p: p[..., 0] ** 2 + p[..., 1] ** 2,
    lambda p: 2.0 * p,
)

CONSTANT_ONE = PlanarTestFunction(
    "1",
    lambda p: np.ones_like(p[..., 0]),
    lambda p: np.zeros_like(p),
)


@dataclass(frozen=True)
class FrenetAuditReport:
    """Max residuals of the Frenet identities and the derivative commutator."""

    max_tangent_residual: float     # |D_T T - k N|
    max_normal_residual: float      # |D_T N + k T|
    max_commutator_residual: float  # |D_N D_T h - D_T D_N h - k D_T h|
    samples: int


def _fd4(f, x0: np.ndarray, delta: float) -> np.ndarray:
    """Fourth-order central difference of f at the sample points x0."""
    return (
        -f(x0 + 2.0 * delta) + 8.0 * f(x0 + delta)
        - 8.0 * f(x0 - delta) + f(x0 - 2.0 * delta)
    ) / (12.0 * delta)


def audit_frenet(
    curve: SupportCurve,
    samples: int = 256,
    test: PlanarTestFunction = COORDINATE_X,
) -> FrenetAuditReport:
    """Check D_T T = kN, D_T N = -kT, and the D_N/D_T interchange identity.

    Frame derivatives are taken by fourth-order finite differences in theta
    (an independent path from the analytic frame), divided by the arc
    element.  The commutator is evaluated with the tubular-neighborhood
    extension: T and N constant along inward normal lines, so D_N is d/dr
    toward the interior and D_T is (1/rho) d/dtheta on the boundary.
    """
    if samples < 16:
        raise BadSpec(f"audit_frenet needs at least 16 samples, got {samples}")
    th = np.linspace(0.0, TWO_PI, samples, endpoint=False)
    rho = curve.radius_of_curvature(th)
    k = 1.0 / rho
    T = curve.tangent(th)
    N = curve.inward_normal(th)

    dth = 1e-3
    dT = _fd4(curve.tangent, th, dth)
    dN = _fd4(curve.inward_normal, th, dth)
    res_T = np.linalg.norm(dT / rho[:, None] - k[:, None] * N, axis=1)
    res_N = np.linalg.norm(dN / rho[:, None] + k[:, None] * T, axis=1)

    # commutator residual for the supplied test function
    gamma = curve.point(th)

    def d_t_h_along_normal(r):
        return np.sum(T * test.gradient(gamma + r[:, None] * N), axis=1)

    def d_n_h_on_boundary(theta):
        pts = curve.point(theta)
        return np.sum(curve.inward_normal(theta) * test.gradient(pts), axis=1)

    dr = 1e-3
    dn_dt_h = _fd4(d_t_h_along_normal, np.zeros(samples), dr)
    dt_dn_h = _fd4(d_n_h_on_boundary, th, dth) / rho
    d_t_h = np.sum(T * test.gradient(gamma), axis=1)
    res_comm = np.abs(dn_dt_h - dt_dn_h - k * d_t_h)

    return FrenetAuditReport(
        max_tangent_residual=float(np.max(res_T)),
        max_normal_residual=float(np.max(res_N)),
        max_commutator_residual=float(np.max(res_comm)),
        samples=samples,
    )


def total_turning(curve: SupportCurve, samples: int = 2048) -> float:
    """Integral of k ds around the boundary (2pi for any convex curve).

    The arc element is recovered from |gamma'(theta)| by finite differences
    so the check is not vacuous against the analytic k = 1/rho.
    """
    th = np.linspace(0.0, TWO_PI, samples, endpoint=False)
    dgamma = _fd4(curve.point, th, 1e-3)
    speed = np.linalg.norm(dgamma, axis=1)
    return _periodic_integral(curve.curvature(th) * speed)


def area_agreement(curve: SupportCurve) -> float:
    """|area by support formula - area by Green's theorem|."""
    return abs(curve.area - curve.area_green)


def integrate_over_domain(
    curve: SupportCurve,
    func: Callable[[np.ndarray], np.ndarray],
    n_angular: int = 2048,
    n_radial: int = 48,
) -> float:
    """Integrate a smooth scalar function over the exact domain.

    Uses polar coordinates about the centroid (every convex body is
    star-shaped about any interior point) with a trapezoid rule in the
    angle and Gauss-Legendre in the radius.
    """
    x0 = curve.centroid
    th_dense = np.linspace(0.0, TWO_PI, 32 * n_angular, endpoint=False)
    g = curve.point(th_dense) - x0
    phi = np.unwrap(np.arctan2(g[:, 1], g[:, 0]))
    radii = np.linalg.norm(g, axis=1)
    order = np.argsort(phi)
    phi_sorted, r_sorted = phi[order], radii[order]
    # pad one period on both sides for interpolation across the seam
    phi_pad = np.concatenate([phi_sorted - TWO_PI, phi_sorted, phi_sorted + TWO_PI])
    r_pad = np.concatenate([r_sorted, r_sorted, r_sorted])

    phis = np.linspace(0.0, TWO_PI, n_angular, endpoint=False)
    r_b = np.interp(phis, phi_pad, r_pad)
    nodes, weights = np.polynomial.legendre.leggauss(n_radial)
    t = 0.5 * (nodes + 1.0)  # map to (0, 1)
    wt = 0.5 * weights
    r = r_b[:, None] * t[None, :]
    pts = x0[None, None, :] + r[..., None] * np.stack(
        [np.cos(phis), np.sin(phis)], axis=-1
    )[:, None, :]
    vals = func(pts.reshape(-1, 2)).reshape(n_angular, n_radial)
    radial = np.sum(vals * r * wt[None, :], axis=1) * r_b
    return _periodic_integral(radial)


def boundary_integral(
    curve: SupportCurve,
    func: Callable[[np.ndarray], np.ndarray],
    samples: int = 2048,
) -> float:
    """Integrate func(theta) ds over the boundary by periodic trapezoid."""
    th = np.linspace(0.0, TWO_PI, samples, endpoint=False)
    return _periodic_integral(np.asarray(func(th)) * curve.radius_of_curvature(th))
