"""Translating-soliton solvers and the radial closed-form oracle.

The constrained solver treats the speed C as a Lagrange multiplier for the
mean-zero constraint, i.e. each Picard sweep (v frozen at the current
iterate) solves the saddle system

    [ K(w)  m ] [w]   [ b - f_H(w) ]
    [ m^T   0 ] [C] = [ 0          ]

with m the lumped mass vector.  Because K 1 = 0, the multiplier satisfies
C sum(m) = sum(b) - sum(f_H) at every sweep, which is the discrete
divergence-theorem speed formula; with H = H(x) the converged C therefore
matches the exact-quadrature speed up to quadrature error.  The
epsilon-regularized variant replaces the constraint by an epsilon-mass
shift and exists to measure the conjectured epsilon -> 0 recovery of the
translator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    BadSpec,
    GradientDependentForcing,
    NoConvergence,
    NonGraphical,
    SingularSystem,
)
from .geometry import AngleProfile, SupportCurve, boundary_integral, integrate_over_domain
from .meshing import TriMesh
from .operators import (
    ForcingModel,
    ScalarField,
    boundary_flux_vector,
    forcing_vector,
    operators_for,
)


@dataclass(frozen=True)
class TranslatorOptions:
    tol: float = 1e-10          # residual in u_t units, max_i |r_i| / m_i
    max_iter: int = 200
    damping: float = 0.5        # applied when the residual increases
    continuation: str = "auto"  # "auto" | "off" | "force"
    continuation_steps: tuple = (0.25, 0.5, 0.75, 1.0)
    stall_window: int = 50


@dataclass
class TranslatorSolution:
    """Mean-zero soliton profile w and translation speed C."""

    w: ScalarField
    speed: float
    residual: float
    iterations: int
    method: str
    sup_v: float


@dataclass
class RegularizedSolution:
    epsilon: float
    w: ScalarField
    eps_w_min: float
    eps_w_max: float
    deviation: float | None  # max |eps w - C_ref| when a reference speed is known
    residual: float
    iterations: int


def compute_speed(curve: SupportCurve, alpha_profile: AngleProfile,
                  model: ForcingModel) -> float:
    """Speed forced by the divergence theorem for H = H(x).

    C = (boundary integral of cos(alpha) ds - integral of H dx) / |Omega|,
    evaluated by high-order quadrature on the exact domain.
    """
    if model.depends_on_gradient:
        raise GradientDependentForcing(
            "speed formula is implicit for H(x, p); use the constrained solver")
    flux = boundary_integral(curve, alpha_profile.cos_alpha)
    load = integrate_over_domain(curve, lambda pts: model(pts))
    return (flux - load) / curve.area


def _residual_norm(ops, r: np.ndarray) -> float:
    # residual scaled by the lumped mass: units of u_t
    return float(np.max(np.abs(r) / ops.lumped_mass))


def _picard_constrained(mesh, alpha_profile, model, opts, w0, load_scale):
    """Damped Picard sweeps of the saddle system at a fixed load scale."""
    ops = operators_for(mesh)
    m = ops.lumped_mass
    b = load_scale * boundary_flux_vector(mesh, alpha_profile)
    n = mesh.n_nodes

    w = w0.copy()
    w -= (m @ w) / m.sum()
    speed = 0.0

    def residual(w_vals, c_val):
        field = ScalarField(mesh, w_vals)
        diag = field.diagnostics()
        k = ops.stiffness(1.0 / diag.v)
        f = load_scale * forcing_vector(mesh, field, model)
        return k @ w_vals + f + c_val * m - b

    res = _residual_norm(ops, residual(w, speed))
    history = [res]
    for it in range(1, opts.max_iter + 1):
        field = ScalarField(mesh, w)
        diag = field.diagnostics()
        k = ops.stiffness(1.0 / diag.v)
        f = load_scale * forcing_vector(mesh, field, model)
        saddle = sp.bmat([[k, m[:, None]], [m[None, :], None]], format="csc")
        rhs = np.concatenate([b - f, [0.0]])
        try:
            sol = spla.splu(saddle).solve(rhs)
        except RuntimeError as exc:
            raise SingularSystem(f"saddle solve failed: {exc}") from exc
        w_new, c_new = sol[:n], float(sol[n])
        w_new = w_new - (m @ w_new) / m.sum()
        res_new = _residual_norm(ops, residual(w_new, c_new))
        if res_new > res:
            w_damp = w + opts.damping * (w_new - w)
            c_damp = speed + opts.damping * (c_new - speed)
            res_damp = _residual_norm(ops, residual(w_damp, c_damp))
            if res_damp < res_new:
                w_new, c_new, res_new = w_damp, c_damp, res_damp
        w, speed, res = w_new, c_new, res_new
        history.append(res)
        if res <= opts.tol:
            return w, speed, res, it, True
        if len(history) > opts.stall_window and \
                res > 0.5 * history[-opts.stall_window - 1]:
            break
    return w, speed, res, len(history) - 1, False


def solve_translator(mesh: TriMesh, alpha_profile: AngleProfile,
                     model: ForcingModel,
                     opts: TranslatorOptions | None = None,
                     initial: ScalarField | np.ndarray | None = None
                     ) -> TranslatorSolution:
    """Solve for the mean-zero soliton profile and its speed.

    Plain damped Picard first; if it stalls (and continuation is allowed)
    the data (cos alpha - cos alpha_neutral) and H are ramped by a load
    parameter s in (0, 1], warm-starting each stage.  alpha_neutral = pi/2
    carries zero flux, so the ramp simply scales the load.
    """
    opts = opts or TranslatorOptions()
    if initial is None:
        w0 = np.zeros(mesh.n_nodes)
    elif isinstance(initial, ScalarField):
        w0 = initial.values.copy()
    else:
        w0 = np.asarray(initial, dtype=float).copy()

    method = "constrained"
    if opts.continuation == "force":
        w, speed, res, iters, ok = w0, 0.0, math.inf, 0, False
    else:
        w, speed, res, iters, ok = _picard_constrained(
            mesh, alpha_profile, model, opts, w0, 1.0)
    if not ok and opts.continuation in ("auto", "force"):
        method = "constrained+continuation"
        total = iters
        w = w0
        for s in opts.continuation_steps:
            w, speed, res, it, ok = _picard_constrained(
                mesh, alpha_profile, model, opts, w, s)
            total += it
            if not ok:
                break
        iters = total
    if not ok:
        raise NoConvergence(
            f"translator Picard stalled at residual {res:.3e} after "
            f"{iters} iterations", last_values=w, last_speed=speed,
            residual=res)

    field = ScalarField(mesh, w)
    return TranslatorSolution(
        w=field,
        speed=speed,
        residual=res,
        iterations=iters,
        method=method,
        sup_v=field.diagnostics().sup_v,
    )


def solve_regularized(mesh: TriMesh, alpha_profile: AngleProfile,
                      model: ForcingModel, epsilon: float,
                      opts: TranslatorOptions | None = None,
                      reference_speed: float | None = None
                      ) -> RegularizedSolution:
    """Picard on (K(w) + eps M) w = b - f_H(w); no constraint needed."""
    if not epsilon > 0.0:
        raise BadSpec(f"epsilon must be positive, got {epsilon}")
    opts = opts or TranslatorOptions()
    ops = operators_for(mesh)
    m = ops.lumped_mass
    b = boundary_flux_vector(mesh, alpha_profile)

    w = np.zeros(mesh.n_nodes)

    def residual(w_vals):
        field = ScalarField(mesh, w_vals)
        k = ops.stiffness(1.0 / field.diagnostics().v)
        f = forcing_vector(mesh, field, model)
        return k @ w_vals + epsilon * m * w_vals + f - b

    res = _residual_norm(ops, residual(w))
    iters = 0
    for it in range(1, opts.max_iter + 1):
        field = ScalarField(mesh, w)
        diag = field.diagnostics()
        matrix = ops.stiffness(1.0 / diag.v, diag_shift=epsilon * m)
        f = forcing_vector(mesh, field, model)
        try:
            w_new = spla.splu(matrix.tocsc()).solve(b - f)
        except RuntimeError as exc:
            raise SingularSystem(f"regularized solve failed: {exc}") from exc
        res_new = _residual_norm(ops, residual(w_new))
        if res_new > res:
            w_damp = w + opts.damping * (w_new - w)
            res_damp = _residual_norm(ops, residual(w_damp))
            if res_damp < res_new:
                w_new, res_new = w_damp, res_damp
        w, res = w_new, res_new
        iters = it
        # the profile grows like C/epsilon, so the attainable residual has a
        # roundoff floor proportional to |w|_inf
        if res <= opts.tol + 1e-12 * (1.0 + float(np.max(np.abs(w)))):
            break
    else:
        raise NoConvergence(
            f"regularized Picard stalled at residual {res:.3e}",
            last_values=w, residual=res)

    eps_w = epsilon * w
    deviation = (float(np.max(np.abs(eps_w - reference_speed)))
                 if reference_speed is not None else None)
    return RegularizedSolution(
        epsilon=epsilon,
        w=ScalarField(mesh, w),
        eps_w_min=float(eps_w.min()),
        eps_w_max=float(eps_w.max()),
        deviation=deviation,
        residual=res,
        iterations=iters,
    )


@dataclass(frozen=True)
class SphericalCapOracle:
    """Closed-form translator on the disk of radius R with constant alpha.

    The profile is the lower spherical cap w(r) = -(1/a) sqrt(1 - a^2 r^2)
    (mean-adjusted) with slope parameter a = cos(alpha)/R, which satisfies
    the contact-angle flux D_N w = -cos(alpha) sqrt(1 + |Dw|^2) at r = R
    and translates with speed C = 2 cos(alpha)/R.
    """

    alpha: float
    R: float
    slope: float       # a = cos(alpha)/R
    speed: float       # C = 2 cos(alpha)/R
    sup_v: float
    mean_offset: float  # disk average of the raw profile

    def profile(self, r):
        """Mean-zero radial profile w(r)."""
        r = np.asarray(r, dtype=float)
        a = self.slope
        if a == 0.0:
            return np.zeros_like(r)
        return -np.sqrt(1.0 - (a * r) ** 2) / a - self.mean_offset

    def values(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return self.profile(np.linalg.norm(points, axis=-1))

    def v_profile(self, r):
        r = np.asarray(r, dtype=float)
        return 1.0 / np.sqrt(1.0 - (self.slope * r) ** 2)

    def field(self, mesh: TriMesh) -> ScalarField:
        return ScalarField(mesh, self.values(mesh.nodes))


def radial_oracle(alpha: float, R: float = 1.0) -> SphericalCapOracle:
    """Closed-form (w, C) for the disk with constant contact angle.

    Independent oracle for the translator solvers; alpha = pi/2 yields the
    zero profile with zero speed.
    """
    if not (0.0 < alpha < math.pi):
        raise BadSpec(f"alpha must lie in (0, pi), got {alpha}")
    if not R > 0.0:
        raise BadSpec(f"disk radius must be positive, got {R}")
    c = math.cos(alpha)
    a = c / R
    if abs(c) >= 1.0 or 1.0 - (a * R) ** 2 <= 1e-14:
        raise NonGraphical(
            f"cap with cos(alpha) = {c:.6g} on radius {R} is not a graph")
    if abs(c) < 1e-14:
        return SphericalCapOracle(alpha=alpha, R=R, slope=0.0, speed=2.0 * c / R,
                                  sup_v=1.0, mean_offset=0.0)
    mean = -2.0 * (1.0 - (1.0 - (a * R) ** 2) ** 1.5) / (3.0 * a ** 3 * R ** 2)
    return SphericalCapOracle(
        alpha=alpha,
        R=R,
        slope=a,
        speed=2.0 * c / R,
        sup_v=1.0 / math.sqrt(1.0 - (a * R) ** 2),
        mean_offset=mean,
    )
