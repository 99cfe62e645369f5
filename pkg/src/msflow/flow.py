"""Semi-implicit time integration of the minimal surface flow.

Each step solves the SPD system (M/dt + K(u^n)) u^{n+1} = (M/dt) u^n + b
- f_H(u^n) with lumped mass M, the v-weighted stiffness K frozen at the
previous iterate (optionally refreshed by Picard sub-iterations), the
cos-alpha natural flux b, and the forcing load f_H.  The lagged scheme is
unconditionally stable, keeps K 1 = 0 exactly, and therefore conserves
the discrete mass law integral(u(t_n)) - integral(u_0) = t_n (sum b - sum
f_H) to solver precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np
import scipy.sparse.linalg as spla

from .errors import BadSpec, LinearSolveFailure, NonFiniteField
from .geometry import AngleProfile
from .meshing import TriMesh
from .operators import (
    ForcingModel,
    ScalarField,
    boundary_flux_vector,
    forcing_vector,
    operators_for,
)


@dataclass(frozen=True)
class FlowConfig:
    dt: float
    t_end: float
    picard_iters: int = 1
    linear_tol: float = 1e-10
    linear_solver: str = "lu"  # "lu" (direct, default) or "cg"
    linear_maxiter: int = 10000
    snapshot_every: int = 1
    stagnation_threshold: float | None = 1e-12

    def __post_init__(self):
        if not self.dt > 0.0:
            raise BadSpec(f"dt must be positive, got {self.dt}")
        if self.t_end < 0.0:
            raise BadSpec(f"t_end must be nonnegative, got {self.t_end}")
        if not (0.0 < self.linear_tol <= 1e-6):
            raise BadSpec(f"linear_tol must lie in (0, 1e-6], got {self.linear_tol}")
        if self.picard_iters < 1 or self.picard_iters > 5:
            raise BadSpec(f"picard_iters must be in 1..5, got {self.picard_iters}")
        if self.linear_solver not in ("lu", "cg"):
            raise BadSpec(f"unknown linear solver {self.linear_solver!r}")
        if self.snapshot_every < 1:
            raise BadSpec("snapshot_every must be >= 1")


@dataclass
class Monitors:
    """Per-step scalar monitor series (index 0 is the initial state)."""

    step: np.ndarray
    time: np.ndarray
    sup_v: np.ndarray
    min_ut: np.ndarray
    max_ut: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray

    COLUMNS = ("step", "t", "supV", "min_ut", "max_ut", "mass", "energy",
               "dissipation")

    def rows(self):
        for i in range(self.step.size):
            yield (int(self.step[i]), float(self.time[i]), float(self.sup_v[i]),
                   float(self.min_ut[i]), float(self.max_ut[i]),
                   float(self.mass[i]), float(self.energy[i]),
                   float(self.dissipation[i]))


@dataclass
class FlowTrajectory:
    """Snapshots plus per-step monitors of one flow run."""

    mesh: TriMesh
    dt: float
    times: np.ndarray               # snapshot times, strictly increasing
    fields: list                    # ScalarField at each snapshot time
    monitors: Monitors
    converged: bool                 # stagnation threshold reached
    final_time: float
    flux_sum: float                 # sum of the cos-alpha flux vector
    forcing_sum: float | None       # sum f_H when H = H(x), else None
    alpha_profile: AngleProfile = dataclass_field(repr=False, default=None)
    model: ForcingModel = dataclass_field(repr=False, default=None)
    config: FlowConfig = None

    @property
    def final_field(self) -> ScalarField:
        return self.fields[-1]


class MinimalSurfaceFlow:
    """Flow solver bound to one mesh, contact-angle profile and forcing."""

    def __init__(self, mesh: TriMesh, alpha_profile: AngleProfile,
                 model: ForcingModel, config: FlowConfig):
        self.mesh = mesh
        self.alpha_profile = alpha_profile
        self.model = model
        self.config = config
        self.ops = operators_for(mesh)
        self.mass_vector = self.ops.lumped_mass
        self.flux = boundary_flux_vector(mesh, alpha_profile)
        self._constant_forcing = None
        if not model.depends_on_gradient:
            self._constant_forcing = forcing_vector(mesh, None, model)

    def _forcing(self, field: ScalarField) -> np.ndarray:
        if self._constant_forcing is not None:
            return self._constant_forcing
        return forcing_vector(self.mesh, field, self.model)

    def _solve(self, matrix, rhs, guess):
        if self.config.linear_solver == "lu":
            try:
                return spla.splu(matrix.tocsc()).solve(rhs)
            except RuntimeError as exc:
                raise LinearSolveFailure(f"sparse LU failed: {exc}") from exc
        precond = spla.LinearOperator(
            matrix.shape, lambda x: x / matrix.diagonal())
        sol, info = spla.cg(matrix, rhs, x0=guess, rtol=self.config.linear_tol,
                            atol=0.0, maxiter=self.config.linear_maxiter,
                            M=precond)
        if info != 0:
            raise LinearSolveFailure(
                f"CG did not converge within {self.config.linear_maxiter} "
                f"iterations (info={info})")
        return sol

    def step(self, state: ScalarField) -> ScalarField:
        """One semi-implicit Euler step of size dt."""
        values = self._step_values(state.values)
        return ScalarField(self.mesh, values)

    def _step_values(self, values: np.ndarray) -> np.ndarray:
        dt = self.config.dt
        current = values
        new = None
        field = ScalarField(self.mesh, current)
        for _ in range(self.config.picard_iters):
            diag = field.diagnostics()
            matrix = self.ops.stiffness(1.0 / diag.v,
                                        diag_shift=self.mass_vector / dt)
            rhs = (self.mass_vector / dt) * values + self.flux \
                - self._forcing(field)
            new = self._solve(matrix, rhs, current)
            if not np.all(np.isfinite(new)):
                raise NonFiniteField("flow step produced non-finite values")
            field = ScalarField(self.mesh, new)
            current = new
        return new

    def _energy(self, values: np.ndarray, v_tri: np.ndarray,
                forcing: np.ndarray) -> float:
        # E = integral v - boundary integral u cos(alpha) + integral u H(x)
        return float(self.ops.areas @ v_tri - self.flux @ values
                     + forcing @ values)

    def evolve(self, u0: ScalarField) -> FlowTrajectory:
        """Run the flow to t_end, recording monitors every step.

        Stops early (with converged=True) when the translator-adjusted
        dissipation |integral u_t^2 - C_d^2 |Omega|| falls below the
        stagnation threshold, where C_d is the discrete speed forced by
        the mass law.
        """
        cfg = self.config
        if not np.all(np.isfinite(u0.values)):
            raise NonFiniteField("initial data contains non-finite values")
        n_steps = int(round(cfg.t_end / cfg.dt))
        total_mass = float(self.mass_vector.sum())

        u = u0.values.copy()
        field = ScalarField(self.mesh, u)
        diag = field.diagnostics()
        forcing = self._forcing(field)

        mon = {name: [val] for name, val in (
            ("step", 0), ("time", 0.0), ("sup_v", diag.sup_v),
            ("min_ut", 0.0), ("max_ut", 0.0),
            ("mass", float(self.mass_vector @ u)),
            ("energy", self._energy(u, diag.v, forcing)),
            ("dissipation", 0.0))}
        times = [0.0]
        fields = [field]
        converged = False

        for n in range(1, n_steps + 1):
            new = self._step_values(u)
            ut = (new - u) / cfg.dt
            u = new
            field = ScalarField(self.mesh, u)
            diag = field.diagnostics()
            forcing = self._forcing(field)
            diss = float(self.mass_vector @ (ut * ut))

            mon["step"].append(n)
            mon["time"].append(n * cfg.dt)
            mon["sup_v"].append(diag.sup_v)
            mon["min_ut"].append(float(ut.min()))
            mon["max_ut"].append(float(ut.max()))
            mon["mass"].append(float(self.mass_vector @ u))
            mon["energy"].append(self._energy(u, diag.v, forcing))
            mon["dissipation"].append(diss)

            if n % cfg.snapshot_every == 0 or n == n_steps:
                times.append(n * cfg.dt)
                fields.append(field)

            if cfg.stagnation_threshold is not None:
                speed = (self.flux.sum() - forcing.sum()) / total_mass
                if abs(diss - speed * speed * total_mass) < cfg.stagnation_threshold:
                    converged = True
                    if times[-1] != n * cfg.dt:
                        times.append(n * cfg.dt)
                        fields.append(field)
                    break

        monitors = Monitors(**{k: np.asarray(v) for k, v in mon.items()})
        forcing_sum = (float(self._constant_forcing.sum())
                       if self._constant_forcing is not None else None)
        return FlowTrajectory(
            mesh=self.mesh,
            dt=cfg.dt,
            times=np.asarray(times),
            fields=fields,
            monitors=monitors,
            converged=converged,
            final_time=float(times[-1]),
            flux_sum=float(self.flux.sum()),
            forcing_sum=forcing_sum,
            alpha_profile=self.alpha_profile,
            model=self.model,
            config=cfg,
        )


def time_derivative_field(trajectory: FlowTrajectory, n: int) -> ScalarField:
    """Backward difference of consecutive snapshots, (u_n - u_{n-1}) / gap."""
    if n < 1 or n >= len(trajectory.fields):
        raise IndexError(
            f"snapshot index {n} out of range 1..{len(trajectory.fields) - 1}")
    gap = trajectory.times[n] - trajectory.times[n - 1]
    values = (trajectory.fields[n].values - trajectory.fields[n - 1].values) / gap
    return ScalarField(trajectory.mesh, values)
