"""Command-line front end.

    msflow run        <config.json> [--out DIR] [--quiet]
    msflow translator <config.json> [--out DIR] [--quiet]
    msflow audit      <config.json> [--out DIR] [--quiet]
    msflow report     <run_dir>     [--out DIR] [--quiet]

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 audit
failure.  All artifacts are written atomically (temp + rename) with fixed
float formatting, so identical configs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import audits as audits_mod
from .config import SCHEMA_VERSION, ExperimentConfig, load_config
from .errors import (
    BadSpec,
    ConfigError,
    ConvexityViolation,
    LinearSolveFailure,
    MeshFailure,
    MsflowError,
    NoConvergence,
    NonFiniteField,
    SingularSystem,
)
from .flow import FlowTrajectory, MinimalSurfaceFlow, Monitors
from .meshing import mesh_quality_report
from .operators import ScalarField, operators_for
from .translator import compute_speed, solve_regularized, solve_translator
from .vtkio import atomic_write_text, write_field_vtk

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_AUDIT = 4

_CONFIG_ERRORS = (ConfigError, BadSpec, ConvexityViolation)
_SOLVER_ERRORS = (NoConvergence, LinearSolveFailure, SingularSystem,
                  NonFiniteField, MeshFailure)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("MSFLOW_THREADS", "1")))
    except ValueError:
        return 1


def _out_dir(cfg: ExperimentConfig, override: str | None) -> Path:
    if override:
        return Path(override)
    if cfg.output_dir:
        return Path(cfg.output_dir)
    stem = Path(cfg.path).stem if cfg.path else "msflow"
    base = Path(cfg.path).parent if cfg.path else Path.cwd()
    return base / f"{stem}_out"


def _write_json(path: Path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_monitors_csv(path: Path, monitors: Monitors) -> None:
    rows = [",".join(Monitors.COLUMNS)]
    for row in monitors.rows():
        rows.append(",".join(repr(x) if isinstance(x, float) else str(x)
                             for x in row))
    atomic_write_text(path, "\n".join(rows) + "\n")


def _write_snapshots(out: Path, traj: FlowTrajectory, max_files: int) -> None:
    if max_files <= 0:
        return
    count = len(traj.fields)
    idx = sorted(set(np.linspace(0, count - 1, min(max_files, count),
                                 dtype=int).tolist()))
    for i in idx:
        step = int(round(traj.times[i] / traj.dt))
        write_field_vtk(out / "snapshots" / f"step_{step:08d}.vtk",
                        traj.mesh, {"u": traj.fields[i].values},
                        title=f"msflow snapshot t={traj.times[i]!r}")


def _mesh_summary(mesh) -> dict:
    q = mesh_quality_report(mesh)
    return {
        "h": mesh.h_target,
        "nodes": q.n_nodes,
        "triangles": q.n_triangles,
        "min_angle_deg": q.min_angle_deg,
        "delaunay_violations": q.delaunay_violations,
        "area_defect": q.area_defect,
    }


def _solve_translator_for(cfg: ExperimentConfig, mesh, alpha, model):
    return solve_translator(mesh, alpha, model, cfg.translator_options())


def cmd_run_flow(cfg: ExperimentConfig, out: Path, quiet: bool) -> int:
    alpha = cfg.build_alpha()
    model = cfg.build_model()
    mesh = cfg.build_mesh(alpha)
    flow_cfg = cfg.flow_config()

    translator = None
    init_spec = cfg.initial_spec()
    if init_spec["kind"] == "translator":
        translator = _solve_translator_for(cfg, mesh, alpha, model)
        u0 = cfg.build_initial(mesh, init_spec, translator.w.values)
    else:
        u0 = cfg.build_initial(mesh, init_spec)

    engine = MinimalSurfaceFlow(mesh, alpha, model, flow_cfg)
    traj = engine.evolve(u0)

    _write_monitors_csv(out / "monitors.csv", traj.monitors)
    _write_snapshots(out, traj, int(cfg.raw.get("snapshot_files", 10)))
    write_field_vtk(out / "final.vtk", mesh, {"u": traj.final_field.values},
                    title="msflow final state")

    total_mass = float(operators_for(mesh).lumped_mass.sum())
    forcing_sum = traj.forcing_sum
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "run",
        "run_id": cfg.run_id(),
        "mesh": _mesh_summary(mesh),
        "flow": {
            "dt": flow_cfg.dt,
            "t_end": flow_cfg.t_end,
            "final_time": traj.final_time,
            "steps": int(traj.monitors.step[-1]),
            "converged": traj.converged,
        },
        "flux_sum": traj.flux_sum,
        "forcing_sum": forcing_sum,
        "speed_discrete": ((traj.flux_sum - forcing_sum) / total_mass
                           if forcing_sum is not None else None),
        "final": {
            "supV": float(traj.monitors.sup_v[-1]),
            "mass": float(traj.monitors.mass[-1]),
            "energy": float(traj.monitors.energy[-1]),
            "min_ut": float(traj.monitors.min_ut[-1]),
            "max_ut": float(traj.monitors.max_ut[-1]),
            "dissipation": float(traj.monitors.dissipation[-1]),
        },
    }
    if translator is not None:
        summary["translator"] = {
            "C": translator.speed,
            "residual": translator.residual,
            "iterations": translator.iterations,
            "supV": translator.sup_v,
        }
    _write_json(out / "summary.json", summary)
    if not quiet:
        print(f"run complete: {traj.monitors.step[-1]} steps to "
              f"t={traj.final_time!r}; artifacts in {out}")
    return EXIT_OK


def cmd_solve_translator(cfg: ExperimentConfig, out: Path, quiet: bool) -> int:
    alpha = cfg.build_alpha()
    model = cfg.build_model()
    mesh = cfg.build_mesh(alpha)
    try:
        sol = _solve_translator_for(cfg, mesh, alpha, model)
    except NoConvergence as exc:
        if exc.last_values is not None:
            write_field_vtk(out / "translator_last_iterate.vtk", mesh,
                            {"w": exc.last_values},
                            title="msflow translator last iterate")
        raise

    write_field_vtk(out / "translator.vtk", mesh, {"w": sol.w.values},
                    title="msflow translator profile")
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "translator",
        "run_id": cfg.run_id(),
        "C": sol.speed,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "supV": sol.sup_v,
        "meshH": mesh.h_target,
        "method": sol.method,
        "mesh": _mesh_summary(mesh),
    }

    epsilons = cfg.epsilons
    if epsilons:
        rows = ["epsilon,min_eps_w,max_eps_w,deviation"]
        for eps in sorted(epsilons, reverse=True):
            reg = solve_regularized(mesh, alpha, model, eps,
                                    cfg.translator_options(),
                                    reference_speed=sol.speed)
            rows.append(f"{eps!r},{reg.eps_w_min!r},{reg.eps_w_max!r},"
                        f"{reg.deviation!r}")
        atomic_write_text(out / "conjecture35.csv", "\n".join(rows) + "\n")
        summary["conjecture35"] = "conjecture35.csv"
    _write_json(out / "summary.json", summary)
    if not quiet:
        print(f"translator solved: C={sol.speed!r} residual={sol.residual:.3e} "
              f"({sol.iterations} iterations); artifacts in {out}")
    return EXIT_OK


def _load_prior_monitors(prior: Path) -> Monitors:
    mon_path = prior / "monitors.csv"
    if not mon_path.is_file():
        raise ConfigError(f"prior run {prior} has no monitors.csv")
    try:
        with open(mon_path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            cols = {name: [] for name in Monitors.COLUMNS}
            for row in reader:
                for name in Monitors.COLUMNS:
                    cols[name].append(float(row[name]))
    except (OSError, TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"prior run monitors.csv is corrupted: {exc}") from exc
    if not cols["step"]:
        raise ConfigError(f"prior run monitors.csv is empty: {mon_path}")
    return Monitors(
        step=np.asarray(cols["step"], dtype=int),
        time=np.asarray(cols["t"]),
        sup_v=np.asarray(cols["supV"]),
        min_ut=np.asarray(cols["min_ut"]),
        max_ut=np.asarray(cols["max_ut"]),
        mass=np.asarray(cols["mass"]),
        energy=np.asarray(cols["energy"]),
        dissipation=np.asarray(cols["dissipation"]),
    )


_MONITOR_AUDITS = {"gradient_bound", "ut_extremes", "energy_identity",
                   "mass_law"}
_FLOW_AUDITS = _MONITOR_AUDITS | {"oscillation", "convergence"}
_TRANSLATOR_AUDITS = {"gradient_bound", "convergence", "boundary_trace",
                      "conjecture35", "assumptions"}


def cmd_audit(cfg: ExperimentConfig, out: Path, quiet: bool) -> int:
    requested = cfg.audits or ["geometry", "assumptions"]
    run_id = cfg.run_id()
    curve = cfg.build_curve()
    alpha = cfg.build_alpha()
    model = cfg.build_model()
    mesh = cfg.build_mesh(alpha)

    prior_monitors = None
    if cfg.prior_run is not None:
        prior = Path(cfg.prior_run)
        if not prior.is_dir():
            raise ConfigError(f"prior run directory not found: {prior}")
        field_based = {"oscillation", "convergence"} & set(requested)
        if field_based:
            raise ConfigError(
                f"audits {sorted(field_based)} need field snapshots and "
                f"cannot run from a prior run's monitors; request a fresh run")
        prior_monitors = _load_prior_monitors(prior)

    translator = None
    if _TRANSLATOR_AUDITS & set(requested) or \
            cfg.initial_spec()["kind"] == "translator":
        translator = _solve_translator_for(cfg, mesh, alpha, model)

    # gradient_bound can audit the translator alone; the rest need a run
    strict_flow = (_FLOW_AUDITS - {"gradient_bound"}) & set(requested)
    needs_flow = prior_monitors is None and bool(
        strict_flow or ("gradient_bound" in requested and "flow" in cfg.raw))
    traj = traj_b = None
    if needs_flow:
        flow_cfg = cfg.flow_config()
        engine = MinimalSurfaceFlow(mesh, alpha, model, flow_cfg)
        u0 = cfg.build_initial(
            mesh, translator_values=(translator.w.values if translator else None))
        jobs = [u0]
        if "oscillation" in requested:
            jobs.append(cfg.build_initial(
                mesh, cfg.initial_spec("oscillation_initial_b"),
                translator_values=(translator.w.values if translator else None)))
        workers = min(len(jobs), max(1, _threads()))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(engine.evolve, jobs))
        else:
            results = [engine.evolve(j) for j in jobs]
        traj = results[0]
        traj_b = results[1] if len(results) > 1 else None
    elif prior_monitors is not None:
        # monitor-backed pseudo-trajectory from the prior run artifacts
        flow_cfg = cfg.flow_config()
        from .operators import boundary_flux_vector, forcing_vector
        flux = boundary_flux_vector(mesh, alpha)
        forcing_sum = (None if model.depends_on_gradient
                       else float(forcing_vector(mesh, None, model).sum()))
        traj = FlowTrajectory(
            mesh=mesh, dt=flow_cfg.dt,
            times=np.asarray([0.0]), fields=[ScalarField.zeros(mesh)],
            monitors=prior_monitors, converged=False,
            final_time=float(prior_monitors.time[-1]),
            flux_sum=float(flux.sum()), forcing_sum=forcing_sum,
            alpha_profile=alpha, model=model, config=flow_cfg)

    # the speed flavor of c1: exact quadrature when H = H(x) so the report
    # reduces to closed-form arithmetic, the multiplier C otherwise
    if not model.depends_on_gradient:
        speed_ref = compute_speed(curve, alpha, model)
    elif translator is not None:
        speed_ref = translator.speed
    else:
        speed_ref = None
    assumption_report = audits_mod.audit_assumptions(
        curve, alpha, model, speed=speed_ref,
        initial_ut_bound=(0.0 if speed_ref is None else None),
    )

    records = []
    for name in requested:
        if name == "geometry":
            records.extend(audits_mod.audit_geometry(curve, run_id=run_id))
        elif name == "assumptions":
            records.append(audits_mod.AuditRecord(
                name="assumptions",
                measured=assumption_report.delta0,
                bound=0.0,
                tolerance=0.0,
                verdict=audits_mod.PASS,
                context={"run_id": run_id, "mesh_h": mesh.h_target},
                details={
                    "c1_flavor": "speed" if speed_ref is not None else "initial",
                    "delta0": assumption_report.delta0,
                    "gradient_bound": (assumption_report.gradient_bound
                                       if np.isfinite(assumption_report.gradient_bound)
                                       else None),
                    "c1": assumption_report.c1,
                    "c0": assumption_report.c0,
                    "min_curvature": assumption_report.min_curvature,
                    "max_curvature": assumption_report.max_curvature,
                    "max_tangential_alpha_derivative":
                        assumption_report.max_tangential_alpha_derivative,
                    "alpha_min": assumption_report.alpha_min,
                    "pi_minus_alpha_max": assumption_report.pi_minus_alpha_max,
                    "sin_alpha_min": assumption_report.sin_alpha_min,
                    "hypothesis_satisfied":
                        assumption_report.hypothesis_satisfied,
                    "forcing_monotonicity_min":
                        assumption_report.forcing_monotonicity_min,
                },
            ))
        elif name == "gradient_bound":
            subject = traj if traj is not None else translator
            records.append(audits_mod.audit_gradient_bound(
                subject, assumption_report, run_id=run_id))
        elif name == "ut_extremes":
            records.append(audits_mod.audit_ut_extremes(traj, run_id=run_id))
        elif name == "energy_identity":
            records.append(audits_mod.audit_energy_identity(
                traj, model, run_id=run_id))
        elif name == "mass_law":
            records.append(audits_mod.audit_mass_law(traj, run_id=run_id))
        elif name == "oscillation":
            records.append(audits_mod.audit_oscillation(
                traj, traj_b, run_id=run_id))
        elif name == "convergence":
            records.append(audits_mod.audit_convergence(
                traj, translator, run_id=run_id))
        elif name == "boundary_trace":
            subject_field = (translator.w if translator is not None
                             else traj.final_field)
            records.append(audits_mod.audit_boundary_trace(
                subject_field, curve, alpha, run_id=run_id))
        elif name == "conjecture35":
            epsilons = cfg.epsilons or [1e-1, 1e-2, 1e-3]
            regs = [solve_regularized(mesh, alpha, model, eps,
                                      cfg.translator_options(),
                                      reference_speed=translator.speed)
                    for eps in sorted(epsilons, reverse=True)]
            records.append(audits_mod.audit_conjecture35(
                regs, translator.speed, run_id=run_id))

    atomic_write_text(out / "audits.jsonl",
                      "\n".join(r.to_json() for r in records) + "\n")

    if not quiet:
        width = max(len(r.name) for r in records)
        print(f"{'audit':<{width}}  verdict         measured      bound/tol")
        for r in records:
            lim = r.bound if r.bound else r.tolerance
            print(f"{r.name:<{width}}  {r.verdict:<14} {r.measured:12.4e}  "
                  f"{lim:12.4e}")
    failed = [r for r in records if r.verdict == audits_mod.FAIL]
    if failed and not quiet:
        print(f"{len(failed)} audit(s) failed", file=sys.stderr)
    return EXIT_AUDIT if failed else EXIT_OK


def cmd_report(run_dir: str, out: Path | None, quiet: bool) -> int:
    from .report import render_report
    src = Path(run_dir)
    if not src.is_dir():
        raise ConfigError(f"run directory not found: {src}")
    written = render_report(src, out or (src / "figures"))
    if not written:
        raise ConfigError(
            f"{src} contains no renderable artifacts "
            f"(monitors.csv, conjecture35.csv, audits.jsonl, *.vtk)")
    if not quiet:
        for p in written:
            print(f"wrote {p}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="msflow",
        description="Minimal surface flow with prescribed contact angle: "
                    "flows, translators, and estimate audits.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
            ("run", "time-integrate the flow described by a config"),
            ("translator", "solve the translating-soliton problem"),
            ("audit", "run estimate audits and write audits.jsonl"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="path to a JSON experiment config")
        p.add_argument("--out", help="output directory")
        p.add_argument("--quiet", action="store_true")
    p = sub.add_parser("report", help="render matplotlib figures from run artifacts")
    p.add_argument("run_dir", help="directory with run/translator/audit outputs")
    p.add_argument("--out", help="figure output directory")
    p.add_argument("--quiet", action="store_true")

    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            return cmd_report(args.run_dir, Path(args.out) if args.out else None,
                              args.quiet)
        cfg = load_config(args.config)
        out = _out_dir(cfg, args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "run":
            return cmd_run_flow(cfg, out, args.quiet)
        if args.command == "translator":
            return cmd_solve_translator(cfg, out, args.quiet)
        return cmd_audit(cfg, out, args.quiet)
    except _CONFIG_ERRORS as exc:
        print(f"msflow: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _SOLVER_ERRORS as exc:
        print(f"msflow: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except MsflowError as exc:
        print(f"msflow: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
