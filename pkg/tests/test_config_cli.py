import json
import math

import numpy as np
import pytest

from msflow.cli import main
from msflow.config import CONFIG_SCHEMA, load_config, validate_config
from msflow.errors import ConfigError
from msflow.vtkio import read_vtk

DISK_20 = {
    "shape": {"shape": "circle", "R": 1.0},
    "alpha": {"const": 2.0},
    "H": {"kind": "zero"},
    "mesh": {"h": 0.15},
}


def _write(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


# ------------------------------------------------------------- config layer

def test_load_valid_config(tmp_path):
    cfg = load_config(_write(tmp_path, DISK_20))
    assert cfg.mesh_h == 0.15
    assert cfg.build_curve().kind == "circle"
    assert cfg.build_alpha().kind == "const"
    assert not cfg.build_model().depends_on_gradient
    assert len(cfg.run_id()) == 12


def test_schema_is_published():
    assert CONFIG_SCHEMA["title"]
    assert "shape" in CONFIG_SCHEMA["properties"]


def test_negative_dt_names_offending_field(tmp_path):
    bad = dict(DISK_20, flow={"dt": -1.0, "t_end": 1.0})
    with pytest.raises(ConfigError) as info:
        load_config(_write(tmp_path, bad))
    assert "dt" in str(info.value)


def test_missing_file_is_config_error():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.json")


def test_invalid_json_is_config_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_non_finite_number_rejected():
    with pytest.raises(ConfigError) as info:
        validate_config(dict(DISK_20, flow={"dt": 0.1, "t_end": math.inf}))
    assert "t_end" in str(info.value)


def test_unknown_audit_name_rejected(tmp_path):
    bad = dict(DISK_20, audits=["geometry", "spectral_gap"])
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, bad))


def test_initial_builders(tmp_path):
    cfg = load_config(_write(tmp_path, dict(
        DISK_20, initial={"kind": "polynomial", "terms": [[2, 0, 1.0]]})))
    mesh = cfg.build_mesh()
    u = cfg.build_initial(mesh)
    assert np.allclose(u.values, mesh.nodes[:, 0] ** 2)
    affine = cfg.build_initial(mesh, {"kind": "affine",
                                      "coeffs": [1.0, 2.0, -1.0]})
    assert np.allclose(affine.values,
                       1.0 + 2.0 * mesh.nodes[:, 0] - mesh.nodes[:, 1])
    with pytest.raises(ConfigError):
        cfg.build_initial(mesh, {"kind": "translator"})


# ------------------------------------------------------------- CLI: run

def test_cli_run_translator_soliton(tmp_path):
    payload = dict(
        DISK_20,
        flow={"dt": 0.01, "t_end": 0.3, "snapshot_every": 5,
              "stagnation_threshold": None},
        initial={"kind": "translator"},
    )
    out = tmp_path / "out"
    code = main(["run", _write(tmp_path, payload), "--out", str(out),
                 "--quiet"])
    assert code == 0
    lines = (out / "monitors.csv").read_text().splitlines()
    assert lines[0] == "step,t,supV,min_ut,max_ut,mass,energy,dissipation"
    rows = np.array([line.split(",") for line in lines[1:]], dtype=float)
    spread = rows[1:, 4] - rows[1:, 3]  # max_ut - min_ut after step 0
    assert np.max(spread) < 1e-9
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema_version"] == 1
    assert summary["translator"]["C"] == pytest.approx(2 * math.cos(2.0),
                                                       abs=5e-3)
    assert (out / "final.vtk").is_file()
    assert sorted((out / "snapshots").glob("*.vtk"))


def test_cli_run_rejects_bad_config(tmp_path):
    bad = dict(DISK_20, flow={"dt": -1.0, "t_end": 1.0})
    assert main(["run", _write(tmp_path, bad), "--quiet"]) == 2


def test_cli_missing_config_path():
    assert main(["run", "/no/such/file.json", "--quiet"]) == 2


def test_cli_solver_failure_exit_code(tmp_path):
    payload = dict(DISK_20, translator={"tol": 1e-10, "max_iter": 1})
    out = tmp_path / "out"
    code = main(["translator", _write(tmp_path, payload), "--out", str(out),
                 "--quiet"])
    assert code == 3
    assert (out / "translator_last_iterate.vtk").is_file()


# ------------------------------------------------------------- CLI: translator

def test_cli_translator_neutral_angle(tmp_path):
    payload = dict(DISK_20, alpha={"const": math.pi / 2.0})
    out = tmp_path / "out"
    code = main(["translator", _write(tmp_path, payload), "--out", str(out),
                 "--quiet"])
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert abs(summary["C"]) < 1e-15
    assert summary["meshH"] == 0.15
    pts, tris, data = read_vtk(out / "translator.vtk")
    assert np.max(np.abs(data["w"])) < 1e-12


def test_cli_translator_epsilon_ladder(tmp_path):
    payload = dict(DISK_20, translator={"epsilons": [0.1, 0.01, 0.001]})
    out = tmp_path / "out"
    code = main(["translator", _write(tmp_path, payload), "--out", str(out),
                 "--quiet"])
    assert code == 0
    lines = (out / "conjecture35.csv").read_text().splitlines()
    assert lines[0] == "epsilon,min_eps_w,max_eps_w,deviation"
    rows = np.array([line.split(",") for line in lines[1:]], dtype=float)
    assert np.all(np.diff(rows[:, 0]) < 0)       # descending epsilon
    assert np.all(np.diff(rows[:, 3]) <= 1e-12)  # nonincreasing deviation
    assert rows[-1, 3] <= 0.05


# ------------------------------------------------------------- CLI: audit

AUDIT_PAYLOAD = dict(
    DISK_20,
    flow={"dt": 0.01, "t_end": 1.5, "snapshot_every": 5,
          "stagnation_threshold": None},
    initial={"kind": "zero"},
    oscillation_initial_b={"kind": "affine", "coeffs": [0.0, 1.0, 0.0]},
    audits=["geometry", "assumptions", "gradient_bound", "ut_extremes",
            "energy_identity", "mass_law", "oscillation", "convergence",
            "boundary_trace", "conjecture35"],
    translator={"epsilons": [0.1, 0.01]},
)


def test_cli_audit_full_suite(tmp_path):
    out = tmp_path / "out"
    code = main(["audit", _write(tmp_path, AUDIT_PAYLOAD), "--out", str(out),
                 "--quiet"])
    assert code == 0
    lines = (out / "audits.jsonl").read_text().splitlines()
    records = [json.loads(line) for line in lines]
    names = [r["audit"] for r in records]
    assert names == ["frenet_identities", "total_turning", "area_consistency",
                     "assumptions", "gradient_bound", "ut_extremes",
                     "energy_identity", "mass_law", "oscillation",
                     "convergence", "boundary_trace", "conjecture35"]
    assert all(r["verdict"] == "pass" for r in records)
    assert all(r["context"].get("run_id") for r in records)


def test_cli_audit_byte_identical_reruns(tmp_path):
    path = _write(tmp_path, AUDIT_PAYLOAD)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["audit", path, "--out", str(out1), "--quiet"]) == 0
    assert main(["audit", path, "--out", str(out2), "--quiet"]) == 0
    assert (out1 / "audits.jsonl").read_bytes() == \
        (out2 / "audits.jsonl").read_bytes()


def test_cli_audit_hypothesis_failing_not_applicable(tmp_path):
    payload = dict(
        DISK_20,
        alpha={"const": 2.0 * math.pi / 3.0},
        audits=["geometry", "assumptions", "gradient_bound"],
    )
    out = tmp_path / "out"
    code = main(["audit", _write(tmp_path, payload), "--out", str(out),
                 "--quiet"])
    assert code == 0  # not-applicable is not a failure
    records = [json.loads(line)
               for line in (out / "audits.jsonl").read_text().splitlines()]
    by_name = {r["audit"]: r for r in records}
    assert by_name["gradient_bound"]["verdict"] == "not-applicable"
    assert not by_name["assumptions"]["details"]["hypothesis_satisfied"]


def test_cli_audit_corrupted_prior_run(tmp_path):
    payload = dict(DISK_20, audits=["mass_law"],
                   flow={"dt": 0.01, "t_end": 0.1},
                   prior_run=str(tmp_path / "missing_dir"))
    assert main(["audit", _write(tmp_path, payload), "--quiet"]) == 2
    # a directory without monitors.csv is also rejected
    empty = tmp_path / "empty_run"
    empty.mkdir()
    payload["prior_run"] = str(empty)
    assert main(["audit", _write(tmp_path, payload, "c2.json"),
                 "--quiet"]) == 2


def test_cli_audit_from_prior_run(tmp_path):
    run_payload = dict(
        DISK_20,
        flow={"dt": 0.01, "t_end": 0.5, "stagnation_threshold": None},
        initial={"kind": "translator"},
    )
    run_out = tmp_path / "run_out"
    assert main(["run", _write(tmp_path, run_payload, "run.json"),
                 "--out", str(run_out), "--quiet"]) == 0
    audit_payload = dict(
        DISK_20,
        flow={"dt": 0.01, "t_end": 0.5, "stagnation_threshold": None},
        audits=["ut_extremes", "energy_identity", "mass_law"],
        prior_run=str(run_out),
    )
    out = tmp_path / "audit_out"
    code = main(["audit", _write(tmp_path, audit_payload, "audit.json"),
                 "--out", str(out), "--quiet"])
    assert code == 0
    records = [json.loads(line)
               for line in (out / "audits.jsonl").read_text().splitlines()]
    assert all(r["verdict"] == "pass" for r in records)


# ------------------------------------------------------------- CLI: report

def test_cli_report_renders_figures(tmp_path):
    payload = dict(
        DISK_20,
        flow={"dt": 0.01, "t_end": 0.2, "snapshot_every": 5,
              "stagnation_threshold": None},
        initial={"kind": "translator"},
    )
    out = tmp_path / "out"
    assert main(["run", _write(tmp_path, payload), "--out", str(out),
                 "--quiet"]) == 0
    figs = tmp_path / "figs"
    assert main(["report", str(out), "--out", str(figs), "--quiet"]) == 0
    written = sorted(p.name for p in figs.glob("*.png"))
    assert "monitors.png" in written
    assert any(name.startswith(("final", "step_")) for name in written)
    assert all((figs / name).stat().st_size > 0 for name in written)


def test_cli_report_missing_dir():
    assert main(["report", "/no/such/dir", "--quiet"]) == 2


def test_cli_report_empty_dir(tmp_path):
    empty = tmp_path / "nothing"
    empty.mkdir()
    assert main(["report", str(empty), "--quiet"]) == 2


def test_cli_no_tmp_leftovers(tmp_path):
    payload = dict(
        DISK_20,
        flow={"dt": 0.01, "t_end": 0.1, "stagnation_threshold": None},
        initial={"kind": "zero"},
    )
    out = tmp_path / "out"
    assert main(["run", _write(tmp_path, payload), "--out", str(out),
                 "--quiet"]) == 0
    assert not list(out.rglob("*.tmp"))
