"""Render matplotlib figures from run artifacts.

Operates purely on the delimited outputs already written by the CLI
(monitors.csv, conjecture35.csv, audits.jsonl, *.vtk); the simulation
commands themselves never plot.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .vtkio import read_vtk  # noqa: E402

_DPI = 150


def _read_csv_columns(path: Path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = {name: [] for name in reader.fieldnames}
        for row in reader:
            for name, val in row.items():
                cols[name].append(float(val))
    return {k: np.asarray(v) for k, v in cols.items()}


def _plot_monitors(path: Path, out: Path) -> Path:
    cols = _read_csv_columns(path)
    t = cols["t"]
    fig, axes = plt.subplots(2, 2, figsize=(9, 6.5), constrained_layout=True)

    ax = axes[0, 0]
    ax.plot(t, cols["supV"], color="tab:blue")
    ax.set_ylabel("sup v")
    ax.set_title("area element bound")

    ax = axes[0, 1]
    ax.plot(t, cols["max_ut"], label="max u_t", color="tab:red")
    ax.plot(t, cols["min_ut"], label="min u_t", color="tab:orange")
    ax.set_ylabel("u_t extremes")
    ax.legend(frameon=False)
    ax.set_title("time-derivative extremes")

    ax = axes[1, 0]
    ax.plot(t, cols["mass"], color="tab:green", label="mass")
    ax.plot(t, cols["energy"], color="tab:purple", label="energy")
    ax.set_xlabel("t")
    ax.legend(frameon=False)
    ax.set_title("mass and energy")

    ax = axes[1, 1]
    diss = np.maximum(cols["dissipation"], 1e-300)
    ax.semilogy(t[1:], diss[1:], color="tab:gray")
    ax.set_xlabel("t")
    ax.set_ylabel("dissipation")
    ax.set_title("dissipation rate")

    target = out / "monitors.png"
    fig.savefig(target, dpi=_DPI)
    plt.close(fig)
    return target


def _plot_conjecture(path: Path, out: Path) -> Path:
    cols = _read_csv_columns(path)
    fig, ax = plt.subplots(figsize=(5.5, 4), constrained_layout=True)
    ax.loglog(cols["epsilon"], cols["deviation"], "o-", color="tab:blue")
    ax.set_xlabel("epsilon")
    ax.set_ylabel("max |eps w_eps - C|")
    ax.set_title("regularized-translator deviation")
    ax.grid(True, which="both", alpha=0.3)
    target = out / "conjecture35.png"
    fig.savefig(target, dpi=_DPI)
    plt.close(fig)
    return target


def _plot_field(path: Path, out: Path) -> Path:
    points, triangles, data = read_vtk(path)
    name, values = next(iter(data.items())) if data else ("z", None)
    fig, ax = plt.subplots(figsize=(5.5, 5), constrained_layout=True)
    if values is not None:
        tpc = ax.tricontourf(points[:, 0], points[:, 1], triangles, values,
                             levels=24, cmap="viridis")
        fig.colorbar(tpc, ax=ax, label=name)
    ax.triplot(points[:, 0], points[:, 1], triangles, color="k", lw=0.15,
               alpha=0.4)
    ax.set_aspect("equal")
    ax.set_title(path.stem)
    target = out / f"{path.stem}.png"
    fig.savefig(target, dpi=_DPI)
    plt.close(fig)
    return target


def _plot_audits(path: Path, out: Path) -> Path:
    records = [json.loads(line) for line in
               path.read_text(encoding="utf-8").splitlines() if line.strip()]
    names = [r["audit"] for r in records]
    verdicts = [r["verdict"] for r in records]
    colors = {"pass": "tab:green", "fail": "tab:red", "warn": "tab:orange",
              "not-applicable": "tab:gray"}
    fig, ax = plt.subplots(figsize=(7, 0.45 * len(records) + 1.2),
                           constrained_layout=True)
    y = np.arange(len(records))[::-1]
    ax.barh(y, np.ones(len(records)),
            color=[colors.get(v, "tab:gray") for v in verdicts])
    for yi, r in zip(y, records):
        ax.text(0.02, yi, f"{r['audit']}: {r['verdict']} "
                          f"(measured {r['measured']:.3e})",
                va="center", fontsize=9)
    ax.set_yticks([])
    ax.set_xticks([])
    ax.set_title("audit verdicts")
    target = out / "audits.png"
    fig.savefig(target, dpi=_DPI)
    plt.close(fig)
    return target


def render_report(run_dir: Path, out_dir: Path) -> list[Path]:
    """Render every recognized artifact in run_dir; returns written paths."""
    run_dir = Path(run_dir)
    out_dir = Path(out_dir)
    written = []
    monitors = run_dir / "monitors.csv"
    conjecture = run_dir / "conjecture35.csv"
    audits = run_dir / "audits.jsonl"
    fields = sorted(run_dir.glob("*.vtk")) + sorted(
        (run_dir / "snapshots").glob("*.vtk")
        if (run_dir / "snapshots").is_dir() else [])
    if not (monitors.is_file() or conjecture.is_file() or audits.is_file()
            or fields):
        return written
    out_dir.mkdir(parents=True, exist_ok=True)
    if monitors.is_file():
        written.append(_plot_monitors(monitors, out_dir))
    if conjecture.is_file():
        written.append(_plot_conjecture(conjecture, out_dir))
    if audits.is_file():
        written.append(_plot_audits(audits, out_dir))
    if fields:
        # final/translator field plus the last snapshot, skipping duplicates
        chosen = fields[-1:] if len(fields) == 1 else [fields[0], fields[-1]]
        for f in chosen:
            written.append(_plot_field(f, out_dir))
    return written
