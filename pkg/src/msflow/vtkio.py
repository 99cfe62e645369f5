"""Legacy VTK ASCII and plain-text export of meshes and nodal fields.

All writers are atomic (temp file + rename) and format floats with %.17g
so repeated runs produce byte-identical artifacts.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import BadSpec
from .meshing import TriMesh


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def atomic_write_text(path, content: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(content, encoding="utf-8", newline="\n")
    os.replace(tmp, path)


def _vtk_header(mesh: TriMesh, title: str) -> list[str]:
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_nodes} double",
    ]
    for x, y in mesh.nodes:
        lines.append(f"{_fmt(x)} {_fmt(y)} 0")
    m = mesh.n_triangles
    lines.append(f"CELLS {m} {4 * m}")
    for a, b, c in mesh.triangles:
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {m}")
    lines.extend(["5"] * m)
    return lines


def write_mesh_vtk(path, mesh: TriMesh, title: str = "msflow mesh") -> None:
    atomic_write_text(path, "\n".join(_vtk_header(mesh, title)) + "\n")


def write_field_vtk(path, mesh: TriMesh, fields: dict,
                    title: str = "msflow field") -> None:
    """Write nodal scalar fields as POINT_DATA on the mesh."""
    lines = _vtk_header(mesh, title)
    lines.append(f"POINT_DATA {mesh.n_nodes}")
    for name, values in fields.items():
        values = np.asarray(values, dtype=float)
        if values.shape != (mesh.n_nodes,):
            raise BadSpec(f"field {name!r} has shape {values.shape}")
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_fmt(v) for v in values)
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_mesh_text(path, mesh: TriMesh) -> None:
    """Plain text: node count + coordinates, triangle count + indices,
    boundary edge list (i j theta_mid length)."""
    lines = [str(mesh.n_nodes)]
    for x, y in mesh.nodes:
        lines.append(f"{_fmt(x)} {_fmt(y)}")
    lines.append(str(mesh.n_triangles))
    for a, b, c in mesh.triangles:
        lines.append(f"{a} {b} {c}")
    lines.append(str(mesh.boundary_edges.shape[0]))
    for j, (a, b) in enumerate(mesh.boundary_edges):
        lines.append(f"{a} {b} {_fmt(mesh.boundary_edge_theta[j])} "
                     f"{_fmt(mesh.boundary_edge_length[j])}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_vtk(path):
    """Parse the dialect written by this module.

    Returns (points (n,2), triangles (m,3), point_data dict).
    """
    tokens = Path(path).read_text(encoding="utf-8").split()
    pos = 0

    def take(n):
        nonlocal pos
        out = tokens[pos:pos + n]
        pos += n
        return out

    def seek(word):
        nonlocal pos
        while pos < len(tokens) and tokens[pos] != word:
            pos += 1
        if pos == len(tokens):
            raise BadSpec(f"VTK file {path} has no {word} section")
        pos += 1

    seek("POINTS")
    n = int(take(1)[0])
    take(1)  # dtype
    coords = np.array(take(3 * n), dtype=float).reshape(n, 3)

    seek("CELLS")
    m = int(take(1)[0])
    take(1)  # total size
    cells = np.array(take(4 * m), dtype=int).reshape(m, 4)
    if np.any(cells[:, 0] != 3):
        raise BadSpec(f"VTK file {path} contains non-triangle cells")

    point_data = {}
    while True:
        try:
            seek("SCALARS")
        except BadSpec:
            break
        name = take(1)[0]
        take(2)  # dtype, components
        take(2)  # LOOKUP_TABLE default
        point_data[name] = np.array(take(n), dtype=float)

    return coords[:, :2], cells[:, 1:], point_data
