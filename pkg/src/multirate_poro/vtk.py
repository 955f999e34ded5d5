"""Legacy ASCII VTK output of vertex fields on the triangulation."""

from __future__ import annotations

from pathlib import Path

import numpy as np

TRIANGLE_CELL = 5


def write_vtk(path, mesh, point_scalars=None, point_vectors=None, title="poroelastic state"):
    """Write an UNSTRUCTURED_GRID file with per-vertex scalars and 2D vectors."""
    verts = mesh.vertices
    tris = mesh.triangles
    nv, nt = len(verts), len(tris)
    lines = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {nv} double",
    ]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in verts]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in tris]
    lines.append(f"CELL_TYPES {nt}")
    lines += [str(TRIANGLE_CELL)] * nt
    if point_scalars or point_vectors:
        lines.append(f"POINT_DATA {nv}")
    for name, vals in (point_scalars or {}).items():
        vals = np.asarray(vals, dtype=float)
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [f"{v:.17g}" for v in vals]
    for name, vals in (point_vectors or {}).items():
        vals = np.asarray(vals, dtype=float)
        lines.append(f"VECTORS {name} double")
        lines += [f"{a:.17g} {b:.17g} 0" for a, b in vals]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_vtk(path):
    """Parse a file written by :func:`write_vtk`; returns (points, triangles, scalars, vectors)."""
    tokens = Path(path).read_text(encoding="utf-8").split("\n")
    i = 0
    points = tris = None
    scalars, vectors = {}, {}
    while i < len(tokens):
        line = tokens[i].strip()
        head = line.split()
        if not head:
            i += 1
            continue
        if head[0] == "POINTS":
            n = int(head[1])
            points = np.array([list(map(float, tokens[i + 1 + k].split()))[:2] for k in range(n)])
            i += n + 1
        elif head[0] == "CELLS":
            n = int(head[1])
            tris = np.array([list(map(int, tokens[i + 1 + k].split()))[1:] for k in range(n)], dtype=np.int64)
            i += n + 1
        elif head[0] == "SCALARS":
            n = len(points)
            scalars[head[1]] = np.array([float(tokens[i + 2 + k]) for k in range(n)])
            i += n + 2
        elif head[0] == "VECTORS":
            n = len(points)
            vectors[head[1]] = np.array([list(map(float, tokens[i + 1 + k].split()))[:2] for k in range(n)])
            i += n + 1
        else:
            i += 1
    return points, tris, scalars, vectors
