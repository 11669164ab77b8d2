"""Legacy ASCII VTK (version 2.0) writer for triangle meshes and fields."""

from __future__ import annotations

import numpy as np


def _fmt(x):
    return repr(float(x))


def write_vtk(path, mesh, point_scalars=None, point_vectors=None,
              cell_scalars=None, cell_vectors=None, title="oseenvb output"):
    """Write an unstructured triangular mesh with named data arrays.

    point_* map names to per-vertex arrays; cell_* to per-triangle arrays.
    Vectors are written with a zero z component.
    """
    point_scalars = point_scalars or {}
    point_vectors = point_vectors or {}
    cell_scalars = cell_scalars or {}
    cell_vectors = cell_vectors or {}

    nv = mesh.num_vertices
    nt = mesh.num_triangles
    lines = [
        "# vtk DataFile Version 2.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {nv} double",
    ]
    for x, y in mesh.vertices:
        lines.append(f"{_fmt(x)} {_fmt(y)} 0.0")
    lines.append(f"CELLS {nt} {4 * nt}")
    for t in mesh.triangles:
        lines.append(f"3 {t[0]} {t[1]} {t[2]}")
    lines.append(f"CELL_TYPES {nt}")
    lines.extend(["5"] * nt)

    if point_scalars or point_vectors:
        lines.append(f"POINT_DATA {nv}")
        for name, arr in point_scalars.items():
            arr = np.asarray(arr)
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(_fmt(v) for v in arr)
        for name, arr in point_vectors.items():
            arr = np.asarray(arr)
            lines.append(f"VECTORS {name} double")
            lines.extend(f"{_fmt(v[0])} {_fmt(v[1])} 0.0" for v in arr)

    if cell_scalars or cell_vectors:
        lines.append(f"CELL_DATA {nt}")
        for name, arr in cell_scalars.items():
            arr = np.asarray(arr)
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(_fmt(v) for v in arr)
        for name, arr in cell_vectors.items():
            arr = np.asarray(arr)
            lines.append(f"VECTORS {name} double")
            lines.extend(f"{_fmt(v[0])} {_fmt(v[1])} 0.0" for v in arr)

    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def solution_snapshot(path, mesh, sol=None, u_elliptic=None, u_direct=None,
                      eta_sq=None, title="oseenvb snapshot"):
    """Write the standard snapshot: nodal omega/p/u, cellwise u_avg and eta."""
    nv = mesh.num_vertices
    point_scalars = {}
    point_vectors = {}
    cell_scalars = {}
    cell_vectors = {}
    if sol is not None:
        point_scalars["omega"] = sol.omega_h.coeffs[:nv]
        point_scalars["p"] = sol.p_h.coeffs[:nv]
    if u_elliptic is not None:
        ns = u_elliptic.space.num_scalar
        point_vectors["u_elliptic"] = np.column_stack(
            [u_elliptic.coeffs[:nv], u_elliptic.coeffs[ns:ns + nv]]
        )
    if u_direct is not None:
        cell_vectors["u_direct_avg"] = u_direct.cell_averages()
    if eta_sq is not None:
        cell_scalars["eta_T"] = np.sqrt(np.asarray(eta_sq))
    write_vtk(path, mesh, point_scalars, point_vectors, cell_scalars,
              cell_vectors, title=title)
