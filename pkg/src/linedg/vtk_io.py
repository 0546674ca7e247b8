"""Legacy ASCII VTK writer (unstructured grid, tetrahedra)."""

import numpy as np


def write_vtk(path, mesh, cell_data=None, point_data=None, title="linedg output"):
    """Write the mesh and optional scalar fields as a legacy VTK file.

    ``cell_data`` / ``point_data``: dicts name -> array of per-element /
    per-vertex scalars.
    """
    cell_data = cell_data or {}
    point_data = point_data or {}
    nt = mesh.n_elements
    nv = mesh.vertices.shape[0]
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {nv} double",
    ]
    for p in mesh.vertices:
        lines.append(f"{p[0]:.12g} {p[1]:.12g} {p[2]:.12g}")
    lines.append(f"CELLS {nt} {5 * nt}")
    for t in mesh.tets:
        lines.append(f"4 {t[0]} {t[1]} {t[2]} {t[3]}")
    lines.append(f"CELL_TYPES {nt}")
    lines.extend(["10"] * nt)
    if cell_data:
        lines.append(f"CELL_DATA {nt}")
        for name, values in cell_data.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (nt,):
                raise ValueError(f"cell data {name!r} must have shape ({nt},)")
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(f"{v:.12e}" for v in values)
    if point_data:
        lines.append(f"POINT_DATA {nv}")
        for name, values in point_data.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (nv,):
                raise ValueError(f"point data {name!r} must have shape ({nv},)")
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(f"{v:.12e}" for v in values)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def field_cell_values(field):
    """Element-barycenter values of a discrete field, for VTK cell data."""
    bary = np.full((1, 3), 0.25)
    return field.eval_in_elements(np.arange(field.mesh.n_elements), bary)[:, 0]
