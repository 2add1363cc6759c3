"""Legacy ASCII VTK export for meshes with point and cell data."""

import numpy as np


def _fmt(v):
    return f"{v:.17g}"


def write_mesh_vtk(path, mesh, point_data=None, cell_data=None, title="twoscale-heat"):
    """Write an unstructured-grid VTK file (triangles, z = 0).

    ``point_data`` maps field names to (n_nodes,) arrays, ``cell_data`` to
    (n_elements,) arrays (integer arrays are written as int scalars).
    """
    point_data = point_data or {}
    cell_data = cell_data or {}
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 2.0\n")
        f.write(f"{title}\n")
        f.write("ASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {mesh.n_nodes} double\n")
        for x, y in mesh.nodes:
            f.write(f"{_fmt(x)} {_fmt(y)} 0\n")
        f.write(f"CELLS {mesh.n_elements} {4 * mesh.n_elements}\n")
        for a, b, c in mesh.elements:
            f.write(f"3 {a} {b} {c}\n")
        f.write(f"CELL_TYPES {mesh.n_elements}\n")
        for _ in range(mesh.n_elements):
            f.write("5\n")
        if cell_data:
            f.write(f"CELL_DATA {mesh.n_elements}\n")
            for name, values in cell_data.items():
                values = np.asarray(values)
                if np.issubdtype(values.dtype, np.integer):
                    f.write(f"SCALARS {name} int 1\nLOOKUP_TABLE default\n")
                    for v in values:
                        f.write(f"{int(v)}\n")
                else:
                    f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                    for v in values:
                        f.write(f"{_fmt(v)}\n")
        if point_data:
            f.write(f"POINT_DATA {mesh.n_nodes}\n")
            for name, values in point_data.items():
                f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in np.asarray(values, dtype=np.float64):
                    f.write(f"{_fmt(v)}\n")


def write_tensor_txt(path, tensor):
    """Row-major plain-text 2x2 tensor, 17 significant digits."""
    t = np.asarray(tensor, dtype=np.float64)
    with open(path, "w") as f:
        for row in t:
            f.write(" ".join(_fmt(v) for v in row) + "\n")
