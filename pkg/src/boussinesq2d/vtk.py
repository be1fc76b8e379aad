"""Legacy-VTK ASCII unstructured-grid output (cell type 5 = triangle)."""

from __future__ import annotations

from .mesh import TriMesh


def write_vtk(path, mesh: TriMesh, point_data: dict | None = None,
              title: str = "boussinesq2d"):
    """Write the mesh and optional nodal scalar fields to a .vtk file."""
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 2.0\n")
        f.write(f"{title}\n")
        f.write("ASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {mesh.n_nodes} double\n")
        for x, y in mesh.nodes:
            f.write(f"{x:.17g} {y:.17g} 0\n")
        nt = mesh.n_triangles
        f.write(f"CELLS {nt} {4 * nt}\n")
        for a, b, c in mesh.triangles:
            f.write(f"3 {a} {b} {c}\n")
        f.write(f"CELL_TYPES {nt}\n")
        for _ in range(nt):
            f.write("5\n")
        if point_data:
            f.write(f"POINT_DATA {mesh.n_nodes}\n")
            for name, values in point_data.items():
                f.write(f"SCALARS {name} double 1\n")
                f.write("LOOKUP_TABLE default\n")
                for val in values:
                    f.write(f"{val:.17g}\n")
