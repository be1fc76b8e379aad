"""Conforming triangulations of axis-aligned rectangles.

Meshes are stored as flat numpy arrays: node coordinates, triangle
connectivity (counterclockwise, with vertex 0 acting as the bisection
"peak" so the refinement edge is always the edge opposite vertex 0),
and labeled boundary edges.  A mesh is immutable after construction;
adaptation builds a new mesh.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SIDE_LABELS = ("left", "right", "bottom", "top")


class MeshError(Exception):
    pass


@dataclass(frozen=True)
class ElementGeometry:
    """Area and constant barycentric-coordinate gradients of one triangle."""

    area: float
    grad_lambda: np.ndarray  # shape (3, 2), grad_lambda[i] = grad of lambda_i


@dataclass
class TriMesh:
    nodes: np.ndarray        # (n_nodes, 2) float
    triangles: np.ndarray    # (n_tris, 3) int, CCW
    boundary_edges: list     # [(node_a, node_b, label), ...]
    periodic_map: dict | None = None   # slave node -> master node
    extent: tuple | None = None        # (xmin, xmax, ymin, ymax)
    saturated: bool = False            # set by adapt when nbvx was hit
    # midpoint node -> (endpoint_a, endpoint_b) of the edge it bisected;
    # lets later adaptation passes undo refinements hierarchically
    refinement_parents: dict | None = None

    # lazily computed geometry caches
    _areas: np.ndarray | None = field(default=None, repr=False)
    _grads: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def areas(self) -> np.ndarray:
        """Signed areas of all triangles (positive for valid meshes)."""
        if self._areas is None:
            self._compute_geometry()
        return self._areas

    def grads(self) -> np.ndarray:
        """Barycentric gradients, shape (n_tris, 3, 2)."""
        if self._grads is None:
            self._compute_geometry()
        return self._grads

    def _compute_geometry(self):
        p = self.nodes[self.triangles]          # (nt, 3, 2)
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        if np.any(det <= 0):
            bad = int(np.argmax(det <= 0))
            raise MeshError(f"triangle {bad} has non-positive area {det[bad] / 2.0}")
        area = 0.5 * det
        # grad lambda_i is perpendicular to the opposite edge, scaled by 1/(2A)
        g = np.empty((len(det), 3, 2))
        for i in range(3):
            a = self.nodes[self.triangles[:, (i + 1) % 3]]
            b = self.nodes[self.triangles[:, (i + 2) % 3]]
            e = b - a
            g[:, i, 0] = -e[:, 1]
            g[:, i, 1] = e[:, 0]
        g /= det[:, None, None]
        object.__setattr__(self, "_areas", area)
        object.__setattr__(self, "_grads", g)

    def reduced_dof_count(self) -> int:
        if not self.periodic_map:
            return self.n_nodes
        return self.n_nodes - len(self.periodic_map)


def build_rect_mesh(xmin, xmax, ymin, ymax, nx, ny) -> TriMesh:
    """Uniform triangulation of [xmin,xmax]x[ymin,ymax] with nx*ny cells.

    Nodes are ordered lexicographically by (y, x); each cell is split along
    its lower-left -> upper-right diagonal, so the mesh is invariant under
    the (x,y) -> (y,x) mirror when nx == ny and the domain is square.
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"subdivisions must be >= 1, got nx={nx}, ny={ny}")
    if xmax <= xmin or ymax <= ymin:
        raise ValueError("domain extent must be positive")

    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, ny + 1)
    X, Y = np.meshgrid(xs, ys)          # row j = constant y
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    k = 0
    for j in range(ny):
        for i in range(nx):
            p00 = nid(i, j)
            p10 = nid(i + 1, j)
            p11 = nid(i + 1, j + 1)
            p01 = nid(i, j + 1)
            # peak first: refinement edge = diagonal (p00, p11)
            tris[k] = (p10, p11, p00)
            tris[k + 1] = (p01, p00, p11)
            k += 2

    bedges = []
    for j in range(ny):
        bedges.append((nid(0, j + 1), nid(0, j), "left"))
        bedges.append((nid(nx, j), nid(nx, j + 1), "right"))
    for i in range(nx):
        bedges.append((nid(i, 0), nid(i + 1, 0), "bottom"))
        bedges.append((nid(i + 1, ny), nid(i, ny), "top"))

    return TriMesh(nodes=nodes, triangles=tris, boundary_edges=bedges,
                   extent=(xmin, xmax, ymin, ymax))


def element_geometry(mesh: TriMesh, t: int) -> ElementGeometry:
    """Exact area and constant barycentric gradients of triangle t."""
    if t < 0 or t >= mesh.n_triangles:
        raise IndexError(f"triangle index {t} out of range")
    area = float(mesh.areas()[t])
    if area <= 0:
        raise MeshError(f"triangle {t} is degenerate")
    return ElementGeometry(area=area, grad_lambda=mesh.grads()[t].copy())


def boundary_nodes(mesh: TriMesh, labels=None) -> np.ndarray:
    """Sorted node indices on boundary edges with the given labels (all if None)."""
    out = set()
    for a, b, lab in mesh.boundary_edges:
        if labels is None or lab in labels:
            out.add(a)
            out.add(b)
    return np.array(sorted(out), dtype=np.int64)


def build_periodic_map(mesh: TriMesh, directions: str = "both") -> TriMesh:
    """Return a copy of the mesh with opposite-side nodes identified.

    directions is "x", "y" or "both".  Slave nodes (right column, top row)
    map to masters (left column, bottom row); with both directions the
    three non-origin corners all map to the origin corner.
    """
    if directions not in ("x", "y", "both"):
        raise ValueError(f"bad periodic directions {directions!r}")
    if mesh.extent is None:
        raise MeshError("periodic identification requires a rectangle extent")
    xmin, xmax, ymin, ymax = mesh.extent
    tol = 1e-12 * max(xmax - xmin, ymax - ymin)
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]

    pmap: dict[int, int] = {}

    def pair_sides(slave_mask, master_mask, match_coord):
        slaves = np.nonzero(slave_mask)[0]
        masters = np.nonzero(master_mask)[0]
        order_s = slaves[np.argsort(match_coord[slaves])]
        order_m = masters[np.argsort(match_coord[masters])]
        if len(order_s) != len(order_m):
            raise MeshError("opposite sides have different node counts")
        if np.any(np.abs(match_coord[order_s] - match_coord[order_m]) > tol):
            raise MeshError("opposite-side node coordinates do not match")
        for s, m in zip(order_s, order_m):
            pmap[int(s)] = int(m)

    if directions in ("x", "both"):
        pair_sides(np.abs(x - xmax) < tol, np.abs(x - xmin) < tol, y)
    if directions in ("y", "both"):
        pair_sides(np.abs(y - ymax) < tol, np.abs(y - ymin) < tol, x)

    # resolve chains (corner: top-right -> top-left -> bottom-left)
    def root(i):
        while i in pmap:
            i = pmap[i]
        return i

    pmap = {s: root(m) for s, m in pmap.items()}

    return TriMesh(nodes=mesh.nodes, triangles=mesh.triangles,
                   boundary_edges=mesh.boundary_edges, periodic_map=pmap,
                   extent=mesh.extent)


def edge_triangle_counts(mesh: TriMesh) -> dict:
    """Map undirected edge -> number of adjacent triangles (invariant checks)."""
    counts: dict[tuple, int] = {}
    for tri in mesh.triangles:
        for i in range(3):
            e = (int(tri[i]), int(tri[(i + 1) % 3]))
            key = (min(e), max(e))
            counts[key] = counts.get(key, 0) + 1
    return counts
