"""Shared fixtures and independent oracles for the test suite.

The oracle helpers here deliberately avoid the package's own assembly
routines: element quantities are recomputed from scratch with a
degree-5 Dunavant quadrature rule and per-element linear fits, so that
agreement with the package is a genuine cross-check.
"""

import numpy as np
import pytest

from boussinesq2d import build_rect_mesh

# Dunavant degree-5 rule on the reference triangle (barycentric coords).
_A1 = 0.059715871789770
_B1 = 0.470142064105115
_A2 = 0.797426985353087
_B2 = 0.101286507323456
ORACLE_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
ORACLE_W = np.array([0.225,
                     0.132394152788506, 0.132394152788506, 0.132394152788506,
                     0.125939180544827, 0.125939180544827, 0.125939180544827])


def tri_area(p):
    """Signed area of a triangle given as a (3, 2) vertex array."""
    return 0.5 * ((p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1])
                  - (p[2, 0] - p[0, 0]) * (p[1, 1] - p[0, 1]))


def linear_fit(p, vals):
    """Coefficients (c0, cx, cy) of the plane through three nodal values.

    Solving the 3x3 Vandermonde system directly is an independent route
    to P1 gradients (the package uses closed-form edge formulas).
    """
    A = np.column_stack([np.ones(3), p[:, 0], p[:, 1]])
    return np.linalg.solve(A, vals)


def oracle_integrate(mesh, integrand):
    """Integrate integrand(x, y) -> scalar array over the mesh (degree 5)."""
    total = 0.0
    for tri in mesh.triangles:
        p = mesh.nodes[tri]
        pts = ORACLE_BARY @ p
        total += abs(tri_area(p)) * np.sum(
            ORACLE_W * integrand(pts[:, 0], pts[:, 1]))
    return total


def oracle_mass(mesh):
    """Dense mass matrix by quadrature of basis-function products."""
    n = mesh.n_nodes
    M = np.zeros((n, n))
    for tri in mesh.triangles:
        p = mesh.nodes[tri]
        area = abs(tri_area(p))
        # basis value at quad point q for local node i is ORACLE_BARY[q, i]
        local = np.einsum("q,qi,qj->ij", ORACLE_W, ORACLE_BARY, ORACLE_BARY)
        M[np.ix_(tri, tri)] += area * local
    return M


def oracle_stiffness(mesh):
    """Dense stiffness matrix via per-element linear fits of the basis."""
    n = mesh.n_nodes
    K = np.zeros((n, n))
    eye = np.eye(3)
    for tri in mesh.triangles:
        p = mesh.nodes[tri]
        area = abs(tri_area(p))
        grads = np.array([linear_fit(p, eye[i])[1:] for i in range(3)])
        K[np.ix_(tri, tri)] += area * grads @ grads.T
    return K


def oracle_fgh(mesh, E, U, V, P, Q, T, a, c):
    """Brute-force load vectors for the three stage right-hand sides.

    Every field is interpreted as a P1 function; the integrands are the
    transport/dispersion combinations tested against the package:
      F = Ux + Vy + Ex U + E Ux + Ey V + E Vy + a (Px + Qy)
      G = Ex + U Ux + V Vx + c Tx
      H = Ey + U Uy + V Vy + c Ty
    """
    n = mesh.n_nodes
    F = np.zeros(n)
    G = np.zeros(n)
    H = np.zeros(n)
    for tri in mesh.triangles:
        p = mesh.nodes[tri]
        area = abs(tri_area(p))
        fits = {name: linear_fit(p, vals[tri])
                for name, vals in (("E", E), ("U", U), ("V", V),
                                   ("P", P), ("Q", Q), ("T", T))}
        pts = ORACLE_BARY @ p
        x, y = pts[:, 0], pts[:, 1]

        def ev(name):
            c0, cx, cy = fits[name]
            return c0 + cx * x + cy * y, cx, cy

        Ev, Ex, Ey = ev("E")
        Uv, Ux, Uy = ev("U")
        Vv, Vx, Vy = ev("V")
        _, Px, _ = ev("P")
        _, _, Qy = ev("Q")
        _, Tx, Ty = ev("T")
        f = Ux + Vy + Ex * Uv + Ev * Ux + Ey * Vv + Ev * Vy + a * (Px + Qy)
        g = Ex + Uv * Ux + Vv * Vx + c * Tx
        h = Ey + Uv * Uy + Vv * Vy + c * Ty
        for i in range(3):
            phi = ORACLE_BARY[:, i]
            F[tri[i]] += area * np.sum(ORACLE_W * f * phi)
            G[tri[i]] += area * np.sum(ORACLE_W * g * phi)
            H[tri[i]] += area * np.sum(ORACLE_W * h * phi)
    return F, G, H


@pytest.fixture
def unit_mesh_2():
    """The two-triangle unit square."""
    return build_rect_mesh(0.0, 1.0, 0.0, 1.0, 1, 1)


@pytest.fixture
def unit_mesh_4():
    return build_rect_mesh(0.0, 1.0, 0.0, 1.0, 4, 4)


@pytest.fixture
def unit_mesh_10():
    return build_rect_mesh(0.0, 1.0, 0.0, 1.0, 10, 10)
