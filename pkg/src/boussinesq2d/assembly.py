"""P1 finite-element assembly on triangle meshes.

Nodal fields are plain 1-D numpy arrays (one value per mesh node).
Matrices are scipy CSR.  All nonlinear load integrands here are linear
per element, so the 3-edge-midpoint quadrature rule (exact to degree 2)
integrates them exactly; source-term loads and error norms use a 7-point
degree-5 rule.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import TriMesh, boundary_nodes

# local P1 mass matrix, to be scaled by area/12
_MLOC = np.array([[2.0, 1.0, 1.0],
                  [1.0, 2.0, 1.0],
                  [1.0, 1.0, 2.0]])

# 7-point degree-5 quadrature on the reference triangle (barycentric, weights sum to 1)
_QW5 = np.array([0.225,
                 0.13239415278850618, 0.13239415278850618, 0.13239415278850618,
                 0.12593918054482715, 0.12593918054482715, 0.12593918054482715])
_a1, _b1 = 0.059715871789769820, 0.47014206410511508
_a2, _b2 = 0.79742698535308731, 0.10128650732345633
_QL5 = np.array([[1 / 3, 1 / 3, 1 / 3],
                 [_a1, _b1, _b1], [_b1, _a1, _b1], [_b1, _b1, _a1],
                 [_a2, _b2, _b2], [_b2, _a2, _b2], [_b2, _b2, _a2]])


class SolverError(Exception):
    pass


def _check_field(mesh: TriMesh, w: np.ndarray, name: str = "field"):
    if len(w) != mesh.n_nodes:
        raise ValueError(
            f"{name} has {len(w)} values for a mesh with {mesh.n_nodes} nodes")


def element_gradients(mesh: TriMesh, w: np.ndarray) -> np.ndarray:
    """Per-element constant gradient of a P1 field, shape (n_tris, 2)."""
    wv = w[mesh.triangles]                       # (nt, 3)
    return np.einsum("ti,tid->td", wv, mesh.grads())


def assemble_mass(mesh: TriMesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix."""
    nt = mesh.n_triangles
    blocks = (mesh.areas()[:, None, None] / 12.0) * _MLOC
    return _scatter_blocks(mesh, blocks, nt)


def assemble_stiffness(mesh: TriMesh) -> sp.csr_matrix:
    """P1 stiffness matrix, entries integral of grad(phi_j) . grad(phi_i)."""
    g = mesh.grads()
    blocks = mesh.areas()[:, None, None] * np.einsum("tid,tjd->tij", g, g)
    return _scatter_blocks(mesh, blocks, mesh.n_triangles)


def _scatter_blocks(mesh, blocks, nt):
    tris = mesh.triangles
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    A = sp.coo_matrix((blocks.ravel(), (rows, cols)),
                      shape=(mesh.n_nodes, mesh.n_nodes))
    A = A.tocsr()
    A.sum_duplicates()
    return A


def assemble_helmholtz(M: sp.csr_matrix, K: sp.csr_matrix,
                       coef: float) -> sp.csr_matrix:
    """M + coef*K, the discrete (Id - coef*Laplacian); requires coef >= 0."""
    if coef < 0:
        raise ValueError(f"Helmholtz coefficient must be >= 0, got {coef}")
    if coef == 0:
        return M.copy()
    return (M + coef * K).tocsr()


def _midpoint_load(mesh: TriMesh, gv: np.ndarray) -> np.ndarray:
    """Load <g; phi_i> for a per-element-linear integrand with vertex values gv."""
    contrib = (mesh.areas()[:, None] / 12.0) * (gv @ _MLOC)
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.triangles, contrib)
    return out


def assemble_F(mesh: TriMesh, E, U, V, P, Q, a: float) -> np.ndarray:
    """Surface-equation load: div(U,V) + Ex*U + E*Ux + Ey*V + E*Vy + a*div(P,Q)."""
    for name, w in (("E", E), ("U", U), ("V", V), ("P", P), ("Q", Q)):
        _check_field(mesh, w, name)
    tris = mesh.triangles
    gE = element_gradients(mesh, E)
    gU = element_gradients(mesh, U)
    gV = element_gradients(mesh, V)
    const = gU[:, 0] + gV[:, 1]
    if a != 0.0:
        gP = element_gradients(mesh, P)
        gQ = element_gradients(mesh, Q)
        const = const + a * (gP[:, 0] + gQ[:, 1])
    gv = (const[:, None]
          + gE[:, 0, None] * U[tris] + gU[:, 0, None] * E[tris]
          + gE[:, 1, None] * V[tris] + gV[:, 1, None] * E[tris])
    return _midpoint_load(mesh, gv)


def assemble_G(mesh: TriMesh, E, U, V, T, c: float) -> np.ndarray:
    """x-momentum load: Ex + U*Ux + V*Vx + c*Tx."""
    return _momentum_load(mesh, E, U, V, T, c, axis=0)


def assemble_H(mesh: TriMesh, E, U, V, T, c: float) -> np.ndarray:
    """y-momentum load: Ey + U*Uy + V*Vy + c*Ty."""
    return _momentum_load(mesh, E, U, V, T, c, axis=1)


def _momentum_load(mesh, E, U, V, T, c, axis):
    for name, w in (("E", E), ("U", U), ("V", V), ("T", T)):
        _check_field(mesh, w, name)
    tris = mesh.triangles
    dE = element_gradients(mesh, E)[:, axis]
    dU = element_gradients(mesh, U)[:, axis]
    dV = element_gradients(mesh, V)[:, axis]
    const = dE.copy()
    if c != 0.0:
        const += c * element_gradients(mesh, T)[:, axis]
    gv = const[:, None] + dU[:, None] * U[tris] + dV[:, None] * V[tris]
    return _midpoint_load(mesh, gv)


def assemble_laplacian_rhs(mesh: TriMesh, W: np.ndarray,
                           K: sp.csr_matrix | None = None) -> np.ndarray:
    """Weak-Laplacian load -<grad W; grad phi_i>; the boundary flux term is
    dropped (every exercised configuration has zero normal data)."""
    _check_field(mesh, W)
    if K is None:
        K = assemble_stiffness(mesh)
    return -K.dot(W)


def assemble_point_load(mesh: TriMesh, f) -> np.ndarray:
    """Load <f; phi_i> for a pointwise function f(x, y), degree-5 quadrature."""
    p = mesh.nodes[mesh.triangles]               # (nt, 3, 2)
    out = np.zeros(mesh.n_nodes)
    contrib = np.zeros((mesh.n_triangles, 3))
    for lam, w in zip(_QL5, _QW5):
        xq = np.einsum("k,tkd->td", lam, p)
        fq = f(xq[:, 0], xq[:, 1])
        for i in range(3):
            contrib[:, i] += w * lam[i] * fq
    contrib *= mesh.areas()[:, None]
    np.add.at(out, mesh.triangles, contrib)
    return out


def integrate_squared_difference(mesh: TriMesh, w: np.ndarray, exact) -> float:
    """Integral of (w_h - exact)^2 with degree-5 quadrature; exact=None for |w|^2."""
    _check_field(mesh, w)
    p = mesh.nodes[mesh.triangles]
    wv = w[mesh.triangles]
    total = np.zeros(mesh.n_triangles)
    for lam, wq in zip(_QL5, _QW5):
        xq = np.einsum("k,tkd->td", lam, p)
        vals = wv @ lam
        if exact is not None:
            vals = vals - exact(xq[:, 0], xq[:, 1])
        total += wq * vals**2
    return float(np.sum(total * mesh.areas()))


# ---------------------------------------------------------------------------
# boundary conditions

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
PERIODIC = "periodic"
_CONDITIONS = (DIRICHLET, NEUMANN, PERIODIC)


class BoundarySpec:
    """Per-variable, per-side boundary conditions for (eta, u, v)."""

    def __init__(self, eta: dict, u: dict, v: dict):
        for var in (eta, u, v):
            for side, cond in var.items():
                if cond not in _CONDITIONS:
                    raise ValueError(f"bad condition {cond!r} on side {side!r}")
        picks = {c for var in (eta, u, v) for c in var.values()}
        if PERIODIC in picks and picks != {PERIODIC}:
            raise ValueError("periodic conditions must apply to every "
                             "variable on every side")
        self.eta = dict(eta)
        self.u = dict(u)
        self.v = dict(v)

    @classmethod
    def uniform(cls, condition: str) -> "BoundarySpec":
        sides = {s: condition for s in ("left", "right", "bottom", "top")}
        return cls(dict(sides), dict(sides), dict(sides))

    @classmethod
    def all_dirichlet(cls):
        return cls.uniform(DIRICHLET)

    @classmethod
    def all_neumann(cls):
        return cls.uniform(NEUMANN)

    @classmethod
    def bi_periodic(cls):
        return cls.uniform(PERIODIC)

    def for_variable(self, name: str) -> dict:
        return {"eta": self.eta, "u": self.u, "v": self.v}[name]

    @property
    def is_periodic(self) -> bool:
        return PERIODIC in self.eta.values()

    def __eq__(self, other):
        return (isinstance(other, BoundarySpec) and self.eta == other.eta
                and self.u == other.u and self.v == other.v)


class Constrainer:
    """Applies one variable's constraints to assembled systems.

    Periodic sides fold slave DOFs into masters through a restriction
    matrix R (A_r = R^T A R); Dirichlet sides are imposed strongly as
    identity rows/columns with zero right-hand side.  On corner nodes
    where Dirichlet and Neumann sides meet, Dirichlet wins.
    """

    def __init__(self, mesh: TriMesh, side_conditions: dict):
        self.mesh = mesh
        self.periodic = PERIODIC in side_conditions.values()
        if self.periodic:
            if not mesh.periodic_map:
                raise ValueError("periodic conditions need a mesh with a "
                                 "periodic_map (see build_periodic_map)")
            n = mesh.n_nodes
            slaves = mesh.periodic_map
            masters = np.array([i for i in range(n) if i not in slaves])
            red = -np.ones(n, dtype=np.int64)
            red[masters] = np.arange(len(masters))
            col = red.copy()
            for s, m in slaves.items():
                col[s] = red[m]
            self.R = sp.csr_matrix(
                (np.ones(n), (np.arange(n), col)), shape=(n, len(masters)))
            self.masters = masters
            self.dirichlet = np.array([], dtype=np.int64)
        else:
            self.R = None
            dir_sides = [s for s, c in side_conditions.items() if c == DIRICHLET]
            self.dirichlet = boundary_nodes(mesh, dir_sides)
        self.n_reduced = (self.R.shape[1] if self.R is not None
                          else mesh.n_nodes)

    def constrain_matrix(self, A: sp.csr_matrix) -> sp.csr_matrix:
        if self.periodic:
            return (self.R.T @ A @ self.R).tocsr()
        if len(self.dirichlet) == 0:
            return A.tocsr()
        n = A.shape[0]
        keep = np.ones(n)
        keep[self.dirichlet] = 0.0
        D = sp.diags(keep)
        eye_fix = sp.coo_matrix(
            (np.ones(len(self.dirichlet)), (self.dirichlet, self.dirichlet)),
            shape=A.shape)
        return (D @ A @ D + eye_fix).tocsr()

    def constrain_rhs(self, b: np.ndarray) -> np.ndarray:
        if self.periodic:
            return self.R.T.dot(b)
        out = b.copy()
        out[self.dirichlet] = 0.0
        return out

    def reduce_field(self, w: np.ndarray) -> np.ndarray:
        """Nodal values -> reduced DOF vector (master values under periodicity)."""
        if self.periodic:
            return w[self.masters]
        return w.copy()

    def expand(self, x: np.ndarray) -> np.ndarray:
        """Reduced solution -> full nodal field."""
        if self.periodic:
            return self.R.dot(x)
        return x.copy()


def apply_constraints(matrix: sp.csr_matrix, rhs: np.ndarray,
                      spec: BoundarySpec, variable: str,
                      mesh: TriMesh):
    """One-shot constraint application; returns (matrix, rhs) plus the
    Constrainer used (needed to expand periodic solutions)."""
    con = Constrainer(mesh, spec.for_variable(variable))
    return con.constrain_matrix(matrix), con.constrain_rhs(rhs), con


def solve_spd(A: sp.csr_matrix, b: np.ndarray, tol: float = 1e-10,
              maxiter: int | None = None) -> np.ndarray:
    """Conjugate-gradient solve of an SPD system to relative residual tol."""
    n = A.shape[0]
    if maxiter is None:
        maxiter = 10 * n
    precond = sp.diags(1.0 / A.diagonal())
    x, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=maxiter, M=precond)
    if info != 0:
        res = np.linalg.norm(A.dot(x) - b)
        nb = np.linalg.norm(b)
        raise SolverError(
            f"CG failed (info={info}); relative residual "
            f"{res / nb if nb else res:.3e} after {maxiter} iterations")
    # polish: guarantee the advertised true-residual tolerance
    r = b - A.dot(x)
    nb = np.linalg.norm(b)
    if nb > 0 and np.linalg.norm(r) / nb > tol:
        dx, info = spla.cg(A, r, rtol=tol, atol=0.0, maxiter=maxiter, M=precond)
        x = x + dx
        r = b - A.dot(x)
        if np.linalg.norm(r) / nb > tol:
            raise SolverError(
                f"CG stagnated at relative residual {np.linalg.norm(r) / nb:.3e}")
    return x
