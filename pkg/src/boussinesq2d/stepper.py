"""Heun (explicit second-order Runge-Kutta) time stepping for the
(eta, u, v) Boussinesq system.

Each step solves, per stage, three mass solves for the auxiliary weak
Laplacians and three Helmholtz-type solves (M + b*K for eta, M + d*K for
u and v).  Two interchangeable update back ends are provided: direct
per-field nodal updates (algorithm 1) and a single block mass system
(algorithm 2); both produce the same trajectory up to solver tolerance.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import TriMesh
from .model import Coefficients
from .assembly import (BoundarySpec, Constrainer, assemble_F, assemble_G,
                       assemble_H, assemble_mass, assemble_stiffness)


class DivergenceError(Exception):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class Operators:
    """Matrices, constraints and factorizations for one mesh + system.

    Assembled once per mesh; `run` rebuilds this object after mesh
    adaptation (and every step when operator reuse is disabled).
    """

    def __init__(self, mesh: TriMesh, coef: Coefficients, bc: BoundarySpec):
        self.mesh = mesh
        self.coef = coef
        self.bc = bc
        self.M = assemble_mass(mesh)
        self.K = assemble_stiffness(mesh)

        # auxiliary (weak Laplacian) solves: plain mass, periodic fold only
        aux_sides = ({s: "periodic" for s in ("left", "right", "bottom", "top")}
                     if bc.is_periodic else {})
        self.con_aux = Constrainer(mesh, aux_sides)
        self._lu_aux = spla.splu(
            self.con_aux.constrain_matrix(self.M).tocsc())

        self.con = {v: Constrainer(mesh, bc.for_variable(v))
                    for v in ("eta", "u", "v")}
        helm = {"eta": self.M + coef.b * self.K,
                "u": self.M + coef.d * self.K,
                "v": self.M + coef.d * self.K}
        self._lu = {v: spla.splu(
            self.con[v].constrain_matrix(helm[v].tocsr()).tocsc())
            for v in ("eta", "u", "v")}

        self._lu_block = None

    def solve_aux(self, rhs: np.ndarray) -> np.ndarray:
        c = self.con_aux
        return c.expand(self._lu_aux.solve(c.constrain_rhs(rhs)))

    def solve_stage(self, var: str, rhs: np.ndarray) -> np.ndarray:
        c = self.con[var]
        return c.expand(self._lu[var].solve(c.constrain_rhs(rhs)))

    def block_mass(self):
        """Block-diagonal system diag(M, M, M) of the matrix-form update,
        factorized lazily and kept for the life of the mesh."""
        if self._lu_block is None:
            Mr = self.con_aux.constrain_matrix(self.M)
            A = sp.block_diag([Mr, Mr, Mr], format="csc")
            self._lu_block = (A, spla.splu(A))
        return self._lu_block

    def integral(self, w: np.ndarray) -> float:
        """Integral of a nodal field over the domain (1^T M w)."""
        return float(self.M.dot(w).sum())


@dataclass
class SimState:
    mesh: TriMesh
    coef: Coefficients
    bc: BoundarySpec
    eta: np.ndarray
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0
    dt: float = 0.1
    ops: Operators | None = None
    # forcing(t) -> (load_eta, load_u, load_v) nodal load vectors, or None
    forcing: object = None

    def operators(self) -> Operators:
        if self.ops is None or self.ops.mesh is not self.mesh:
            self.ops = Operators(self.mesh, self.coef, self.bc)
        return self.ops


@dataclass
class StageWork:
    P: np.ndarray
    Q: np.ndarray
    T: np.ndarray
    Ek1: np.ndarray = None
    Uk1: np.ndarray = None
    Vk1: np.ndarray = None
    Pk1: np.ndarray = None
    Qk1: np.ndarray = None
    Tk1: np.ndarray = None
    Ek2: np.ndarray = None
    Uk2: np.ndarray = None
    Vk2: np.ndarray = None


def compute_aux(state: SimState):
    """Weak discrete Laplacians of (u, v, eta): solve M*P = -K*U etc."""
    ops = state.operators()
    P = ops.solve_aux(-ops.K.dot(state.u))
    Q = ops.solve_aux(-ops.K.dot(state.v))
    T = ops.solve_aux(-ops.K.dot(state.eta))
    return P, Q, T


def _stage_rhs(state, ops, E, U, V, P, Q, T, t_stage):
    a, c = state.coef.a, state.coef.c
    rF = -state.dt * assemble_F(state.mesh, E, U, V, P, Q, a)
    rG = -state.dt * assemble_G(state.mesh, E, U, V, T, c)
    rH = -state.dt * assemble_H(state.mesh, E, U, V, T, c)
    if state.forcing is not None:
        fE, fU, fV = state.forcing(t_stage)
        rF = rF + state.dt * fE
        rG = rG + state.dt * fU
        rH = rH + state.dt * fV
    return rF, rG, rH


def stage1(state: SimState, P, Q, T):
    ops = state.operators()
    rF, rG, rH = _stage_rhs(state, ops, state.eta, state.u, state.v,
                            P, Q, T, state.t)
    return (ops.solve_stage("eta", rF),
            ops.solve_stage("u", rG),
            ops.solve_stage("v", rH))


def stage1_aux(state: SimState, Ek1, Uk1, Vk1):
    """Auxiliary Laplacians of the first-stage increments."""
    ops = state.operators()
    Pk1 = ops.solve_aux(-ops.K.dot(Uk1))
    Qk1 = ops.solve_aux(-ops.K.dot(Vk1))
    Tk1 = ops.solve_aux(-ops.K.dot(Ek1))
    return Pk1, Qk1, Tk1


def stage2(state: SimState, work: StageWork):
    ops = state.operators()
    rF, rG, rH = _stage_rhs(
        state, ops,
        state.eta + work.Ek1, state.u + work.Uk1, state.v + work.Vk1,
        work.P + work.Pk1, work.Q + work.Qk1, work.T + work.Tk1,
        state.t + state.dt)
    return (ops.solve_stage("eta", rF),
            ops.solve_stage("u", rG),
            ops.solve_stage("v", rH))


def update_algorithm1(state: SimState, work: StageWork,
                      via_mass_solve: bool = False) -> SimState:
    """Per-field update X^{n+1} = X^n + (k1 + k2)/2.

    Both sides of the update identity live in the P1 space, so the weak
    (mass-solve) form reduces to nodal addition; the mass-solve path is
    kept behind a flag for cross-checking.
    """
    inc = {"eta": 0.5 * (work.Ek1 + work.Ek2),
           "u": 0.5 * (work.Uk1 + work.Uk2),
           "v": 0.5 * (work.Vk1 + work.Vk2)}
    if via_mass_solve:
        ops = state.operators()
        inc = {k: ops.solve_aux(ops.M.dot(w)) for k, w in inc.items()}
    return replace(state, eta=state.eta + inc["eta"], u=state.u + inc["u"],
                   v=state.v + inc["v"], t=state.t + state.dt)


def update_algorithm2(state: SimState, work: StageWork) -> SimState:
    """Matrix-form update: solve diag(M,M,M) X = B with B the mass-weighted
    stage half-sums, then add the previous state."""
    ops = state.operators()
    _, lu = ops.block_mass()
    half = [0.5 * work.Ek1 + 0.5 * work.Ek2,
            0.5 * work.Uk1 + 0.5 * work.Uk2,
            0.5 * work.Vk1 + 0.5 * work.Vk2]
    con = ops.con_aux
    B = np.concatenate([con.constrain_rhs(ops.M.dot(h)) for h in half])
    X = lu.solve(B)
    nr = con.n_reduced
    incs = [con.expand(X[i * nr:(i + 1) * nr]) for i in range(3)]
    return replace(state, eta=state.eta + incs[0], u=state.u + incs[1],
                   v=state.v + incs[2], t=state.t + state.dt)


def step(state: SimState, algorithm: int = 1) -> SimState:
    """One full RK2 step with the chosen update back end."""
    P, Q, T = compute_aux(state)
    work = StageWork(P=P, Q=Q, T=T)
    work.Ek1, work.Uk1, work.Vk1 = stage1(state, P, Q, T)
    work.Pk1, work.Qk1, work.Tk1 = stage1_aux(state, work.Ek1, work.Uk1,
                                              work.Vk1)
    work.Ek2, work.Uk2, work.Vk2 = stage2(state, work)
    if algorithm == 1:
        return update_algorithm1(state, work)
    if algorithm == 2:
        return update_algorithm2(state, work)
    raise ValueError(f"algorithm must be 1 or 2, got {algorithm}")


def _check_finite(state: SimState, n: int):
    for name, w in (("eta", state.eta), ("u", state.u), ("v", state.v)):
        if not np.all(np.isfinite(w)):
            raise DivergenceError(
                f"non-finite values in {name} at step {n} (t={state.t:g})",
                step=n)


def run(state: SimState, t_end: float, algorithm: int = 1,
        reuse_operators: bool = True, adapt_params=None,
        on_step=None) -> SimState:
    """Advance to t_end; optionally adapt the mesh every
    adapt_params.cadence steps and rebuild operators afterwards."""
    if t_end < state.t:
        raise ValueError("t_end precedes current time")
    if adapt_params is not None and state.bc.is_periodic:
        raise ValueError("mesh adaptation is not supported with periodic "
                         "boundary conditions")
    n = 0
    nsteps = int(round((t_end - state.t) / state.dt))
    while n < nsteps:
        t0 = time.perf_counter()
        if adapt_params is not None and n % max(1, adapt_params.cadence) == 0:
            state = _adapt_state(state, adapt_params)
        if not reuse_operators:
            state.ops = None
        state = step(state, algorithm=algorithm)
        n += 1
        _check_finite(state, n)
        if on_step is not None:
            on_step(state, time.perf_counter() - t0)
    return state


def _adapt_state(state: SimState, params) -> SimState:
    from .adapt import adapt_mesh, transfer
    new_mesh = adapt_mesh(state.mesh, state.eta, params)
    if new_mesh is state.mesh:
        return state
    eta, u, v = transfer(state.mesh, [state.eta, state.u, state.v], new_mesh)
    return replace(state, mesh=new_mesh, eta=eta, u=u, v=v, ops=None)
