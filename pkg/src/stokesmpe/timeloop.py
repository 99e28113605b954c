"""Sparse direct solves and the implicit-Euler time loop."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (Discretization, Sources, constrain_matrix, interpolate_state, lift_rhs,
                       load_vector)

INITIAL_DISPLACEMENT = ("elastic_solve", "interpolate")


class SingularMatrixError(RuntimeError):
    """Raised when a factorization detects a singular matrix."""

    def __init__(self, message: str, step: int | None = None):
        self.step = step
        if step is not None:
            message = f"time step {step}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class TimeGrid:
    T: float
    dt: float

    def __post_init__(self):
        if not (self.dt > 0 and self.T > 0):
            raise ValueError("T and dt must be positive")
        ratio = self.T / self.dt
        if abs(ratio - round(ratio)) > 1e-10 * ratio or round(ratio) < 1:
            raise ValueError(f"T/dt = {ratio!r} is not a positive integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def nodes(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)


class DirectSolver:
    """Sparse LU (COLAMD ordering, partial pivoting) factorized once, solved many times."""

    def __init__(self, matrix):
        A = sp.csc_matrix(matrix, dtype=float)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        self.matrix = A
        try:
            self._lu = spla.splu(A, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SingularMatrixError(str(exc)) from None
        if not np.all(np.isfinite(self._lu.U.diagonal())):
            raise SingularMatrixError("non-finite pivot")

    def solve(self, rhs):
        b = np.asarray(rhs, dtype=float)
        if b.shape != (self.matrix.shape[0],):
            raise ValueError(f"rhs has shape {b.shape}, expected ({self.matrix.shape[0]},)")
        x = self._lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise SingularMatrixError("solution is not finite")
        nb = np.linalg.norm(b)
        res = np.linalg.norm(self.matrix @ x - b)
        return x, (res / nb if nb > 0 else res)


def sparse_solve(matrix, rhs):
    """Solve ``matrix x = rhs``; returns ``(x, relative residual)``."""
    return DirectSolver(matrix).solve(rhs)


@dataclass(eq=False)
class StateTrajectory:
    disc: Discretization
    grid: TimeGrid
    states: np.ndarray  # (N_T + 1, ndofs)
    residuals: list = field(default_factory=list)  # relative algebraic residual per step
    galerkin: list = field(default_factory=list)  # Galerkin-orthogonality residual per step

    def __len__(self):
        return len(self.states)

    @property
    def layout(self) -> dict:
        return self.disc.layout

    def field(self, name: str, n: int) -> np.ndarray:
        return self.states[n, self.disc.layout[name]]


def elastic_initial_displacement(disc: Discretization, pJ0: np.ndarray, t0: float,
                                 sources: Sources, boundary: dict | None) -> np.ndarray:
    """Displacement in equilibrium with ``pJ0``: solves the elasticity row at ``t0``."""
    F = disc.forms
    rhs = load_vector(sources.f_el, disc.spaces.d, t0, disc.cell_values("d")) - (F["b_J"] + F["J_el"]) @ pJ0
    dmap = disc.spaces.d
    idx = dmap.dirichlet_dofs
    fn = (boundary or {}).get("d")
    if fn is None:
        vals = np.zeros(len(idx))
    else:
        nodes = dmap.dirichlet_nodes
        vals = np.asarray(fn(t0, dmap.node_coords[nodes]), float).reshape(len(nodes), -1).T.ravel()
    A = F["a_el"]
    x, _ = sparse_solve(constrain_matrix(A, idx), lift_rhs(A, rhs, idx, vals))
    return x


def run_time_loop(disc: Discretization, grid: TimeGrid, sources: Sources = Sources(),
                  initial: dict | None = None, boundary: dict | None = None,
                  initial_displacement: str = "elastic_solve") -> StateTrajectory:
    """Implicit-Euler trajectory; node 0 holds the initial data.

    ``initial`` and ``boundary`` map field names (``d``, ``pJ``, ``u``, ``p``) to
    callables ``f(t, points)``. ``u`` and ``p`` initial data are only stored for
    error reporting. With ``initial_displacement="elastic_solve"`` the initial
    displacement is the discrete equilibrium for the interpolated initial pressures.
    """
    from .estimators import galerkin_orthogonality_residual

    if initial_displacement not in INITIAL_DISPLACEMENT:
        raise ValueError(f"initial_displacement must be one of {INITIAL_DISPLACEMENT}")
    initial = initial or {}
    t = grid.nodes
    x0 = interpolate_state(disc, initial, t[0])
    if initial_displacement == "elastic_solve":
        x0[disc.layout["d"]] = elastic_initial_displacement(
            disc, x0[disc.layout["pJ"]], t[0], sources, boundary)

    A = disc.matrix(grid.dt)
    idx, _ = disc.dirichlet(boundary, t[0])
    try:
        solver = DirectSolver(constrain_matrix(A, idx))
    except SingularMatrixError as exc:
        raise SingularMatrixError(str(exc), step=1) from None
    free = np.ones(disc.ndofs, dtype=bool)
    free[idx] = False

    states = np.zeros((grid.n_steps + 1, disc.ndofs))
    states[0] = x0
    traj = StateTrajectory(disc, grid, states)
    for n in range(1, grid.n_steps + 1):
        rhs = disc.rhs(states[n - 1], grid.dt, t[n], sources)
        idx, vals = disc.dirichlet(boundary, t[n])
        try:
            x, relres = solver.solve(lift_rhs(A, rhs, idx, vals))
        except SingularMatrixError as exc:
            raise SingularMatrixError(str(exc), step=n) from None
        states[n] = x
        traj.residuals.append(relres)
        traj.galerkin.append(galerkin_orthogonality_residual(A, rhs, x, free))
    return traj
