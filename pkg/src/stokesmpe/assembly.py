"""Bilinear forms of the Stokes-MPE problem and the implicit-Euler step system.

Matrices are oriented ``rows = test dofs``, ``cols = trial dofs``. The global
unknown is ordered ``(d, p_J, u, p)``; within ``p_J`` the exchanging network
``E`` is the last component.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sp

from . import kernels
from .fem import (DEFAULT_ORDER, CellValues, DofMap, build_dof_map, cell_values, edge_points,
                  interpolate_nodal, trace_basis)
from .mesh import ELASTIC, FLUID, FacetSet, Mesh, classify_facets

FORMS = ("a_el", "a_f", "m_J", "a_tilde_J", "b_J", "b_f")
FIELDS = ("d", "pJ", "u", "p")


@dataclass(frozen=True)
class ParameterSet:
    """Physical coefficients; per-network arrays are indexed with ``E`` last."""

    mu_el: float = 1.0
    lam: float = 1.0
    mu_f: float = 1.0
    alpha: tuple = (0.5,)
    c: tuple = (1.0,)
    kappa: tuple = (1.0,)
    mu_net: tuple = (1.0,)
    beta_e: tuple = (1.0,)
    beta: tuple = ((0.0,),)

    def __post_init__(self):
        n = len(self.alpha)
        for name in ("c", "kappa", "mu_net", "beta_e"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} must have one entry per network ({n})")
        beta = np.asarray(self.beta, dtype=float)
        if beta.shape != (n, n):
            raise ValueError(f"beta must be {n}x{n}")
        if self.mu_el <= 0 or self.mu_f <= 0:
            raise ValueError("mu_el and mu_f must be positive")
        if min(self.kappa) <= 0 or min(self.mu_net) <= 0:
            raise ValueError("kappa and mu_net must be positive")
        if min(self.c) < 0 or min(self.beta_e) < 0 or beta.min() < 0:
            raise ValueError("storage and exchange coefficients must be nonnegative")
        if min(self.alpha) < 0 or max(self.alpha) > 1:
            raise ValueError("Biot coefficients must lie in [0, 1]")

    @classmethod
    def unit(cls, alpha_e: float = 0.5, n_networks: int = 1, **overrides) -> "ParameterSet":
        """All coefficients equal to one except the Biot coefficient of ``E``."""
        ones = (1.0,) * n_networks
        alpha = ones[:-1] + (float(alpha_e),)
        beta = tuple(tuple(0.0 if i == j else 1.0 for j in range(n_networks)) for i in range(n_networks))
        kw = dict(alpha=alpha, c=ones, kappa=ones, mu_net=ones, beta_e=ones, beta=beta)
        kw.update(overrides)
        return cls(**kw)

    @property
    def n_networks(self) -> int:
        return len(self.alpha)

    @property
    def permeability(self) -> np.ndarray:
        """``kappa_j / mu_j`` per network."""
        return np.asarray(self.kappa) / np.asarray(self.mu_net)

    @property
    def beta_matrix(self) -> np.ndarray:
        return np.asarray(self.beta, dtype=float)


class Sources(NamedTuple):
    """Source callables ``f(t, points) -> values``; ``None`` means zero."""

    f_el: Callable | None = None
    g: Callable | None = None
    f_f: Callable | None = None


@dataclass(frozen=True, eq=False)
class Spaces:
    d: DofMap
    pJ: DofMap
    u: DofMap
    p: DofMap

    def __iter__(self):
        return iter((self.d, self.pJ, self.u, self.p))

    @property
    def sizes(self) -> dict:
        return {name: m.ndofs for name, m in zip(FIELDS, self)}

    @property
    def layout(self) -> dict:
        out, start = {}, 0
        for name, m in zip(FIELDS, self):
            out[name] = slice(start, start + m.ndofs)
            start += m.ndofs
        return out

    @property
    def ndofs(self) -> int:
        return sum(m.ndofs for m in self)


def make_spaces(mesh: Mesh, n_networks: int = 1) -> Spaces:
    """Taylor-Hood velocity/pressure and quadratic poroelastic fields (s = 1)."""
    return Spaces(
        d=build_dof_map(mesh, ELASTIC, 2, 2, dirichlet_field="d"),
        pJ=build_dof_map(mesh, ELASTIC, 2, n_networks, dirichlet_field="J"),
        u=build_dof_map(mesh, FLUID, 2, 2, dirichlet_field="u"),
        p=build_dof_map(mesh, FLUID, 1, 1),
    )


@dataclass(eq=False)
class AssembledSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    layout: dict
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(len(self.rhs), dtype=bool)
        mask[self.constrained] = False
        return mask


def _scatter(local: np.ndarray, rows: np.ndarray, cols: np.ndarray, shape) -> sp.csr_matrix:
    nel, R, C = local.shape
    I = np.broadcast_to(rows[:, :, None], (nel, R, C)).ravel()
    J = np.broadcast_to(cols[:, None, :], (nel, R, C)).ravel()
    return sp.coo_matrix((local.ravel(), (I, J)), shape=shape).tocsr()


def _scalar_blocks(blocks: dict, nt: int, ns: int, ct: int, cs: int) -> np.ndarray:
    """Assemble ``{(i, j): (nel, nt, ns)}`` component blocks into local matrices."""
    nel = next(iter(blocks.values())).shape[0]
    out = np.zeros((nel, ct, nt, cs, ns))
    for (i, j), blk in blocks.items():
        out[:, i, :, j, :] += blk
    return out.reshape(nel, ct * nt, cs * ns)


def _same_cells(trial: DofMap, test: DofMap):
    if trial.tag != test.tag or trial.mesh is not test.mesh:
        raise ValueError("trial and test spaces live on different subdomains")


def assemble_form(form: str, trial: DofMap, test: DofMap, params: ParameterSet,
                  order: int = DEFAULT_ORDER) -> sp.csr_matrix:
    """Matrix of one bilinear form, rows indexed by ``test`` dofs."""
    if form not in FORMS:
        raise ValueError(f"unknown form {form!r}; expected one of {FORMS}")
    _same_cells(trial, test)
    expect = {
        "a_el": (ELASTIC, 2, 2), "a_f": (FLUID, 2, 2),
        "m_J": (ELASTIC, params.n_networks, params.n_networks),
        "a_tilde_J": (ELASTIC, params.n_networks, params.n_networks),
        "b_J": (ELASTIC, params.n_networks, 2), "b_f": (FLUID, 1, 2),
    }[form]
    if (test.tag, trial.ncomp, test.ncomp) != expect:
        raise ValueError(f"{form}: expected (subdomain, trial ncomp, test ncomp) = {expect}, "
                         f"got {(test.tag, trial.ncomp, test.ncomp)}")
    cv_t = cell_values(test, order)
    cv_s = cv_t if trial.degree == test.degree else cell_values(trial, order)
    nt, ns = test.nloc, trial.nloc
    shape = (test.ndofs, trial.ndofs)

    if form in ("a_el", "a_f"):
        mu, lam = (params.mu_el, params.lam) if form == "a_el" else (params.mu_f, 0.0)
        G = kernels.grad_outer(cv_t.dphi, cv_s.dphi, cv_t.wdet)
        lap = G[..., 0, 0] + G[..., 1, 1]
        blocks = {}
        for i in range(2):
            for j in range(2):
                blk = mu * G[..., j, i] + lam * G[..., i, j]
                if i == j:
                    blk = blk + mu * lap
                blocks[i, j] = blk
        local = _scalar_blocks(blocks, nt, ns, 2, 2)
    elif form == "m_J":
        M = kernels.mass(cv_t.phi, cv_s.phi, cv_t.wdet)
        nJ = params.n_networks
        local = _scalar_blocks({(j, j): params.c[j] * M for j in range(nJ)}, nt, ns, nJ, nJ)
    elif form == "a_tilde_J":
        M = kernels.mass(cv_t.phi, cv_s.phi, cv_t.wdet)
        G = kernels.grad_outer(cv_t.dphi, cv_s.dphi, cv_t.wdet)
        K = G[..., 0, 0] + G[..., 1, 1]
        beta = params.beta_matrix
        nJ = params.n_networks
        blocks = {}
        for j in range(nJ):
            diag = params.permeability[j] * K + (params.beta_e[j] + beta[:, j].sum()) * M
            blocks[j, j] = diag
            for k in range(nJ):
                if k != j and beta[k, j] != 0.0:
                    blocks[j, k] = blocks.get((j, k), 0.0) - beta[k, j] * M
        local = _scalar_blocks(blocks, nt, ns, nJ, nJ)
    else:  # b_J, b_f: -(alpha q, div v)
        alphas = params.alpha if form == "b_J" else (1.0,)
        V = kernels.val_grad(cv_s.phi, cv_t.dphi, cv_t.wdet)  # (nel, ns, nt, 2)
        blocks = {}
        for i in range(2):
            for j, a in enumerate(alphas):
                blocks[i, j] = -a * np.transpose(V[..., i], (0, 2, 1))
        local = _scalar_blocks(blocks, nt, ns, 2, len(alphas))
    return _scatter(local, test.cell_dofs(), trial.cell_dofs(), shape)


def assemble_interface_coupling(side: str, pressure: DofMap, vector: DofMap, facets: FacetSet,
                                order: int = DEFAULT_ORDER) -> sp.csr_matrix:
    """``int_Sigma q_E (v . n_side)``; rows are ``vector`` dofs, cols ``pressure`` dofs.

    The traced pressure is the last component (network ``E``) of ``pressure``.
    """
    if side not in ("el", "f"):
        raise ValueError(f"side must be 'el' or 'f', got {side!r}")
    if len(facets.interface) == 0:
        raise ValueError("the facet set has no interface edges")
    if pressure.tag != ELASTIC or vector.ncomp != 2:
        raise ValueError("pressure must live on the elastic submesh and vector must have 2 components")
    want = ELASTIC if side == "el" else FLUID
    if vector.tag != want:
        raise ValueError(f"vector space for side {side!r} must live on that subdomain")
    mesh = pressure.mesh
    edges = facets.interface
    owners = mesh.edge_owners[edges]
    pts, wl = edge_points(mesh, edges, order)
    normal = facets.normals[edges] if side == "el" else -facets.normals[edges]
    psi, _, pnodes = trace_basis(pressure, owners[:, 0], pts)
    phi, _, vnodes = trace_basis(vector, owners[:, 0 if side == "el" else 1], pts)
    base = np.einsum("eq,eqa,eqb->eab", wl, phi, psi)  # (ne, nv, np)
    local = np.concatenate([base * normal[:, i, None, None] for i in range(2)], axis=1)
    rows = np.concatenate([vnodes + i * vector.n_nodes for i in range(2)], axis=1)
    cols = pnodes + (pressure.ncomp - 1) * pressure.n_nodes
    return _scatter(local, rows, cols, (vector.ndofs, pressure.ndofs))


def load_vector(f: Callable | None, dmap: DofMap, t: float, cv: CellValues | None = None) -> np.ndarray:
    """``(f(t), phi_i)`` for every dof of ``dmap``."""
    if f is None:
        return np.zeros(dmap.ndofs)
    cv = cv if cv is not None else cell_values(dmap)
    nel, nq, _ = cv.points.shape
    vals = np.asarray(f(t, cv.points.reshape(-1, 2)), dtype=float).reshape(nel, nq, -1)
    if vals.shape[2] != dmap.ncomp:
        raise ValueError(f"source has {vals.shape[2]} components, space has {dmap.ncomp}")
    local = np.einsum("eq,eqc,qa->eca", cv.wdet, vals, cv.phi).reshape(nel, -1)
    return np.bincount(dmap.cell_dofs().ravel(), weights=local.ravel(), minlength=dmap.ndofs)


class Discretization:
    """Forms of one Stokes-MPE configuration, assembled once and reused per step."""

    def __init__(self, mesh: Mesh, params: ParameterSet, order: int = DEFAULT_ORDER):
        self.mesh = mesh
        self.params = params
        self.order = order
        self.facets = classify_facets(mesh)
        self.spaces = make_spaces(mesh, params.n_networks)
        self.layout = self.spaces.layout
        self.ndofs = self.spaces.ndofs
        self._cv = {}

    def cell_values(self, name: str) -> CellValues:
        if name not in self._cv:
            self._cv[name] = cell_values(getattr(self.spaces, name), self.order)
        return self._cv[name]

    @cached_property
    def forms(self) -> dict:
        s, prm = self.spaces, self.params
        return {
            "a_el": assemble_form("a_el", s.d, s.d, prm, self.order),
            "a_f": assemble_form("a_f", s.u, s.u, prm, self.order),
            "m_J": assemble_form("m_J", s.pJ, s.pJ, prm, self.order),
            "a_tilde_J": assemble_form("a_tilde_J", s.pJ, s.pJ, prm, self.order),
            "b_J": assemble_form("b_J", s.pJ, s.d, prm, self.order),
            "b_f": assemble_form("b_f", s.p, s.u, prm, self.order),
            "J_el": assemble_interface_coupling("el", s.pJ, s.d, self.facets, self.order),
            "J_f": assemble_interface_coupling("f", s.pJ, s.u, self.facets, self.order),
        }

    def matrix(self, dt: float) -> sp.csr_matrix:
        """Unconstrained operator of one implicit-Euler step."""
        if not dt > 0:
            raise ValueError(f"time step must be positive, got {dt!r}")
        F = self.forms
        coupling = (F["b_J"] + F["J_el"]).T  # (pJ, d)
        blocks = [
            [F["a_el"], F["b_J"] + F["J_el"], None, None],
            [-coupling / dt, F["m_J"] / dt + F["a_tilde_J"], -F["J_f"].T, None],
            [None, F["J_f"], F["a_f"], F["b_f"]],
            [None, None, F["b_f"].T, None],
        ]
        sizes = [m.ndofs for m in self.spaces]
        for i, row in enumerate(blocks):
            for j, blk in enumerate(row):
                if blk is None:
                    blocks[i][j] = sp.csr_matrix((sizes[i], sizes[j]))
        return sp.bmat(blocks, format="csr")

    def split(self, x: np.ndarray) -> dict:
        return {name: x[sl] for name, sl in self.layout.items()}

    def join(self, d, pJ, u, p) -> np.ndarray:
        x = np.zeros(self.ndofs)
        for name, v in zip(FIELDS, (d, pJ, u, p)):
            x[self.layout[name]] = v
        return x

    def source_loads(self, sources: Sources, t: float) -> dict:
        return {
            "d": load_vector(sources.f_el, self.spaces.d, t, self.cell_values("d")),
            "pJ": load_vector(sources.g, self.spaces.pJ, t, self.cell_values("pJ")),
            "u": load_vector(sources.f_f, self.spaces.u, t, self.cell_values("u")),
        }

    def rhs(self, prev: np.ndarray, dt: float, t_n: float, sources: Sources) -> np.ndarray:
        if prev.shape != (self.ndofs,):
            raise ValueError(f"previous state has shape {prev.shape}, expected ({self.ndofs},)")
        F = self.forms
        old = self.split(prev)
        loads = self.source_loads(sources, t_n)
        b = np.zeros(self.ndofs)
        b[self.layout["d"]] = loads["d"]
        b[self.layout["pJ"]] = (loads["pJ"] + F["m_J"] @ old["pJ"] / dt
                                - (F["b_J"] + F["J_el"]).T @ old["d"] / dt)
        b[self.layout["u"]] = loads["u"]
        return b

    def dirichlet(self, boundary: dict | None, t: float):
        """Constrained global indices and their nodal boundary values at time ``t``."""
        idx, vals = [], []
        for name in ("d", "pJ", "u"):
            dmap = getattr(self.spaces, name)
            dofs = dmap.dirichlet_dofs
            fn = (boundary or {}).get(name)
            if fn is None:
                v = np.zeros(len(dofs))
            else:
                nodes = dmap.dirichlet_nodes
                raw = np.asarray(fn(t, dmap.node_coords[nodes]), dtype=float).reshape(len(nodes), -1)
                if raw.shape[1] != dmap.ncomp:
                    raise ValueError(f"boundary data for {name} has {raw.shape[1]} components, expected {dmap.ncomp}")
                v = raw.T.ravel()
            idx.append(dofs + self.layout[name].start)
            vals.append(v)
        return np.concatenate(idx), np.concatenate(vals)


def assemble_step_system(disc: Discretization, prev: np.ndarray, dt: float, t_n: float,
                         sources: Sources = Sources()) -> AssembledSystem:
    """Unconstrained step system for the unknowns at ``t_n`` given the state at ``t_{n-1}``."""
    A = disc.matrix(dt)
    return AssembledSystem(A, disc.rhs(prev, dt, t_n, sources), disc.layout)


def constrain_matrix(A: sp.csr_matrix, constrained: np.ndarray) -> sp.csr_matrix:
    """Zero constrained rows and columns and put ones on their diagonal."""
    free = np.ones(A.shape[0])
    free[constrained] = 0.0
    D = sp.diags(free)
    return (D @ A @ D + sp.diags(1.0 - free)).tocsr()


def lift_rhs(A: sp.csr_matrix, rhs: np.ndarray, constrained: np.ndarray, values: np.ndarray) -> np.ndarray:
    g = np.zeros(len(rhs))
    g[constrained] = values
    out = rhs - A @ g
    out[constrained] = values
    return out


def apply_dirichlet(system: AssembledSystem, disc: Discretization, boundary: dict | None,
                    t_n: float) -> AssembledSystem:
    """Row replacement with column elimination of the Dirichlet dofs."""
    idx, vals = disc.dirichlet(boundary, t_n)
    return AssembledSystem(
        constrain_matrix(system.matrix, idx),
        lift_rhs(system.matrix, system.rhs, idx, vals),
        system.layout, idx, vals,
    )


def interpolate_state(disc: Discretization, fields: dict, t: float) -> np.ndarray:
    """Global vector of nodal interpolants; ``fields`` maps names to callables."""
    parts = []
    for name, dmap in zip(FIELDS, disc.spaces):
        fn = fields.get(name)
        parts.append(np.zeros(dmap.ndofs) if fn is None else interpolate_nodal(fn, dmap, t))
    return disc.join(*parts)
