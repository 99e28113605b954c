"""Lagrange P1/P2 elements on triangles: quadrature, bases, dof maps, evaluation."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .mesh import ELASTIC, FLUID, GEOM_TOL, Mesh, classify_facets

DEFAULT_ORDER = 8  # 2(s+1)+2 with s = 1
REF_TOL = 1e-12


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, 2) reference coordinates
    weights: np.ndarray  # (nq,), sum to 1/2
    exactness_degree: int


@lru_cache(maxsize=None)
def quadrature_rule(order: int) -> QuadratureRule:
    """Collapsed Gauss rule on the reference triangle, exact to degree ``order``.

    Gauss-Legendre in the first collapsed coordinate and Gauss-Jacobi(1, 0) in
    the second absorb the Duffy Jacobian, so ``ceil((order + 1) / 2)`` points
    per direction suffice.
    """
    if int(order) != order or not 1 <= order <= 10:
        raise ValueError(f"unsupported quadrature order {order!r}; expected 1..10")
    m = (int(order) + 2) // 2
    a, wa = roots_legendre(m)
    b, wb = roots_jacobi(m, 1.0, 0.0)
    A, B = np.meshgrid(a, b, indexing="ij")
    WA, WB = np.meshgrid(wa, wb, indexing="ij")
    y = 0.5 * (1.0 + B)
    x = 0.5 * (1.0 + A) * (1.0 - y)
    pts = np.column_stack([x.ravel(), y.ravel()])
    w = (WA * WB).ravel() / 8.0
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(pts, w, int(order))


@lru_cache(maxsize=None)
def edge_quadrature(order: int = DEFAULT_ORDER):
    """Gauss-Legendre points ``s`` in [0, 1] and weights summing to 1."""
    m = max(1, (int(order) + 2) // 2)
    s, w = roots_legendre(m)
    return 0.5 * (s + 1.0), 0.5 * w


REF_NODES = {
    1: np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    2: np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]),
}

# d(lambda_i)/d(xi, eta) for lambda = (1 - x - y, x, y)
_DLAM = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
_EDGE_PAIRS = ((0, 1), (1, 2), (2, 0))


def n_local(degree: int) -> int:
    return {1: 3, 2: 6}[degree]


def _check_degree(degree):
    if degree not in (1, 2):
        raise ValueError(f"only Lagrange degrees 1 and 2 are supported, got {degree!r}")


def lagrange_basis(degree: int, points):
    """Values and reference gradients of the nodal basis.

    Parameters
    ----------
    degree : {1, 2}
    points : array_like, shape (2,) or (n, 2)
        Reference coordinates inside the unit triangle.

    Returns
    -------
    values : ndarray, shape (n, nloc)
    gradients : ndarray, shape (n, nloc, 2)
    """
    _check_degree(degree)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = pts[:, 0], pts[:, 1]
    if np.any(x < -REF_TOL) or np.any(y < -REF_TOL) or np.any(x + y > 1.0 + REF_TOL):
        raise ValueError("point outside the reference triangle")
    lam = np.column_stack([1.0 - x - y, x, y])
    n = len(pts)
    if degree == 1:
        grads = np.broadcast_to(_DLAM, (n, 3, 2)).copy()
        return lam, grads
    vals = np.empty((n, 6))
    grads = np.empty((n, 6, 2))
    for i in range(3):
        vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        grads[:, i] = (4.0 * lam[:, i] - 1.0)[:, None] * _DLAM[i]
    for k, (i, j) in enumerate(_EDGE_PAIRS):
        vals[:, 3 + k] = 4.0 * lam[:, i] * lam[:, j]
        grads[:, 3 + k] = 4.0 * (lam[:, j][:, None] * _DLAM[i] + lam[:, i][:, None] * _DLAM[j])
    return vals, grads


def lagrange_hessians(degree: int) -> np.ndarray:
    """Constant reference Hessians, shape ``(nloc, 2, 2)``."""
    _check_degree(degree)
    if degree == 1:
        return np.zeros((3, 2, 2))
    H = np.empty((6, 2, 2))
    for i in range(3):
        H[i] = 4.0 * np.outer(_DLAM[i], _DLAM[i])
    for k, (i, j) in enumerate(_EDGE_PAIRS):
        H[3 + k] = 4.0 * (np.outer(_DLAM[i], _DLAM[j]) + np.outer(_DLAM[j], _DLAM[i]))
    return H


def affine_maps(mesh: Mesh, cells=None):
    """Origins ``(n, 2)``, Jacobians ``(n, 2, 2)``, inverses and determinants."""
    tri = mesh.triangles if cells is None else mesh.triangles[cells]
    p = mesh.vertices[tri]
    origin = p[:, 0]
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    inv = np.empty_like(J)
    inv[:, 0, 0] = J[:, 1, 1] / det
    inv[:, 1, 1] = J[:, 0, 0] / det
    inv[:, 0, 1] = -J[:, 0, 1] / det
    inv[:, 1, 0] = -J[:, 1, 0] / det
    return origin, J, inv, det


@dataclass(frozen=True, eq=False)
class DofMap:
    """Continuous Lagrange space on one subdomain.

    Global dof of component ``c`` at scalar node ``i`` is ``c * n_nodes + i``.
    """

    mesh: Mesh
    tag: int
    degree: int
    ncomp: int
    cells: np.ndarray  # triangle ids of the submesh
    cell_nodes: np.ndarray  # (nel, nloc) scalar node ids
    node_coords: np.ndarray  # (n_nodes, 2)
    vertex_node: np.ndarray  # global vertex id -> node id, or -1
    edge_node: np.ndarray  # global edge id -> node id, or -1 (degree 2)
    dirichlet_nodes: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.node_coords)

    @property
    def ndofs(self) -> int:
        return self.ncomp * self.n_nodes

    @property
    def nloc(self) -> int:
        return self.cell_nodes.shape[1]

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def cell_dofs(self) -> np.ndarray:
        """``(nel, ncomp * nloc)``; component-major local ordering."""
        return np.concatenate([self.cell_nodes + c * self.n_nodes for c in range(self.ncomp)], axis=1)

    @property
    def dirichlet_dofs(self) -> np.ndarray:
        return np.concatenate([self.dirichlet_nodes + c * self.n_nodes for c in range(self.ncomp)])

    def with_components(self, ncomp: int) -> "DofMap":
        return DofMap(self.mesh, self.tag, self.degree, ncomp, self.cells, self.cell_nodes,
                      self.node_coords, self.vertex_node, self.edge_node, self.dirichlet_nodes)

    def local_cell(self, triangle_ids) -> np.ndarray:
        """Position of mesh triangles inside ``cells``."""
        lookup = -np.ones(self.mesh.n_triangles, dtype=np.int64)
        lookup[self.cells] = np.arange(self.n_cells)
        out = lookup[np.asarray(triangle_ids)]
        if np.any(out < 0):
            raise ValueError("triangle does not belong to this subdomain")
        return out


def _points_on_segments(points, a, b):
    """Boolean ``(npts,)``: point lies on any segment ``a[i]--b[i]``."""
    hit = np.zeros(len(points), dtype=bool)
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    for start in range(0, len(points), 4096):
        P = points[start:start + 4096]
        rel = P[:, None, :] - a[None]
        s = np.clip(np.einsum("pij,ij->pi", rel, d) / dd, 0.0, 1.0)
        dist = np.linalg.norm(rel - s[..., None] * d[None], axis=2)
        hit[start:start + 4096] = np.any(dist <= GEOM_TOL, axis=1)
    return hit


def build_dof_map(mesh: Mesh, tag: int, degree: int, ncomp: int = 1, dirichlet_field: str | None = None) -> DofMap:
    """Number the nodes of the degree-``degree`` space on the ``tag`` submesh.

    ``dirichlet_field`` selects which Dirichlet facet set (``"d"``, ``"J"``,
    ``"u"``) constrains the space; ``None`` means no constraint. Nodes are
    matched to Dirichlet facets geometrically, so corner nodes belong to both
    adjacent facets.
    """
    if tag not in (ELASTIC, FLUID):
        raise ValueError(f"unknown subdomain tag {tag!r}")
    _check_degree(degree)
    cells = mesh.subdomain(tag)
    tri = mesh.triangles[cells]
    vused = np.unique(tri)
    vertex_node = -np.ones(mesh.n_vertices, dtype=np.int64)
    vertex_node[vused] = np.arange(len(vused))
    coords = [mesh.vertices[vused]]
    cell_nodes = [vertex_node[tri]]
    edge_node = -np.ones(mesh.n_edges, dtype=np.int64)
    if degree == 2:
        te = mesh.tri_edges[cells]
        eused = np.unique(te)
        edge_node[eused] = len(vused) + np.arange(len(eused))
        e = mesh.edges[eused]
        coords.append(0.5 * (mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]]))
        cell_nodes.append(edge_node[te])
    node_coords = np.vstack(coords)
    cell_nodes = np.hstack(cell_nodes)

    if dirichlet_field is None:
        dnodes = np.zeros(0, dtype=np.int64)
    else:
        facets = classify_facets(mesh).dirichlet[dirichlet_field]
        ends = mesh.edges[facets]
        a = mesh.vertices[ends[:, 0]]
        b = mesh.vertices[ends[:, 1]]
        dnodes = np.flatnonzero(_points_on_segments(node_coords, a, b)) if len(facets) else np.zeros(0, dtype=np.int64)

    for arr in (cells, cell_nodes, node_coords, vertex_node, edge_node, dnodes):
        arr.setflags(write=False)
    return DofMap(mesh, tag, degree, ncomp, cells, cell_nodes, node_coords, vertex_node, edge_node, dnodes)


def interpolate_nodal(field, dmap: DofMap, t: float = 0.0) -> np.ndarray:
    """Nodal interpolant coefficients of ``field(t, points)``.

    ``field`` returns ``(npts,)`` for scalar or ``(npts, ncomp)`` for vector spaces.
    """
    vals = np.asarray(field(t, dmap.node_coords), dtype=float)
    if vals.ndim == 0:
        vals = np.full(dmap.n_nodes, float(vals))
    vals = vals.reshape(dmap.n_nodes, -1)
    if vals.shape[1] != dmap.ncomp:
        raise ValueError(f"field has {vals.shape[1]} components, space has {dmap.ncomp}")
    return np.ascontiguousarray(vals.T).ravel()


def _reference_coords(dmap: DofMap, cell: int, point) -> np.ndarray:
    origin, _, inv, _ = affine_maps(dmap.mesh, dmap.cells[[cell]])
    return inv[0] @ (np.asarray(point, float) - origin[0])


def eval_discrete(coeffs, dmap: DofMap, cell: int, point, tol: float = 1e-10):
    """Value and physical gradient of a discrete field at a point of a cell.

    ``cell`` indexes ``dmap.cells``. Returns ``(value, gradient)`` with shapes
    ``(ncomp,)`` and ``(ncomp, 2)``.
    """
    if not 0 <= int(cell) < dmap.n_cells:
        raise IndexError(f"cell {cell} out of range")
    ref = _reference_coords(dmap, cell, point)
    if ref[0] < -tol or ref[1] < -tol or ref.sum() > 1.0 + tol:
        raise ValueError("point outside element")
    ref = np.clip(ref, 0.0, 1.0)
    if ref.sum() > 1.0:
        ref = ref / ref.sum()
    phi, dphi = lagrange_basis(dmap.degree, ref)
    _, _, inv, _ = affine_maps(dmap.mesh, dmap.cells[[cell]])
    g = dphi[0] @ inv[0]  # (nloc, 2)
    c = np.asarray(coeffs, float).reshape(dmap.ncomp, dmap.n_nodes)[:, dmap.cell_nodes[cell]]
    return c @ phi[0], c @ g


@dataclass(frozen=True, eq=False)
class CellValues:
    """Basis data at volume quadrature points of every cell of a dof map."""

    points: np.ndarray  # (nel, nq, 2) physical points
    wdet: np.ndarray  # (nel, nq) weights times |det J|
    phi: np.ndarray  # (nq, nloc)
    dphi: np.ndarray  # (nel, nq, nloc, 2)
    hess: np.ndarray  # (nel, nloc, 2, 2)


def cell_values(dmap: DofMap, order: int = DEFAULT_ORDER) -> CellValues:
    rule = quadrature_rule(order)
    origin, J, inv, det = affine_maps(dmap.mesh, dmap.cells)
    pts = origin[:, None, :] + np.einsum("eij,qj->eqi", J, rule.points)
    wdet = np.abs(det)[:, None] * rule.weights[None, :]
    phi, dref = lagrange_basis(dmap.degree, rule.points)
    dphi = np.einsum("qak,ekj->eqaj", dref, inv)
    H = lagrange_hessians(dmap.degree)
    hess = np.einsum("eki,akl,elj->eaij", inv, H, inv)
    return CellValues(pts, wdet, phi, dphi, hess)


def evaluate_at_cells(coeffs, dmap: DofMap, cv: CellValues):
    """Values ``(nel, nq, ncomp)``, gradients ``(nel, nq, ncomp, 2)`` and
    Hessians ``(nel, ncomp, 2, 2)`` (piecewise constant) of a discrete field."""
    c = np.asarray(coeffs, float).reshape(dmap.ncomp, dmap.n_nodes)[:, dmap.cell_nodes]  # (ncomp, nel, nloc)
    vals = np.einsum("cea,qa->eqc", c, cv.phi)
    grads = np.einsum("cea,eqak->eqck", c, cv.dphi)
    hess = np.einsum("cea,eakl->eckl", c, cv.hess)
    return vals, grads, hess


def locate_on_edge(mesh: Mesh, triangle: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Reference coordinates of physical ``points (n, nq, 2)`` in ``triangle (n,)``."""
    origin, _, inv, _ = affine_maps(mesh, triangle)
    ref = np.einsum("eij,eqj->eqi", inv, points - origin[:, None, :])
    return np.clip(ref, 0.0, 1.0)


def edge_points(mesh: Mesh, edges: np.ndarray, order: int = DEFAULT_ORDER):
    """Physical quadrature points ``(ne, nq, 2)`` and weights times length ``(ne, nq)``."""
    s, w = edge_quadrature(order)
    a = mesh.vertices[mesh.edges[edges, 0]]
    b = mesh.vertices[mesh.edges[edges, 1]]
    pts = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    wl = mesh.edge_lengths[edges][:, None] * w[None, :]
    return pts, wl


def trace_basis(dmap: DofMap, triangles: np.ndarray, points: np.ndarray):
    """Basis values ``(n, nq, nloc)``, physical gradients ``(n, nq, nloc, 2)`` and
    global scalar node ids ``(n, nloc)`` of ``dmap`` restricted to edge points."""
    ref = locate_on_edge(dmap.mesh, triangles, points)
    n, nq, _ = ref.shape
    phi, dref = lagrange_basis(dmap.degree, ref.reshape(-1, 2))
    _, _, inv, _ = affine_maps(dmap.mesh, triangles)
    phi = phi.reshape(n, nq, -1)
    dphi = np.einsum("eqak,ekj->eqaj", dref.reshape(n, nq, -1, 2), inv)
    nodes = dmap.cell_nodes[dmap.local_cell(triangles)]
    return phi, dphi, nodes


def evaluate_trace(coeffs, dmap: DofMap, triangles: np.ndarray, points: np.ndarray):
    """Values ``(n, nq, ncomp)`` and gradients ``(n, nq, ncomp, 2)`` on edge points
    taken from the given owning triangles."""
    phi, dphi, nodes = trace_basis(dmap, triangles, points)
    c = np.asarray(coeffs, float).reshape(dmap.ncomp, dmap.n_nodes)[:, nodes]  # (ncomp, n, nloc)
    vals = np.einsum("cea,eqa->eqc", c, phi)
    grads = np.einsum("cea,eqak->eqck", c, dphi)
    return vals, grads
