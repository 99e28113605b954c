"""Triangulations of the two-subdomain geometry and their facet classification.

The geometry is ``Omega_el = (-0.5, 0) x (0, 0.5)`` (poroelastic) next to
``Omega_f = (0, 0.5) x (0, 0.5)`` (Stokes), glued along the interface
``Sigma = {0} x (0, 0.5)``. Interface vertices are stored once and shared by
both submeshes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ELASTIC = 0
FLUID = 1
SUBDOMAIN_NAMES = {ELASTIC: "elastic", FLUID: "fluid"}

# edge classification tags
INTERIOR_ELASTIC = 0
INTERIOR_FLUID = 1
INTERFACE = 2
BOUNDARY = 3

GEOM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation with subdomain tags and edge connectivity.

    Local edge ``k`` of a triangle joins its vertices ``k`` and ``(k + 1) % 3``.
    ``edge_owners[e, 0]`` is the triangle whose outward normal on ``e`` is
    ``edge_normals[e]``; for interface edges it is always the elastic owner,
    so ``edge_normals`` holds ``n_el`` there. Missing owners are ``-1``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    tags: np.ndarray
    interface_segments: tuple = ()
    edges: np.ndarray = field(init=False, repr=False)
    tri_edges: np.ndarray = field(init=False, repr=False)
    edge_owners: np.ndarray = field(init=False, repr=False)
    edge_local: np.ndarray = field(init=False, repr=False)
    edge_normals: np.ndarray = field(init=False, repr=False)
    edge_lengths: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        vertices = np.ascontiguousarray(self.vertices, dtype=float)
        triangles = np.array(self.triangles, dtype=np.int64)
        tags = np.ascontiguousarray(self.tags, dtype=np.int64)
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise ValueError("triangles must be an (n, 3) index array")
        if tags.shape != (len(triangles),):
            raise ValueError("one subdomain tag per triangle is required")

        # orient every triangle counter-clockwise
        p = vertices[triangles]
        signed = _signed_areas(p)
        flip = signed < 0
        triangles[flip] = triangles[flip][:, [0, 2, 1]]
        if np.any(np.abs(signed) <= GEOM_TOL**2):
            raise ValueError("degenerate triangle in mesh")

        nt = len(triangles)
        local = np.stack([triangles, np.roll(triangles, -1, axis=1)], axis=2)
        keys = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(nt, 3)

        owners = -np.ones((len(edges), 2), dtype=np.int64)
        owner_local = -np.ones((len(edges), 2), dtype=np.int64)
        flat_tri = np.repeat(np.arange(nt), 3)
        flat_loc = np.tile(np.arange(3), nt)
        flat_edge = inverse.ravel()
        order = np.argsort(flat_edge, kind="stable")
        counts = np.bincount(flat_edge, minlength=len(edges))
        if np.any(counts > 2):
            raise ValueError("non-manifold mesh: an edge has more than two owners")
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        first = order[starts]
        owners[:, 0] = flat_tri[first]
        owner_local[:, 0] = flat_loc[first]
        two = counts == 2
        second = order[starts[two] + 1]
        owners[two, 1] = flat_tri[second]
        owner_local[two, 1] = flat_loc[second]

        # interface edges: elastic owner first
        swap = two & (tags[owners[:, 0]] == FLUID) & (tags[np.maximum(owners[:, 1], 0)] == ELASTIC)
        owners[swap] = owners[swap][:, ::-1]
        owner_local[swap] = owner_local[swap][:, ::-1]

        a = vertices[triangles[owners[:, 0], owner_local[:, 0]]]
        b = vertices[triangles[owners[:, 0], (owner_local[:, 0] + 1) % 3]]
        tvec = b - a
        lengths = np.hypot(tvec[:, 0], tvec[:, 1])
        # counter-clockwise triangles: outward normal is the tangent rotated by -90 deg
        normals = np.column_stack([tvec[:, 1], -tvec[:, 0]]) / lengths[:, None]

        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)
        object.__setattr__(self, "tags", tags)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "tri_edges", inverse)
        object.__setattr__(self, "edge_owners", owners)
        object.__setattr__(self, "edge_local", owner_local)
        object.__setattr__(self, "edge_normals", normals)
        object.__setattr__(self, "edge_lengths", lengths)
        for arr in (vertices, triangles, tags, edges, inverse, owners, owner_local, normals, lengths):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def areas(self) -> np.ndarray:
        return 0.5 * _signed_areas(self.vertices[self.triangles])

    @property
    def diameters(self) -> np.ndarray:
        """Longest edge of every triangle (``h_K``)."""
        return self.edge_lengths[self.tri_edges].max(axis=1)

    def triangle_normal_signs(self) -> np.ndarray:
        """``(nt, 3)`` signs turning ``edge_normals`` into outward normals per triangle."""
        signs = np.ones((self.n_triangles, 3))
        owners = self.edge_owners
        mask = owners[:, 1] >= 0
        signs[owners[mask, 1], self.edge_local[mask, 1]] = -1.0
        return signs

    def subdomain(self, tag: int) -> np.ndarray:
        if tag not in SUBDOMAIN_NAMES:
            raise ValueError(f"unknown subdomain tag {tag!r}")
        return np.flatnonzero(self.tags == tag)


@dataclass(frozen=True, eq=False)
class FacetSet:
    """Partition of the mesh edges into the classes the estimators need."""

    interior_elastic: np.ndarray
    interior_fluid: np.ndarray
    interface: np.ndarray
    dirichlet: dict
    normals: np.ndarray
    owner_signs: np.ndarray

    def n_el(self, edge) -> np.ndarray:
        """Outward normal of the elastic side on interface edges."""
        return self.normals[edge]

    def n_f(self, edge) -> np.ndarray:
        return -self.normals[edge]


def _signed_areas(p: np.ndarray) -> np.ndarray:
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]


def build_two_square_mesh(n: int) -> Mesh:
    """Structured mesh of the two unit-half squares with ``n`` cells per side.

    Each square cell is cut along its bottom-left to top-right diagonal.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    nx, ny = 2 * n, n
    xs = np.linspace(-0.5, 0.5, nx + 1)
    ys = np.linspace(0.0, 0.5, ny + 1)
    xs[n] = 0.0  # interface abscissa exactly zero
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    i, j = i.ravel(), j.ravel()
    v00, v10, v01, v11 = vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * len(i), 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper
    cell_tag = np.where(i < n, ELASTIC, FLUID)
    tags = np.repeat(cell_tag, 2)
    return Mesh(vertices, triangles, tags, interface_segments=(((0.0, 0.0), (0.0, 0.5)),))


def uniform_refine(mesh: Mesh) -> Mesh:
    """Red refinement: every triangle into four congruent children."""
    nv = mesh.n_vertices
    mid = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    vertices = np.vstack([mesh.vertices, mid])
    t = mesh.triangles
    m = nv + mesh.tri_edges  # m[:, k] is the midpoint of local edge (k, k+1)
    children = np.stack(
        [
            np.column_stack([t[:, 0], m[:, 0], m[:, 2]]),
            np.column_stack([m[:, 0], t[:, 1], m[:, 1]]),
            np.column_stack([m[:, 2], m[:, 1], t[:, 2]]),
            np.column_stack([m[:, 0], m[:, 1], m[:, 2]]),
        ],
        axis=1,
    ).reshape(-1, 3)
    tags = np.repeat(mesh.tags, 4)
    return Mesh(vertices, children, tags, interface_segments=mesh.interface_segments)


def _on_segments(points: np.ndarray, segments) -> np.ndarray:
    hit = np.zeros(len(points), dtype=bool)
    for a, b in segments:
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        d = b - a
        s = np.clip(((points - a) @ d) / (d @ d), 0.0, 1.0)
        dist = np.linalg.norm(points - (a + s[:, None] * d), axis=1)
        hit |= dist <= GEOM_TOL
    return hit


def classify_facets(mesh: Mesh) -> FacetSet:
    """Sort edges into interior-elastic, interior-fluid, interface and boundary sets.

    The whole outer boundary is Dirichlet for every field (``d``, ``J``, ``u``).
    """
    owners = mesh.edge_owners
    two = owners[:, 1] >= 0
    tag0 = mesh.tags[owners[:, 0]]
    tag1 = np.where(two, mesh.tags[np.maximum(owners[:, 1], 0)], -1)

    interface = two & (tag0 != tag1)
    interior_el = two & (tag0 == ELASTIC) & (tag1 == ELASTIC)
    interior_f = two & (tag0 == FLUID) & (tag1 == FLUID)
    boundary = ~two

    if mesh.interface_segments:
        mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
        on_sigma = _on_segments(mids, mesh.interface_segments)
        bad = on_sigma & ~interface
        if np.any(bad):
            raise ValueError(
                f"non-conforming interface: {int(bad.sum())} edge(s) on Sigma "
                "are not shared by one elastic and one fluid triangle"
            )
    if np.any(interface & ~((tag0 == ELASTIC) & (tag1 == FLUID))):
        raise ValueError("interface edge owners are not ordered elastic/fluid")

    bnd = np.flatnonzero(boundary)
    bnd_el = bnd[mesh.tags[owners[bnd, 0]] == ELASTIC]
    bnd_f = bnd[mesh.tags[owners[bnd, 0]] == FLUID]
    dirichlet = {"d": bnd_el, "J": bnd_el, "u": bnd_f}

    signs = np.zeros((mesh.n_edges, 2))
    signs[:, 0] = 1.0
    signs[two, 1] = -1.0
    return FacetSet(
        interior_elastic=np.flatnonzero(interior_el),
        interior_fluid=np.flatnonzero(interior_f),
        interface=np.flatnonzero(interface),
        dirichlet=dirichlet,
        normals=mesh.edge_normals,
        owner_signs=signs,
    )


def element_geometry(mesh: Mesh, k: int):
    """Diameter, area and outward unit edge normals of triangle ``k``.

    Returns
    -------
    h : float
        Longest edge length.
    area : float
    normals : ndarray, shape (3, 2)
        Outward normal of local edge ``i`` (vertices ``i`` and ``i + 1``).
    """
    if not 0 <= int(k) < mesh.n_triangles:
        raise IndexError(f"element id {k} out of range [0, {mesh.n_triangles})")
    p = mesh.vertices[mesh.triangles[k]]
    tv = np.roll(p, -1, axis=0) - p
    lengths = np.hypot(tv[:, 0], tv[:, 1])
    normals = np.column_stack([tv[:, 1], -tv[:, 0]]) / lengths[:, None]
    area = 0.5 * float(_signed_areas(p[None])[0])
    return float(lengths.max()), area, normals


def dump_mesh(mesh: Mesh, path) -> None:
    """Plain-text debug dump; not a stable format."""
    lines = [f"vertices {mesh.n_vertices} triangles {mesh.n_triangles}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{a} {b} {c} {SUBDOMAIN_NAMES[int(t)]}" for (a, b, c), t in zip(mesh.triangles, mesh.tags)]
    Path(path).write_text("\n".join(lines) + "\n")
