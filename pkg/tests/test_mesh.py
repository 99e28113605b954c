import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stokesmpe.mesh import (ELASTIC, FLUID, build_two_square_mesh, classify_facets, dump_mesh,
                            element_geometry, uniform_refine)


def test_single_cell_counts():
    m = build_two_square_mesh(1)
    assert m.n_triangles == 4
    assert m.n_vertices == 6
    f = classify_facets(m)
    assert len(f.interface) == 1
    assert sum(len(v) for k, v in f.dirichlet.items() if k in ("d", "u")) == 6
    assert len(f.interior_elastic) + len(f.interior_fluid) == 2


def test_two_cell_counts():
    m = build_two_square_mesh(2)
    assert m.n_triangles == 16
    assert m.n_vertices == 15
    f = classify_facets(m)
    assert len(f.interface) == 2
    assert len(f.interior_elastic) == len(f.interior_fluid)


def test_elastic_triangles_left_of_interface():
    m = build_two_square_mesh(1)
    el = m.triangles[m.tags == ELASTIC]
    assert np.all(m.vertices[el][..., 0] <= 0.0)
    fl = m.triangles[m.tags == FLUID]
    assert np.all(m.vertices[fl][..., 0] >= 0.0)


def test_refine_quadruples():
    m = uniform_refine(build_two_square_mesh(1))
    assert m.n_triangles == 16
    assert np.isclose(m.areas.sum(), 0.5)
    assert len(classify_facets(m).interface) == 2


def test_element_geometry_right_triangle():
    m = build_two_square_mesh(1)
    h, area, normals = element_geometry(m, 0)
    assert h == pytest.approx(0.5 * np.sqrt(2.0))
    assert area == pytest.approx(0.125)
    assert np.allclose(np.linalg.norm(normals, axis=1), 1.0)
    with pytest.raises(IndexError):
        element_geometry(m, 4)


def test_invalid_n():
    with pytest.raises(ValueError):
        build_two_square_mesh(0)


def test_interface_normal_points_into_fluid():
    m = build_two_square_mesh(3)
    f = classify_facets(m)
    assert np.allclose(f.n_el(f.interface), [1.0, 0.0])
    assert np.allclose(f.n_f(f.interface), [-1.0, 0.0])


def test_dump_mesh(tmp_path):
    m = build_two_square_mesh(1)
    dump_mesh(m, tmp_path / "mesh.npz")
    assert (tmp_path / "mesh.npz").exists()


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 12))
def test_mesh_invariants(n):
    m = build_two_square_mesh(n)
    assert np.all(m.areas > 0)
    assert np.isclose(m.areas[m.tags == ELASTIC].sum(), 0.25)
    assert np.isclose(m.areas[m.tags == FLUID].sum(), 0.25)
    f = classify_facets(m)
    # every edge lands in exactly one class
    total = len(f.interior_elastic) + len(f.interior_fluid) + len(f.interface)
    total += len(f.dirichlet["d"]) + len(f.dirichlet["u"])
    assert total == m.n_edges
    assert len(f.interface) == n
    # Euler characteristic of a disk
    assert m.n_vertices - m.n_edges + m.n_triangles == 1
