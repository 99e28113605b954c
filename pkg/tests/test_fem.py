from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stokesmpe.fem import (build_dof_map, eval_discrete, interpolate_nodal, lagrange_basis,
                           quadrature_rule)
from stokesmpe.mesh import ELASTIC, FLUID, build_two_square_mesh


def exact_monomial(a, b):
    # integral of x^a y^b over the reference triangle
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("order", range(1, 11))
def test_quadrature_exactness(order):
    rule = quadrature_rule(order)
    x, y = rule.points.T
    for a in range(order + 1):
        for b in range(order + 1 - a):
            got = np.sum(rule.weights * x ** a * y ** b)
            assert got == pytest.approx(exact_monomial(a, b), rel=1e-12, abs=1e-15)


def test_quadrature_known_values():
    rule = quadrature_rule(2)
    x, y = rule.points.T
    assert np.sum(rule.weights * x * y) == pytest.approx(1 / 24, rel=1e-13)
    assert np.sum(rule.weights * x ** 2) == pytest.approx(1 / 12, rel=1e-13)


@pytest.mark.parametrize("order", [0, 11])
def test_quadrature_order_range(order):
    with pytest.raises(ValueError):
        quadrature_rule(order)


def test_p2_kronecker_and_barycenter():
    nodes = np.array([[0, 0], [1, 0], [0, 1], [0.5, 0], [0.5, 0.5], [0, 0.5]])
    vals, _ = lagrange_basis(2, nodes)
    assert np.allclose(vals, np.eye(6), atol=1e-15)
    vals, _ = lagrange_basis(2, np.array([[1 / 3, 1 / 3]]))
    assert vals[0, 0] == pytest.approx(-1 / 9, abs=1e-14)


def test_basis_rejects_outside_points():
    with pytest.raises(ValueError):
        lagrange_basis(1, np.array([[0.8, 0.8]]))


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.sampled_from([1, 2]))
def test_partition_of_unity(s, t, degree):
    x, y = s, t * (1 - s)
    vals, grads = lagrange_basis(degree, np.array([[x, y]]))
    assert abs(vals.sum() - 1.0) < 1e-14
    assert np.allclose(grads.sum(axis=1), 0.0, atol=1e-13)


def test_dof_counts():
    m = build_two_square_mesh(1)
    assert build_dof_map(m, ELASTIC, 2).ndofs == 9
    assert build_dof_map(m, ELASTIC, 1).ndofs == 4
    assert build_dof_map(m, ELASTIC, 2, 2).ndofs == 18


def test_dirichlet_nodes_exclude_interface():
    m = build_two_square_mesh(4)
    d = build_dof_map(m, ELASTIC, 2, 2, dirichlet_field="d")
    pts = d.node_coords[d.dirichlet_nodes]
    on_outer = (np.isclose(pts[:, 0], -0.5) | np.isclose(pts[:, 1], 0.0) | np.isclose(pts[:, 1], 0.5))
    assert np.all(on_outer)
    # the interior of Sigma is free
    free = np.setdiff1d(np.arange(d.n_nodes), d.dirichlet_nodes)
    sig = free[np.isclose(d.node_coords[free, 0], 0.0)]
    assert len(sig) == 2 * 4 - 1


def test_interpolation_constant_and_quadratic():
    m = build_two_square_mesh(2)
    d = build_dof_map(m, FLUID, 2)
    c = interpolate_nodal(lambda t, x: np.full(len(x), 3.5), d)
    assert np.all(c == 3.5)
    q = interpolate_nodal(lambda t, x: x[:, 0] ** 2 + x[:, 1], d)
    rng = np.random.default_rng(1)
    for cell in range(d.n_cells):
        verts = m.vertices[m.triangles[d.cells[cell]]]
        w = rng.dirichlet(np.ones(3))
        p = w @ verts
        val, grad = eval_discrete(q, d, cell, p)
        assert val[0] == pytest.approx(p[0] ** 2 + p[1], abs=1e-13)
        assert np.allclose(grad[0], [2 * p[0], 1.0], atol=1e-12)


def test_p1_cannot_represent_xy():
    m = build_two_square_mesh(1)
    d = build_dof_map(m, FLUID, 1)
    c = interpolate_nodal(lambda t, x: x[:, 0] * x[:, 1], d)
    assert np.allclose(c, d.node_coords[:, 0] * d.node_coords[:, 1])
    verts = m.vertices[m.triangles[d.cells[0]]]
    mid = verts.mean(axis=0)
    val, _ = eval_discrete(c, d, 0, mid)
    assert abs(val[0] - mid[0] * mid[1]) > 1e-3


def test_linear_gradient_constant_and_zero_field():
    m = build_two_square_mesh(2)
    d = build_dof_map(m, ELASTIC, 2)
    c = interpolate_nodal(lambda t, x: 2 * x[:, 0] - 3 * x[:, 1] + 1, d)
    for cell in range(d.n_cells):
        p = m.vertices[m.triangles[d.cells[cell]]].mean(axis=0)
        _, g = eval_discrete(c, d, cell, p)
        assert np.allclose(g[0], [2.0, -3.0], atol=1e-12)
        v0, g0 = eval_discrete(np.zeros(d.ndofs), d, cell, p)
        assert v0[0] == 0.0 and np.all(g0 == 0.0)


def test_eval_outside_cell_raises():
    m = build_two_square_mesh(1)
    d = build_dof_map(m, ELASTIC, 2)
    with pytest.raises(ValueError):
        eval_discrete(np.zeros(d.ndofs), d, 0, np.array([0.4, 0.4]))
